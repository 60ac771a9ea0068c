//! Regular signed-distance grids and narrow-band mesh sampling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::marching::{extract_isosurface, GridView};
use crate::geometry::{point_triangle_distance_sq, Aabb, MeshQuery, Point, TriangleMesh};
use crate::{par, Error, Result};

/// Half the diagonal of a grid cube, in units of spacing.
pub const HALF_DIAGONAL: f64 = 0.866_025_403_784_438_6;

/// Placement of a regular grid: `origin + spacing·(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub origin: Point,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridFrame {
    /// Smallest grid with the given spacing covering `aabb` plus `padding`.
    pub fn covering(aabb: &Aabb, spacing: f64, padding: f64) -> Self {
        let origin = aabb.min - nalgebra::Vector3::repeat(padding);
        let ext = aabb.extent() + nalgebra::Vector3::repeat(2.0 * padding);
        let dims = [0, 1, 2].map(|a| ((ext[a] / spacing).ceil() as usize + 1).max(2));
        GridFrame {
            origin,
            spacing,
            dims,
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layer_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.spacing,
            self.origin.y + j as f64 * self.spacing,
            self.origin.z + k as f64 * self.spacing,
        )
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::new(
            self.origin,
            self.position(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1),
        )
    }

    /// Inclusive index range of grid points inside `b`, or `None` if disjoint.
    pub fn index_range(&self, b: &Aabb) -> Option<[[usize; 2]; 3]> {
        let mut r = [[0usize; 2]; 3];
        for a in 0..3 {
            let lo = ((b.min[a] - self.origin[a]) / self.spacing).ceil();
            let hi = ((b.max[a] - self.origin[a]) / self.spacing).floor();
            let lo = lo.max(0.0);
            let hi = hi.min((self.dims[a] - 1) as f64);
            if lo > hi {
                return None;
            }
            r[a] = [lo as usize, hi as usize];
        }
        Some(r)
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0
            || j == 0
            || k == 0
            || i + 1 == self.dims[0]
            || j + 1 == self.dims[1]
            || k + 1 == self.dims[2]
    }
}

/// Resolution and conservativeness settings for a grid computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    /// Extension of the grid beyond the content box.
    pub padding: f64,
    /// Erosion applied before extraction; `None` derives it automatically.
    pub iso_offset: Option<f64>,
}

impl GridSpec {
    pub fn new(spacing: f64) -> Self {
        GridSpec {
            spacing,
            padding: 3.0 * spacing,
            iso_offset: None,
        }
    }

    pub fn with_iso_offset(mut self, iso_offset: f64) -> Self {
        self.iso_offset = Some(iso_offset);
        self
    }

    pub fn with_padding(mut self, padding: f64) -> Self {
        self.padding = padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.padding < 2.0 * self.spacing {
            return Err(Error::InvalidParameter(format!(
                "padding {} must be at least twice the spacing {}",
                self.padding, self.spacing
            )));
        }
        if let Some(off) = self.iso_offset {
            if !(off >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "iso_offset must be non-negative, got {off}"
                )));
            }
        }
        Ok(())
    }
}

/// Signed distance samples on a regular grid (negative inside).
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub frame: GridFrame,
    pub values: Vec<f64>,
    /// Accumulated conservativeness slack of whatever this grid represents.
    pub margin_budget: f64,
}

impl SdfGrid {
    pub fn filled(frame: GridFrame, value: f64) -> Self {
        SdfGrid {
            values: vec![value; frame.len()],
            frame,
            margin_budget: 0.0,
        }
    }

    pub fn origin(&self) -> Point {
        self.frame.origin
    }

    pub fn spacing(&self) -> f64 {
        self.frame.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.frame.dims
    }

    pub fn view(&self) -> GridView<'_> {
        GridView {
            origin: self.frame.origin,
            spacing: self.frame.spacing,
            dims: self.frame.dims,
            values: &self.values,
        }
    }

    /// Smallest value on the outer layer of the grid.
    pub fn boundary_min(&self) -> f64 {
        let [nx, ny, nz] = self.frame.dims;
        let mut m = f64::INFINITY;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.frame.is_boundary(i, j, k) {
                        m = m.min(self.values[self.frame.index(i, j, k)]);
                    }
                }
            }
        }
        m
    }

    /// Marching-tetrahedra surface of `{value < iso}`.
    pub fn extract(&self, iso: f64) -> Result<TriangleMesh> {
        if self.boundary_min() <= iso {
            return Err(Error::ClippedIsoSurface { iso });
        }
        Ok(extract_isosurface(&self.view(), iso))
    }
}

/// Samples the signed distance of a closed mesh on `frame`, clamped to
/// `[-band, band]`.
///
/// Unsigned distances are rasterized triangle by triangle into each
/// triangle's box grown by `band`. Inside the band the sign comes from the
/// closest face when the foot point is interior to it, otherwise from the
/// winding number. Cells farther than `band` from the surface form
/// face-connected regions that cannot straddle the surface (as long as
/// `band > spacing`), so each region inherits the sign of a neighbouring
/// band cell.
pub fn sample_mesh_sdf(query: &MeshQuery, frame: &GridFrame, band: f64) -> Vec<f64> {
    assert!(band > frame.spacing, "band must exceed the grid spacing");
    let mesh = query.mesh();
    let nz = frame.dims[2];
    let layer = frame.layer_len();

    // bin triangles by the z-layers their grown boxes touch
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nz];
    let mut ranges = Vec::with_capacity(mesh.faces.len());
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let b = Aabb::from_points(&tri).expanded(band);
        let r = frame.index_range(&b);
        if let Some(r) = r {
            for bin in &mut bins[r[2][0]..=r[2][1]] {
                bin.push(f as u32);
            }
        }
        ranges.push(r);
    }

    // squared distance and closest face per cell
    let mut dist = vec![(f64::INFINITY, u32::MAX); frame.len()];
    let band_sq = band * band;
    par::for_each_chunk_mut(&mut dist, layer, |k, slab| {
        for &f in &bins[k] {
            let [a, b, c] = mesh.triangle(f as usize);
            let r = ranges[f as usize].expect("binned triangles have ranges");
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    let p = frame.position(i, j, k);
                    let d = point_triangle_distance_sq(&p, &a, &b, &c);
                    let slot = &mut slab[i + frame.dims[0] * j];
                    if d < slot.0 {
                        *slot = (d, f);
                    }
                }
            }
        }
    });

    // signed band values; far cells stay NaN until flood-filled
    let mut values = vec![f64::NAN; frame.len()];
    par::for_each_chunk_mut(&mut values, layer, |k, slab| {
        for j in 0..frame.dims[1] {
            for i in 0..frame.dims[0] {
                let local = i + frame.dims[0] * j;
                let (d_sq, f) = dist[k * layer + local];
                if d_sq <= band_sq {
                    let p = frame.position(i, j, k);
                    let outside = query.interior_side(&p, f).unwrap_or_else(|| !query.contains(&p));
                    let d = d_sq.sqrt();
                    slab[local] = if outside { d } else { -d };
                }
            }
        }
    });
    drop(dist);

    flood_fill_far(query, frame, band, &mut values);
    values
}

fn flood_fill_far(query: &MeshQuery, frame: &GridFrame, band: f64, values: &mut [f64]) {
    let [nx, ny, nz] = frame.dims;
    let mut queue = VecDeque::new();
    let mut component = Vec::new();
    for start in 0..values.len() {
        if !values[start].is_nan() {
            continue;
        }
        // mark visited with +inf until the component sign is known
        values[start] = f64::INFINITY;
        queue.push_back(start);
        component.clear();
        let mut sign: Option<f64> = None;
        while let Some(c) = queue.pop_front() {
            component.push(c);
            let i = c % nx;
            let j = (c / nx) % ny;
            let k = c / (nx * ny);
            let mut visit = |n: usize, values: &mut [f64]| {
                let v = values[n];
                if v.is_nan() {
                    values[n] = f64::INFINITY;
                    queue.push_back(n);
                } else if v.is_finite() && sign.is_none() {
                    sign = Some(v.signum());
                }
            };
            if i > 0 {
                visit(c - 1, values);
            }
            if i + 1 < nx {
                visit(c + 1, values);
            }
            if j > 0 {
                visit(c - nx, values);
            }
            if j + 1 < ny {
                visit(c + nx, values);
            }
            if k > 0 {
                visit(c - nx * ny, values);
            }
            if k + 1 < nz {
                visit(c + nx * ny, values);
            }
        }
        let s = sign.unwrap_or_else(|| {
            let c = component[0];
            let p = frame.position(c % nx, (c / nx) % ny, c / (nx * ny));
            if query.contains(&p) {
                -1.0
            } else {
                1.0
            }
        });
        for &c in &component {
            values[c] = s * band;
        }
    }
}
