use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{Aabb, Point, TriangleMesh};
use crate::{par, Result};

const BATCH: usize = 10_000;

/// Point-in-mesh classifier that shares no code with the BVH queries.
///
/// `winding_exact` sums solid angles over every face. `winding_ray` counts
/// signed crossings of the +z ray through a uniform xy column grid; shared
/// edges are evaluated in a canonical vertex order so a ray through an edge
/// is counted exactly once.
#[derive(Debug, Clone)]
pub struct BruteForceMesh {
    mesh: TriangleMesh,
    aabb: Aabb,
    bins: usize,
    cell: [f64; 2],
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl BruteForceMesh {
    pub fn new(mesh: TriangleMesh) -> Self {
        let aabb = mesh.aabb();
        let bins = ((mesh.faces.len() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 1024);
        let cell = if aabb.is_empty() {
            [1.0, 1.0]
        } else {
            let e = aabb.extent();
            [(e.x / bins as f64).max(1e-12), (e.y / bins as f64).max(1e-12)]
        };
        let mut brute = BruteForceMesh {
            mesh,
            aabb,
            bins,
            cell,
            offsets: Vec::new(),
            items: Vec::new(),
        };
        let mut counts = vec![0u32; bins * bins + 1];
        let ranges: Vec<_> = (0..brute.mesh.faces.len()).map(|f| brute.face_cells(f)).collect();
        for &(x0, x1, y0, y1) in &ranges {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    counts[y * bins + x + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[bins * bins] as usize];
        for (f, &(x0, x1, y0, y1)) in ranges.iter().enumerate() {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let slot = &mut fill[y * bins + x];
                    items[*slot as usize] = f as u32;
                    *slot += 1;
                }
            }
        }
        brute.offsets = counts;
        brute.items = items;
        brute
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    fn bin_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.aabb.min.x) / self.cell[0]).floor();
        let cy = ((y - self.aabb.min.y) / self.cell[1]).floor();
        let clamp = |c: f64| (c.max(0.0) as usize).min(self.bins - 1);
        (clamp(cx), clamp(cy))
    }

    fn face_cells(&self, f: usize) -> (usize, usize, usize, usize) {
        let [a, b, c] = self.mesh.triangle(f);
        let (x0, y0) = self.bin_of(a.x.min(b.x).min(c.x), a.y.min(b.y).min(c.y));
        let (x1, y1) = self.bin_of(a.x.max(b.x).max(c.x), a.y.max(b.y).max(c.y));
        (x0, x1, y0, y1)
    }

    /// Generalized winding number by direct summation of solid angles.
    pub fn winding_exact(&self, p: &Point) -> f64 {
        let mut total = 0.0;
        for f in 0..self.mesh.faces.len() {
            let [a, b, c] = self.mesh.triangle(f);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * PI)
    }

    /// Winding number from signed crossings of the ray from `p` towards +z.
    pub fn winding_ray(&self, p: &Point) -> i64 {
        if self.mesh.faces.is_empty()
            || p.x < self.aabb.min.x
            || p.x > self.aabb.max.x
            || p.y < self.aabb.min.y
            || p.y > self.aabb.max.y
            || p.z > self.aabb.max.z
        {
            return 0;
        }
        let (bx, by) = self.bin_of(p.x, p.y);
        let cell = by * self.bins + bx;
        let mut winding = 0;
        for &f in &self.items[self.offsets[cell] as usize..self.offsets[cell + 1] as usize] {
            winding += self.crossing(f as usize, p);
        }
        winding
    }

    fn crossing(&self, f: usize, p: &Point) -> i64 {
        let face = self.mesh.faces[f];
        let v = |i: u32| self.mesh.vertices[i as usize];
        let [a, b, c] = face.map(v);
        if (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x) == 0.0 {
            return 0;
        }
        // signed edge function with ties resolved identically for both
        // faces sharing the edge
        let edge = |i: u32, j: u32| -> f64 {
            let (lo, hi, flip) = if i < j { (i, j, false) } else { (j, i, true) };
            let (a, b) = (v(lo), v(hi));
            let e = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            let e = if e == 0.0 { f64::MIN_POSITIVE } else { e };
            if flip {
                -e
            } else {
                e
            }
        };
        let e0 = edge(face[1], face[2]);
        let e1 = edge(face[2], face[0]);
        let e2 = edge(face[0], face[1]);
        let sign = if e0 > 0.0 && e1 > 0.0 && e2 > 0.0 {
            1
        } else if e0 < 0.0 && e1 < 0.0 && e2 < 0.0 {
            -1
        } else {
            return 0;
        };
        let sum = e0 + e1 + e2;
        let z = (e0 * v(face[0]).z + e1 * v(face[1]).z + e2 * v(face[2]).z) / sum;
        if z > p.z {
            sign
        } else {
            0
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.winding_ray(p) > 0
    }

    pub fn classify(&self, points: &[Point]) -> Vec<bool> {
        par::map_slice(points, |p| self.contains(p))
    }
}

/// Monte Carlo volume estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub inside: u64,
    pub samples: u64,
    pub region_volume: f64,
}

/// Per-class counts of an oracle comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleCounts {
    pub agree: u64,
    pub disagree: u64,
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

fn uniform_in(rng: &mut ChaCha8Rng, region: &Aabb) -> Point {
    Point::new(
        rng.random_range(region.min.x..=region.max.x),
        rng.random_range(region.min.y..=region.max.y),
        rng.random_range(region.min.z..=region.max.z),
    )
}

/// Uniform points in `region`, reproducible for a given seed regardless of
/// the number of worker threads.
pub fn uniform_points(region: &Aabb, n: usize, seed: u64) -> Vec<Point> {
    let batches = n.div_ceil(BATCH);
    par::map_range(batches, |b| {
        let mut rng = batch_rng(seed, b);
        let len = BATCH.min(n - b * BATCH);
        (0..len).map(|_| uniform_in(&mut rng, region)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Estimates the enclosed volume of `mesh` from `n` uniform samples in `region`.
pub fn monte_carlo_volume(mesh: &BruteForceMesh, region: &Aabb, n: usize, seed: u64) -> VolumeEstimate {
    let points = uniform_points(region, n, seed);
    let inside = mesh.classify(&points).into_iter().filter(|&b| b).count() as u64;
    let frac = inside as f64 / n.max(1) as f64;
    let vol = region.volume();
    VolumeEstimate {
        volume: frac * vol,
        std_error: vol * (frac * (1.0 - frac) / n.max(1) as f64).sqrt(),
        inside,
        samples: n as u64,
        region_volume: vol,
    }
}

/// Area-weighted uniform samples on the surface of `mesh`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Point> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut acc = 0.0;
    for f in 0..mesh.faces.len() {
        acc += mesh.face_area(f);
        cumulative.push(acc);
    }
    if n == 0 || acc <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * acc;
            let f = cumulative.partition_point(|&c| c < r).min(mesh.faces.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}

/// Uniform samples inside a closed mesh by rejection from its bounding box.
pub fn sample_inside(mesh: &BruteForceMesh, n: usize, seed: u64) -> Result<Vec<Point>> {
    mesh.mesh().check_closed()?;
    let region = mesh.mesh().aabb();
    let mut out = Vec::with_capacity(n);
    let mut round = 0u64;
    while out.len() < n {
        let pts = uniform_points(&region, (n - out.len()).max(1000) * 2, seed ^ (round << 32));
        out.extend(pts.into_iter().filter(|p| mesh.contains(p)).take(n - out.len()));
        round += 1;
        if round > 1000 {
            return Err(crate::Error::InvalidParameter(
                "mesh encloses almost no volume".into(),
            ));
        }
    }
    Ok(out)
}
