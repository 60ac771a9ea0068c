use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Point, Vec3};
use crate::{Error, Result};

pub const MAX_CORNER_FACTOR: f64 = 8.0;

/// Axis-aligned bounding box. An empty box has `min > max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Point, max: Point) -> Self {
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn expanded(&self, r: f64) -> Aabb {
        let d = Vec3::repeat(r);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_sq(&self, p: &Point) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }
}

/// Indexed triangle surface. Faces wind counter-clockwise seen from outside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh and checks index validity. Closedness is not required.
    pub fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn empty() -> Self {
        TriangleMesh::default()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range ({n} vertices)"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    pub fn triangle(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Watertight and consistently oriented: every directed edge appears once
    /// and its reverse appears exactly once.
    pub fn is_closed(&self) -> bool {
        self.check_closed().is_ok()
    }

    pub fn check_closed(&self) -> Result<()> {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                let c = directed.entry(e).or_insert(0);
                *c += 1;
                if *c > 1 {
                    return Err(Error::NotClosed(format!(
                        "directed edge {}->{} used twice (inconsistent orientation or non-manifold)",
                        e.0, e.1
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::NotClosed(format!("edge {a}-{b} has no opposite face")));
            }
        }
        Ok(())
    }

    /// Signed enclosed volume by the divergence theorem.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0] as usize].coords;
                let b = self.vertices[f[1] as usize].coords;
                let c = self.vertices[f[2] as usize].coords;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Enclosed volume of a closed mesh.
    pub fn volume(&self) -> Result<f64> {
        self.check_closed()?;
        Ok(self.signed_volume())
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unnormalized face normal (length = 2·area).
    pub fn face_normal_raw(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    /// Area-weighted unit vertex normals. Isolated vertices get a zero vector.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let fnrm = self.face_normal_raw(fi);
            for &v in f {
                n[v as usize] += fnrm;
            }
        }
        for v in &mut n {
            let l = v.norm();
            if l > 0.0 {
                *v /= l;
            }
        }
        n
    }

    /// How much deeper than the erosion radius a vertex can sit: for small
    /// `r`, every vertex lies within `corner_factor · r` of the mesh eroded
    /// by `r`. 1 for smooth surfaces, √3 for a box. Capped at
    /// `MAX_CORNER_FACTOR` for needle-like vertices.
    pub fn corner_factor(&self) -> f64 {
        let mut normals: Vec<Vec<Vec3>> = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let n = self.face_normal_raw(fi);
            let len = n.norm();
            if len > 0.0 {
                let n = n / len;
                for &v in f {
                    // split quads would otherwise weight one plane twice
                    let star = &mut normals[v as usize];
                    if !star.iter().any(|m| m.dot(&n) > 1.0 - 1e-12) {
                        star.push(n);
                    }
                }
            }
        }
        let mut worst: f64 = 1.0;
        for star in normals.iter().filter(|s| !s.is_empty()) {
            let sum: Vec3 = star.iter().sum();
            let inward = -sum / sum.norm().max(1e-300);
            let slowest = star.iter().map(|n| -n.dot(&inward)).fold(f64::INFINITY, f64::min);
            let k = if slowest > 1.0 / MAX_CORNER_FACTOR {
                1.0 / slowest
            } else {
                MAX_CORNER_FACTOR
            };
            worst = worst.max(k);
        }
        worst
    }

    /// Appends `other`, re-indexing its faces.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    pub fn merged(meshes: &[&TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::empty();
        for m in meshes {
            out.append(m);
        }
        out
    }

    /// Drops zero-area triangles, returning how many were removed.
    pub fn drop_degenerate_faces(&mut self) -> usize {
        let before = self.faces.len();
        let verts = &self.vertices;
        self.faces.retain(|f| {
            let a = verts[f[0] as usize];
            let b = verts[f[1] as usize];
            let c = verts[f[2] as usize];
            (b - a).cross(&(c - a)).norm_squared() > 0.0
        });
        before - self.faces.len()
    }

    /// Removes vertices no face references, preserving relative order.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut verts = Vec::new();
        for f in &mut self.faces {
            for v in f.iter_mut() {
                let r = &mut remap[*v as usize];
                if *r == u32::MAX {
                    *r = verts.len() as u32;
                    verts.push(self.vertices[*v as usize]);
                }
                *v = *r;
            }
        }
        self.vertices = verts;
    }

    /// Merges vertices with bitwise-identical coordinates.
    pub fn weld_exact(&mut self) {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut verts = Vec::new();
        let remap: Vec<u32> = self
            .vertices
            .iter()
            .map(|p| {
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                *index.entry(key).or_insert_with(|| {
                    verts.push(*p);
                    (verts.len() - 1) as u32
                })
            })
            .collect();
        self.vertices = verts;
        for f in &mut self.faces {
            for v in f.iter_mut() {
                *v = remap[*v as usize];
            }
        }
        self.faces.retain(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2]);
    }

    /// Reverses every face's winding.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }
}
