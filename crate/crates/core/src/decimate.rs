//! Conservative quadric-error edge-collapse decimation.
//!
//! Collapses run on a closed manifold mesh with the link condition enforced,
//! so the output stays closed. Afterwards the outward violation relative to
//! the input is measured on dense surface samples and the offending vertices
//! are pulled inward until the result lies inside the input.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{MeshQuery, Point, TriangleMesh, Vec3};
use crate::harness::sample_surface;
use crate::{par, Error, Result};

const CONTAINMENT_SEED: u64 = 0x00c0_ffee;
const MAX_RETRIES: u32 = 3;
const PULL_ROUNDS: usize = 8;
const MIN_QUALITY: f64 = 0.05;
const PLANE_TOL: f64 = 1e-12;
const INWARD_SHIFTS: [f64; 3] = [0.05, 0.15, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecimationParams {
    /// Fraction of faces to remove, in (0, 1).
    pub target_reduction: f64,
    /// Cap on the root quadric error of a collapse, in meters.
    pub max_error: f64,
    pub preserve_topology: bool,
}

impl Default for DecimationParams {
    fn default() -> Self {
        DecimationParams {
            target_reduction: 0.6,
            max_error: 0.005,
            preserve_topology: true,
        }
    }
}

impl DecimationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_reduction > 0.0 && self.target_reduction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target_reduction must lie in (0, 1), got {}",
                self.target_reduction
            )));
        }
        if !(self.max_error > 0.0 && self.max_error.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "max_error must be positive, got {}",
                self.max_error
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationStats {
    pub faces_before: usize,
    pub faces_after: usize,
    pub vertices_before: usize,
    pub vertices_after: usize,
    /// Fraction of faces removed.
    pub achieved_reduction: f64,
    pub target_reduction: f64,
    pub target_met: bool,
    /// `max_error` of the accepted attempt.
    pub max_error_used: f64,
    pub preserve_topology: bool,
    pub retries: u32,
    /// Largest inward displacement applied to a vertex.
    pub max_pull: f64,
    /// Sampled outward violation of the output against the input.
    pub containment_margin: f64,
    /// Sampled largest distance from the input surface to the output surface.
    pub max_retreat: f64,
    /// True when every attempt failed and the input was returned unchanged.
    pub passed_through: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct Decimated {
    pub mesh: TriangleMesh,
    pub stats: DecimationStats,
}

/// Decimates a closed mesh so that the result is contained in it.
pub fn decimate(mesh: &TriangleMesh, params: &DecimationParams) -> Result<Decimated> {
    params.validate()?;
    mesh.check_closed()?;
    let start = Instant::now();
    let original = MeshQuery::new(mesh.clone());
    let mut max_error = params.max_error;
    for retry in 0..=MAX_RETRIES {
        let collapsed = collapse(mesh, params.target_reduction, max_error);
        if let Some((out, max_pull)) = pull_inside(collapsed, &original, max_error) {
            let margin = containment_margin_with(&out, &original, 100_000, CONTAINMENT_SEED ^ 1)?;
            let retreat = retreat_distance(&MeshQuery::new(out.clone()), mesh, 100_000, CONTAINMENT_SEED ^ 2);
            let measured = Measured { max_pull, margin, retreat };
            let stats = make_stats(mesh, &out, params, max_error, retry, measured, false, start);
            return Ok(Decimated { mesh: out, stats });
        }
        log::debug!("decimation attempt {retry} could not be made conservative");
        max_error /= 2.0;
    }
    log::warn!("decimation failed to stay inside the input; passing the mesh through");
    let stats = make_stats(mesh, mesh, params, max_error, MAX_RETRIES, Measured::default(), true, start);
    Ok(Decimated {
        mesh: mesh.clone(),
        stats,
    })
}

/// Decimates several meshes in parallel.
pub fn decimate_all(meshes: &[TriangleMesh], params: &DecimationParams) -> Result<Vec<Decimated>> {
    par::map_slice(meshes, |m| decimate(m, params))
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_link(&format!("mesh {i}"))))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Measured {
    max_pull: f64,
    margin: f64,
    retreat: f64,
}

#[allow(clippy::too_many_arguments)]
fn make_stats(
    input: &TriangleMesh,
    out: &TriangleMesh,
    params: &DecimationParams,
    max_error: f64,
    retries: u32,
    measured: Measured,
    passed_through: bool,
    start: Instant,
) -> DecimationStats {
    let f0 = input.faces.len();
    let achieved = if f0 == 0 {
        0.0
    } else {
        1.0 - out.faces.len() as f64 / f0 as f64
    };
    DecimationStats {
        faces_before: f0,
        faces_after: out.faces.len(),
        vertices_before: input.vertices.len(),
        vertices_after: out.vertices.len(),
        achieved_reduction: achieved,
        target_reduction: params.target_reduction,
        target_met: out.faces.len() <= target_faces(f0, params.target_reduction),
        max_error_used: max_error,
        preserve_topology: params.preserve_topology,
        retries,
        max_pull: measured.max_pull,
        containment_margin: measured.margin,
        max_retreat: measured.retreat,
        passed_through,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn target_faces(f0: usize, reduction: f64) -> usize {
    ((1.0 - reduction) * f0 as f64).ceil() as usize
}

/// Sampled penetration of `inner` outside `outer`: the largest positive
/// signed distance to `outer` over all vertices of `inner` and `n_samples`
/// area-weighted surface points. Zero means contained up to sampling.
pub fn containment_margin(inner: &TriangleMesh, outer: &TriangleMesh, n_samples: usize) -> Result<f64> {
    inner.check_closed()?;
    let outer = MeshQuery::new(outer.clone());
    containment_margin_with(inner, &outer, n_samples, CONTAINMENT_SEED)
}

pub fn containment_margin_with(
    inner: &TriangleMesh,
    outer: &MeshQuery,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !outer.is_closed() {
        return Err(Error::NotClosed("outer mesh of containment check".into()));
    }
    let mut points = sample_surface(inner, n_samples, seed);
    points.extend_from_slice(&inner.vertices);
    let worst = par::map_slice(&points, |p| outer.signed_distance_unchecked(p).max(0.0));
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Sampled retreat of `inner` from `outer`: the largest distance from a
/// vertex or one of `n_samples` surface points of `outer` to the surface
/// of `inner`.
pub fn retreat_distance(inner: &MeshQuery, outer: &TriangleMesh, n_samples: usize, seed: u64) -> f64 {
    let mut points = sample_surface(outer, n_samples, seed);
    points.extend_from_slice(&outer.vertices);
    par::map_slice(&points, |p| inner.unsigned_distance(p))
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
struct Quadric {
    a: Matrix3<f64>,
    b: Vec3,
    c: f64,
}

impl Quadric {
    fn zero() -> Self {
        Quadric {
            a: Matrix3::zeros(),
            b: Vec3::zeros(),
            c: 0.0,
        }
    }

    fn plane(n: Vec3, p: &Point) -> Self {
        let d = -n.dot(&p.coords);
        Quadric {
            a: n * n.transpose(),
            b: n * d,
            c: d * d,
        }
    }

    fn add(&self, o: &Quadric) -> Quadric {
        Quadric {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }

    fn eval(&self, p: &Point) -> f64 {
        let v = p.coords;
        (v.dot(&(self.a * v)) + 2.0 * self.b.dot(&v) + self.c).max(0.0)
    }

    fn minimizer(&self) -> Option<Point> {
        let scale = self.a.trace();
        if scale <= 0.0 || self.a.determinant().abs() < 1e-9 * scale * scale * scale {
            return None;
        }
        self.a.try_inverse().map(|inv| Point::from(-(inv * self.b)))
    }
}

struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp: (u32, u32),
    target: Point,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // min-heap on cost, ties broken by vertex ids for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| (other.u, other.v).cmp(&(self.u, self.v)))
    }
}

struct Collapser {
    pos: Vec<Point>,
    quadrics: Vec<Quadric>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    version: Vec<u32>,
    alive_faces: usize,
}

impl Collapser {
    fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.vertices.len();
        let mut quadrics = vec![Quadric::zero(); n];
        let mut vertex_faces = vec![Vec::new(); n];
        for (f, face) in mesh.faces.iter().enumerate() {
            let raw = mesh.face_normal_raw(f);
            let len = raw.norm();
            if len > 0.0 {
                let q = Quadric::plane(raw / len, &mesh.vertices[face[0] as usize]);
                for &v in face {
                    quadrics[v as usize] = quadrics[v as usize].add(&q);
                }
            }
            for &v in face {
                vertex_faces[v as usize].push(f as u32);
            }
        }
        Collapser {
            pos: mesh.vertices.clone(),
            quadrics,
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            vertex_faces,
            version: vec![0; n],
            alive_faces: mesh.faces.len(),
        }
    }

    fn neighbors(&self, u: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vertex_faces[u as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&w| w != u)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn candidate(&self, u: u32, v: u32) -> Candidate {
        let q = self.quadrics[u as usize].add(&self.quadrics[v as usize]);
        let (pu, pv) = (self.pos[u as usize], self.pos[v as usize]);
        let mid = nalgebra::center(&pu, &pv);
        let mut options = vec![pu, pv, mid];
        // inward shifts give concave spots a target below all planes
        let n = self.fan_normal(u, v);
        let len = (pv - pu).norm();
        if n.norm() > 0.0 {
            let n = n.normalize();
            for base in [mid, pu, pv] {
                options.extend(INWARD_SHIFTS.iter().map(|t| base - n * (t * len)));
            }
        }
        if let Some(m) = q.minimizer() {
            // keep the optimum near the edge so slivers do not fly away
            if (m - nalgebra::center(&pu, &pv)).norm() <= (pv - pu).norm() * 2.0 {
                options.insert(0, m);
            }
        }
        let (cost, target) = options
            .into_iter()
            .map(|p| (if self.below_planes(u, v, &p) { q.eval(&p) } else { f64::INFINITY }, p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty");
        Candidate {
            cost,
            u,
            v,
            stamp: (self.version[u as usize], self.version[v as usize]),
            target,
        }
    }

    fn normal(&self, face: [u32; 3], moved: &[u32], to: &Point) -> Vec3 {
        let p = |i: u32| {
            if moved.contains(&i) {
                *to
            } else {
                self.pos[i as usize]
            }
        };
        let (a, b, c) = (p(face[0]), p(face[1]), p(face[2]));
        (b - a).cross(&(c - a))
    }

    /// Compactness in [0, 1]; 1 for an equilateral triangle.
    fn quality(&self, face: [u32; 3], moved: &[u32], to: &Point, double_area: f64) -> f64 {
        let p = |i: u32| if moved.contains(&i) { *to } else { self.pos[i as usize] };
        let (a, b, c) = (p(face[0]), p(face[1]), p(face[2]));
        let sum_sq = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
        2.0 * 3f64.sqrt() * double_area / sum_sq.max(1e-300)
    }

    fn can_collapse(&self, u: u32, v: u32, target: &Point) -> bool {
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        if nu.binary_search(&v).is_err() {
            return false;
        }
        let common: Vec<u32> = nu.iter().copied().filter(|w| nv.binary_search(w).is_ok()).collect();
        // link condition for a closed manifold: exactly the two wing vertices
        if common.len() != 2 || nu.len() + nv.len() - 4 < 3 {
            return false;
        }
        if common.iter().any(|&w| self.neighbors(w).len() <= 3) {
            return false;
        }
        for &x in [u, v].iter() {
            for &f in &self.vertex_faces[x as usize] {
                let face = self.faces[f as usize];
                if face.contains(&u) && face.contains(&v) {
                    continue;
                }
                let old = self.normal(face, &[], target);
                let new = self.normal(face, &[u, v], target);
                let (lo, ln) = (old.norm(), new.norm());
                if ln <= 1e-14 * lo.max(1e-300) || old.dot(&new) <= 0.2 * lo * ln {
                    return false;
                }
                let q_new = self.quality(face, &[u, v], target, ln);
                if q_new < MIN_QUALITY && q_new < self.quality(face, &[], target, lo) {
                    return false;
                }
            }
        }
        true
    }

    fn fan_normal(&self, u: u32, v: u32) -> Vec3 {
        let mut n = Vec3::zeros();
        for &x in &[u, v] {
            for &f in &self.vertex_faces[x as usize] {
                let face = self.faces[f as usize];
                let a = self.pos[face[0] as usize];
                n += (self.pos[face[1] as usize] - a).cross(&(self.pos[face[2] as usize] - a));
            }
        }
        n
    }

    /// True when `p` lies on the inner side of every face plane around `u`
    /// and `v`. The new fan then stays inside the current surface.
    fn below_planes(&self, u: u32, v: u32, p: &Point) -> bool {
        [u, v].iter().all(|&x| {
            self.vertex_faces[x as usize].iter().all(|&f| {
                let face = self.faces[f as usize];
                let a = self.pos[face[0] as usize];
                let n = (self.pos[face[1] as usize] - a).cross(&(self.pos[face[2] as usize] - a));
                (p - a).dot(&n) <= PLANE_TOL * n.norm()
            })
        })
    }

    fn apply(&mut self, u: u32, v: u32, target: Point) {
        let v_faces = std::mem::take(&mut self.vertex_faces[v as usize]);
        for f in v_faces {
            let face = &mut self.faces[f as usize];
            if face.contains(&u) {
                self.face_alive[f as usize] = false;
                self.alive_faces -= 1;
                for &w in face.iter() {
                    if w != v {
                        self.vertex_faces[w as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for w in face.iter_mut() {
                    if *w == v {
                        *w = u;
                    }
                }
                self.vertex_faces[u as usize].push(f);
            }
        }
        self.pos[u as usize] = target;
        self.quadrics[u as usize] = self.quadrics[u as usize].add(&self.quadrics[v as usize]);
        self.version[u as usize] += 1;
        self.version[v as usize] += 1;
    }

    fn into_mesh(self) -> TriangleMesh {
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| *f)
            .collect();
        let mut mesh = TriangleMesh {
            vertices: self.pos,
            faces,
        };
        mesh.compact();
        mesh
    }
}

fn collapse(mesh: &TriangleMesh, reduction: f64, max_error: f64) -> TriangleMesh {
    let target = target_faces(mesh.faces.len(), reduction);
    let limit = max_error * max_error;
    let mut c = Collapser::new(mesh);
    let mut heap = BinaryHeap::new();
    for face in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            if a < b {
                heap.push(c.candidate(a, b));
            }
        }
    }
    while c.alive_faces > target {
        let Some(cand) = heap.pop() else { break };
        let (u, v) = (cand.u, cand.v);
        if cand.stamp != (c.version[u as usize], c.version[v as usize]) {
            continue;
        }
        if cand.cost > limit {
            break;
        }
        if !c.below_planes(u, v, &cand.target) || !c.can_collapse(u, v, &cand.target) {
            continue;
        }
        c.apply(u, v, cand.target);
        for w in c.neighbors(u) {
            let (a, b) = if u < w { (u, w) } else { (w, u) };
            heap.push(c.candidate(a, b));
        }
    }
    c.into_mesh()
}

/// Per-face outward violation against `original`, sampled at the vertices
/// and on a barycentric lattice with spacing about `h`.
fn face_violations(mesh: &TriangleMesh, original: &MeshQuery, h: f64) -> Vec<f64> {
    par::map_range(mesh.faces.len(), |f| triangle_violation(mesh.triangle(f), original, h, f64::INFINITY))
}

/// Largest sampled outward distance of a triangle; stops early once it
/// exceeds `stop`.
fn triangle_violation([a, b, c]: [Point; 3], original: &MeshQuery, h: f64, stop: f64) -> f64 {
    let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
    let k = ((longest / h).ceil() as usize).clamp(1, 16);
    let mut worst: f64 = 0.0;
    for i in 0..=k {
        for j in 0..=k - i {
            let (s, t) = (i as f64 / k as f64, j as f64 / k as f64);
            let p = a + (b - a) * s + (c - a) * t;
            worst = worst.max(original.outside_distance(&p, 1e-9));
            if worst > stop {
                return worst;
            }
        }
    }
    worst
}

/// Moves vertices inward until no sampled point of `mesh` lies outside
/// `original`. Returns `None` if the offset folds a face or does not converge.
fn pull_inside(mut mesh: TriangleMesh, original: &MeshQuery, max_error: f64) -> Option<(TriangleMesh, f64)> {
    let h = max_error.max(1e-4);
    let reference: Vec<Vec3> = (0..mesh.faces.len()).map(|f| mesh.face_normal_raw(f)).collect();
    let mut max_pull: f64 = 0.0;
    for _ in 0..PULL_ROUNDS {
        let mut viol = face_violations(&mesh, original, h);
        // original vertices strictly inside the mesh mark spots where the mesh
        // bulges over a dent that the lattice stepped across
        let inner = MeshQuery::new(mesh.clone());
        let witnesses = par::map_slice(&original.mesh().vertices, |w| inner.closest_face_signed(w));
        for (f, sd) in witnesses.into_iter().flatten() {
            if sd < -1e-9 {
                viol[f as usize] = viol[f as usize].max(-sd);
            }
        }
        if viol.iter().all(|&v| v <= 0.0) {
            let folded = (0..mesh.faces.len()).any(|f| mesh.face_normal_raw(f).dot(&reference[f]) <= 0.0);
            return (!folded).then_some((mesh, max_pull));
        }
        let normals = mesh.vertex_normals();
        let mut need = vec![0.0f64; mesh.vertices.len()];
        for (f, face) in mesh.faces.iter().enumerate() {
            if viol[f] > 0.0 {
                for &v in face {
                    need[v as usize] = need[v as usize].max(1.25 * viol[f] + 1e-6);
                }
            }
        }
        let mut round_max: f64 = 0.0;
        for (v, p) in mesh.vertices.iter_mut().enumerate() {
            if need[v] <= 0.0 {
                continue;
            }
            // Move against the original's distance gradient; the mesh normal
            // can point away from incident faces at creases.
            let outward = match original.closest_signed(p) {
                Some((c, sd)) if (*p - c).norm() > 1e-9 => (*p - c).normalize() * sd.signum(),
                _ => normals[v],
            };
            *p -= outward * need[v];
            round_max = round_max.max(need[v]);
        }
        max_pull += round_max;
    }
    None
}
