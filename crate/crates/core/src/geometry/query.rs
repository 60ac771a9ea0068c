use super::{closest_point_on_triangle, Aabb, Bvh, Point, TriangleMesh};
use crate::{Error, Result};

/// A mesh together with its BVH; answers distance and containment queries.
///
/// Immutable after construction and safe to share across workers.
#[derive(Debug, Clone)]
pub struct MeshQuery {
    mesh: TriangleMesh,
    bvh: Bvh,
    closed: bool,
}

impl MeshQuery {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        let closed = mesh.is_closed();
        MeshQuery { mesh, bvh, closed }
    }

    pub fn with_leaf_size(mesh: TriangleMesh, leaf_size: usize) -> Self {
        let bvh = Bvh::with_leaf_size(&mesh, leaf_size);
        let closed = mesh.is_closed();
        MeshQuery { mesh, bvh, closed }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn aabb(&self) -> Aabb {
        self.bvh.root_aabb()
    }

    pub fn into_mesh(self) -> TriangleMesh {
        self.mesh
    }

    /// Euclidean distance to the surface; `+inf` for an empty mesh.
    pub fn unsigned_distance(&self, p: &Point) -> f64 {
        self.bvh
            .closest(&self.mesh, p, f64::INFINITY)
            .map_or(f64::INFINITY, |(d, _)| d.sqrt())
    }

    pub fn winding_number(&self, p: &Point) -> f64 {
        self.bvh.winding_number(&self.mesh, p)
    }

    /// Inside test by winding number ≥ 0.5.
    pub fn contains(&self, p: &Point) -> bool {
        if !self.aabb().contains(p) {
            return false;
        }
        self.winding_number(p) >= 0.5
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, p: &Point) -> Result<f64> {
        if !self.closed {
            return Err(Error::NotClosed(
                "signed distance requested for an open mesh".into(),
            ));
        }
        Ok(self.signed_distance_unchecked(p))
    }

    pub(crate) fn signed_distance_unchecked(&self, p: &Point) -> f64 {
        match self.bvh.closest(&self.mesh, p, f64::INFINITY) {
            Some((d_sq, f)) => self.signed_from_closest(p, d_sq, f),
            None => f64::INFINITY,
        }
    }

    /// Closest surface point and signed distance.
    pub(crate) fn closest_signed(&self, p: &Point) -> Option<(Point, f64)> {
        let (d_sq, f) = self.bvh.closest(&self.mesh, p, f64::INFINITY)?;
        let [a, b, c] = self.mesh.triangle(f as usize);
        Some((
            closest_point_on_triangle(p, &a, &b, &c),
            self.signed_from_closest(p, d_sq, f),
        ))
    }

    /// Closest face and signed distance.
    pub(crate) fn closest_face_signed(&self, p: &Point) -> Option<(u32, f64)> {
        let (d_sq, f) = self.bvh.closest(&self.mesh, p, f64::INFINITY)?;
        Some((f, self.signed_from_closest(p, d_sq, f)))
    }

    /// `max(0, signed_distance)`, reporting points within `tol` of the
    /// surface as on it.
    pub(crate) fn outside_distance(&self, p: &Point, tol: f64) -> f64 {
        match self.bvh.closest(&self.mesh, p, f64::INFINITY) {
            Some((d_sq, _)) if d_sq <= tol * tol => 0.0,
            Some((d_sq, f)) => self.signed_from_closest(p, d_sq, f).max(0.0),
            None => f64::INFINITY,
        }
    }

    fn signed_from_closest(&self, p: &Point, d_sq: f64, f: u32) -> f64 {
        let d = d_sq.sqrt();
        let outside = match self.interior_side(p, f) {
            Some(outside) => outside,
            None => !self.contains(p),
        };
        if outside {
            d
        } else {
            -d
        }
    }

    /// Side of face `f` on which `p` lies, if the foot of the perpendicular
    /// from `p` is strictly inside the face. The surface near the closest
    /// point is then the face plane itself and the sign is exact.
    pub(crate) fn interior_side(&self, p: &Point, f: u32) -> Option<bool> {
        let [a, b, c] = self.mesh.triangle(f as usize);
        let n = (b - a).cross(&(c - a));
        let nn = n.norm_squared();
        if nn == 0.0 {
            return None;
        }
        let h = (p - a).dot(&n);
        if h == 0.0 {
            return None;
        }
        let q = p - n * (h / nn);
        let w = |u: &Point, v: &Point| (u - q).cross(&(v - q)).dot(&n) / nn;
        let tol = 1e-9;
        (w(&b, &c) > tol && w(&c, &a) > tol && w(&a, &b) > tol).then_some(h > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> MeshQuery {
        MeshQuery::new(box_mesh(Vec3::new(1.0, 1.0, 1.0)))
    }

    #[test]
    fn center_of_unit_cube() {
        assert_eq!(cube().signed_distance(&Point::origin()).unwrap(), -0.5);
    }

    #[test]
    fn outside_unit_cube() {
        let d = cube().signed_distance(&Point::new(1.5, 0.0, 0.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_matches_box_containment() {
        let q = cube();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agree = 0;
        for _ in 0..1000 {
            let p = Point::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let inside = p.x.abs() < 0.5 && p.y.abs() < 0.5 && p.z.abs() < 0.5;
            if (q.signed_distance(&p).unwrap() < 0.0) == inside {
                agree += 1;
            }
        }
        assert_eq!(agree, 1000);
    }

    #[test]
    fn distance_matches_analytic_box() {
        let q = cube();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let p = Point::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let d = p.coords.abs() - Vec3::repeat(0.5);
            let outside = d.map(|x| x.max(0.0)).norm();
            let inside = d.max().min(0.0);
            let sd = outside + inside;
            assert!((q.signed_distance(&p).unwrap() - sd).abs() < 1e-9);
        }
    }

    #[test]
    fn open_mesh_refuses_sign() {
        let mut m = box_mesh(Vec3::new(1.0, 1.0, 1.0));
        m.faces.pop();
        let q = MeshQuery::new(m);
        assert!(q.signed_distance(&Point::origin()).is_err());
    }
}
