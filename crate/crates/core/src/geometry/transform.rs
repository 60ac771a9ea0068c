use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::{Point, TriangleMesh, Vec3};

/// Rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_axis_angle(axis: &Unit<Vec3>, angle: f64) -> Self {
        RigidTransform {
            rotation: Rotation3::from_axis_angle(axis, angle).into_inner(),
            translation: Vec3::zeros(),
        }
    }

    /// Intrinsic roll-pitch-yaw (URDF convention: `R = Rz(yaw)·Ry(pitch)·Rx(roll)`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        RigidTransform {
            rotation: Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner(),
            translation: Vec3::new(xyz[0], xyz[1], xyz[2]),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() <= tol && (r.determinant() - 1.0).abs() <= tol
    }
}

/// Maps every vertex by `t`; faces and winding are unchanged.
pub fn transform_mesh(mesh: &TriangleMesh, t: &RigidTransform) -> TriangleMesh {
    TriangleMesh {
        vertices: mesh.vertices.iter().map(|v| t.apply(v)).collect(),
        faces: mesh.faces.clone(),
    }
}
