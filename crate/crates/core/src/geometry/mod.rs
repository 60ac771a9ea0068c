//! Mesh and transform types, distance and containment queries, surface
//! extraction and mesh file I/O.

mod bvh;
mod intersect;
pub mod io;
pub mod marching;
mod mesh;
mod primitives;
mod query;
mod shapes;
mod transform;

pub use bvh::{Bvh, BvhNode};
pub use intersect::{meshes_intersect, triangles_intersect};
pub use io::{load_mesh, save_mesh};
pub use mesh::{Aabb, TriangleMesh};
pub use primitives::{closest_point_on_triangle, point_triangle_distance_sq, triangle_solid_angle};
pub use query::MeshQuery;
pub use shapes::{box_mesh, cylinder_mesh, icosahedron, icosphere, triangular_prism};
pub use transform::{transform_mesh, RigidTransform};

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
