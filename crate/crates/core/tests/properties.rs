use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Unit;
use proptest::prelude::*;
use sweepcarve::carve::{make_bounding_volume, obstacle_field, BoundingKind, SweptSource};
use sweepcarve::collide::{config_in_collision, ObstacleChecker};
use sweepcarve::geometry::io::parse_stl;
use sweepcarve::geometry::{
    box_mesh, icosphere, meshes_intersect, transform_mesh, triangles_intersect, MeshQuery, Point, RigidTransform,
    TriangleMesh, Vec3,
};
use sweepcarve::grid::GridSpec;
use sweepcarve::harness::make_planar_chain;
use sweepcarve::kinematics::{resample_for_sweep, JointTrajectory};

fn pose(t: [f64; 3], axis: [f64; 3], angle: f64) -> RigidTransform {
    let axis = Vec3::from(axis);
    let axis = if axis.norm() < 1e-6 { Vec3::z() } else { axis };
    RigidTransform::from_translation(Vec3::from(t)).compose(&RigidTransform::from_axis_angle(&Unit::new_normalize(axis), angle))
}

fn arb_pose(reach: f64) -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-reach..reach),
        prop::array::uniform3(-1.0..1.0f64),
        -PI..PI,
    )
        .prop_map(|(t, a, ang)| pose(t, a, ang))
}

fn arb_box() -> impl Strategy<Value = TriangleMesh> {
    prop::array::uniform3(0.05..1.0f64).prop_map(|s| box_mesh(Vec3::from(s)))
}

fn brute_intersect(a: &TriangleMesh, b: &TriangleMesh) -> bool {
    (0..a.faces.len()).any(|i| (0..b.faces.len()).any(|j| triangles_intersect(&a.triangle(i), &b.triangle(j))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rigid_motion_preserves_volume_and_distance(m in arb_box(), t in arb_pose(2.0), p in prop::array::uniform3(-2.0..2.0f64)) {
        let moved = transform_mesh(&m, &t);
        prop_assert!((moved.volume().unwrap() - m.volume().unwrap()).abs() < 1e-9);
        let p = Point::from(p);
        let a = MeshQuery::new(m).signed_distance(&p).unwrap();
        let b = MeshQuery::new(moved).signed_distance(&t.apply(&p)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn signed_distance_is_one_lipschitz(p in prop::array::uniform3(-1.5..1.5f64), q in prop::array::uniform3(-1.5..1.5f64)) {
        let sphere = MeshQuery::new(icosphere(1.0, 2));
        let (p, q) = (Point::from(p), Point::from(q));
        let dp = sphere.signed_distance(&p).unwrap();
        let dq = sphere.signed_distance(&q).unwrap();
        prop_assert!((dp - dq).abs() <= (p - q).norm() + 1e-9);
    }

    #[test]
    fn intersection_matches_brute_force_and_is_symmetric(a in arb_box(), b in arb_box(), ta in arb_pose(0.6), tb in arb_pose(0.6)) {
        let a = transform_mesh(&a, &ta);
        let b = transform_mesh(&b, &tb);
        let (qa, qb) = (MeshQuery::new(a.clone()), MeshQuery::new(b.clone()));
        let ab = meshes_intersect(&qa, &qb);
        prop_assert_eq!(ab, meshes_intersect(&qb, &qa));
        prop_assert_eq!(ab, brute_intersect(&a, &b));
    }

    #[test]
    fn displacement_bound_covers_vertex_motion(qa in prop::collection::vec(-2.8..2.8f64, 3), qb in prop::collection::vec(-2.8..2.8f64, 3)) {
        let chain = make_planar_chain(3, 0.7, 0.1);
        let bound = chain.displacement_bound(&qa, &qb).unwrap();
        for i in 0..chain.dof() {
            let a = chain.posed_link(i, &qa).unwrap();
            let b = chain.posed_link(i, &qb).unwrap();
            for (va, vb) in a.vertices.iter().zip(&b.vertices) {
                prop_assert!((va - vb).norm() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn resampling_keeps_samples_and_meets_bound(
        configs in prop::collection::vec(prop::collection::vec(-2.5..2.5f64, 3), 2..8),
        h in 0.02..0.3f64,
    ) {
        let chain = make_planar_chain(3, 0.5, 0.1);
        let traj = JointTrajectory::from_configs(configs.clone(), 10.0).unwrap();
        let dense = resample_for_sweep(&traj, &chain, h).unwrap();
        prop_assert!(dense.max_step_bound(&chain).unwrap() <= h * (1.0 + 1e-9));
        let kept: Vec<&[f64]> = dense.configs().collect();
        let mut k = 0;
        for c in &configs {
            while k < kept.len() && kept[k] != c.as_slice() {
                k += 1;
            }
            prop_assert!(k < kept.len(), "original sample dropped");
        }
    }

    #[test]
    fn larger_clearance_never_relaxes_verdict(q in prop::collection::vec(-2.8..2.8f64, 2), c1 in 0.0..0.2f64, c2 in 0.0..0.2f64) {
        let chain = make_planar_chain(2, 0.5, 0.1);
        let obstacle = transform_mesh(&box_mesh(Vec3::repeat(0.3)), &RigidTransform::from_translation(Vec3::new(0.6, 0.4, 0.0)));
        let checker = ObstacleChecker::from_mesh(obstacle, 0.02, 0.05).unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let a = config_in_collision(&chain, &q, &checker, lo).unwrap();
        let b = config_in_collision(&chain, &q, &checker, hi).unwrap();
        prop_assert!(a.verdict <= b.verdict);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn more_swept_volume_never_grows_obstacles(ta in arb_pose(0.5), tb in arb_pose(0.5)) {
        let chain = make_planar_chain(2, 0.5, 0.1);
        let bv = make_bounding_volume(&chain, BoundingKind::Cube, 1.0).unwrap();
        let spec = GridSpec::new(0.08);
        let source = |name: &str, t: &RigidTransform| SweptSource {
            id: name.into(),
            session: name.into(),
            mesh: transform_mesh(&box_mesh(Vec3::new(0.4, 0.2, 0.2)), t),
        };
        let one = obstacle_field(&bv, &[source("a", &ta)], &spec).unwrap();
        let two = obstacle_field(&bv, &[source("a", &ta), source("b", &tb)], &spec).unwrap();
        prop_assert_eq!(one.frame.dims, two.frame.dims);
        for (x, y) in one.values.iter().zip(&two.values) {
            prop_assert!(y >= x);
        }
    }
}

/// Binary STL of a unit cube written facet by facet, independent of the
/// crate's own mesh generators and writer.
fn reference_stl_cube() -> Vec<u8> {
    let corners = |i: usize| [(i & 1) as f32, ((i >> 1) & 1) as f32, ((i >> 2) & 1) as f32];
    // outward quads as corner indices, counter-clockwise seen from outside
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let mut out = vec![0u8; 80];
    out.extend_from_slice(&12u32.to_le_bytes());
    for q in quads {
        for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
            out.extend_from_slice(&[0u8; 12]);
            for c in tri {
                for x in corners(c) {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            out.extend_from_slice(&[0u8; 2]);
        }
    }
    out
}

#[test]
fn reference_stl_cube_loads_closed() {
    let mesh = parse_stl(Path::new("cube.stl"), &reference_stl_cube()).unwrap();
    assert_eq!(mesh.vertices.len(), 8);
    assert_eq!(mesh.faces.len(), 12);
    mesh.check_closed().unwrap();
    assert!((mesh.volume().unwrap() - 1.0).abs() < 1e-12);
    let q = MeshQuery::new(mesh);
    assert!((q.signed_distance(&Point::new(0.5, 0.5, 0.5)).unwrap() + 0.5).abs() < 1e-12);
}
