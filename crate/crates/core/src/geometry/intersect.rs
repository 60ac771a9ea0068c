use super::primitives::{orient2, project_2d};
use super::{MeshQuery, Point, Vec3};

const EPS: f64 = 1e-12;

/// Closed-set triangle/triangle overlap test (touching counts).
pub fn triangles_intersect(t1: &[Point; 3], t2: &[Point; 3]) -> bool {
    let n2 = (t2[1] - t2[0]).cross(&(t2[2] - t2[0]));
    let n1 = (t1[1] - t1[0]).cross(&(t1[2] - t1[0]));
    let (l1, l2) = (n1.norm(), n2.norm());
    if l1 == 0.0 || l2 == 0.0 {
        return false;
    }
    let tol = EPS * l1.max(l2).sqrt().max(1.0);
    let d1: [f64; 3] = std::array::from_fn(|i| n2.dot(&(t1[i] - t2[0])) / l2);
    if d1.iter().all(|&d| d > tol) || d1.iter().all(|&d| d < -tol) {
        return false;
    }
    let d2: [f64; 3] = std::array::from_fn(|i| n1.dot(&(t2[i] - t1[0])) / l1);
    if d2.iter().all(|&d| d > tol) || d2.iter().all(|&d| d < -tol) {
        return false;
    }
    if d1.iter().all(|d| d.abs() <= tol) {
        return coplanar_overlap(t1, t2, &n2);
    }
    for k in 0..3 {
        if segment_hits_triangle(&t1[k], &t1[(k + 1) % 3], t2, &n2)
            || segment_hits_triangle(&t2[k], &t2[(k + 1) % 3], t1, &n1)
        {
            return true;
        }
    }
    false
}

fn segment_hits_triangle(p: &Point, q: &Point, tri: &[Point; 3], n: &Vec3) -> bool {
    let nn = n.norm();
    if nn == 0.0 {
        return false;
    }
    let dp = n.dot(&(p - tri[0])) / nn;
    let dq = n.dot(&(q - tri[0])) / nn;
    let tol = EPS * (q - p).norm().max(1.0);
    if (dp > tol && dq > tol) || (dp < -tol && dq < -tol) {
        return false;
    }
    if dp.abs() <= tol && dq.abs() <= tol {
        // segment lies in the triangle's plane
        let a = project_2d(p, n);
        let b = project_2d(q, n);
        let t: [[f64; 2]; 3] = std::array::from_fn(|i| project_2d(&tri[i], n));
        return point_in_tri_2d(a, &t)
            || point_in_tri_2d(b, &t)
            || (0..3).any(|k| segments_intersect_2d(a, b, t[k], t[(k + 1) % 3]));
    }
    let s = dp / (dp - dq);
    let x = p + (q - p) * s;
    point_in_triangle_3d(&x, tri, n)
}

fn point_in_triangle_3d(x: &Point, tri: &[Point; 3], n: &Vec3) -> bool {
    let tol = -EPS * n.norm();
    (0..3).all(|k| {
        let e = tri[(k + 1) % 3] - tri[k];
        e.cross(&(x - tri[k])).dot(n) >= tol
    })
}

fn point_in_tri_2d(p: [f64; 2], t: &[[f64; 2]; 3]) -> bool {
    let o = [orient2(t[0], t[1], p), orient2(t[1], t[2], p), orient2(t[2], t[0], p)];
    (o.iter().all(|&v| v >= 0.0)) || (o.iter().all(|&v| v <= 0.0))
}

fn segments_intersect_2d(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient2(a, b, c);
    let o2 = orient2(a, b, d);
    let o3 = orient2(c, d, a);
    let o4 = orient2(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: [f64; 2], q: [f64; 2], r: [f64; 2], o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

fn coplanar_overlap(t1: &[Point; 3], t2: &[Point; 3], n: &Vec3) -> bool {
    let a: [[f64; 2]; 3] = std::array::from_fn(|i| project_2d(&t1[i], n));
    let b: [[f64; 2]; 3] = std::array::from_fn(|i| project_2d(&t2[i], n));
    (0..3).any(|i| (0..3).any(|j| segments_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])))
        || point_in_tri_2d(a[0], &b)
        || point_in_tri_2d(b[0], &a)
}

/// True iff some triangle pair overlaps, or one closed mesh contains the
/// other (decided by one containment probe per mesh once the surface test
/// finds nothing).
pub fn meshes_intersect(a: &MeshQuery, b: &MeshQuery) -> bool {
    if a.mesh().is_empty() || b.mesh().is_empty() {
        return false;
    }
    if !a.aabb().intersects(&b.aabb()) {
        return false;
    }
    if surfaces_intersect(a, b) {
        return true;
    }
    let probe = |m: &MeshQuery| m.mesh().vertices[m.mesh().faces[0][0] as usize];
    (a.is_closed() && a.contains(&probe(b))) || (b.is_closed() && b.contains(&probe(a)))
}

fn surfaces_intersect(a: &MeshQuery, b: &MeshQuery) -> bool {
    let (ba, bb) = (a.bvh(), b.bvh());
    let mut stack = vec![(0u32, 0u32)];
    while let Some((ia, ib)) = stack.pop() {
        let na = &ba.nodes[ia as usize];
        let nb = &bb.nodes[ib as usize];
        if !na.aabb.intersects(&nb.aabb) {
            continue;
        }
        match (na.is_leaf(), nb.is_leaf()) {
            (true, true) => {
                for &ta in ba.leaf_triangles(na) {
                    let t1 = a.mesh().triangle(ta as usize);
                    for &tb in bb.leaf_triangles(nb) {
                        if triangles_intersect(&t1, &b.mesh().triangle(tb as usize)) {
                            return true;
                        }
                    }
                }
            }
            (false, true) => {
                stack.push((na.left, ib));
                stack.push((na.right, ib));
            }
            (true, false) => {
                stack.push((ia, nb.left));
                stack.push((ia, nb.right));
            }
            (false, false) => {
                if na.aabb.volume() >= nb.aabb.volume() {
                    stack.push((na.left, ib));
                    stack.push((na.right, ib));
                } else {
                    stack.push((ia, nb.left));
                    stack.push((ia, nb.right));
                }
            }
        }
    }
    false
}
