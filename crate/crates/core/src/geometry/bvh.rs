use nalgebra::Matrix3;

use super::primitives::{point_triangle_distance_sq, triangle_solid_angle};
use super::{Aabb, Point, TriangleMesh, Vec3};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Far-field acceptance ratio for the hierarchical winding number: a node is
/// approximated when the query is farther than `WINDING_BETA` times the node
/// radius from its area centroid.
const WINDING_BETA: f64 = 2.3;

#[derive(Debug, Clone)]
pub struct BvhNode {
    pub aabb: Aabb,
    /// Leaf: range into `order`. Inner: `left` child index, `right = left + 1`
    /// is not assumed; both are stored.
    pub start: u32,
    pub count: u32,
    pub left: u32,
    pub right: u32,
    // far-field winding expansion
    centroid: Point,
    radius: f64,
    normal_sum: Vec3,
    second_moment: Matrix3<f64>,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Bounding-box tree over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    /// Triangle indices in leaf order.
    pub order: Vec<u32>,
    pub leaf_size: usize,
}

impl Bvh {
    pub const DEFAULT_LEAF_SIZE: usize = 8;

    pub fn build(mesh: &TriangleMesh) -> Self {
        Self::with_leaf_size(mesh, Self::DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(mesh: &TriangleMesh, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let n = mesh.faces.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let centroids: Vec<Point> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n / leaf_size + 1),
            order: Vec::new(),
            leaf_size,
        };
        if n > 0 {
            bvh.build_node(mesh, &centroids, &mut order, 0, n);
        }
        bvh.order = order;
        bvh
    }

    fn build_node(
        &mut self,
        mesh: &TriangleMesh,
        centroids: &[Point],
        order: &mut [u32],
        start: usize,
        end: usize,
    ) -> u32 {
        let idx = self.nodes.len() as u32;
        let tris = &order[start..end];
        let mut aabb = Aabb::empty();
        let mut cbox = Aabb::empty();
        let mut area_sum = 0.0;
        let mut weighted = Vec3::zeros();
        let mut normal_sum = Vec3::zeros();
        for &t in tris {
            let [a, b, c] = mesh.triangle(t as usize);
            aabb.grow(&a);
            aabb.grow(&b);
            aabb.grow(&c);
            cbox.grow(&centroids[t as usize]);
            let n = 0.5 * (b - a).cross(&(c - a));
            let area = n.norm();
            area_sum += area;
            weighted += area * centroids[t as usize].coords;
            normal_sum += n;
        }
        let centroid = if area_sum > 0.0 {
            Point::from(weighted / area_sum)
        } else {
            aabb.center()
        };
        let mut radius: f64 = 0.0;
        let mut second_moment = Matrix3::zeros();
        for &t in tris {
            let [a, b, c] = mesh.triangle(t as usize);
            for v in [a, b, c] {
                radius = radius.max((v - centroid).norm());
            }
            let n = 0.5 * (b - a).cross(&(c - a));
            second_moment += (centroids[t as usize] - centroid) * n.transpose();
        }
        self.nodes.push(BvhNode {
            aabb,
            start: start as u32,
            count: (end - start) as u32,
            left: 0,
            right: 0,
            centroid,
            radius,
            normal_sum,
            second_moment,
        });
        if end - start <= self.leaf_size {
            return idx;
        }
        let axis = cbox.longest_axis();
        let mid = start + (end - start) / 2;
        order[start..end].sort_by(|&x, &y| {
            centroids[x as usize][axis]
                .total_cmp(&centroids[y as usize][axis])
                .then(x.cmp(&y))
        });
        let left = self.build_node(mesh, centroids, order, start, mid);
        let right = self.build_node(mesh, centroids, order, mid, end);
        let node = &mut self.nodes[idx as usize];
        node.count = 0;
        node.left = left;
        node.right = right;
        idx
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_aabb(&self) -> Aabb {
        self.nodes.first().map(|n| n.aabb).unwrap_or_else(Aabb::empty)
    }

    pub fn leaf_triangles(&self, node: &BvhNode) -> &[u32] {
        &self.order[node.start as usize..(node.start + node.count) as usize]
    }

    /// Closest triangle to `p` with squared distance below `max_dist_sq`.
    /// Returns `(dist_sq, face)`.
    pub fn closest(&self, mesh: &TriangleMesh, p: &Point, max_dist_sq: f64) -> Option<(f64, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = max_dist_sq;
        let mut best_face = None;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].aabb.distance_sq(p)));
        while let Some((ni, d)) = stack.pop() {
            if d >= best {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.is_leaf() {
                for &t in self.leaf_triangles(node) {
                    let f = mesh.faces[t as usize];
                    let dd = point_triangle_distance_sq(
                        p,
                        &mesh.vertices[f[0] as usize],
                        &mesh.vertices[f[1] as usize],
                        &mesh.vertices[f[2] as usize],
                    );
                    if dd < best {
                        best = dd;
                        best_face = Some(t);
                    }
                }
            } else {
                let dl = self.nodes[node.left as usize].aabb.distance_sq(p);
                let dr = self.nodes[node.right as usize].aabb.distance_sq(p);
                // push the farther child first so the nearer one is visited next
                if dl < dr {
                    stack.push((node.right, dr));
                    stack.push((node.left, dl));
                } else {
                    stack.push((node.left, dl));
                    stack.push((node.right, dr));
                }
            }
        }
        best_face.map(|f| (best, f))
    }

    /// Hierarchical generalized winding number (dipole plus second-order
    /// far-field expansion, exact solid angles near the query).
    pub fn winding_number(&self, mesh: &TriangleMesh, p: &Point) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let r = node.centroid - p;
            let dist = r.norm();
            if dist > WINDING_BETA * node.radius && node.radius > 0.0 {
                let d3 = dist * dist * dist;
                let first = r.dot(&node.normal_sum) / d3;
                // Hessian of the dipole kernel: (I/|r|^3 - 3 r r^T/|r|^5)
                let h = Matrix3::identity() / d3 - (3.0 / (d3 * dist * dist)) * (r * r.transpose());
                let second = h.component_mul(&node.second_moment).sum();
                total += (first + second) / FOUR_PI;
            } else if node.is_leaf() {
                for &t in self.leaf_triangles(node) {
                    let f = mesh.faces[t as usize];
                    total += triangle_solid_angle(
                        p,
                        &mesh.vertices[f[0] as usize],
                        &mesh.vertices[f[1] as usize],
                        &mesh.vertices[f[2] as usize],
                    ) / FOUR_PI;
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        total
    }

    /// Calls `f` for every triangle whose node boxes overlap `query`.
    pub fn for_each_overlapping(&self, query: &Aabb, mut f: impl FnMut(u32)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.aabb.intersects(query) {
                continue;
            }
            if node.is_leaf() {
                for &t in self.leaf_triangles(node) {
                    f(t);
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, icosphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_containment(bvh: &Bvh, mesh: &TriangleMesh, ni: usize) -> Vec<u32> {
        let node = &bvh.nodes[ni];
        if node.is_leaf() {
            let tris = bvh.leaf_triangles(node).to_vec();
            for &t in &tris {
                for v in mesh.triangle(t as usize) {
                    assert!(node.aabb.contains(&v));
                }
            }
            tris
        } else {
            for c in [node.left, node.right] {
                assert!(node.aabb.contains_box(&bvh.nodes[c as usize].aabb));
            }
            let mut a = check_containment(bvh, mesh, node.left as usize);
            a.extend(check_containment(bvh, mesh, node.right as usize));
            a
        }
    }

    #[test]
    fn tree_covers_all_triangles_once_and_nests_boxes() {
        let m = icosphere(1.0, 3);
        let bvh = Bvh::with_leaf_size(&m, 4);
        let mut all = check_containment(&bvh, &m, 0);
        all.sort_unstable();
        assert_eq!(all, (0..m.faces.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn closest_matches_brute_force() {
        let m = icosphere(1.0, 2);
        let bvh = Bvh::with_leaf_size(&m, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Point::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let brute = (0..m.faces.len())
                .map(|f| {
                    let [a, b, c] = m.triangle(f);
                    point_triangle_distance_sq(&p, &a, &b, &c)
                })
                .fold(f64::INFINITY, f64::min);
            let (d, _) = bvh.closest(&m, &p, f64::INFINITY).unwrap();
            assert_eq!(d, brute);
        }
    }

    #[test]
    fn winding_number_is_near_integer() {
        let m = box_mesh(Vec3::new(1.0, 2.0, 0.5));
        let sphere = icosphere(0.8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mesh in [&m, &sphere] {
            let bvh = Bvh::with_leaf_size(mesh, 2);
            for _ in 0..2000 {
                let p = Point::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                );
                let w = bvh.winding_number(mesh, &p);
                let err = (w - w.round()).abs();
                assert!(err < 0.05, "w = {w} at {p}");
            }
        }
    }
}
