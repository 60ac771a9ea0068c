//! Point/triangle kernels shared by the accelerated and brute-force paths.

use super::{Point, Vec3};

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
pub fn point_triangle_distance_sq(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    (closest_point_on_triangle(p, a, b, c) - p).norm_squared()
}

/// Signed solid angle subtended by triangle `abc` at `p` (Van Oosterom–Strackee).
/// Positive when `p` sees the triangle's back side, i.e. lies behind an
/// outward-facing triangle.
#[inline]
pub fn triangle_solid_angle(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let ra = a - p;
    let rb = b - p;
    let rc = c - p;
    let la = ra.norm();
    let lb = rb.norm();
    let lc = rc.norm();
    let det = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + rb.dot(&rc) * la + rc.dot(&ra) * lb;
    2.0 * det.atan2(den)
}

/// 2D orientation of `c` relative to segment `ab`.
#[inline]
pub(crate) fn orient2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Drops the coordinate along the dominant axis of `n`.
#[inline]
pub(crate) fn project_2d(p: &Point, n: &Vec3) -> [f64; 2] {
    let an = n.abs();
    if an.x >= an.y && an.x >= an.z {
        [p.y, p.z]
    } else if an.y >= an.z {
        [p.z, p.x]
    } else {
        [p.x, p.y]
    }
}
