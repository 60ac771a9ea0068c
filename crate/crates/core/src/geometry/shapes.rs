//! Closed primitive meshes, all outward-oriented and centered at the origin.

use std::collections::HashMap;

use super::{Point, TriangleMesh, Vec3};

/// Axis-aligned box with the given full side lengths.
pub fn box_mesh(size: Vec3) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Point::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // -z
        [4, 5, 6],
        [5, 7, 6], // +z
        [0, 1, 4],
        [1, 5, 4], // -y
        [2, 6, 3],
        [3, 6, 7], // +y
        [0, 4, 2],
        [2, 4, 6], // -x
        [1, 3, 5],
        [3, 7, 5], // +x
    ];
    TriangleMesh { vertices, faces }
}

pub fn icosahedron(radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw
        .iter()
        .map(|v| Point::from(Vec3::new(v[0], v[1], v[2]).normalize() * radius))
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriangleMesh { vertices, faces }
}

/// Icosahedron refined `subdivisions` times, vertices projected to the sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosahedron(1.0);
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Point>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let p = nalgebra::center(&verts[a as usize], &verts[b as usize]);
                verts.push(Point::from(p.coords.normalize()));
                (verts.len() - 1) as u32
            })
        };
        for f in mesh.faces.clone() {
            let ab = midpoint(f[0], f[1], &mut mesh.vertices);
            let bc = midpoint(f[1], f[2], &mut mesh.vertices);
            let ca = midpoint(f[2], f[0], &mut mesh.vertices);
            faces.push([f[0], ab, ca]);
            faces.push([f[1], bc, ab]);
            faces.push([f[2], ca, bc]);
            faces.push([ab, bc, ca]);
        }
        mesh.faces = faces;
    }
    for v in &mut mesh.vertices {
        *v = Point::from(v.coords * radius);
    }
    mesh
}

/// Closed cylinder along z with `segments` sides.
pub fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3);
    let h = height / 2.0;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for k in 0..n {
        let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        vertices.push(Point::new(radius * a.cos(), radius * a.sin(), -h));
        vertices.push(Point::new(radius * a.cos(), radius * a.sin(), h));
    }
    let bottom = vertices.len() as u32;
    vertices.push(Point::new(0.0, 0.0, -h));
    let top = vertices.len() as u32;
    vertices.push(Point::new(0.0, 0.0, h));
    let mut faces = Vec::with_capacity(4 * n);
    for k in 0..n as u32 {
        let j = (k + 1) % n as u32;
        let (b0, t0, b1, t1) = (2 * k, 2 * k + 1, 2 * j, 2 * j + 1);
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
        faces.push([bottom, b1, b0]);
        faces.push([top, t0, t1]);
    }
    TriangleMesh { vertices, faces }
}

/// Right prism over an isosceles triangle in the xy-plane, extruded along z.
pub fn triangular_prism(base: f64, depth: f64, height: f64) -> TriangleMesh {
    let h = height / 2.0;
    let tri = [
        (-base / 2.0, -depth / 3.0),
        (base / 2.0, -depth / 3.0),
        (0.0, 2.0 * depth / 3.0),
    ];
    let mut vertices = Vec::new();
    for &(x, y) in &tri {
        vertices.push(Point::new(x, y, -h));
    }
    for &(x, y) in &tri {
        vertices.push(Point::new(x, y, h));
    }
    let faces = vec![
        [0, 2, 1],
        [3, 4, 5],
        [0, 1, 4],
        [0, 4, 3],
        [1, 2, 5],
        [1, 5, 4],
        [2, 0, 3],
        [2, 3, 5],
    ];
    TriangleMesh { vertices, faces }
}
