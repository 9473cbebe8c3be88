//! Reference surfaces used by tests, benchmarks and phantoms.

use std::collections::HashMap;

use super::{Point, TriangleMesh, Vector};

/// Regular tetrahedron-like closed mesh, outward oriented.
pub fn tetrahedron() -> TriangleMesh {
    let vertices = vec![
        Point::new(0.0, 0.0, 0.0),
        Point::new(1.0, 0.0, 0.0),
        Point::new(0.0, 1.0, 0.0),
        Point::new(0.0, 0.0, 1.0),
    ];
    let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriangleMesh::new(vertices, faces).expect("tetrahedron is valid")
}

/// Axis-aligned unit cube `[0,1]^3` split into 12 outward triangles.
pub fn unit_cube() -> TriangleMesh {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        vertices.push(Point::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
    }
    let quads = [
        [0, 2, 3, 1], // z = 0
        [4, 5, 7, 6], // z = 1
        [0, 1, 5, 4], // y = 0
        [2, 6, 7, 3], // y = 1
        [0, 4, 6, 2], // x = 0
        [1, 3, 7, 5], // x = 1
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(vertices, faces).expect("cube is valid")
}

/// Unit-direction vertices and faces of a subdivided icosahedron.
pub fn icosphere_directions(subdivisions: u32) -> (Vec<Vector>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut dirs: Vec<Vector> = [
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
    ]
    .iter()
    .map(|c| Vector::new(c[0], c[1], c[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |i: usize, j: usize| {
                *midpoint.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    dirs.push((dirs[i] + dirs[j]).normalize());
                    dirs.len() - 1
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (dirs, faces)
}

/// Sphere of the given radius centered at the origin; `10·4^k + 2` vertices.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let (dirs, faces) = icosphere_directions(subdivisions);
    let vertices = dirs.into_iter().map(|d| Point::from(d * radius)).collect();
    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Planar `nx × ny` vertex grid in the z = 0 plane with spacing `h`.
///
/// Vertex `(i, j)` has index `j * nx + i` and position `(i·h, j·h, 0)`.
/// Cells are split along alternating diagonals so the grid has no
/// preferred direction.
pub fn planar_grid(nx: usize, ny: usize, h: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("grid is valid")
}
