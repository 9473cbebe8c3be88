//! Triangle meshes, per-vertex scalar fields, and global geometry.
//!
//! Coordinates are millimeters. A [`TriangleMesh`] is validated on
//! construction and immutable afterwards; derived connectivity is cached.

mod io;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_field, load_mesh, save_field, save_mesh, sibling, MeshFormat, PlyEncoding};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Physical unit attached to a [`VertexField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Millimeter,
    InverseMillimeter,
    SquareMillimeter,
    Dimensionless,
}

/// One finite scalar per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    values: Vec<f64>,
    unit: Unit,
}

impl VertexField {
    pub fn new(values: Vec<f64>, unit: Unit) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation {
                element: "field value",
                index: i,
                message: format!("non-finite value {}", values[i]),
            });
        }
        Ok(Self { values, unit })
    }

    /// Builds a field and checks that it has one value per vertex of `mesh`.
    pub fn for_mesh(mesh: &TriangleMesh, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::Contract(format!(
                "field has {} values but mesh has {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        Self::new(values, unit)
    }

    pub fn constant(n: usize, value: f64, unit: Unit) -> Result<Self> {
        Self::new(vec![value; n], unit)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Size descriptors of a closed surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalGeometry {
    pub area_mm2: f64,
    pub volume_mm3: f64,
    pub characteristic_length_mm: f64,
}

/// Validated, immutable triangle surface.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    face_neighbors: Vec<[Option<usize>; 3]>,
    boundary_edges: usize,
    components: usize,
}

impl TriangleMesh {
    /// Validates and builds a mesh.
    ///
    /// Rejects out-of-range or repeated face indices, non-finite
    /// coordinates, edges shared by more than two faces, and inconsistent
    /// orientation (a directed edge used by two faces).
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, p) in vertices.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::Validation {
                    element: "vertex",
                    index: i,
                    message: "non-finite coordinate".into(),
                });
            }
        }
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(Error::Validation {
                    element: "face",
                    index: f,
                    message: format!("vertex index {bad} out of range (vertex count {n})"),
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Validation {
                    element: "face",
                    index: f,
                    message: format!("degenerate face {tri:?}"),
                });
            }
        }

        // (min, max) -> faces using the edge, with the local edge slot
        let mut edge_faces: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                if let Some(other) = directed.insert((a, b), f) {
                    return Err(Error::Validation {
                        element: "face",
                        index: f,
                        message: format!(
                            "directed edge ({a},{b}) also used by face {other}: inconsistent orientation or non-manifold edge"
                        ),
                    });
                }
                edge_faces.entry((a.min(b), a.max(b))).or_default().push((f, k));
            }
        }

        let mut face_neighbors = vec![[None; 3]; faces.len()];
        let mut boundary_edges = 0;
        let mut neighbors = vec![Vec::new(); n];
        for (&(a, b), users) in &edge_faces {
            match users.as_slice() {
                [_] => boundary_edges += 1,
                [(f0, k0), (f1, k1)] => {
                    face_neighbors[*f0][*k0] = Some(*f1);
                    face_neighbors[*f1][*k1] = Some(*f0);
                }
                _ => {
                    return Err(Error::Validation {
                        element: "edge",
                        index: a,
                        message: format!("edge ({a},{b}) shared by {} faces", users.len()),
                    })
                }
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        let mut vertex_faces = vec![Vec::new(); n];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }

        let components = count_components(&neighbors);
        Ok(Self {
            vertices,
            faces,
            neighbors,
            vertex_faces,
            face_neighbors,
            boundary_edges,
            components,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point {
        &self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Sorted one-ring of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn vertex_faces(&self, i: usize) -> &[usize] {
        &self.vertex_faces[i]
    }

    /// Face across edge `k` (from corner `k` to corner `k+1`) of face `f`.
    pub fn face_neighbors(&self, f: usize) -> [Option<usize>; 3] {
        self.face_neighbors[f]
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edges
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components <= 1
    }

    /// Undirected edges `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on_boundary = vec![false; self.n_vertices()];
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                if self.face_neighbors[f][k].is_none() {
                    on_boundary[tri[k]] = true;
                    on_boundary[tri[(k + 1) % 3]] = true;
                }
            }
        }
        on_boundary
    }

    fn corners(&self, f: usize) -> [&Point; 3] {
        let [a, b, c] = self.faces[f];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    /// Cross product of the two edges leaving corner 0 (twice the area vector).
    pub fn face_area_vector(&self, f: usize) -> Vector {
        let [p0, p1, p2] = self.corners(f);
        (p1 - p0).cross(&(p2 - p0))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_area_vector(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vector {
        let n = self.face_area_vector(f);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector::zeros()
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_faces()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted vertex normals, normalized; zero for isolated vertices.
    pub fn vertex_normals(&self) -> Vec<Vector> {
        let mut normals = vec![Vector::zeros(); self.n_vertices()];
        for (f, tri) in self.faces.iter().enumerate() {
            let n = self.face_area_vector(f);
            for &v in tri {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        (self.vertices[i] - self.vertices[j]).norm()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let (sum, count) = self
            .edges()
            .fold((0.0, 0usize), |(s, c), (i, j)| (s + self.edge_length(i, j), c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Barycentric vertex areas: one third of the incident face areas.
    pub fn vertex_areas(&self) -> VertexField {
        let mut areas = vec![0.0; self.n_vertices()];
        for (f, tri) in self.faces.iter().enumerate() {
            let third = self.face_area(f) / 3.0;
            for &v in tri {
                areas[v] += third;
            }
        }
        VertexField {
            values: areas,
            unit: Unit::SquareMillimeter,
        }
    }

    /// Enclosed volume from the divergence theorem, as an absolute value.
    pub fn enclosed_volume(&self) -> Result<f64> {
        if !self.is_closed() {
            return Err(Error::NotClosed {
                boundary_edges: self.boundary_edges,
            });
        }
        let signed: f64 = self
            .faces
            .iter()
            .map(|&[a, b, c]| {
                let (p0, p1, p2) = (
                    self.vertices[a].coords,
                    self.vertices[b].coords,
                    self.vertices[c].coords,
                );
                p0.dot(&p1.cross(&p2))
            })
            .sum::<f64>()
            / 6.0;
        Ok(signed.abs())
    }

    /// Cube root of the enclosed volume.
    pub fn characteristic_length(&self) -> Result<f64> {
        Ok(self.enclosed_volume()?.cbrt())
    }

    pub fn global_geometry(&self) -> Result<GlobalGeometry> {
        let volume_mm3 = self.enclosed_volume()?;
        Ok(GlobalGeometry {
            area_mm2: self.total_area(),
            volume_mm3,
            characteristic_length_mm: volume_mm3.cbrt(),
        })
    }

    /// Copy with every coordinate multiplied by `s`.
    pub fn scale(&self, s: f64) -> Result<TriangleMesh> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("scale factor must be positive, got {s}")));
        }
        Ok(self.with_positions(self.vertices.iter().map(|p| Point::from(p.coords * s)).collect()))
    }

    /// Same connectivity, new vertex positions.
    ///
    /// Panics if the number of positions differs from the vertex count.
    pub fn with_positions(&self, vertices: Vec<Point>) -> TriangleMesh {
        assert_eq!(vertices.len(), self.vertices.len(), "position count mismatch");
        TriangleMesh {
            vertices,
            ..self.clone_topology()
        }
    }

    fn clone_topology(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: Vec::new(),
            faces: self.faces.clone(),
            neighbors: self.neighbors.clone(),
            vertex_faces: self.vertex_faces.clone(),
            face_neighbors: self.face_neighbors.clone(),
            boundary_edges: self.boundary_edges,
            components: self.components,
        }
    }

    /// Mesh with vertices relabeled: new vertex `k` is old vertex `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<TriangleMesh> {
        let n = self.n_vertices();
        let mut new_index = vec![usize::MAX; n];
        for (k, &old) in order.iter().enumerate() {
            new_index[old] = k;
        }
        if order.len() != n || new_index.contains(&usize::MAX) {
            return Err(Error::Contract("order is not a permutation of the vertices".into()));
        }
        let vertices = order.iter().map(|&old| self.vertices[old]).collect();
        let faces = self
            .faces
            .iter()
            .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
            .collect();
        TriangleMesh::new(vertices, faces)
    }
}

fn count_components(neighbors: &[Vec<usize>]) -> usize {
    let n = neighbors.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}
