//! Inflation-based depth: the normal component of vertex motion integrated
//! while the surface is smoothed. Vertices move along their normals only,
//! and after each iteration the surface is rescaled about its centroid to
//! its original area, so a sphere is a fixed point and global shrinkage does
//! not enter the integral.

use serde::{Deserialize, Serialize};

use super::{DepthMap, DepthMethod};
use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh, Unit, Vector, VertexField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SulcParams {
    pub iterations: usize,
    /// Largest displacement of a vertex in one iteration, in mm.
    /// `None` resolves to a tenth of the input's mean edge length.
    pub step: Option<f64>,
    /// Weight of the edge-length preservation term.
    pub lambda: f64,
    /// Fraction of the normal smoothing component applied per iteration.
    pub relaxation: f64,
}

impl Default for SulcParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            step: None,
            lambda: 0.5,
            relaxation: 0.25,
        }
    }
}

impl SulcParams {
    /// Fixes the step from `mesh` so that it can be reused on other meshes.
    pub fn resolved_for(&self, mesh: &TriangleMesh) -> Self {
        Self {
            step: Some(self.step.unwrap_or(0.1 * mesh.mean_edge_length())),
            ..*self
        }
    }
}

pub fn sulc(mesh: &TriangleMesh, params: &SulcParams) -> Result<DepthMap> {
    let mean_edge = mesh.mean_edge_length();
    let step = params.step.unwrap_or(0.1 * mean_edge);
    if !(step > 0.0) || !(params.relaxation > 0.0) || !(params.lambda >= 0.0) {
        return Err(Error::domain("SULC step, relaxation must be positive and lambda non-negative"));
    }
    let n = mesh.n_vertices();
    let rest: Vec<Vec<f64>> = (0..n)
        .map(|i| mesh.neighbors(i).iter().map(|&j| mesh.edge_length(i, j)).collect())
        .collect();
    let mut x: Vec<Point> = mesh.vertices().to_vec();
    let area0 = surface_area(mesh, &x);
    let mut acc = vec![0.0; n];
    let mut next = x.clone();

    for iteration in 0..params.iterations {
        let normals = vertex_normals(mesh, &x);
        // the normal part of a neighbour average grows with the local squared
        // edge length; dividing by it makes the pull uniform on a sphere
        let local_sq: Vec<f64> = (0..n)
            .map(|i| {
                let nbrs = mesh.neighbors(i);
                nbrs.iter().map(|&j| (x[j] - x[i]).norm_squared()).sum::<f64>() / nbrs.len().max(1) as f64
            })
            .collect();
        let mean_sq = local_sq.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            let nbrs = mesh.neighbors(i);
            let mut s = Vector::zeros();
            for (&j, &d0) in nbrs.iter().zip(&rest[i]) {
                let e = x[j] - x[i];
                let d = e.norm();
                if d > 0.0 {
                    s += e * (1.0 + params.lambda * (d - d0) / d);
                }
            }
            let mut m = if nbrs.is_empty() || local_sq[i] == 0.0 {
                Vector::zeros()
            } else {
                normals[i] * (s.dot(&normals[i]) * params.relaxation * mean_sq / (local_sq[i] * nbrs.len() as f64))
            };
            let len = m.norm();
            if len > step {
                m *= step / len;
            }
            next[i] = x[i] + m;
        }
        let centroid = next.iter().fold(Vector::zeros(), |c, p| c + p.coords) / n as f64;
        let c = (area0 / surface_area(mesh, &next)).sqrt();
        for i in 0..n {
            let p = Point::from(centroid + (next[i].coords - centroid) * c);
            let m = p - x[i];
            let len = m.norm();
            if !len.is_finite() || len > 10.0 * mean_edge {
                return Err(Error::Divergence {
                    iteration,
                    vertex: i,
                    displacement: len,
                });
            }
            acc[i] += m.dot(&normals[i]);
            x[i] = p;
        }
    }

    let mean = acc.iter().sum::<f64>() / n as f64;
    let values = acc.iter().map(|a| mean - a).collect();
    Ok(DepthMap {
        values: VertexField::new(values, Unit::Millimeter)?,
        method: DepthMethod::Sulc,
        alpha: None,
        characteristic_length: None,
    })
}

fn surface_area(mesh: &TriangleMesh, x: &[Point]) -> f64 {
    mesh.faces()
        .iter()
        .map(|f| 0.5 * (x[f[1]] - x[f[0]]).cross(&(x[f[2]] - x[f[0]])).norm())
        .sum()
}

fn vertex_normals(mesh: &TriangleMesh, x: &[Point]) -> Vec<Vector> {
    let mut normals = vec![Vector::zeros(); x.len()];
    for f in mesh.faces() {
        for k in 0..3 {
            let a = x[f[(k + 1) % 3]] - x[f[k]];
            let b = x[f[(k + 2) % 3]] - x[f[k]];
            let w = a.norm_squared() * b.norm_squared();
            if w > 0.0 {
                normals[f[k]] += a.cross(&b) / w;
            }
        }
    }
    for nrm in &mut normals {
        let l = nrm.norm();
        if l > 0.0 {
            *nrm /= l;
        }
    }
    normals
}
