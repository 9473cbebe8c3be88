use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lowest_eigenpairs, Cholesky};
use crate::mesh::TriangleMesh;
use crate::operators::{cotan_stiffness, mass_matrix, CurvatureField};

/// Modal comparison between a solved depth map and its closed-form spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralCheck {
    pub eigenvalues: Vec<f64>,
    /// `Φᵢᵀ M D` for the solved depth `D`
    pub projected: Vec<f64>,
    /// `2 Kᵢ / (α + λᵢ)`
    pub predicted: Vec<f64>,
    /// `max |projected − predicted| / max |projected|`
    pub discrepancy: f64,
}

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITERATIONS: usize = 500;

/// Projects the depth solution on the `k` lowest Laplace–Beltrami modes.
pub fn spectral_check(mesh: &TriangleMesh, alpha: f64, k: usize, curvature: &CurvatureField) -> Result<SpectralCheck> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("spectral check needs a positive alpha, got {alpha}")));
    }
    if curvature.values().len() != mesh.n_vertices() {
        return Err(Error::Contract("curvature length does not match mesh".into()));
    }
    let s = cotan_stiffness(mesh);
    let m = mass_matrix(mesh);
    let mass = m.diagonal();
    let rhs: Vec<f64> = curvature.values().iter().zip(&mass).map(|(k, w)| 2.0 * k * w).collect();
    let depth = Cholesky::factor(&s.matrix().add_scaled(alpha, m.matrix()))?.solve(&rhs);

    let pairs = lowest_eigenpairs(s.matrix(), m.matrix(), k, EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)?;
    let mut projected = Vec::with_capacity(k);
    let mut predicted = Vec::with_capacity(k);
    for (i, &lambda) in pairs.values.iter().enumerate() {
        let phi = pairs.vectors.column(i);
        let (mut d_i, mut k_i) = (0.0, 0.0);
        for v in 0..mesh.n_vertices() {
            d_i += phi[v] * mass[v] * depth[v];
            k_i += phi[v] * mass[v] * curvature.values()[v];
        }
        projected.push(d_i);
        predicted.push(2.0 * k_i / (alpha + lambda));
    }
    let scale = projected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = projected.iter().zip(&predicted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let discrepancy = if scale > 0.0 { worst / scale } else { worst };
    Ok(SpectralCheck {
        eigenvalues: pairs.values,
        projected,
        predicted,
        discrepancy,
    })
}
