//! Sulcal depth estimators.
//!
//! The depth potential `D` solves the screened Poisson problem
//! `(−Δ + α) D = 2K` on the surface, discretized in weak form as
//! `(S + α M) D = 2 M K` with the cotangent stiffness `S` and lumped mass
//! `M`. The scale-controlled variant rescales the parameter by the squared
//! characteristic length of the surface and divides the result by it, so
//! its values are identical on any uniformly scaled copy of a mesh.

mod spectral;
mod sulc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, Cholesky, CsrMatrix};
use crate::mesh::{TriangleMesh, Unit, VertexField};
use crate::operators::{cotan_stiffness, mass_matrix, mean_curvature, CurvatureField, CurvatureMethod};

pub use spectral::{spectral_check, SpectralCheck};
pub use sulc::{sulc, SulcParams};

/// Default dimensionless parameter of the scale-controlled depth.
pub const DEFAULT_ALPHA: f64 = 500.0;

/// Length of the reference surface against which sizes are measured (mm).
pub const REFERENCE_LENGTH_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMethod {
    Dpf,
    DpfStar,
    DpfStarAbs,
    Sulc,
    Curv,
}

impl DepthMethod {
    pub fn name(self) -> &'static str {
        match self {
            DepthMethod::Dpf => "dpf",
            DepthMethod::DpfStar => "dpf_star",
            DepthMethod::DpfStarAbs => "dpf_star_abs",
            DepthMethod::Sulc => "sulc",
            DepthMethod::Curv => "curv",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            DepthMethod::Dpf | DepthMethod::DpfStarAbs | DepthMethod::Sulc => Unit::Millimeter,
            DepthMethod::DpfStar => Unit::Dimensionless,
            DepthMethod::Curv => Unit::InverseMillimeter,
        }
    }
}

impl std::fmt::Display for DepthMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DepthMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dpf" => Ok(DepthMethod::Dpf),
            "dpf_star" => Ok(DepthMethod::DpfStar),
            "dpf_star_abs" => Ok(DepthMethod::DpfStarAbs),
            "sulc" => Ok(DepthMethod::Sulc),
            "curv" => Ok(DepthMethod::Curv),
            other => Err(format!("unknown depth method '{other}'")),
        }
    }
}

/// A per-vertex depth estimate with its provenance.
#[derive(Debug, Clone)]
pub struct DepthMap {
    pub values: VertexField,
    pub method: DepthMethod,
    /// mm⁻² for `dpf`, dimensionless for the scale-controlled variants
    pub alpha: Option<f64>,
    /// recorded for the scale-controlled variants
    pub characteristic_length: Option<f64>,
}

impl DepthMap {
    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Wraps raw values, e.g. loaded from a file.
    pub fn from_values(values: Vec<f64>, method: DepthMethod) -> Result<Self> {
        Ok(Self {
            values: VertexField::new(values, method.unit())?,
            method,
            alpha: None,
            characteristic_length: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverBackend {
    #[default]
    DirectCholesky,
    ConjugateGradient,
}

impl std::str::FromStr for SolverBackend {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" | "direct_cholesky" => Ok(SolverBackend::DirectCholesky),
            "cg" | "conjugate_gradient" => Ok(SolverBackend::ConjugateGradient),
            other => Err(format!("unknown solver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: SolverBackend,
    /// relative residual target for conjugate gradients
    pub cg_tolerance: f64,
    /// `None` means ten times the system size
    pub cg_max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: SolverBackend::DirectCholesky,
            cg_tolerance: 1e-10,
            cg_max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn conjugate_gradient() -> Self {
        Self {
            backend: SolverBackend::ConjugateGradient,
            ..Self::default()
        }
    }

    fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if !(self.cg_tolerance > 0.0) {
            return Err(Error::domain("CG tolerance must be positive"));
        }
        match self.backend {
            SolverBackend::DirectCholesky => Ok(Cholesky::factor(a)?.solve(b)),
            SolverBackend::ConjugateGradient => {
                let max_iter = self.cg_max_iterations.unwrap_or(10 * a.dim());
                Ok(conjugate_gradient(a, b, self.cg_tolerance, max_iter)?.x)
            }
        }
    }
}

/// Parameter adaptation under a uniform scaling by `s`: `α / s²`.
pub fn adapt_alpha(s: f64, alpha: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("scale factor must be positive, got {s}")));
    }
    Ok(alpha / (s * s))
}

/// Solves `(S + α M) x = b`; for `α = 0` the system is solved on the
/// complement of the constants and `x` is returned with zero area-weighted mean.
fn screened_solve(mesh: &TriangleMesh, alpha: f64, mut rhs: Vec<f64>, config: &SolverConfig) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be non-negative and finite, got {alpha}")));
    }
    let s = cotan_stiffness(mesh);
    let m = mass_matrix(mesh);
    if alpha > 0.0 {
        let a = s.matrix().add_scaled(alpha, m.matrix());
        return config.solve(&a, &rhs);
    }
    if !mesh.is_closed() || !mesh.is_connected() {
        return Err(Error::domain("alpha = 0 requires a closed, connected mesh"));
    }
    let mass = m.diagonal();
    let total: f64 = mass.iter().sum();
    let offset = rhs.iter().sum::<f64>() / total;
    for (r, w) in rhs.iter_mut().zip(&mass) {
        *r -= offset * w;
    }
    // ground vertex 0, then restore the zero-mean gauge
    let reduced = s.matrix().without_index(0);
    let mut x = vec![0.0];
    x.extend(config.solve(&reduced, &rhs[1..])?);
    let mean = x.iter().zip(&mass).map(|(v, w)| v * w).sum::<f64>() / total;
    x.iter_mut().for_each(|v| *v -= mean);
    Ok(x)
}

/// Depth potential with parameter `alpha` in mm⁻².
pub fn dpf(mesh: &TriangleMesh, alpha: f64, curvature: &CurvatureField, config: &SolverConfig) -> Result<DepthMap> {
    if curvature.values().len() != mesh.n_vertices() {
        return Err(Error::Contract(format!(
            "curvature has {} values but mesh has {} vertices",
            curvature.values().len(),
            mesh.n_vertices()
        )));
    }
    let areas = mesh.vertex_areas();
    let rhs: Vec<f64> = curvature
        .values()
        .iter()
        .zip(areas.values())
        .map(|(k, a)| 2.0 * a * k)
        .collect();
    let values = screened_solve(mesh, alpha, rhs, config)?;
    Ok(DepthMap {
        values: VertexField::new(values, Unit::Millimeter)?,
        method: DepthMethod::Dpf,
        alpha: Some(alpha),
        characteristic_length: None,
    })
}

/// Scale-controlled depth with a dimensionless `alpha`, from a given curvature.
pub fn dpf_star_with(
    mesh: &TriangleMesh,
    alpha: f64,
    curvature: &CurvatureField,
    config: &SolverConfig,
) -> Result<DepthMap> {
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("alpha must be non-negative, got {alpha}")));
    }
    let length = mesh.characteristic_length()?;
    let s = length / REFERENCE_LENGTH_MM;
    let raw = dpf(mesh, adapt_alpha(s, alpha)?, curvature, config)?;
    let values = raw.values().iter().map(|d| d / s).collect();
    Ok(DepthMap {
        values: VertexField::new(values, Unit::Dimensionless)?,
        method: DepthMethod::DpfStar,
        alpha: Some(alpha),
        characteristic_length: Some(length),
    })
}

/// Scale-controlled depth using the default tensor curvature.
pub fn dpf_star(mesh: &TriangleMesh, alpha: f64, config: &SolverConfig) -> Result<DepthMap> {
    dpf_star_with(mesh, alpha, &mean_curvature(mesh, CurvatureMethod::Tensor), config)
}

/// Characteristic length times the scale-controlled depth (mm).
pub fn dpf_star_abs_with(
    mesh: &TriangleMesh,
    alpha: f64,
    curvature: &CurvatureField,
    config: &SolverConfig,
) -> Result<DepthMap> {
    let star = dpf_star_with(mesh, alpha, curvature, config)?;
    Ok(absolute(star))
}

pub fn dpf_star_abs(mesh: &TriangleMesh, alpha: f64, config: &SolverConfig) -> Result<DepthMap> {
    absolute_result(dpf_star(mesh, alpha, config))
}

fn absolute_result(star: Result<DepthMap>) -> Result<DepthMap> {
    star.map(absolute)
}

fn absolute(star: DepthMap) -> DepthMap {
    let length = star.characteristic_length.expect("scale-controlled depth records its length");
    let values = star.values().iter().map(|d| length * d).collect();
    DepthMap {
        values: VertexField::new(values, Unit::Millimeter).expect("finite"),
        method: DepthMethod::DpfStarAbs,
        alpha: star.alpha,
        characteristic_length: Some(length),
    }
}

/// Discrete Green's function of the screened operator for a unit source at `p`.
pub fn green_impulse(mesh: &TriangleMesh, alpha: f64, p: usize, config: &SolverConfig) -> Result<VertexField> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if p >= mesh.n_vertices() {
        return Err(Error::Contract(format!("source vertex {p} out of range")));
    }
    let mut rhs = vec![0.0; mesh.n_vertices()];
    rhs[p] = 1.0;
    VertexField::new(screened_solve(mesh, alpha, rhs, config)?, Unit::Dimensionless)
}

/// Mean Euclidean distance from `p` to the half-peak contour of `g`,
/// with the contour located by linear interpolation along edges.
pub fn half_peak_radius(mesh: &TriangleMesh, g: &[f64], p: usize) -> Result<f64> {
    let half = 0.5 * g[p];
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, j) in mesh.edges() {
        let (gi, gj) = (g[i] - half, g[j] - half);
        if (gi >= 0.0) != (gj >= 0.0) {
            let t = gi / (gi - gj);
            let x = mesh.vertex(i) + (mesh.vertex(j) - mesh.vertex(i)) * t;
            sum += (x - mesh.vertex(p)).norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::degenerate("impulse response never falls to half its peak"));
    }
    Ok(sum / count as f64)
}

/// Convenience dispatcher used by the command-line tools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRequest {
    pub method: DepthMethod,
    pub alpha: f64,
    pub curvature: CurvatureMethod,
    pub solver: SolverConfig,
    pub sulc: SulcParams,
}

impl Default for DepthRequest {
    fn default() -> Self {
        Self {
            method: DepthMethod::DpfStar,
            alpha: DEFAULT_ALPHA,
            curvature: CurvatureMethod::Tensor,
            solver: SolverConfig::default(),
            sulc: SulcParams::default(),
        }
    }
}

pub fn compute_depth(mesh: &TriangleMesh, request: &DepthRequest) -> Result<DepthMap> {
    let curvature = || mean_curvature(mesh, request.curvature);
    match request.method {
        DepthMethod::Dpf => dpf(mesh, request.alpha, &curvature(), &request.solver),
        DepthMethod::DpfStar => dpf_star_with(mesh, request.alpha, &curvature(), &request.solver),
        DepthMethod::DpfStarAbs => dpf_star_abs_with(mesh, request.alpha, &curvature(), &request.solver),
        DepthMethod::Sulc => sulc(mesh, &request.sulc),
        DepthMethod::Curv => {
            let k = curvature();
            Ok(DepthMap {
                values: k.field,
                method: DepthMethod::Curv,
                alpha: None,
                characteristic_length: None,
            })
        }
    }
}
