//! Scale-controlled sulcal depth on triangle meshes.
//!
//! The depth potential solves a screened Poisson problem driven by mean
//! curvature. Its scale-controlled form adapts the screening parameter to
//! the size of the surface so that uniformly scaled copies of a mesh get
//! identical depth values. The crate also provides the landmark metrics,
//! distribution statistics and experiment harnesses used to evaluate it.

pub mod depth;
pub mod error;
pub mod experiments;
pub mod landmarks;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod operators;
pub mod phantom;
pub mod stats;

pub use depth::{
    adapt_alpha, dpf, dpf_star, dpf_star_abs, green_impulse, spectral_check, sulc, DepthMap, DepthMethod, SolverBackend,
    SolverConfig, SulcParams,
};
pub use error::{Error, Result};
pub use landmarks::{directional_lines, load_landmarks, shortest_path, GeodesicPath, LandmarkSet};
pub use mesh::{load_mesh, save_mesh, GlobalGeometry, TriangleMesh, Unit, VertexField};
pub use metrics::MetricReport;
pub use operators::{cotan_stiffness, mass_matrix, mean_curvature, CurvatureField, CurvatureMethod, SparseOperator};
pub use phantom::{Phantom, PhantomSpec};
pub use stats::{DistanceMatrix, RegressionResult};

/// Version string echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
