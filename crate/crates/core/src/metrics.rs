//! Landmark-based quality measures of a depth map.

use serde::Serialize;

use crate::depth::{DepthMap, DepthMethod};
use crate::error::{Error, Result};
use crate::landmarks::LandmarkSet;
use crate::mesh::TriangleMesh;
use crate::operators::field_gradient;
use crate::stats::{median, percentile_sorted};

/// 95th minus 5th percentile of the field.
pub fn ipr(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::degenerate("percentile range needs at least two values"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let r = percentile_sorted(&s, 95.0) - percentile_sorted(&s, 5.0);
    if r <= 0.0 {
        return Err(Error::degenerate("depth map has zero inter-percentile range"));
    }
    Ok(r)
}

fn restricted(values: &[f64], idx: impl IntoIterator<Item = usize>) -> Vec<f64> {
    idx.into_iter().map(|i| values[i]).collect()
}

/// Population standard deviation on the crests over the percentile range.
pub fn std_crest(values: &[f64], landmarks: &LandmarkSet) -> Result<f64> {
    let c = restricted(values, landmarks.crests().iter().copied());
    if c.len() < 2 {
        return Err(Error::degenerate("need at least two crest vertices"));
    }
    let range = ipr(values)?;
    let m = c.iter().sum::<f64>() / c.len() as f64;
    let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64;
    Ok(var.sqrt() / range)
}

/// Crest median minus fundus median over the percentile range.
pub fn sep(values: &[f64], landmarks: &LandmarkSet) -> Result<f64> {
    let c = restricted(values, landmarks.crests().iter().copied());
    let f = restricted(values, landmarks.fundus_vertices());
    if c.is_empty() || f.is_empty() {
        return Err(Error::degenerate("need crest and fundus vertices"));
    }
    let range = ipr(values)?;
    Ok((median(&c)? - median(&f)?) / range)
}

#[derive(Debug, Clone, Serialize)]
pub struct DevResult {
    /// mean over paths of the per-path mean angle, degrees
    pub dev: f64,
    pub path_angles: Vec<f64>,
    pub vertex_angles: Vec<f64>,
    pub excluded_vertices: usize,
}

/// Angle between the depth gradient and the fundus → crest direction along
/// the directional lines.
pub fn dev(mesh: &TriangleMesh, values: &[f64], landmarks: &LandmarkSet) -> Result<DevResult> {
    if landmarks.directional().is_empty() {
        return Err(Error::degenerate("no directional lines"));
    }
    let grad = field_gradient(mesh, values)?;
    let normals = mesh.vertex_normals();
    let gmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut path_angles = Vec::new();
    let mut vertex_angles = Vec::new();
    let mut excluded = 0;
    for path in landmarks.directional() {
        let v = &path.vertices;
        let mut angles = Vec::new();
        for k in 1..v.len().saturating_sub(1) {
            let p = v[k];
            let n = normals[p];
            let mut dir = mesh.vertex(v[k + 1]) - mesh.vertex(v[k - 1]);
            dir -= n * n.dot(&dir);
            let g = grad[p];
            let (dn, gn) = (dir.norm(), g.norm());
            if dn == 0.0 || gn <= 1e-12 * gmax || gn == 0.0 {
                excluded += 1;
                continue;
            }
            let c = (dir.dot(&g) / (dn * gn)).clamp(-1.0, 1.0);
            angles.push(c.acos().to_degrees());
        }
        if !angles.is_empty() {
            path_angles.push(angles.iter().sum::<f64>() / angles.len() as f64);
            vertex_angles.extend(angles);
        }
    }
    if path_angles.is_empty() {
        return Err(Error::degenerate("no path vertex with a usable gradient"));
    }
    Ok(DevResult {
        dev: path_angles.iter().sum::<f64>() / path_angles.len() as f64,
        path_angles,
        vertex_angles,
        excluded_vertices: excluded,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub method: DepthMethod,
    pub alpha: Option<f64>,
    pub std_crest: f64,
    pub sep: f64,
    pub dev: f64,
    pub n_paths: usize,
    pub n_crest_vertices: usize,
    #[serde(skip)]
    pub path_angles: Vec<f64>,
}

/// All three measures; `landmarks` must carry directional lines.
pub fn evaluate(mesh: &TriangleMesh, depth: &DepthMap, landmarks: &LandmarkSet) -> Result<MetricReport> {
    let values = depth.values();
    let d = dev(mesh, values, landmarks)?;
    Ok(MetricReport {
        method: depth.method,
        alpha: depth.alpha,
        std_crest: std_crest(values, landmarks)?,
        sep: sep(values, landmarks)?,
        dev: d.dev,
        n_paths: landmarks.directional().len(),
        n_crest_vertices: landmarks.crests().len(),
        path_angles: d.path_angles,
    })
}
