//! Harnesses for the three validation experiments: choice of the
//! smoothing parameter from landmark metrics, behaviour under uniform
//! scaling, and population distributions ordered by brain size.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::depth::{compute_depth, DepthMap, DepthMethod, DepthRequest, SolverConfig, SulcParams};
use crate::error::{Error, Result};
use crate::landmarks::{directional_lines, LandmarkSet};
use crate::mesh::TriangleMesh;
use crate::metrics::{evaluate, MetricReport};
use crate::operators::{mean_curvature, CurvatureMethod};
use crate::phantom::{phantom_family, PhantomSpec};
use crate::stats::{
    distance_matrix, linear_regression, mean, median, percentile_sorted, spearman, subgroup_ks_profile, welch_ttest,
    window_starts, DistanceMatrix, SubjectSample,
};

/// Parameter grid swept by default in the first experiment.
pub const DEFAULT_ALPHAS: [f64; 8] = [0.0, 10.0, 50.0, 150.0, 400.0, 500.0, 1000.0, 2000.0];

/// Significance level of the equivalence test against the best parameter.
pub const EQUIVALENCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub mesh: TriangleMesh,
    pub landmarks: Option<LandmarkSet>,
}

impl Subject {
    pub fn from_phantom(id: impl Into<String>, spec: &PhantomSpec) -> Result<Self> {
        let ph = spec.generate()?;
        Ok(Self {
            id: id.into(),
            mesh: ph.mesh,
            landmarks: ph.landmarks,
        })
    }
}

/// Deterministic set of annotated phantoms of similar size and varied shape.
///
/// The ellipsoidal stretch adds large-scale curvature variation and the
/// radial roughness adds small-scale noise, the two features the smoothing
/// parameter trades off.
pub fn phantom_suite(count: usize, subdivisions: u32) -> Vec<PhantomSpec> {
    (0..count)
        .map(|k| {
            let t = k as f64 / count.max(2).saturating_sub(1) as f64;
            PhantomSpec {
                radius: 30.0,
                amplitude: 2.5 + t,
                frequency: 6,
                subdivisions,
                seed: k as u64,
                jitter: 0.2,
                axes: [1.0 + 0.2 * (0.5 + t), 1.0, 1.0 - 0.2 * (0.5 + t)],
                roughness: 0.1,
            }
        })
        .collect()
}

/// Population with a fourfold size span whose relative wrinkle amplitude
/// grows with size, ordered from smallest to largest.
pub fn population_specs(count: usize, subdivisions: u32) -> Vec<PhantomSpec> {
    let base = PhantomSpec {
        radius: 15.0,
        subdivisions,
        jitter: 0.2,
        roughness: 0.1,
        ..PhantomSpec::default()
    };
    phantom_family(count, &base, 4.0, (0.06, 0.12))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DepthSettings {
    pub curvature: CurvatureMethod,
    pub solver: SolverConfig,
    pub sulc: SulcParams,
}

impl Default for DepthSettings {
    fn default() -> Self {
        Self {
            curvature: CurvatureMethod::Tensor,
            solver: SolverConfig::default(),
            sulc: SulcParams::default(),
        }
    }
}

impl DepthSettings {
    fn request(&self, method: DepthMethod, alpha: f64) -> DepthRequest {
        DepthRequest {
            method,
            alpha,
            curvature: self.curvature,
            solver: self.solver,
            sulc: self.sulc,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe1Config {
    pub alphas: Vec<f64>,
    /// also score SULC and curvature as reference methods
    pub baselines: bool,
    pub settings: DepthSettings,
}

impl Default for Expe1Config {
    fn default() -> Self {
        Self {
            alphas: DEFAULT_ALPHAS.to_vec(),
            baselines: false,
            settings: DepthSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub subject: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub n: usize,
    pub median_std_crest: f64,
    pub median_sep: f64,
    pub median_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub metric: &'static str,
    pub best_alpha: f64,
    /// alphas whose distribution is not distinguishable from the best one
    pub equivalent: Vec<f64>,
    /// `(alpha, p)` of the Welch test against the best alpha
    pub p_values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe1Report {
    pub experiment: &'static str,
    pub version: &'static str,
    pub config: Expe1Config,
    pub subjects: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub baseline_rows: Vec<MetricRow>,
    pub summary: Vec<AlphaSummary>,
    pub selections: Vec<Selection>,
    pub intersection: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Metric {
    StdCrest,
    Sep,
    Dev,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::StdCrest => "std_crest",
            Metric::Sep => "sep",
            Metric::Dev => "dev",
        }
    }

    fn value(self, r: &MetricReport) -> f64 {
        match self {
            Metric::StdCrest => r.std_crest,
            Metric::Sep => r.sep,
            Metric::Dev => r.dev,
        }
    }

    fn higher_is_better(self) -> bool {
        matches!(self, Metric::Sep)
    }
}

pub fn run_expe1(subjects: &[Subject], config: &Expe1Config) -> Result<Expe1Report> {
    if subjects.is_empty() {
        return Err(Error::EmptyInput("no surfaces".into()));
    }
    if config.alphas.is_empty() {
        return Err(Error::EmptyInput("no alpha values".into()));
    }
    if let Some(a) = config.alphas.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::domain(format!("alpha must be non-negative, got {a}")));
    }
    let mut sorted: Vec<&Subject> = subjects.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let per_subject: Vec<(Vec<MetricRow>, Vec<MetricRow>)> = sorted
        .par_iter()
        .map(|s| {
            let lm = s
                .landmarks
                .as_ref()
                .ok_or_else(|| Error::EmptyResult(format!("surface {} has no landmarks", s.id)))?;
            let lines = directional_lines(&s.mesh, lm)?;
            let curvature = mean_curvature(&s.mesh, config.settings.curvature);
            let mut rows = Vec::new();
            for &alpha in &config.alphas {
                let d = crate::depth::dpf_star_with(&s.mesh, alpha, &curvature, &config.settings.solver)?;
                rows.push(MetricRow {
                    subject: s.id.clone(),
                    report: evaluate(&s.mesh, &d, &lines)?,
                });
            }
            let mut base = Vec::new();
            if config.baselines {
                for method in [DepthMethod::Sulc, DepthMethod::Curv] {
                    let d = compute_depth(&s.mesh, &config.settings.request(method, 0.0))?;
                    base.push(MetricRow {
                        subject: s.id.clone(),
                        report: evaluate(&s.mesh, &d, &lines)?,
                    });
                }
            }
            Ok((rows, base))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MetricRow> = per_subject.iter().flat_map(|p| p.0.clone()).collect();
    let baseline_rows: Vec<MetricRow> = per_subject.into_iter().flat_map(|p| p.1).collect();

    let values = |alpha: f64, m: Metric| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.report.alpha == Some(alpha))
            .map(|r| m.value(&r.report))
            .collect()
    };
    let summary = config
        .alphas
        .iter()
        .map(|&alpha| {
            Ok(AlphaSummary {
                alpha,
                n: values(alpha, Metric::Sep).len(),
                median_std_crest: median(&values(alpha, Metric::StdCrest))?,
                median_sep: median(&values(alpha, Metric::Sep))?,
                median_dev: median(&values(alpha, Metric::Dev))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut selections = Vec::new();
    for metric in [Metric::StdCrest, Metric::Sep, Metric::Dev] {
        let med = |s: &AlphaSummary| match metric {
            Metric::StdCrest => s.median_std_crest,
            Metric::Sep => s.median_sep,
            Metric::Dev => s.median_dev,
        };
        // first grid value wins ties
        let mut best = &summary[0];
        for s in &summary[1..] {
            let better = if metric.higher_is_better() { med(s) > med(best) } else { med(s) < med(best) };
            if better {
                best = s;
            }
        }
        let reference = values(best.alpha, metric);
        let mut equivalent = Vec::new();
        let mut p_values = Vec::new();
        for &alpha in &config.alphas {
            if alpha == best.alpha {
                equivalent.push(alpha);
                p_values.push((alpha, 1.0));
                continue;
            }
            let other = values(alpha, metric);
            let p = match welch_ttest(&other, &reference) {
                Ok(t) => t.p,
                // both constant: equivalent exactly when equal
                Err(Error::Degenerate(_)) if other.len() >= 2 && mean(&other) == mean(&reference) => 1.0,
                Err(Error::Degenerate(_)) if other.len() >= 2 => 0.0,
                Err(Error::Degenerate(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            p_values.push((alpha, p));
            if p > EQUIVALENCE_LEVEL {
                equivalent.push(alpha);
            }
        }
        selections.push(Selection {
            metric: metric.name(),
            best_alpha: best.alpha,
            equivalent,
            p_values,
        });
    }
    let intersection = config
        .alphas
        .iter()
        .copied()
        .filter(|a| selections.iter().all(|s| s.equivalent.contains(a)))
        .collect();

    Ok(Expe1Report {
        experiment: "expe1",
        version: crate::VERSION,
        config: config.clone(),
        subjects: sorted.iter().map(|s| s.id.clone()).collect(),
        rows,
        baseline_rows,
        summary,
        selections,
        intersection,
    })
}

impl Expe1Report {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("expe1_report.json"), self)?;
        let mut csv = String::from("subject,method,alpha,std_crest,sep,dev,n_paths,n_crest_vertices\n");
        for r in self.rows.iter().chain(&self.baseline_rows) {
            let m = &r.report;
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                r.subject,
                m.method,
                m.alpha.map(|a| a.to_string()).unwrap_or_default(),
                m.std_crest,
                m.sep,
                m.dev,
                m.n_paths,
                m.n_crest_vertices
            )
            .unwrap();
        }
        fs::write(dir.join("expe1_metrics.csv"), csv)?;
        let mut summary = String::from("alpha,n,median_std_crest,median_sep,median_dev\n");
        for s in &self.summary {
            writeln!(summary, "{},{},{},{},{}", s.alpha, s.n, s.median_std_crest, s.median_sep, s.median_dev).unwrap();
        }
        fs::write(dir.join("expe1_summary.csv"), summary)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe2Config {
    pub scales: Vec<f64>,
    pub methods: Vec<DepthMethod>,
    /// dimensionless for the scale-controlled methods
    pub alpha: f64,
    /// mm⁻² parameter of raw `dpf`; by default `alpha / L²` of the input,
    /// held fixed across scales
    pub dpf_alpha: Option<f64>,
    pub settings: DepthSettings,
}

impl Default for Expe2Config {
    fn default() -> Self {
        Self {
            scales: vec![2.0, 3.0, 4.0, 5.0],
            methods: vec![DepthMethod::DpfStar, DepthMethod::Sulc],
            alpha: crate::depth::DEFAULT_ALPHA,
            dpf_alpha: None,
            settings: DepthSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    pub method: DepthMethod,
    pub scale: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub residual_rms: f64,
    /// `max |D(sM) − D(M)| / max |D(M)|`, reported for `dpf_star`
    pub max_relative_deviation: Option<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe2Report {
    pub experiment: &'static str,
    pub version: &'static str,
    /// effective configuration, with the SULC step and raw parameter resolved
    pub config: Expe2Config,
    pub characteristic_length_mm: f64,
    pub rows: Vec<ScaleRow>,
}

pub fn run_expe2(mesh: &TriangleMesh, config: &Expe2Config) -> Result<Expe2Report> {
    if config.scales.is_empty() || config.methods.is_empty() {
        return Err(Error::EmptyInput("need at least one scale and one method".into()));
    }
    if let Some(s) = config.scales.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::domain(format!("scale factors must be positive, got {s}")));
    }
    let length = mesh.characteristic_length()?;
    let mut effective = config.clone();
    // settings in absolute units are fixed once, on the input surface
    effective.settings.sulc = config.settings.sulc.resolved_for(mesh);
    effective.dpf_alpha = Some(config.dpf_alpha.unwrap_or(config.alpha / (length * length)));

    let depth = |m: &TriangleMesh, method: DepthMethod| -> Result<DepthMap> {
        let alpha = if method == DepthMethod::Dpf { effective.dpf_alpha.unwrap() } else { effective.alpha };
        compute_depth(m, &effective.settings.request(method, alpha))
    };
    let scaled: Vec<TriangleMesh> = config.scales.iter().map(|&s| mesh.scale(s)).collect::<Result<_>>()?;
    let rows: Vec<Vec<ScaleRow>> = config
        .methods
        .par_iter()
        .map(|&method| {
            let base = depth(mesh, method)?;
            config
                .scales
                .iter()
                .zip(&scaled)
                .map(|(&s, sm)| {
                    let d = depth(sm, method)?;
                    let fit = linear_regression(base.values(), d.values())?;
                    let max_relative_deviation = (method == DepthMethod::DpfStar).then(|| {
                        let scale = base.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        let worst =
                            d.values().iter().zip(base.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        worst / scale
                    });
                    Ok(ScaleRow {
                        method,
                        scale: s,
                        slope: fit.slope,
                        intercept: fit.intercept,
                        r: fit.r,
                        residual_rms: fit.residual_rms(),
                        max_relative_deviation,
                        residuals: fit.residuals,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Expe2Report {
        experiment: "expe2",
        version: crate::VERSION,
        config: effective,
        characteristic_length_mm: length,
        rows: rows.into_iter().flatten().collect(),
    })
}

impl Expe2Report {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("expe2_report.json"), self)?;
        let mut csv = String::from("method,scale,slope,intercept,r,residual_rms,max_relative_deviation\n");
        for r in &self.rows {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                r.method,
                r.scale,
                r.slope,
                r.intercept,
                r.r,
                r.residual_rms,
                r.max_relative_deviation.map(|v| v.to_string()).unwrap_or_default()
            )
            .unwrap();
            let mut res = String::from("vertex_index,residual\n");
            for (i, v) in r.residuals.iter().enumerate() {
                writeln!(res, "{i},{v}").unwrap();
            }
            fs::write(dir.join(format!("residuals_{}_s{}.csv", r.method, r.scale)), res)?;
        }
        fs::write(dir.join("expe2_regressions.csv"), csv)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe3Config {
    pub methods: Vec<DepthMethod>,
    pub alpha: f64,
    pub window: usize,
    /// defaults to at most eight windows
    pub n_windows: Option<usize>,
    /// weight Wasserstein samples by vertex area
    pub area_weighted: bool,
    pub settings: DepthSettings,
}

impl Default for Expe3Config {
    fn default() -> Self {
        Self {
            methods: vec![DepthMethod::DpfStar, DepthMethod::Sulc],
            alpha: crate::depth::DEFAULT_ALPHA,
            window: 10,
            n_windows: None,
            area_weighted: false,
            settings: DepthSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CentileRow {
    pub subject: String,
    pub method: DepthMethod,
    pub length_mm: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsProfile {
    pub method: DepthMethod,
    pub window_starts: Vec<usize>,
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Expe3Report {
    pub experiment: &'static str,
    pub version: &'static str,
    pub config: Expe3Config,
    pub centiles: Vec<CentileRow>,
    pub profiles: Vec<KsProfile>,
    /// Spearman correlation of each method's 95th centile with size;
    /// `None` when all sizes are equal
    pub p95_size_correlation: Vec<(DepthMethod, Option<f64>)>,
    #[serde(skip)]
    pub matrices: Vec<DistanceMatrix>,
}

pub fn run_expe3(subjects: &[Subject], config: &Expe3Config) -> Result<Expe3Report> {
    let n = subjects.len();
    if n < 2 * config.window {
        return Err(Error::domain(format!(
            "{n} surfaces is fewer than twice the window of {}",
            config.window
        )));
    }
    if config.methods.is_empty() {
        return Err(Error::EmptyInput("no methods".into()));
    }
    let n_windows = config.n_windows.unwrap_or_else(|| 8.min(n - config.window + 1));
    let starts = window_starts(n, config.window, n_windows)?;

    // per subject: length, areas, one depth map per method
    let computed: Vec<(f64, Vec<f64>, Vec<DepthMap>)> = subjects
        .par_iter()
        .map(|s| {
            let length = s.mesh.characteristic_length()?;
            let maps = config
                .methods
                .iter()
                .map(|&m| compute_depth(&s.mesh, &config.settings.request(m, config.alpha)))
                .collect::<Result<Vec<_>>>()?;
            Ok((length, s.mesh.vertex_areas().into_values(), maps))
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| computed[i].0.total_cmp(&computed[j].0).then_with(|| subjects[i].id.cmp(&subjects[j].id)));

    let mut centiles = Vec::new();
    let mut matrices = Vec::new();
    let mut profiles = Vec::new();
    let mut p95_size_correlation = Vec::new();
    for (k, &method) in config.methods.iter().enumerate() {
        let mut p95 = Vec::new();
        for &i in &order {
            let mut v = computed[i].2[k].values().to_vec();
            v.sort_by(f64::total_cmp);
            let row = CentileRow {
                subject: subjects[i].id.clone(),
                method,
                length_mm: computed[i].0,
                p5: percentile_sorted(&v, 5.0),
                p25: percentile_sorted(&v, 25.0),
                p50: percentile_sorted(&v, 50.0),
                p75: percentile_sorted(&v, 75.0),
                p95: percentile_sorted(&v, 95.0),
                mean: mean(&v),
            };
            p95.push(row.p95);
            centiles.push(row);
        }
        let lengths: Vec<f64> = order.iter().map(|&i| computed[i].0).collect();
        p95_size_correlation.push((method, spearman(&lengths, &p95).ok()));

        let samples: Vec<SubjectSample> = order
            .iter()
            .map(|&i| SubjectSample {
                id: subjects[i].id.clone(),
                length: computed[i].0,
                values: computed[i].2[k].values().to_vec(),
                weights: config.area_weighted.then(|| computed[i].1.clone()),
            })
            .collect();
        let matrix = distance_matrix(&samples, method.name(), config.area_weighted)?;
        profiles.push(KsProfile {
            method,
            window_starts: starts.clone(),
            statistics: subgroup_ks_profile(&matrix, config.window, n_windows)?,
        });
        matrices.push(matrix);
    }
    let mut effective = config.clone();
    effective.n_windows = Some(n_windows);
    Ok(Expe3Report {
        experiment: "expe3",
        version: crate::VERSION,
        config: effective,
        centiles,
        profiles,
        p95_size_correlation,
        matrices,
    })
}

impl Expe3Report {
    pub fn profile(&self, method: DepthMethod) -> Option<&KsProfile> {
        self.profiles.iter().find(|p| p.method == method)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("expe3_report.json"), self)?;
        let mut csv = String::from("subject,method,length_mm,p5,p25,p50,p75,p95,mean\n");
        for c in &self.centiles {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                c.subject, c.method, c.length_mm, c.p5, c.p25, c.p50, c.p75, c.p95, c.mean
            )
            .unwrap();
        }
        fs::write(dir.join("expe3_centiles.csv"), csv)?;
        for m in &self.matrices {
            m.save_csv(&dir.join(format!("distances_{}.csv", m.method)))?;
        }
        let profiles: Vec<(&str, &Vec<f64>)> = self.profiles.iter().map(|p| (p.method.name(), &p.statistics)).collect();
        write_json(&dir.join("ks_profiles.json"), &profiles)?;
        Ok(())
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
