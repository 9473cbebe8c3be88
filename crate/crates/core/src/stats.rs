//! Distribution statistics: Wasserstein and Kolmogorov–Smirnov distances,
//! Welch's t-test, least squares, and subject-by-subject distance matrices.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Above this many samples per subject, distance matrices subsample by stride.
pub const SUBSAMPLE_THRESHOLD: usize = 200_000;
const SUBSAMPLE_TARGET: usize = 100_000;

fn require(a: &[f64], name: &str) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyInput(format!("{name} sample is empty")));
    }
    Ok(())
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut s = a.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Percentile `q ∈ [0, 100]` of sorted values, interpolating linearly
/// between order statistics.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    require(values, "percentile")?;
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::domain(format!("percentile {q} outside [0, 100]")));
    }
    Ok(percentile_sorted(&sorted(values), q))
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// First Wasserstein distance between two empirical distributions.
pub fn wasserstein1d(a: &[f64], b: &[f64]) -> Result<f64> {
    require(a, "first")?;
    require(b, "second")?;
    if a.len() == b.len() {
        let (sa, sb) = (sorted(a), sorted(b));
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64);
    }
    cdf_distance(a, None, b, None)
}

/// The same distance through `∫|F_a − F_b|`, valid for any sample sizes.
pub fn quantile_wasserstein(a: &[f64], b: &[f64]) -> Result<f64> {
    require(a, "first")?;
    require(b, "second")?;
    cdf_distance(a, None, b, None)
}

/// Wasserstein distance with per-sample weights (e.g. vertex areas).
pub fn weighted_wasserstein1d(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64]) -> Result<f64> {
    require(a, "first")?;
    require(b, "second")?;
    if a.len() != wa.len() || b.len() != wb.len() {
        return Err(Error::Contract("weights must match samples".into()));
    }
    if wa.iter().chain(wb).any(|&w| !(w >= 0.0)) || wa.iter().sum::<f64>() <= 0.0 || wb.iter().sum::<f64>() <= 0.0 {
        return Err(Error::domain("weights must be non-negative with positive total"));
    }
    cdf_distance(a, Some(wa), b, Some(wb))
}

fn weighted_sorted(a: &[f64], w: Option<&[f64]>) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = a.iter().enumerate().map(|(i, &x)| (x, w.map_or(1.0, |w| w[i]))).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.iter_mut().for_each(|p| p.1 /= total);
    pairs
}

fn cdf_distance(a: &[f64], wa: Option<&[f64]>, b: &[f64], wb: Option<&[f64]>) -> Result<f64> {
    let (sa, sb) = (weighted_sorted(a, wa), weighted_sorted(b, wb));
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut total = 0.0;
    let mut x = sa[0].0.min(sb[0].0);
    while i < sa.len() || j < sb.len() {
        let next = match (sa.get(i), sb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        total += (fa - fb).abs() * (next - x);
        x = next;
        while i < sa.len() && sa[i].0 == x {
            fa += sa[i].1;
            i += 1;
        }
        while j < sb.len() && sb[j].0 == x {
            fb += sb[j].1;
            j += 1;
        }
    }
    Ok(total)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    require(a, "first")?;
    require(b, "second")?;
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// two-sided
    pub p: f64,
}

pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::degenerate("t-test needs at least two samples per group"));
    }
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (var(a) / na, var(b) / nb);
    if qa + qb == 0.0 {
        return Err(Error::degenerate("both samples have zero variance"));
    }
    let t = (mean(a) - mean(b)) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::degenerate(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchTest { t, df, p })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; zero when `y` is constant
    pub r: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn residual_rms(&self) -> f64 {
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

/// Ordinary least squares fit `y ≈ slope·x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::Contract("regression needs paired samples".into()));
    }
    if x.len() < 2 {
        return Err(Error::degenerate("regression needs at least two points"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::degenerate("x has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    };
    let residuals = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    Ok(RegressionResult {
        slope,
        intercept,
        r,
        residuals,
    })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(linear_regression(&ranks(x), &ranks(y))?.r)
}

/// One subject's per-vertex sample for population comparisons.
#[derive(Debug, Clone)]
pub struct SubjectSample {
    pub id: String,
    /// characteristic length (mm), the ordering key
    pub length: f64,
    pub values: Vec<f64>,
    /// vertex areas, used only by the area-weighted variant
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceMatrix {
    pub method: String,
    /// subject ids, ascending characteristic length
    pub ids: Vec<String>,
    pub lengths: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// 1 unless large samples were subsampled
    pub stride: usize,
    pub area_weighted: bool,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id");
        for id in &self.ids {
            write!(out, ",{id}").unwrap();
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn stride_for(n: usize) -> usize {
    if n > SUBSAMPLE_THRESHOLD {
        n.div_ceil(SUBSAMPLE_TARGET)
    } else {
        1
    }
}

/// Pairwise Wasserstein distances between subjects ordered by size.
pub fn distance_matrix(subjects: &[SubjectSample], method: &str, area_weighted: bool) -> Result<DistanceMatrix> {
    if subjects.len() < 2 {
        return Err(Error::EmptyInput("distance matrix needs at least two subjects".into()));
    }
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.sort_by(|&i, &j| {
        subjects[i]
            .length
            .total_cmp(&subjects[j].length)
            .then_with(|| subjects[i].id.cmp(&subjects[j].id))
    });
    let stride = subjects.iter().map(|s| stride_for(s.values.len())).max().unwrap();
    let pick = |v: &[f64]| -> Vec<f64> { v.iter().step_by(stride).copied().collect() };
    let samples: Vec<(Vec<f64>, Option<Vec<f64>>)> = order
        .iter()
        .map(|&i| {
            let s = &subjects[i];
            let w = if area_weighted {
                Some(pick(s.weights.as_deref().ok_or_else(|| Error::Contract(format!("subject {} has no weights", s.id)))?))
            } else {
                None
            };
            Ok((pick(&s.values), w))
        })
        .collect::<Result<_>>()?;
    let n = subjects.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| match (&samples[i], &samples[j]) {
            ((a, Some(wa)), (b, Some(wb))) => weighted_wasserstein1d(a, wa, b, wb),
            ((a, _), (b, _)) => wasserstein1d(a, b),
        })
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[i][j] = d;
        values[j][i] = d;
    }
    Ok(DistanceMatrix {
        method: method.to_string(),
        ids: order.iter().map(|&i| subjects[i].id.clone()).collect(),
        lengths: order.iter().map(|&i| subjects[i].length).collect(),
        values,
        stride,
        area_weighted,
    })
}

/// Start index of each of `n_windows` evenly spaced windows over `n` subjects.
pub fn window_starts(n: usize, window: usize, n_windows: usize) -> Result<Vec<usize>> {
    if window < 2 || window > n {
        return Err(Error::domain(format!("window {window} must lie in [2, {n}]")));
    }
    if n_windows == 0 {
        return Err(Error::domain("at least one window is required"));
    }
    let span = n - window;
    Ok((0..n_windows)
        .map(|k| {
            if n_windows == 1 {
                span
            } else {
                ((k * span) as f64 / (n_windows - 1) as f64).round() as usize
            }
        })
        .collect())
}

fn upper_triangle(m: &DistanceMatrix, start: usize, window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(window * (window - 1) / 2);
    for i in start..start + window {
        for j in i + 1..start + window {
            out.push(m.get(i, j));
        }
    }
    out
}

/// KS statistic between each window's within-window distances and those of
/// the last window (the largest subjects).
pub fn subgroup_ks_profile(matrix: &DistanceMatrix, window: usize, n_windows: usize) -> Result<Vec<f64>> {
    let starts = window_starts(matrix.len(), window, n_windows)?;
    let reference = upper_triangle(matrix, *starts.last().unwrap(), window);
    starts
        .iter()
        .map(|&s| ks_two_sample(&upper_triangle(matrix, s, window), &reference))
        .collect()
}
