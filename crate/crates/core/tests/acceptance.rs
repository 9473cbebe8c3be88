//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sulcdepth::depth::{dpf_star_with, half_peak_radius};
use sulcdepth::experiments::{
    phantom_suite, population_specs, run_expe1, run_expe2, run_expe3, Expe1Config, Expe2Config, Expe3Config, Subject,
};
use sulcdepth::landmarks::{directional_lines, shortest_path};
use sulcdepth::mesh::shapes::icosphere;
use sulcdepth::phantom::two_ridge_patch;
use sulcdepth::stats::{ks_two_sample, quantile_wasserstein, wasserstein1d};
use sulcdepth::{
    adapt_alpha, dpf, green_impulse, mean_curvature, spectral_check, CurvatureField, CurvatureMethod, DepthMethod,
    PhantomSpec, SolverConfig, TriangleMesh,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn wrinkled() -> TriangleMesh {
    PhantomSpec::default().generate().unwrap().mesh
}

fn irregular() -> TriangleMesh {
    PhantomSpec {
        frequency: 5,
        seed: 7,
        jitter: 0.3,
        axes: [1.2, 1.0, 0.85],
        roughness: 0.2,
        ..PhantomSpec::default()
    }
    .generate()
    .unwrap()
    .mesh
}

fn scale_identity() -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for mesh in [wrinkled(), irregular()] {
        let k = mean_curvature(&mesh, CurvatureMethod::Tensor);
        for alpha in [50.0, 500.0] {
            let d = dpf(&mesh, alpha, &k, &cfg).unwrap();
            for s in [0.5, 2.0, 5.0] {
                let sm = mesh.scale(s).unwrap();
                let ks = mean_curvature(&sm, CurvatureMethod::Tensor);
                let ds = dpf(&sm, adapt_alpha(s, alpha).unwrap(), &ks, &cfg).unwrap();
                let back: Vec<f64> = ds.values().iter().map(|v| v / s).collect();
                worst = worst.max(max_rel_diff(&back, d.values()));
            }
        }
    }
    check(worst < 1e-8, format!("max relative deviation {worst:.2e} (limit 1e-8)"))
}

fn scale_invariance() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, mesh) in [("wrinkled", wrinkled()), ("irregular", irregular())] {
        let report = run_expe2(
            &mesh,
            &Expe2Config {
                scales: vec![2.0, 3.0, 4.0, 5.0],
                methods: vec![DepthMethod::DpfStar, DepthMethod::Sulc],
                ..Expe2Config::default()
            },
        )
        .unwrap();
        let (mut star_slope, mut star_r): (f64, f64) = (0.0, 0.0);
        let mut sulc = Vec::new();
        for row in &report.rows {
            match row.method {
                DepthMethod::DpfStar => {
                    star_slope = star_slope.max((row.slope - 1.0).abs());
                    star_r = star_r.max((row.r - 1.0).abs());
                }
                _ => {
                    let s = row.scale;
                    ok &= row.slope >= 0.8 * s && row.slope <= 1.2 * s && row.r < 1.0;
                    sulc.push(format!("s{s}: slope {:.3} r {:.6}", row.slope, row.r));
                }
            }
        }
        ok &= star_slope <= 1e-8 && star_r <= 1e-8;
        lines.push(format!(
            "{name}: dpf_star |slope-1| {star_slope:.1e} |r-1| {star_r:.1e}; sulc {}",
            sulc.join(", ")
        ));
    }
    check(ok, lines.join("; "))
}

fn analytic_sphere() -> Outcome {
    let cfg = SolverConfig::default();
    let unit = icosphere(3, 1.0);
    let k = CurvatureField::from_values(&unit, vec![1.0; unit.n_vertices()], CurvatureMethod::Tensor).unwrap();
    let d = dpf(&unit, 500.0, &k, &cfg).unwrap();
    let abs_err = d.values().iter().map(|v| (v - 2.0 / 500.0).abs()).fold(0.0, f64::max);

    let star = |r: f64| {
        let m = unit.scale(r).unwrap();
        let k = CurvatureField::from_values(&m, vec![1.0 / r; m.n_vertices()], CurvatureMethod::Tensor).unwrap();
        dpf_star_with(&m, 500.0, &k, &cfg).unwrap()
    };
    let (s1, s10) = (star(1.0), star(10.0));
    let rel = max_rel_diff(s10.values(), s1.values());
    check(
        abs_err < 1e-6 && rel < 1e-8,
        format!(
            "dpf constant error {abs_err:.1e} (limit 1e-6); dpf_star R=1 vs R=10 relative {rel:.1e} (limit 1e-8), value {:.6}",
            s1.values()[0]
        ),
    )
}

fn spectral_transfer() -> Outcome {
    let m = icosphere(3, 1.0);
    let k = mean_curvature(&m, CurvatureMethod::Tensor);
    let c = spectral_check(&m, 500.0, 10, &k).unwrap();
    check(c.discrepancy < 1e-6, format!("discrepancy {:.2e} (limit 1e-6)", c.discrepancy))
}

fn green_monotone() -> Outcome {
    let m = wrinkled();
    let length = m.characteristic_length().unwrap();
    let radii: Vec<f64> = [50.0, 500.0, 5000.0]
        .iter()
        .map(|a| {
            let g = green_impulse(&m, a / (length * length), 0, &SolverConfig::default()).unwrap();
            half_peak_radius(&m, g.values(), 0).unwrap()
        })
        .collect();
    check(
        radii[0] > radii[1] && radii[1] > radii[2],
        format!("half-peak radius {:.3} > {:.3} > {:.3} mm", radii[0], radii[1], radii[2]),
    )
}

/// Medians (std_crest, sep, dev) at alpha 0, 50 and 500 from the first run.
const FROZEN: [(f64, [f64; 3]); 3] = [
    (0.0, [0.2548, 0.5918, 17.512]),
    (50.0, [0.1616, 0.9008, 12.009]),
    (500.0, [0.1290, 0.9519, 16.675]),
];

fn expe1_shape() -> Outcome {
    let subjects: Vec<Subject> = phantom_suite(10, 4)
        .iter()
        .enumerate()
        .map(|(k, s)| Subject::from_phantom(format!("p{k:02}"), s).unwrap())
        .collect();
    let report = run_expe1(&subjects, &Expe1Config::default()).unwrap();
    let at = |a: f64| report.summary.iter().find(|s| s.alpha == a).unwrap();
    let sep_ok = at(0.0).median_sep <= at(50.0).median_sep && at(50.0).median_sep <= at(500.0).median_sep;
    let argmin = report
        .summary
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.median_dev.total_cmp(&b.1.median_dev))
        .unwrap()
        .0;
    let dev_ok = argmin > 0 && argmin + 1 < report.summary.len();
    let std_ok = at(500.0).median_std_crest < at(0.0).median_std_crest;
    let mut frozen_ok = true;
    let mut observed = Vec::new();
    for (alpha, expected) in FROZEN {
        let s = at(alpha);
        let got = [s.median_std_crest, s.median_sep, s.median_dev];
        observed.push(format!("a{alpha}: {:.4}/{:.4}/{:.3}", got[0], got[1], got[2]));
        for (g, e) in got.iter().zip(expected) {
            frozen_ok &= (g - e).abs() <= 0.05 * e.abs();
        }
    }
    check(
        sep_ok && dev_ok && std_ok && frozen_ok,
        format!(
            "sep non-decreasing {sep_ok}, dev minimum at alpha {} ({dev_ok}), std_crest 500 < 0 {std_ok}, frozen ±5% {frozen_ok} [{}]",
            report.summary[argmin].alpha,
            observed.join(", ")
        ),
    )
}

fn distribution_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let n = rng.random_range(1..=50);
        (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
    };
    let mut failures = 0;
    for _ in 0..1000 {
        let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
        let ab = wasserstein1d(&a, &b).unwrap();
        let ba = wasserstein1d(&b, &a).unwrap();
        let ac = wasserstein1d(&a, &c).unwrap();
        let bc = wasserstein1d(&b, &c).unwrap();
        let ok = ab >= 0.0
            && (ab - ba).abs() <= 1e-12 * (1.0 + ab)
            && wasserstein1d(&a, &a).unwrap() == 0.0
            && ac <= ab + bc + 1e-12
            && (ab - quantile_wasserstein(&a, &b).unwrap()).abs() <= 1e-9 * (1.0 + ab);
        let ks = ks_two_sample(&a, &b).unwrap();
        if !ok || !(0.0..=1.0).contains(&ks) {
            failures += 1;
        }
    }
    let w = wasserstein1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
    let ks = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
    let hand = (w - 1.0).abs() <= 1e-12 && (ks - 0.25).abs() <= 1e-12;
    check(
        failures == 0 && hand,
        format!("{failures} of 1000 random triples violate the axioms; W1 {{0,1}} vs {{1,2}} = {w}, KS = {ks}"),
    )
}

fn expe3_profile() -> Outcome {
    let subjects: Vec<Subject> = population_specs(40, 4)
        .iter()
        .enumerate()
        .map(|(k, s)| Subject::from_phantom(format!("f{k:02}"), s).unwrap())
        .collect();
    let report = run_expe3(
        &subjects,
        &Expe3Config {
            methods: vec![DepthMethod::DpfStar, DepthMethod::Sulc],
            window: 10,
            ..Expe3Config::default()
        },
    )
    .unwrap();
    let star = &report.profile(DepthMethod::DpfStar).unwrap().statistics;
    let sulc = &report.profile(DepthMethod::Sulc).unwrap().statistics;
    let ok = star.iter().zip(sulc).all(|(a, b)| a <= b);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    check(ok, format!("dpf_star [{}] vs sulc [{}]", fmt(star), fmt(sulc)))
}

fn directional_determinism() -> Outcome {
    let (mesh, landmarks) = two_ridge_patch(21, 33, 1.0);
    let runs: Vec<_> = (0..3).map(|_| directional_lines(&mesh, &landmarks).unwrap()).collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let crests: BTreeSet<usize> = landmarks.crests().iter().copied().collect();
    let paths = runs[0].directional();
    let mut verified = 0;
    for p in paths {
        let (f, c) = (p.source(), p.target());
        let line: BTreeSet<usize> = landmarks
            .fundi()
            .iter()
            .find(|l| l.contains(&f))
            .map(|l| l.iter().copied().collect())
            .unwrap_or_default();
        let forward = shortest_path(&mesh, f, &crests).unwrap();
        let backward = shortest_path(&mesh, c, &line).unwrap();
        if forward == *p && backward.target() == f && (backward.length - p.length).abs() <= 1e-12 * p.length.max(1.0) {
            verified += 1;
        }
    }
    check(
        identical && verified == paths.len() && !paths.is_empty(),
        format!("{verified}/{} paths mutually nearest; 3 runs bit-identical: {identical}", paths.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("scale identity of the depth potential", Duration::from_secs(30), scale_identity),
        ("scale invariance of dpf_star vs sulc", Duration::from_secs(120), scale_invariance),
        ("analytic sphere solution", Duration::MAX, analytic_sphere),
        ("spectral transfer function", Duration::MAX, spectral_transfer),
        ("impulse response narrows with alpha", Duration::MAX, green_monotone),
        ("experiment 1 qualitative shape", Duration::MAX, expe1_shape),
        ("Wasserstein / KS machinery", Duration::MAX, distribution_machinery),
        ("experiment 3 KS profile below sulc", Duration::from_secs(600), expe3_profile),
        ("directional lines mutual nearest and deterministic", Duration::MAX, directional_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *limit => Err(format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} [{tag}] {name}: {detail} ({elapsed:.2?})", i + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
