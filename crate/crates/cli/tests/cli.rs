use std::path::Path;
use std::process::{Command, Output};

use sulcdepth::mesh::shapes::icosphere;
use sulcdepth::mesh::{save_mesh, PlyEncoding};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sulcdepth"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SULCDEPTH_THREADS").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect()
}

fn unit_sphere(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("sphere.ply");
    save_mesh(&icosphere(3, 1.0), &path, PlyEncoding::Ascii).unwrap();
    path
}

#[test]
fn missing_mesh_is_a_usage_error() {
    let out = run(&["depth", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn negative_alpha_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = unit_sphere(dir.path());
    let out = run(&["depth", "--mesh", p(&mesh), "--alpha", "-1", "--out", p(&dir.path().join("d.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("domain error"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn dpf_star_on_unit_sphere_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = unit_sphere(dir.path());
    let out_csv = dir.path().join("d.csv");
    let out = run(&["depth", "--mesh", p(&mesh), "--method", "dpf_star", "--alpha", "500", "--out", p(&out_csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // K = 1/R on a sphere, so the solve at alpha / L^2 gives 2 L^2 / (R alpha)
    // and dividing by L leaves 2 L / alpha for R = 1, L the cube root of the volume
    let expected = 2.0 * (4.0 * std::f64::consts::PI / 3.0f64).cbrt() / 500.0;
    let v = read_values(&out_csv);
    assert_eq!(v.len(), 642);
    for x in &v {
        // the inscribed polyhedron's volume is slightly below the sphere's
        assert!((x - expected).abs() < 5e-3 * expected, "{x} vs {expected}");
    }
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    for key in ["method", "alpha", "L_mm", "volume_mm3", "solver", "runtime_ms"] {
        assert!(sidecar.get(key).is_some(), "sidecar lacks {key}");
    }
    assert_eq!(sidecar["method"], "dpf_star");
    assert_eq!(sidecar["alpha"], 500.0);
    let l = sidecar["L_mm"].as_f64().unwrap();
    let vol = sidecar["volume_mm3"].as_f64().unwrap();
    assert!((l.powi(3) - vol).abs() < 1e-9 * vol);
}

#[test]
fn config_file_overrides_defaults_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = unit_sphere(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "method = dpf_star_abs\nalpha = 100\nsolver = cg\n").unwrap();
    let a = dir.path().join("a.csv");
    let out = run(&["--config", p(&cfg), "depth", "--mesh", p(&mesh), "--out", p(&a)]);
    assert!(out.status.success());
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(side["method"], "dpf_star_abs");
    assert_eq!(side["alpha"], 100.0);
    assert_eq!(side["solver"], "conjugate_gradient");
    // abs depth of a unit sphere is 2 L^2 / alpha
    let l = side["L_mm"].as_f64().unwrap();
    assert!(read_values(&a).iter().all(|x| (x - 2.0 * l * l / 100.0).abs() < 1e-6));

    let b = dir.path().join("b.csv");
    let out = run(&["--config", p(&cfg), "depth", "--mesh", p(&mesh), "--alpha", "400", "--out", p(&b)]);
    assert!(out.status.success());
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(side["alpha"], 400.0);

    std::fs::write(&cfg, "alhpa = 1\n").unwrap();
    let out = run(&["--config", p(&cfg), "depth", "--mesh", p(&mesh), "--out", p(&b)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_thread_count_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = unit_sphere(dir.path());
    let out = bin()
        .args(["depth", "--mesh", p(&mesh), "--out", p(&dir.path().join("d.csv"))])
        .env("SULCDEPTH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["depth", "--mesh", p(&mesh), "--out", p(&dir.path().join("d.csv"))])
        .env("SULCDEPTH_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn phantom_then_expe1_and_missing_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, amp) in [("a", "3"), ("b", "2.5")] {
        let mesh = d.join(format!("{name}.ply"));
        let out = run(&["phantom", "--subdivisions", "3", "--amplitude", amp, "--jitter", "0.2", "--out", p(&mesh)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(d.join(format!("{name}_crest.csv")).is_file());
        assert!(d.join(format!("{name}_fundi.csv")).is_file());
    }
    let surfaces = format!("{},{}", p(&d.join("a.ply")), p(&d.join("b.ply")));
    let report = d.join("r1");
    let out = run(&["expe1", "--surfaces", &surfaces, "--alphas", "50,500", "--out", p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("expe1_report.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    assert_eq!(json["config"]["alphas"], serde_json::json!([50.0, 500.0]));

    std::fs::remove_file(d.join("b_fundi.csv")).unwrap();
    let out = run(&["expe1", "--surfaces", &surfaces, "--alphas", "50", "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing landmarks"));
}

#[test]
fn expe2_writes_regressions() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("p.ply");
    assert!(run(&["phantom", "--subdivisions", "3", "--out", p(&mesh)]).status.success());
    let out_dir = dir.path().join("e2");
    let out = run(&[
        "expe2", "--mesh", p(&mesh), "--scales", "2,3", "--methods", "dpf_star", "--out", p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("expe2_report.json")).unwrap()).unwrap();
    for row in json["rows"].as_array().unwrap() {
        assert!((row["slope"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
    assert!(out_dir.join("expe2_regressions.csv").is_file());
}

#[test]
fn expe3_needs_two_windows_of_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["expe3", "--phantoms", "5", "--subdivisions", "2", "--window", "3", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[
        "expe3", "--phantoms", "6", "--subdivisions", "2", "--window", "3", "--methods", "dpf_star", "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("expe3_centiles.csv").is_file());
    assert!(dir.path().join("distances_dpf_star.csv").is_file());
}
