//! `sulcdepth` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime or domain error, 2 usage error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sulcdepth::depth::{compute_depth, DepthRequest, DEFAULT_ALPHA};
use sulcdepth::experiments::{
    phantom_suite, population_specs, run_expe1, run_expe2, run_expe3, write_json, DepthSettings, Expe1Config,
    Expe2Config, Expe3Config, Subject, DEFAULT_ALPHAS,
};
use sulcdepth::landmarks::{load_landmarks, save_landmarks};
use sulcdepth::mesh::{load_mesh, save_field, save_mesh, sibling, MeshFormat, PlyEncoding};
use sulcdepth::{CurvatureMethod, DepthMethod, PhantomSpec, SolverBackend, SulcParams, VertexField};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "sulcdepth", version, about = "Scale-invariant sulcal depth on triangle meshes")]
struct Cli {
    /// key=value file overriding built-in defaults; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a per-vertex depth map.
    Depth(DepthArgs),
    /// Landmark metrics across a grid of alpha values.
    Expe1(Expe1Args),
    /// Regress depth on uniformly scaled copies against the original.
    Expe2(Expe2Args),
    /// Depth distributions over a population ordered by size.
    Expe3(Expe3Args),
    /// Write a wrinkled-sphere phantom and its landmarks.
    Phantom(PhantomArgs),
}

#[derive(Args, Default)]
struct SettingsArgs {
    /// direct or cg
    #[arg(long)]
    solver: Option<SolverBackend>,
    /// tensor or cotan_normal
    #[arg(long)]
    curvature: Option<CurvatureMethod>,
    #[arg(long)]
    cg_tolerance: Option<f64>,
    #[arg(long)]
    cg_max_iterations: Option<usize>,
    #[arg(long)]
    sulc_iterations: Option<usize>,
    /// largest per-iteration displacement in mm
    #[arg(long)]
    sulc_step: Option<f64>,
    #[arg(long)]
    sulc_lambda: Option<f64>,
    #[arg(long)]
    sulc_relaxation: Option<f64>,
}

#[derive(Args)]
struct DepthArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// dpf, dpf_star, dpf_star_abs, sulc or curv
    #[arg(long)]
    method: Option<DepthMethod>,
    /// mm⁻² for dpf, dimensionless for dpf_star and dpf_star_abs
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// CSV, or PLY with a `quality` property plus a CSV alongside
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct SurfaceSource {
    /// comma-separated mesh paths, or a directory of .ply/.obj files
    #[arg(long, value_delimiter = ',', conflicts_with = "phantoms")]
    surfaces: Option<Vec<PathBuf>>,
    /// use a built-in generated set of this many phantoms instead
    #[arg(long)]
    phantoms: Option<usize>,
    #[arg(long, default_value_t = 4)]
    subdivisions: u32,
}

#[derive(Args)]
struct Expe1Args {
    #[command(flatten)]
    source: SurfaceSource,
    /// directory holding <stem>_crest.csv and <stem>_fundi.csv per surface;
    /// defaults to each surface's own directory
    #[arg(long)]
    landmarks: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alphas: Option<Vec<f64>>,
    /// also score sulc and curv
    #[arg(long)]
    baselines: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct Expe2Args {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scales: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<DepthMethod>>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// mm⁻² parameter of raw dpf; defaults to alpha / L² of the input
    #[arg(long, allow_hyphen_values = true)]
    dpf_alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct Expe3Args {
    #[command(flatten)]
    source: SurfaceSource,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<DepthMethod>>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    n_windows: Option<usize>,
    /// weight each vertex by its area in the Wasserstein distances
    #[arg(long)]
    area_weighted: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    amplitude: f64,
    #[arg(long, default_value_t = 6)]
    frequency: u32,
    #[arg(long, default_value_t = 4)]
    subdivisions: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    roughness: f64,
    /// per-axis stretch, e.g. 1.2,1,0.85
    #[arg(long, value_delimiter = ',')]
    axes: Option<Vec<f64>>,
    /// .ply path; landmarks are written to <stem>_crest.csv and <stem>_fundi.csv
    #[arg(long)]
    out: PathBuf,
}

/// Diagnostic for exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    init_threads()?;
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Depth(a) => cmd_depth(a, &cfg),
        Command::Expe1(a) => cmd_expe1(a, &cfg),
        Command::Expe2(a) => cmd_expe2(a, &cfg),
        Command::Expe3(a) => cmd_expe3(a, &cfg),
        Command::Phantom(a) => cmd_phantom(a),
    }
}

fn init_threads() -> CmdResult {
    let Ok(raw) = std::env::var("SULCDEPTH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure(format!("SULCDEPTH_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn settings(a: &SettingsArgs, cfg: &ConfigFile) -> Result<DepthSettings, Failure> {
    let mut s = DepthSettings::default();
    if let Some(v) = cfg.pick(a.solver, "solver")? {
        s.solver.backend = v;
    }
    if let Some(v) = cfg.pick(a.cg_tolerance, "cg_tolerance")? {
        s.solver.cg_tolerance = v;
    }
    if let Some(v) = cfg.pick(a.cg_max_iterations, "cg_max_iterations")? {
        s.solver.cg_max_iterations = Some(v);
    }
    if let Some(v) = cfg.pick(a.curvature, "curvature")? {
        s.curvature = v;
    }
    let d = SulcParams::default();
    s.sulc = SulcParams {
        iterations: cfg.pick(a.sulc_iterations, "sulc_iterations")?.unwrap_or(d.iterations),
        step: cfg.pick(a.sulc_step, "sulc_step")?.or(d.step),
        lambda: cfg.pick(a.sulc_lambda, "sulc_lambda")?.unwrap_or(d.lambda),
        relaxation: cfg.pick(a.sulc_relaxation, "sulc_relaxation")?.unwrap_or(d.relaxation),
    };
    Ok(s)
}

#[derive(Serialize)]
struct Sidecar {
    version: &'static str,
    method: DepthMethod,
    /// `None` for methods without a smoothing parameter
    alpha: Option<f64>,
    #[serde(rename = "L_mm")]
    l_mm: Option<f64>,
    volume_mm3: Option<f64>,
    solver: SolverBackend,
    curvature: CurvatureMethod,
    n_vertices: usize,
    runtime_ms: f64,
}

fn cmd_depth(a: DepthArgs, cfg: &ConfigFile) -> CmdResult {
    let s = settings(&a.settings, cfg)?;
    let method = cfg.pick(a.method, "method")?.unwrap_or(DepthMethod::DpfStar);
    let alpha = cfg.pick(a.alpha, "alpha")?.unwrap_or(DEFAULT_ALPHA);
    let mesh = load_mesh(&a.mesh, MeshFormat::Auto)?;
    let start = Instant::now();
    let map = compute_depth(
        &mesh,
        &DepthRequest {
            method,
            alpha,
            curvature: s.curvature,
            solver: s.solver,
            sulc: s.sulc,
        },
    )?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let field = VertexField::for_mesh(&mesh, map.values().to_vec(), method.unit())?;
    save_field(&mesh, &field, &a.out)?;
    let geometry = mesh.global_geometry().ok();
    let sidecar = Sidecar {
        version: sulcdepth::VERSION,
        method,
        alpha: map.alpha,
        l_mm: geometry.map(|g| g.characteristic_length_mm),
        volume_mm3: geometry.map(|g| g.volume_mm3),
        solver: s.solver.backend,
        curvature: s.curvature,
        n_vertices: mesh.n_vertices(),
        runtime_ms,
    };
    write_json(&a.out.with_extension("json"), &sidecar)?;
    Ok(())
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("ply" | "obj")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure(format!("no .ply or .obj files in {}", dir.display())));
    }
    Ok(files)
}

fn surface_paths(list: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    match list {
        [single] if single.is_dir() => mesh_files(single),
        _ => Ok(list.to_vec()),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("surface").to_string()
}

/// Loads surfaces, attaching landmarks from `landmark_dir` (or each mesh's
/// directory) when `need_landmarks` is set.
fn load_subjects(
    source: &SurfaceSource,
    landmark_dir: Option<&Path>,
    need_landmarks: bool,
    generated: fn(usize, u32) -> Vec<PhantomSpec>,
) -> Result<Vec<Subject>, Failure> {
    if let Some(n) = source.phantoms {
        return generated(n, source.subdivisions)
            .iter()
            .enumerate()
            .map(|(k, spec)| Subject::from_phantom(format!("phantom_{k:03}"), spec).map_err(Failure::from))
            .collect();
    }
    let Some(list) = &source.surfaces else {
        return Err(Failure("one of --surfaces or --phantoms is required".into()));
    };
    surface_paths(list)?
        .iter()
        .map(|path| {
            let mesh = load_mesh(path, MeshFormat::Auto)?;
            let landmarks = if need_landmarks {
                let base = match landmark_dir {
                    Some(d) => d.join(path.file_name().unwrap_or_default()),
                    None => path.clone(),
                };
                let crest = sibling(&base, "_crest.csv");
                let fundi = sibling(&base, "_fundi.csv");
                for p in [&crest, &fundi] {
                    if !p.is_file() {
                        return Err(Failure(format!("missing landmarks for {}: {}", path.display(), p.display())));
                    }
                }
                Some(load_landmarks(&mesh, &crest, &fundi)?)
            } else {
                None
            };
            Ok(Subject {
                id: stem(path),
                mesh,
                landmarks,
            })
        })
        .collect()
}

fn cmd_expe1(a: Expe1Args, cfg: &ConfigFile) -> CmdResult {
    let config = Expe1Config {
        alphas: cfg.pick_list(a.alphas, "alphas")?.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
        baselines: a.baselines || cfg.pick(None, "baselines")?.unwrap_or(false),
        settings: settings(&a.settings, cfg)?,
    };
    let subjects = load_subjects(&a.source, a.landmarks.as_deref(), true, phantom_suite)?;
    let report = run_expe1(&subjects, &config)?;
    report.write(&a.out)?;
    println!("alpha intersection: {:?}", report.intersection);
    Ok(())
}

fn cmd_expe2(a: Expe2Args, cfg: &ConfigFile) -> CmdResult {
    let d = Expe2Config::default();
    let config = Expe2Config {
        scales: cfg.pick_list(a.scales, "scales")?.unwrap_or(d.scales),
        methods: cfg.pick_list(a.methods, "methods")?.unwrap_or(d.methods),
        alpha: cfg.pick(a.alpha, "alpha")?.unwrap_or(d.alpha),
        dpf_alpha: cfg.pick(a.dpf_alpha, "dpf_alpha")?,
        settings: settings(&a.settings, cfg)?,
    };
    let mesh = load_mesh(&a.mesh, MeshFormat::Auto)?;
    let report = run_expe2(&mesh, &config)?;
    report.write(&a.out)?;
    for row in &report.rows {
        println!("{} s={} slope={:.6} r={:.9}", row.method, row.scale, row.slope, row.r);
    }
    Ok(())
}

fn cmd_expe3(a: Expe3Args, cfg: &ConfigFile) -> CmdResult {
    let d = Expe3Config::default();
    let config = Expe3Config {
        methods: cfg.pick_list(a.methods, "methods")?.unwrap_or(d.methods),
        alpha: cfg.pick(a.alpha, "alpha")?.unwrap_or(d.alpha),
        window: cfg.pick(a.window, "window")?.unwrap_or(d.window),
        n_windows: cfg.pick(a.n_windows, "n_windows")?.or(d.n_windows),
        area_weighted: a.area_weighted || cfg.pick(None, "area_weighted")?.unwrap_or(d.area_weighted),
        settings: settings(&a.settings, cfg)?,
    };
    let subjects = load_subjects(&a.source, None, false, population_specs)?;
    let report = run_expe3(&subjects, &config)?;
    report.write(&a.out)?;
    for p in &report.profiles {
        println!("{} ks profile: {:?}", p.method, p.statistics);
    }
    Ok(())
}

fn cmd_phantom(a: PhantomArgs) -> CmdResult {
    let axes = match a.axes.as_deref() {
        None => [1.0; 3],
        Some(&[x, y, z]) => [x, y, z],
        Some(other) => return Err(Failure(format!("--axes needs 3 values, got {}", other.len()))),
    };
    let spec = PhantomSpec {
        radius: a.radius,
        amplitude: a.amplitude,
        frequency: a.frequency,
        subdivisions: a.subdivisions,
        seed: a.seed,
        jitter: a.jitter,
        axes,
        roughness: a.roughness,
    };
    let ph = spec.generate()?;
    save_mesh(&ph.mesh, &a.out, PlyEncoding::BinaryLittleEndian)?;
    let lm = ph.landmarks()?;
    save_landmarks(lm, &sibling(&a.out, "_crest.csv"), &sibling(&a.out, "_fundi.csv"))?;
    Ok(())
}
