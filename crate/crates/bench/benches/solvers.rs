use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sulcdepth::depth::{dpf_star, sulc, SolverConfig, SulcParams};
use sulcdepth::linalg::{conjugate_gradient, Cholesky};
use sulcdepth::{cotan_stiffness, mass_matrix, mean_curvature, CurvatureMethod, PhantomSpec, TriangleMesh};

fn phantom(subdivisions: u32) -> TriangleMesh {
    PhantomSpec::default().with_subdivisions(subdivisions).generate().unwrap().mesh
}

fn system(mesh: &TriangleMesh) -> (sulcdepth::linalg::CsrMatrix, Vec<f64>) {
    let s = cotan_stiffness(mesh);
    let m = mass_matrix(mesh);
    let alpha = 500.0 / mesh.characteristic_length().unwrap().powi(2);
    let a = s.matrix().add_scaled(alpha, m.matrix());
    let k = mean_curvature(mesh, CurvatureMethod::Tensor);
    let rhs: Vec<f64> = m.apply(k.values()).iter().map(|v| 2.0 * v).collect();
    (a, rhs)
}

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    for sub in [3, 4, 5] {
        let mesh = phantom(sub);
        g.bench_with_input(BenchmarkId::new("stiffness", mesh.n_vertices()), &mesh, |b, m| {
            b.iter(|| cotan_stiffness(black_box(m)))
        });
        g.bench_with_input(BenchmarkId::new("curvature_tensor", mesh.n_vertices()), &mesh, |b, m| {
            b.iter(|| mean_curvature(black_box(m), CurvatureMethod::Tensor))
        });
    }
    g.finish();
}

fn linear_solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("screened_poisson");
    g.sample_size(20);
    for sub in [3, 4, 5] {
        let mesh = phantom(sub);
        let (a, rhs) = system(&mesh);
        let n = mesh.n_vertices();
        g.bench_with_input(BenchmarkId::new("cholesky_factor_solve", n), &(), |b, _| {
            b.iter(|| Cholesky::factor(black_box(&a)).unwrap().solve(black_box(&rhs)))
        });
        let chol = Cholesky::factor(&a).unwrap();
        g.bench_with_input(BenchmarkId::new("cholesky_solve_only", n), &(), |b, _| {
            b.iter(|| chol.solve(black_box(&rhs)))
        });
        g.bench_with_input(BenchmarkId::new("conjugate_gradient", n), &(), |b, _| {
            b.iter(|| conjugate_gradient(black_box(&a), black_box(&rhs), 1e-10, 10 * n).unwrap())
        });
    }
    g.finish();
}

fn depth_maps(c: &mut Criterion) {
    let mut g = c.benchmark_group("depth");
    g.sample_size(10);
    let mesh = phantom(4);
    g.bench_function("dpf_star_direct", |b| {
        b.iter(|| dpf_star(black_box(&mesh), 500.0, &SolverConfig::default()).unwrap())
    });
    g.bench_function("dpf_star_cg", |b| {
        b.iter(|| dpf_star(black_box(&mesh), 500.0, &SolverConfig::conjugate_gradient()).unwrap())
    });
    g.bench_function("sulc", |b| b.iter(|| sulc(black_box(&mesh), &SulcParams::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, assembly, linear_solvers, depth_maps);
criterion_main!(benches);
