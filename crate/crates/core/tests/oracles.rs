//! Fast paths checked against slow, obviously correct references.

use cutdg::analysis::{diagnostics, DiagnosticsOptions};
use cutdg::spectrum::{
    dense_condition, dense_generalized_eigenvalues, dense_generalized_singular_values, min_generalized_eigenvalue,
    min_generalized_singular_value,
};
use cutdg::{
    estimate_condition, solve_bicgstab, solve_direct, BackgroundMesh, Discretization, GeometryOptions, LevelSet,
    ManufacturedProblem, PenaltyParameters, SparseMatrix, SpectrumOptions, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_system(k: usize, penalties: PenaltyParameters<f64>) -> Discretization<f64> {
    let ls = LevelSet::sphere(1.0);
    let m = ManufacturedProblem::new(1.0, ls.clone()).unwrap();
    let mesh = BackgroundMesh::build(Vec3::splat(-1.21), Vec3::splat(1.21), [5; 3]).unwrap().shifted(0.37).unwrap();
    Discretization::build(ls, mesh, k, m.problem_data(), penalties, GeometryOptions::for_degree(k)).unwrap()
}

/// Diagonally dominant-ish random sparse matrix.
fn random_sparse(n: usize, seed: u64) -> SparseMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 + rng.random_range(0.0..3.0)));
        for _ in 0..4 {
            t.push((i, rng.random_range(0..n), rng.random_range(-1.0..1.0)));
        }
    }
    SparseMatrix::from_triplets(n, &t).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn condition_estimate_matches_dense_svd_on_random_matrices() {
    for seed in 0..3 {
        let a = random_sparse(200, seed);
        let est = estimate_condition(&a, &SpectrumOptions::default()).unwrap();
        let dense = dense_condition(&a).unwrap();
        assert!(rel(est.sigma_max, dense.sigma_max) < 1e-6);
        assert!(rel(est.sigma_min.unwrap(), dense.sigma_min.unwrap()) < 1e-6);
        assert!(rel(est.cond.unwrap(), dense.cond.unwrap()) < 1e-6);
    }
}

#[test]
fn condition_estimate_matches_dense_svd_on_system() {
    let d = small_system(1, PenaltyParameters::defaults(1));
    assert!(d.ndofs() <= 2000);
    let est = estimate_condition(&d.system.matrix, &SpectrumOptions::default()).unwrap();
    let dense = dense_condition(&d.system.matrix).unwrap();
    assert!(rel(est.cond.unwrap(), dense.cond.unwrap()) < 1e-6);
}

#[test]
fn generalized_estimates_match_dense() {
    let d = small_system(1, PenaltyParameters::defaults(1));
    let mut g_up = d.system.gram_up.clone();
    g_up.add_scaled(1.0, &d.system.gram_stab);
    let sym = d.system.matrix.symmetric_part();
    let opts = SpectrumOptions::default();
    let lanczos = min_generalized_eigenvalue(&sym, &g_up, &opts).unwrap().value;
    let dense = dense_generalized_eigenvalues(&sym, &g_up).unwrap();
    let dense_min = dense.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(rel(lanczos, dense_min) < 1e-6, "{lanczos} vs {dense_min}");

    let mut g_sd = d.system.gram_sd.clone();
    g_sd.add_scaled(1.0, &d.system.gram_stab);
    let lanczos = min_generalized_singular_value(&d.system.matrix, &g_sd, &opts).unwrap().value;
    let dense = dense_generalized_singular_values(&d.system.matrix, &g_sd).unwrap();
    let dense_min = dense.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(rel(lanczos, dense_min) < 1e-6, "{lanczos} vs {dense_min}");
}

#[test]
fn coercivity_collapses_without_normal_penalty() {
    let d = small_system(1, PenaltyParameters::defaults(1));
    let opts = DiagnosticsOptions {
        infsup_limit: 0,
        ..Default::default()
    };
    let full = diagnostics(&d.space, &d.data, &d.system, &opts).unwrap();
    let ablated = d.system.with_penalties(PenaltyParameters { gamman: 0.0, ..PenaltyParameters::defaults(1) });
    let opts = DiagnosticsOptions {
        reference_stab: Some(d.system.gram_stab.clone()),
        ..opts
    };
    let weak = diagnostics(&d.space, &d.data, &ablated, &opts).unwrap();
    assert!(full.coercivity_min > 0.0);
    assert!(weak.coercivity_min < full.coercivity_min);
}

#[test]
fn iterative_and_direct_solutions_agree() {
    let d = small_system(2, PenaltyParameters::defaults(2));
    let direct = solve_direct(&d.system.matrix, &d.system.rhs).unwrap();
    let iterative = solve_bicgstab(&d.system.matrix, &d.system.rhs, 1e-10, 10_000).unwrap();
    assert!(iterative.converged, "{} after {}", iterative.relative_residual, iterative.iterations);
    let scale = direct.solution.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for (a, b) in direct.solution.iter().zip(&iterative.solution) {
        assert!((a - b).abs() < 1e-8 * scale);
    }
}

#[test]
fn manufactured_source_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (eps, ls) in [(1.0f64, LevelSet::sphere(1.0)), (1e-3, LevelSet::torus(1.0, 1.0 / 3.0))] {
        let m = ManufacturedProblem::new(eps, ls.clone()).unwrap();
        for _ in 0..200 {
            let raw = Vec3::new(rng.random_range(-1.3..1.3), rng.random_range(-1.3..1.3), rng.random_range(-0.3..0.3));
            let Ok(x) = ls.closest_point(raw) else { continue };
            let n = ls.extended_normal(x).unwrap();
            let h = 1e-6;
            let mut g = Vec3::zero();
            for axis in 0..3 {
                let e = Vec3::unit(axis) * h;
                g[axis] = (m.u(x + e) - m.u(x - e)) / (2.0 * h);
            }
            let fd = m.velocity(x).dot(g.project_tangent(n)) + m.u(x);
            let f = m.source(x).unwrap();
            assert!((f - fd).abs() < 1e-6 * (1.0 + f.abs()), "{f} vs {fd} at {x:?}");
        }
    }
}

#[test]
fn velocity_is_tangential_on_surfaces_of_revolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for ls in [LevelSet::sphere(1.0f64), LevelSet::torus(1.0, 1.0 / 3.0)] {
        let m = ManufacturedProblem::new(1.0, ls.clone()).unwrap();
        for _ in 0..100 {
            let raw = Vec3::new(rng.random_range(-1.3..1.3), rng.random_range(-1.3..1.3), rng.random_range(-0.3..0.3));
            let Ok(x) = ls.closest_point(raw) else { continue };
            let n = ls.extended_normal(x).unwrap();
            assert!(m.velocity(x).dot(n).abs() < 1e-12);
        }
    }
}
