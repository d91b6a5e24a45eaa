//! Structural invariants checked on randomized meshes and coefficient vectors.

use cutdg::assembly::assemble_components;
use cutdg::basis::{BasisEval, TensorBasis};
use cutdg::{
    BackgroundMesh, DgSpace, Discretization, FieldVector, GeometryOptions, LevelSet, ManufacturedProblem,
    PenaltyParameters, SurfaceGeometry, Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_space(radius: f64, delta: f64, n: usize, k: usize) -> DgSpace<f64> {
    let mesh = BackgroundMesh::build(Vec3::splat(-1.21), Vec3::splat(1.21), [n; 3])
        .unwrap()
        .shifted(delta)
        .unwrap();
    let g = SurfaceGeometry::build(LevelSet::sphere(radius), mesh, GeometryOptions::for_degree(k)).unwrap();
    DgSpace::new(g, k).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_gradient_matches_finite_differences(
        k in 1usize..=5,
        p in prop::array::uniform3(0.05f64..0.95),
        size in prop::array::uniform3(0.1f64..2.0),
    ) {
        let basis = TensorBasis::new(k);
        let origin = Vec3::new(-0.3, 0.2, 1.0);
        let size = Vec3::from_array(size);
        let x = origin + Vec3::new(p[0] * size.x, p[1] * size.y, p[2] * size.z);
        let mut ev = BasisEval::default();
        let mut plus = BasisEval::default();
        let mut minus = BasisEval::default();
        basis.eval(origin, size, x, &mut ev);
        let step = 1e-6;
        for axis in 0..3 {
            let e = Vec3::unit(axis) * step;
            basis.eval(origin, size, x + e, &mut plus);
            basis.eval(origin, size, x - e, &mut minus);
            for i in 0..basis.len() {
                let fd = (plus.values[i] - minus.values[i]) / (2.0 * step);
                let scale = 1.0 + ev.gradients[i][axis].abs();
                prop_assert!((fd - ev.gradients[i][axis]).abs() < 1e-5 * scale);
            }
        }
    }

    #[test]
    fn reconstruction_is_watertight(radius in 0.55f64..1.0, delta in 0.0f64..1.0) {
        let space = sphere_space(radius, delta, 10, 1);
        let g = space.geometry();
        prop_assert_eq!(g.stats().open_segments, 0);
        let exact = 4.0 * std::f64::consts::PI * radius * radius;
        prop_assert!((g.area() - exact).abs() < 0.1 * exact);
        for edge in g.edges() {
            // The two one-sided conormals point away from their own patch.
            prop_assert!(edge.conormals[0].dot(edge.conormals[1]) < 0.0);
        }
    }

    #[test]
    fn surface_normals_are_unit_and_orthogonal(radius in 0.55f64..1.0, delta in 0.0f64..1.0) {
        let space = sphere_space(radius, delta, 6, 1);
        for patch in space.geometry().patches() {
            for t in &patch.triangles {
                prop_assert!((t.normal.norm() - 1.0).abs() < 1e-12);
                for e in [t.vertices[1] - t.vertices[0], t.vertices[2] - t.vertices[0]] {
                    prop_assert!(t.normal.dot(e).abs() < 1e-12 * (1.0 + e.norm()));
                }
                // The reconstructed normal points outward like the level set gradient.
                prop_assert!(t.normal.dot(t.vertices[0]) > 0.0);
            }
        }
    }

    #[test]
    fn oswald_interpolant_is_continuous(delta in 0.0f64..1.0, k in 1usize..=2, seed in any::<u64>()) {
        let space = sphere_space(0.8, delta, 5, k);
        let v = FieldVector::from_vec(&space, random_vec(space.ndofs(), seed)).unwrap();
        let w = space.oswald_interpolate(&v);
        for edge in space.geometry().edges() {
            for q in &edge.points {
                let a = space.eval(&w, edge.cells[0], q.x).unwrap();
                let b = space.eval(&w, edge.cells[1], q.x).unwrap();
                prop_assert!((a - b).abs() < 1e-10, "jump {} at {:?}", a - b, q.x);
            }
        }
    }

    #[test]
    fn cell_projection_residual_is_orthogonal(delta in 0.0f64..1.0, c in prop::array::uniform3(-2.0f64..2.0)) {
        let space = sphere_space(0.9, delta, 5, 1);
        let f = move |x: Vec3<f64>| (c[0] * x.x).sin() + c[1] * x.y * x.z + (c[2] * x.z).exp();
        let pf = space.l2_project(f).unwrap();
        let mut ev = BasisEval::default();
        for cell in 0..space.num_cells() {
            let mut r = vec![0.0; space.dofs_per_cell()];
            let mut norm = 0.0;
            let rule = space.geometry().volume_quadrature(cell, 2 * space.degree() + 2).unwrap();
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                space.eval_basis(cell, x, &mut ev);
                let e = f(x) - space.eval(&pf, cell, x).unwrap();
                norm += w * f(x).abs();
                for (ri, phi) in r.iter_mut().zip(&ev.values) {
                    *ri += w * e * phi;
                }
            }
            for ri in r {
                prop_assert!(ri.abs() <= 1e-10 * (1.0 + norm));
            }
        }
    }

    #[test]
    fn constant_is_reproduced_algebraically(delta in 0.0f64..1.0, k in 1usize..=2) {
        let ls = LevelSet::sphere(1.0);
        let m = ManufacturedProblem::new(1.0, ls.clone()).unwrap();
        let mesh = BackgroundMesh::build(Vec3::splat(-1.21), Vec3::splat(1.21), [6; 3]).unwrap().shifted(delta).unwrap();
        let d = Discretization::build(ls, mesh, k, m.constant_data(), PenaltyParameters::defaults(k), GeometryOptions::for_degree(k)).unwrap();
        let one = FieldVector::constant(&d.space, 1.0);
        let r = d.system.matrix.mul(one.coeffs());
        let scale = d.system.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (ri, bi) in r.iter().zip(&d.system.rhs) {
            prop_assert!((ri - bi).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn gram_matrices_are_symmetric_and_semidefinite(delta in 0.0f64..1.0, seed in any::<u64>()) {
        let ls = LevelSet::sphere(1.0);
        let m = ManufacturedProblem::new(1.0, ls.clone()).unwrap();
        let mesh = BackgroundMesh::build(Vec3::splat(-1.21), Vec3::splat(1.21), [6; 3]).unwrap().shifted(delta).unwrap();
        let d = Discretization::build(ls, mesh, 1, m.problem_data(), PenaltyParameters::defaults(1), GeometryOptions::for_degree(1)).unwrap();
        for g in [&d.system.gram_stab, &d.system.gram_up, &d.system.gram_sd] {
            prop_assert!(g.asymmetry() <= 1e-12 * g.max_abs());
            for s in 0..4 {
                let x = random_vec(g.n(), seed.wrapping_add(s));
                prop_assert!(g.bilinear(&x, &x) >= -1e-12 * g.max_abs());
            }
        }
    }
}

#[test]
fn matrix_couples_only_face_neighbors() {
    let space = sphere_space(1.0, 0.3, 6, 1);
    let m = ManufacturedProblem::new(1.0, LevelSet::sphere(1.0)).unwrap();
    let (components, pattern) = assemble_components(&space, &m.problem_data()).unwrap();
    let nb = space.dofs_per_cell();
    let a = components.bilinear();
    for (r, c, v) in a.triplets() {
        if v != 0.0 {
            assert!(pattern.is_coupled(r / nb, c / nb));
        }
    }
    for cell in 0..space.num_cells() {
        let active = space.geometry().active();
        let expected = active.neighbors(cell).count() + 1;
        assert_eq!(pattern.coupled(cell).len(), expected);
    }
}

#[test]
fn single_precision_pipeline() {
    let ls = LevelSet::<f32>::sphere(1.0);
    let m = ManufacturedProblem::new(1.0f32, ls.clone()).unwrap();
    let mesh = BackgroundMesh::build(Vec3::splat(-1.21f32), Vec3::splat(1.21), [6; 3]).unwrap();
    let d = Discretization::build(ls, mesh, 1, m.constant_data(), PenaltyParameters::defaults(1), GeometryOptions::for_degree(1))
        .unwrap();
    let sol = cutdg::solve_direct(&d.system.matrix, &d.system.rhs).unwrap();
    let uh = FieldVector::from_vec(&d.space, sol.solution).unwrap();
    let x = d.space.geometry().patch(0).points[0].x;
    assert!((d.space.eval(&uh, 0, x).unwrap() - 1.0).abs() < 1e-4);
}
