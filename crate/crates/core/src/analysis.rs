//! Manufactured solutions, discrete error norms, convergence orders and
//! diagnostics of the stabilization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{c0h_min, AssembledSystem, ProblemData, ScalingConstants};
use crate::basis::BasisEval;
use crate::error::{Error, Result};
use crate::levelset::LevelSet;
use crate::scalar::Real;
use crate::space::{DgSpace, FieldVector};
use crate::sparse::SparseMatrix;
use crate::spectrum::{min_generalized_eigenvalue, min_generalized_singular_value, SpectrumOptions};
use crate::vec3::{Mat3, Vec3};

/// `u = x y / pi * atan(z / sqrt(eps))` transported by the swirl
/// `b = (-y, x, 0) sqrt(x^2 + y^2)` with `c = 1`.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem<T> {
    pub epsilon: T,
    pub levelset: LevelSet<T>,
}

fn swirl<T: Real>(x: Vec3<T>) -> Vec3<T> {
    let rho = (x.x * x.x + x.y * x.y).sqrt();
    Vec3::new(-x.y * rho, x.x * rho, T::zero())
}

fn swirl_jacobian<T: Real>(x: Vec3<T>) -> Mat3<T> {
    let rho = (x.x * x.x + x.y * x.y).sqrt();
    let z = T::zero();
    if rho == z {
        return [[z; 3]; 3];
    }
    [
        [-x.x * x.y / rho, -rho - x.y * x.y / rho, z],
        [rho + x.x * x.x / rho, x.x * x.y / rho, z],
        [z, z, z],
    ]
}

impl<T: Real> ManufacturedProblem<T> {
    /// Supported for surfaces of revolution about the z axis: spheres centered
    /// on the axis and tori.
    pub fn new(epsilon: T, levelset: LevelSet<T>) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        match &levelset {
            LevelSet::Sphere { center, .. } if center.x == T::zero() && center.y == T::zero() => {}
            LevelSet::Torus { .. } => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "manufactured problem needs a surface of revolution about z, got {other:?}"
                )))
            }
        }
        Ok(Self { epsilon, levelset })
    }

    pub fn u(&self, x: Vec3<T>) -> T {
        x.x * x.y / T::PI() * (x.z / self.epsilon.sqrt()).atan()
    }

    pub fn grad_u(&self, x: Vec3<T>) -> Vec3<T> {
        let s = self.epsilon.sqrt();
        let a = (x.z / s).atan();
        let dz = T::one() / (s * (T::one() + x.z * x.z / self.epsilon));
        Vec3::new(x.y * a, x.x * a, x.x * x.y * dz) * (T::one() / T::PI())
    }

    pub fn velocity(&self, x: Vec3<T>) -> Vec3<T> {
        swirl(x)
    }

    pub fn velocity_jacobian(&self, x: Vec3<T>) -> Mat3<T> {
        swirl_jacobian(x)
    }

    /// `f = b . P grad(u) + u` with the exact surface normal at `x`.
    pub fn source(&self, x: Vec3<T>) -> Result<T> {
        let n = self.levelset.extended_normal(x)?;
        Ok(self.velocity(x).dot(self.grad_u(x).project_tangent(n)) + self.u(x))
    }

    /// `max |b|` on the surface, the largest squared distance to the axis.
    pub fn b_inf(&self) -> T {
        match &self.levelset {
            LevelSet::Sphere { radius, .. } => *radius * *radius,
            LevelSet::Torus { major, minor } => (*major + *minor) * (*major + *minor),
            _ => unreachable!("checked in new"),
        }
    }

    fn data_with_source(&self, source: impl Fn(Vec3<T>) -> T + Send + Sync + 'static) -> ProblemData<T> {
        // The swirl is divergence free on surfaces of revolution about its axis.
        ProblemData::new(swirl, |_| T::one(), source, self.b_inf(), T::one(), T::one())
            .with_jacobian(swirl_jacobian)
    }

    pub fn problem_data(&self) -> ProblemData<T> {
        let me = self.clone();
        let me2 = self.clone();
        let me3 = self.clone();
        self.data_with_source(move |x| me.source(x).unwrap_or_else(|_| T::nan()))
            .with_exact(move |x| me2.u(x), move |x| me3.grad_u(x))
    }

    /// Same velocity with `c = f = 1`, whose exact solution is `u = 1`.
    pub fn constant_data(&self) -> ProblemData<T> {
        self.data_with_source(|_| T::one())
            .with_exact(|_| T::one(), |_| Vec3::zero())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport<T> {
    pub l2_error: T,
    pub up_error: T,
    pub sd_error: T,
    pub sdstar_error: T,
    /// `|u_h|_{s_h}`; equals the stabilization seminorm of the error.
    pub stab_seminorm: T,
    /// `(sd^2 + stab^2)^{1/2}`.
    pub sdh_error: T,
}

/// Errors of `u_h` against the closest point extension of the exact
/// solution in `data`. `stab` is the stabilization matrix used for the
/// seminorm part.
pub fn error_norms<T: Real>(
    space: &DgSpace<T>,
    uh: &FieldVector<T>,
    data: &ProblemData<T>,
    scalings: &ScalingConstants<T>,
    stab: Option<&SparseMatrix<T>>,
) -> Result<ErrorReport<T>> {
    let u = data
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("problem has no exact solution".into()))?;
    let grad = data
        .exact_gradient
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("problem has no exact gradient".into()))?;
    let geom = space.geometry();
    let ls = geom.levelset();
    let nb = space.dofs_per_cell();
    let coeffs = uh.coeffs();
    let mut ev = BasisEval::default();

    let (mut l2, mut streamline) = (T::zero(), T::zero());
    for cell in 0..space.num_cells() {
        let local = &coeffs[space.dof_offset(cell)..space.dof_offset(cell) + nb];
        for q in &geom.patch(cell).points {
            space.eval_basis(cell, q.x, &mut ev);
            let mut val = T::zero();
            let mut g = Vec3::zero();
            for i in 0..nb {
                val += local[i] * ev.values[i];
                g += ev.gradients[i] * local[i];
            }
            let e = u(q.lifted) - val;
            l2 += q.weight * e * e;
            let b_h = (data.velocity)(q.lifted).project_tangent(q.normal);
            let gu = grad(q.lifted).project_tangent(ls.extended_normal(q.lifted)?);
            let s = b_h.dot(gu - g);
            streamline += q.weight * s * s;
        }
    }

    let (mut edge_up, mut edge_trace) = (T::zero(), T::zero());
    let mut ev2 = BasisEval::default();
    let half = T::lit(0.5);
    for edge in geom.edges() {
        let [cp, cm] = edge.cells;
        let lp = &coeffs[space.dof_offset(cp)..space.dof_offset(cp) + nb];
        let lm = &coeffs[space.dof_offset(cm)..space.dof_offset(cm) + nb];
        for q in &edge.points {
            space.eval_basis(cp, q.x, &mut ev);
            space.eval_basis(cm, q.x, &mut ev2);
            let vp: T = lp.iter().zip(&ev.values).map(|(&c, &v)| c * v).sum();
            let vm: T = lm.iter().zip(&ev2.values).map(|(&c, &v)| c * v).sum();
            let b = (data.velocity)(q.lifted);
            let beta = half
                * (edge.conormals[0].dot(b.project_tangent(edge.normals[0]))
                    - edge.conormals[1].dot(b.project_tangent(edge.normals[1])));
            let jump = vp - vm;
            edge_up += q.weight * half * beta.abs() * jump * jump;
            let ue = u(q.lifted);
            edge_trace += q.weight * ((ue - vp) * (ue - vp) + (ue - vm) * (ue - vm));
        }
    }

    let up2 = scalings.tau_c_inv * l2 + edge_up;
    let sd2 = up2 + scalings.phi_b * streamline;
    let stab2 = match stab {
        Some(s) => s.bilinear(coeffs, coeffs).max(T::zero()),
        None => T::zero(),
    };
    let sdstar2 = l2 / scalings.phi_b + scalings.phi_b * streamline + scalings.b_inf * edge_trace;
    Ok(ErrorReport {
        l2_error: l2.sqrt(),
        up_error: up2.sqrt(),
        sd_error: sd2.sqrt(),
        sdstar_error: sdstar2.sqrt(),
        stab_seminorm: stab2.sqrt(),
        sdh_error: (sd2 + stab2).sqrt(),
    })
}

/// `EOC_l = log(E_{l-1} / E_l) / log(h_{l-1} / h_l)` for `l = 1..n`.
pub fn eoc<T: Real>(errors: &[T], hs: &[T]) -> Result<Vec<T>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need matching error and mesh size lists of length >= 2, got {} and {}",
            errors.len(),
            hs.len()
        )));
    }
    if errors.iter().chain(hs).any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidArgument("errors and mesh sizes must be positive".into()));
    }
    Ok((1..errors.len())
        .map(|l| (errors[l - 1] / errors[l]).ln() / (hs[l - 1] / hs[l]).ln())
        .collect())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// `max |[b_h; n_E]|` over edge quadrature points.
pub fn conormal_jump_max<T: Real>(space: &DgSpace<T>, data: &ProblemData<T>) -> T {
    space
        .geometry()
        .edges()
        .iter()
        .flat_map(|e| {
            e.points.iter().map(move |q| {
                let b = (data.velocity)(q.lifted);
                (e.conormals[0].dot(b.project_tangent(e.normals[0]))
                    + e.conormals[1].dot(b.project_tangent(e.normals[1])))
                .abs()
            })
        })
        .fold(T::zero(), T::max)
}

/// Largest ratio `h^{-1} ||v||_T^2 / (||v||_K^2 + ||[v]||_F^2 + h ||n . grad v||_T^2)`
/// over random coefficient vectors.
pub fn norm_extension_ratio<T: Real>(system: &AssembledSystem<T>, samples: usize, seed: u64) -> T {
    let c = &system.components;
    let h = system.scalings.h;
    let mut denom = c.surface_mass.clone();
    denom.add_scaled(T::one(), &c.face_jump);
    denom.add_scaled(h, &c.normal_grad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = system.ndofs();
    let mut worst = T::zero();
    for _ in 0..samples {
        let v: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
        let num: T = v.iter().zip(&c.cell_mass).map(|(&x, &m)| m * x * x).sum::<T>() / h;
        let d = denom.bilinear(&v, &v);
        if d > T::zero() {
            worst = worst.max(num / d);
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsOptions<T> {
    pub samples: usize,
    pub seed: u64,
    /// Stabilization defining the reference norms; the system's own when `None`.
    pub reference_stab: Option<SparseMatrix<T>>,
    /// Largest size for which the inf-sup constant is computed.
    pub infsup_limit: usize,
    pub spectrum: SpectrumOptions,
}

impl<T: Real> Default for DiagnosticsOptions<T> {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            reference_stab: None,
            infsup_limit: 3000,
            spectrum: SpectrumOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsReport<T> {
    pub conormal_jump_max: T,
    pub norm_extension_ratio: T,
    /// Smallest eigenvalue of `sym(A)` against `gram_up + stab`.
    pub coercivity_min: f64,
    /// Smallest singular value of `A` measured in `gram_sd + stab`.
    pub infsup_min: Option<f64>,
    pub c0h_min: T,
}

pub fn diagnostics<T: Real>(
    space: &DgSpace<T>,
    data: &ProblemData<T>,
    system: &AssembledSystem<T>,
    options: &DiagnosticsOptions<T>,
) -> Result<DiagnosticsReport<T>> {
    let stab = options.reference_stab.as_ref().unwrap_or(&system.gram_stab);
    let mut g_up = system.gram_up.clone();
    g_up.add_scaled(T::one(), stab);
    let sym = system.matrix.symmetric_part();
    let coercivity = min_generalized_eigenvalue(&sym, &g_up, &options.spectrum)?;
    let infsup_min = if system.ndofs() <= options.infsup_limit {
        let mut g_sd = system.gram_sd.clone();
        g_sd.add_scaled(T::one(), stab);
        match min_generalized_singular_value(&system.matrix, &g_sd, &options.spectrum) {
            Ok(e) => Some(e.value),
            Err(Error::SingularMatrix) => Some(0.0),
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(DiagnosticsReport {
        conormal_jump_max: conormal_jump_max(space, data),
        norm_extension_ratio: norm_extension_ratio(system, options.samples, options.seed),
        coercivity_min: coercivity.value,
        infsup_min,
        c0h_min: c0h_min(data, space.geometry())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_values() {
        let m = ManufacturedProblem::new(1.0, LevelSet::sphere(1.0)).unwrap();
        assert_eq!(m.u(Vec3::new(1.0, 0.0, 0.0)), 0.0);
        let b = m.velocity(Vec3::new(0.0, 1.0, 0.0));
        assert!((b - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(m.b_inf(), 1.0);
        assert!(ManufacturedProblem::new(0.0, LevelSet::sphere(1.0)).is_err());
        assert!(ManufacturedProblem::new(1.0, LevelSet::plane(Vec3::unit(2), 0.0)).is_err());
    }

    #[test]
    fn eoc_examples() {
        let r = eoc(&[1e-2f64, 2.5e-3], &[1.0, 0.5]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        let r = eoc(&[3.0, 3.0], &[1.0, 0.5]).unwrap();
        assert_eq!(r[0], 0.0);
        let r = eoc(&[1.0, 0.5f64.powf(1.5)], &[1.0, 0.5]).unwrap();
        assert!((r[0] - 1.5).abs() < 1e-12);
        assert!(eoc(&[1.0], &[1.0]).is_err());
        assert!(eoc(&[1.0, 0.0], &[1.0, 0.5]).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 0.5, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.0)).collect();
        assert!((loglog_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }
}
