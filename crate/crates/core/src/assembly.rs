//! Assembly of the stabilized cut DG system, its right-hand side and the
//! Gram matrices of the upwind, streamline diffusion and stabilization norms.
//!
//! Every bilinear form is assembled once into its own matrix on a shared
//! block pattern. The system matrix and Gram matrices are linear combinations
//! of these components, so changing penalty parameters never re-integrates.

use std::fmt;
use std::sync::Arc;

use crate::basis::BasisEval;
use crate::error::{Error, Result};
use crate::geometry::{SurfaceGeometry, SurfacePoint};
use crate::scalar::Real;
use crate::space::DgSpace;
use crate::sparse::{BlockPattern, SparseMatrix};
use crate::vec3::{mat_mul, spectral_norm, tangent_projector, Mat3, Vec3};

pub type ScalarField<T> = Arc<dyn Fn(Vec3<T>) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>;
/// `J[i][j] = d b_i / d x_j`.
pub type MatrixField<T> = Arc<dyn Fn(Vec3<T>) -> Mat3<T> + Send + Sync>;

/// Coefficients of `b . grad_Gamma u + c u = f` on the exact surface.
#[derive(Clone)]
pub struct ProblemData<T> {
    pub velocity: VectorField<T>,
    /// Ambient Jacobian of the velocity; finite differences are used when absent.
    pub velocity_jacobian: Option<MatrixField<T>>,
    /// `|b|_{1,inf}` if known; sampled on the surface otherwise.
    pub velocity_gradient_bound: Option<T>,
    pub reaction: ScalarField<T>,
    pub source: ScalarField<T>,
    pub exact: Option<ScalarField<T>>,
    pub exact_gradient: Option<VectorField<T>>,
    /// `||b||_{0,inf}` on the surface.
    pub b_inf: T,
    /// `||c||_{0,inf}` on the surface.
    pub c_inf: T,
    /// Lower bound of `c - div_Gamma(b) / 2`.
    pub c0: T,
}

impl<T: fmt::Debug> fmt::Debug for ProblemData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("b_inf", &self.b_inf)
            .field("c_inf", &self.c_inf)
            .field("c0", &self.c0)
            .field("velocity_gradient_bound", &self.velocity_gradient_bound)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ProblemData<T> {
    pub fn new(
        velocity: impl Fn(Vec3<T>) -> Vec3<T> + Send + Sync + 'static,
        reaction: impl Fn(Vec3<T>) -> T + Send + Sync + 'static,
        source: impl Fn(Vec3<T>) -> T + Send + Sync + 'static,
        b_inf: T,
        c_inf: T,
        c0: T,
    ) -> Self {
        Self {
            velocity: Arc::new(velocity),
            velocity_jacobian: None,
            velocity_gradient_bound: None,
            reaction: Arc::new(reaction),
            source: Arc::new(source),
            exact: None,
            exact_gradient: None,
            b_inf,
            c_inf,
            c0,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(Vec3<T>) -> Mat3<T> + Send + Sync + 'static) -> Self {
        self.velocity_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_gradient_bound(mut self, bound: T) -> Self {
        self.velocity_gradient_bound = Some(bound);
        self
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(Vec3<T>) -> T + Send + Sync + 'static,
        grad: impl Fn(Vec3<T>) -> Vec3<T> + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(u));
        self.exact_gradient = Some(Arc::new(grad));
        self
    }

    /// Same velocity and reaction with a different source term.
    pub fn with_source(mut self, source: impl Fn(Vec3<T>) -> T + Send + Sync + 'static) -> Self {
        self.source = Arc::new(source);
        self.exact = None;
        self.exact_gradient = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_inf > T::zero()) || !self.b_inf.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reference velocity must be positive, got {}",
                self.b_inf
            )));
        }
        if !(self.c0 > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "c - div(b)/2 must be bounded below by a positive constant, got {}",
                self.c0
            )));
        }
        Ok(())
    }

    /// Ambient Jacobian, analytic when available.
    pub fn jacobian(&self, x: Vec3<T>) -> Mat3<T> {
        if let Some(j) = &self.velocity_jacobian {
            return j(x);
        }
        let eps = T::lit(1e-6) * T::one().max(x.max_abs());
        let mut out = [[T::zero(); 3]; 3];
        for col in 0..3 {
            let e = Vec3::unit(col) * eps;
            let d = ((self.velocity)(x + e) - (self.velocity)(x - e)) * (T::one() / (eps + eps));
            for (row, r) in out.iter_mut().enumerate() {
                r[col] = d[row];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyParameters<T> {
    pub gamma0: T,
    pub gamma1: T,
    pub gamman: T,
}

impl<T: Real> PenaltyParameters<T> {
    /// `gamma0 = 5 k^2`, `gamma1 = 1/2`, `gamman = 1`.
    pub fn defaults(k: usize) -> Self {
        Self {
            gamma0: T::lit(5.0) * T::from_usize_lossy(k * k),
            gamma1: T::lit(0.5),
            gamman: T::one(),
        }
    }

    pub fn zero() -> Self {
        Self {
            gamma0: T::zero(),
            gamma1: T::zero(),
            gamman: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConstants<T> {
    pub tau_c: T,
    pub tau_c_inv: T,
    pub phi_b: T,
    pub h: T,
    pub b_inf: T,
    pub c_inf: T,
    /// `|b|_{1,inf}` as used in `tau_c`.
    pub b_grad: T,
    pub kappa: T,
    pub warnings: Vec<String>,
}

impl<T: Real> ScalingConstants<T> {
    /// Whether `h <= b_inf tau_c`.
    pub fn mesh_resolves_data(&self) -> bool {
        self.h <= self.b_inf * self.tau_c
    }
}

/// `sup ||P J P||` over lifted surface quadrature points.
pub fn sample_velocity_gradient<T: Real>(data: &ProblemData<T>, geom: &SurfaceGeometry<T>) -> Result<T> {
    let ls = geom.levelset();
    let mut sup = T::zero();
    for patch in geom.patches() {
        for q in &patch.points {
            let p = q.lifted;
            let proj = tangent_projector(ls.extended_normal(p)?);
            let j = data.jacobian(p);
            sup = sup.max(spectral_norm(&mat_mul(&proj, &mat_mul(&j, &proj))));
        }
    }
    Ok(sup)
}

pub fn compute_scalings<T: Real>(
    data: &ProblemData<T>,
    geom: &SurfaceGeometry<T>,
) -> Result<ScalingConstants<T>> {
    data.validate()?;
    let h = geom.h();
    let b_grad = match data.velocity_gradient_bound {
        Some(b) => b,
        None => sample_velocity_gradient(data, geom)?,
    };
    let kappa = geom.levelset().max_curvature();
    let tau_c_inv = data.c_inf + b_grad + data.b_inf * kappa;
    let tau_c = T::one() / tau_c_inv;
    let mut warnings = Vec::new();
    if h > data.b_inf * tau_c {
        warnings.push(format!(
            "mesh size {} exceeds b_inf * tau_c = {}",
            h,
            data.b_inf * tau_c
        ));
    }
    Ok(ScalingConstants {
        tau_c,
        tau_c_inv,
        phi_b: h / data.b_inf,
        h,
        b_inf: data.b_inf,
        c_inf: data.c_inf,
        b_grad,
        kappa,
        warnings,
    })
}

/// Discrete coefficients at one surface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientSample<T> {
    pub b_h: Vec3<T>,
    pub c_h: T,
    pub f_h: T,
}

/// `b_h = P_h b(p(x))`, `c_h = c(p(x))`, `f_h = f(p(x))`.
pub fn coefficients_at<T: Real>(data: &ProblemData<T>, q: &SurfacePoint<T>) -> Result<CoefficientSample<T>> {
    let b_h = (data.velocity)(q.lifted).project_tangent(q.normal);
    let c_h = (data.reaction)(q.lifted);
    let f_h = (data.source)(q.lifted);
    if !(b_h.is_finite() && c_h.is_finite() && f_h.is_finite()) {
        return Err(Error::NonFinite("coefficient evaluation"));
    }
    Ok(CoefficientSample { b_h, c_h, f_h })
}

/// Discrete coefficients at every surface quadrature point, grouped by patch.
pub fn discrete_coefficients<T: Real>(
    data: &ProblemData<T>,
    geom: &SurfaceGeometry<T>,
) -> Result<Vec<Vec<CoefficientSample<T>>>> {
    geom.patches()
        .iter()
        .map(|p| p.points.iter().map(|q| coefficients_at(data, q)).collect())
        .collect()
}

/// `min (c_h - div_h(b_h) / 2)` over surface quadrature points, with the
/// facet-wise divergence taken by central differences along the facet.
pub fn c0h_min<T: Real>(data: &ProblemData<T>, geom: &SurfaceGeometry<T>) -> Result<T> {
    let ls = geom.levelset();
    let eps = T::lit(1e-5) * geom.h();
    let inv = T::one() / (eps + eps);
    let mut min = T::infinity();
    for patch in geom.patches() {
        for tri in &patch.triangles {
            let n = tri.normal;
            let Some(t1) = (tri.vertices[1] - tri.vertices[0]).normalized() else {
                continue;
            };
            let t2 = n.cross(t1);
            let bh = |y: Vec3<T>| -> Result<Vec3<T>> {
                Ok((data.velocity)(ls.closest_point(y)?).project_tangent(n))
            };
            let x = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) * T::lit(1.0 / 3.0);
            let mut div = T::zero();
            for t in [t1, t2] {
                div += t.dot(bh(x + t * eps)? - bh(x - t * eps)?) * inv;
            }
            let c = (data.reaction)(ls.closest_point(x)?);
            min = min.min(c - T::lit(0.5) * div);
        }
    }
    Ok(min)
}

/// Individually assembled bilinear forms on a shared pattern.
#[derive(Clone, Debug)]
pub struct SystemComponents<T> {
    /// `(c_h v, w)_K`.
    pub reaction: SparseMatrix<T>,
    /// `(b_h . grad_h v, w)_K`.
    pub advection: SparseMatrix<T>,
    /// `-({b_h; n_E} [v], {w})_E`.
    pub edge_central: SparseMatrix<T>,
    /// `1/2 (|{b_h; n_E}| [v], [w])_E`.
    pub edge_upwind: SparseMatrix<T>,
    /// `(b_h . grad_h v, b_h . grad_h w)_K`.
    pub streamline: SparseMatrix<T>,
    /// `([v], [w])_F`.
    pub face_jump: SparseMatrix<T>,
    /// `([n_F . grad v], [n_F . grad w])_F`.
    pub face_grad_jump: SparseMatrix<T>,
    /// `(n . grad v, n . grad w)_T` with the extended normal.
    pub normal_grad: SparseMatrix<T>,
    /// `(v, w)_K`.
    pub surface_mass: SparseMatrix<T>,
    /// Diagonal of `(v, w)_T`.
    pub cell_mass: Vec<T>,
    /// `(f_h, w)_K`.
    pub rhs: Vec<T>,
}

impl<T: Real> SystemComponents<T> {
    /// `s_h` for the given penalties.
    pub fn stabilization(&self, p: &PenaltyParameters<T>, scalings: &ScalingConstants<T>) -> SparseMatrix<T> {
        let (b, h) = (scalings.b_inf, scalings.h);
        let mut s = self.face_jump.scaled(p.gamma0 * b / h);
        s.add_scaled(p.gamma1 * b * h, &self.face_grad_jump);
        s.add_scaled(p.gamman * b, &self.normal_grad);
        s
    }

    /// `a_h` without stabilization.
    pub fn bilinear(&self) -> SparseMatrix<T> {
        let mut a = self.reaction.clone();
        a.add_scaled(T::one(), &self.advection);
        a.add_scaled(T::one(), &self.edge_central);
        a.add_scaled(T::one(), &self.edge_upwind);
        a
    }

    pub fn gram_up(&self, scalings: &ScalingConstants<T>) -> SparseMatrix<T> {
        let mut g = self.surface_mass.scaled(scalings.tau_c_inv);
        g.add_scaled(T::one(), &self.edge_upwind);
        g
    }

    pub fn gram_sd(&self, scalings: &ScalingConstants<T>) -> SparseMatrix<T> {
        let mut g = self.gram_up(scalings);
        g.add_scaled(scalings.phi_b, &self.streamline);
        g
    }
}

/// The linear system `A U = F` together with the norm Gram matrices.
#[derive(Clone, Debug)]
pub struct AssembledSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub rhs: Vec<T>,
    pub gram_up: SparseMatrix<T>,
    pub gram_sd: SparseMatrix<T>,
    pub gram_stab: SparseMatrix<T>,
    pub penalties: PenaltyParameters<T>,
    pub scalings: ScalingConstants<T>,
    pub components: Arc<SystemComponents<T>>,
    pub pattern: Arc<BlockPattern>,
    pub warnings: Vec<String>,
}

impl<T: Real> AssembledSystem<T> {
    pub fn from_components(
        components: Arc<SystemComponents<T>>,
        pattern: Arc<BlockPattern>,
        penalties: PenaltyParameters<T>,
        scalings: ScalingConstants<T>,
    ) -> Self {
        let gram_stab = components.stabilization(&penalties, &scalings);
        let mut matrix = components.bilinear();
        matrix.add_scaled(T::one(), &gram_stab);
        let warnings = scalings.warnings.clone();
        Self {
            matrix,
            rhs: components.rhs.clone(),
            gram_up: components.gram_up(&scalings),
            gram_sd: components.gram_sd(&scalings),
            gram_stab,
            penalties,
            scalings,
            components,
            pattern,
            warnings,
        }
    }

    /// Same discretization with different penalty parameters.
    pub fn with_penalties(&self, penalties: PenaltyParameters<T>) -> Self {
        let mut out = Self::from_components(
            self.components.clone(),
            self.pattern.clone(),
            penalties,
            self.scalings.clone(),
        );
        out.warnings = self.warnings.clone();
        out
    }

    pub fn ndofs(&self) -> usize {
        self.rhs.len()
    }
}

/// Dense local blocks for a pair of cells, row = test, column = trial.
struct Blocks<T> {
    nb: usize,
    data: [Vec<T>; 4],
}

impl<T: Real> Blocks<T> {
    fn new(nb: usize) -> Self {
        Self {
            nb,
            data: std::array::from_fn(|_| vec![T::zero(); nb * nb]),
        }
    }

    fn clear(&mut self) {
        for d in &mut self.data {
            d.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    #[inline]
    fn block(&mut self, test: usize, trial: usize) -> &mut [T] {
        &mut self.data[2 * test + trial]
    }

    fn scatter(&self, m: &mut SparseMatrix<T>, cells: [usize; 2]) {
        for test in 0..2 {
            for trial in 0..2 {
                m.add_block(self.nb, cells[test], cells[trial], &self.data[2 * test + trial]);
            }
        }
    }
}

pub fn assemble_components<T: Real>(
    space: &DgSpace<T>,
    data: &ProblemData<T>,
) -> Result<(SystemComponents<T>, BlockPattern)> {
    let geom = space.geometry();
    let nb = space.dofs_per_cell();
    let ncells = space.num_cells();
    let pattern = BlockPattern::from_active(geom.active(), nb);
    let zero = SparseMatrix::zeros(&pattern);
    let mut c = SystemComponents {
        reaction: zero.clone(),
        advection: zero.clone(),
        edge_central: zero.clone(),
        edge_upwind: zero.clone(),
        streamline: zero.clone(),
        face_jump: zero.clone(),
        face_grad_jump: zero.clone(),
        normal_grad: zero.clone(),
        surface_mass: zero,
        cell_mass: Vec::with_capacity(space.ndofs()),
        rhs: vec![T::zero(); space.ndofs()],
    };
    let vol_degree = 2 * space.degree() + 2;
    let ls = geom.levelset();
    let mut ev = BasisEval::default();
    let mut ev2 = BasisEval::default();
    let mut reaction = vec![T::zero(); nb * nb];
    let mut advection = vec![T::zero(); nb * nb];
    let mut streamline = vec![T::zero(); nb * nb];
    let mut mass = vec![T::zero(); nb * nb];
    let mut normal = vec![T::zero(); nb * nb];
    let mut bgrad = vec![T::zero(); nb];
    let mut ngrad = vec![T::zero(); nb];

    for cell in 0..ncells {
        for m in [&mut reaction, &mut advection, &mut streamline, &mut mass, &mut normal] {
            m.iter_mut().for_each(|v| *v = T::zero());
        }
        let o = space.dof_offset(cell);
        for q in &geom.patch(cell).points {
            let coef = coefficients_at(data, q)?;
            space.eval_basis(cell, q.x, &mut ev);
            for j in 0..nb {
                bgrad[j] = coef.b_h.dot(ev.gradients[j].project_tangent(q.normal));
            }
            let w = q.weight;
            for i in 0..nb {
                let wi = w * ev.values[i];
                c.rhs[o + i] += wi * coef.f_h;
                let row = i * nb;
                for j in 0..nb {
                    let vj = ev.values[j];
                    mass[row + j] += wi * vj;
                    reaction[row + j] += wi * coef.c_h * vj;
                    advection[row + j] += wi * bgrad[j];
                    streamline[row + j] += w * bgrad[i] * bgrad[j];
                }
            }
        }
        let rule = geom.volume_quadrature(cell, vol_degree)?;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let n = ls.extended_normal(x)?;
            space.eval_basis(cell, x, &mut ev);
            for j in 0..nb {
                ngrad[j] = n.dot(ev.gradients[j]);
            }
            for i in 0..nb {
                for j in 0..nb {
                    normal[i * nb + j] += w * ngrad[i] * ngrad[j];
                }
            }
        }
        c.reaction.add_block(nb, cell, cell, &reaction);
        c.advection.add_block(nb, cell, cell, &advection);
        c.streamline.add_block(nb, cell, cell, &streamline);
        c.surface_mass.add_block(nb, cell, cell, &mass);
        c.normal_grad.add_block(nb, cell, cell, &normal);
        c.cell_mass.extend(space.mass_diagonal(cell));
    }

    // Ghost penalty faces.
    let mut jump = Blocks::new(nb);
    let mut grad_jump = Blocks::new(nb);
    let sign = [T::one(), -T::one()];
    for (fi, face) in geom.active().faces().iter().enumerate() {
        jump.clear();
        grad_jump.clear();
        let cells = [face.plus, face.minus];
        let rule = geom.face_quadrature(fi, vol_degree)?;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            space.eval_basis(cells[0], x, &mut ev);
            space.eval_basis(cells[1], x, &mut ev2);
            let side = |s: usize| if s == 0 { &ev } else { &ev2 };
            for ts in 0..2 {
                for vs in 0..2 {
                    let ssign = sign[ts] * sign[vs] * w;
                    let (et, evv) = (side(ts), side(vs));
                    let jb = jump.block(ts, vs);
                    for i in 0..nb {
                        for j in 0..nb {
                            jb[i * nb + j] += ssign * et.values[i] * evv.values[j];
                        }
                    }
                    let gb = grad_jump.block(ts, vs);
                    for i in 0..nb {
                        let gi = et.gradients[i][face.axis];
                        for j in 0..nb {
                            gb[i * nb + j] += ssign * gi * evv.gradients[j][face.axis];
                        }
                    }
                }
            }
        }
        jump.scatter(&mut c.face_jump, cells);
        grad_jump.scatter(&mut c.face_grad_jump, cells);
    }

    // Surface edges.
    let mut central = Blocks::new(nb);
    let mut upwind = Blocks::new(nb);
    let half = T::lit(0.5);
    for edge in geom.edges() {
        central.clear();
        upwind.clear();
        for q in &edge.points {
            let b = (data.velocity)(q.lifted);
            let bp = b.project_tangent(edge.normals[0]);
            let bm = b.project_tangent(edge.normals[1]);
            if !(bp.is_finite() && bm.is_finite()) {
                return Err(Error::NonFinite("edge coefficient evaluation"));
            }
            let beta = half * (edge.conormals[0].dot(bp) - edge.conormals[1].dot(bm));
            space.eval_basis(edge.cells[0], q.x, &mut ev);
            space.eval_basis(edge.cells[1], q.x, &mut ev2);
            let side = |s: usize| if s == 0 { &ev } else { &ev2 };
            for ts in 0..2 {
                for vs in 0..2 {
                    let (et, evv) = (side(ts), side(vs));
                    let cw = -q.weight * beta * sign[vs] * half;
                    let uw = q.weight * half * beta.abs() * sign[ts] * sign[vs];
                    let cb = central.block(ts, vs);
                    for i in 0..nb {
                        for j in 0..nb {
                            cb[i * nb + j] += cw * et.values[i] * evv.values[j];
                        }
                    }
                    let ub = upwind.block(ts, vs);
                    for i in 0..nb {
                        for j in 0..nb {
                            ub[i * nb + j] += uw * et.values[i] * evv.values[j];
                        }
                    }
                }
            }
        }
        central.scatter(&mut c.edge_central, edge.cells);
        upwind.scatter(&mut c.edge_upwind, edge.cells);
    }
    Ok((c, pattern))
}

/// Assembles `A_h = a_h + s_h`, the load vector and the Gram matrices.
pub fn assemble<T: Real>(
    space: &DgSpace<T>,
    data: &ProblemData<T>,
    penalties: PenaltyParameters<T>,
    scalings: &ScalingConstants<T>,
) -> Result<AssembledSystem<T>> {
    data.validate()?;
    let (components, pattern) = assemble_components(space, data)?;
    let mut sys = AssembledSystem::from_components(
        Arc::new(components),
        Arc::new(pattern),
        penalties,
        scalings.clone(),
    );
    let c0h = c0h_min(data, space.geometry())?;
    if !(c0h > T::zero()) {
        sys.warnings.push(format!("c_h - div_h(b_h)/2 is not positive: min {c0h}"));
    }
    Ok(sys)
}
