//! Direct and iterative solvers for the assembled system.

use std::fmt;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    Direct,
    Bicgstab,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Bicgstab => "bicgstab",
        })
    }
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "bicgstab" => Ok(Self::Bicgstab),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub method: SolverMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SolverOptions {
    /// Preconditioner used by the iterative method, for output headers.
    pub fn preconditioner(&self) -> &'static str {
        match self.method {
            SolverMethod::Direct => "none",
            SolverMethod::Bicgstab => "jacobi",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub solution: Vec<T>,
    pub method: SolverMethod,
    pub iterations: usize,
    /// `||b - A x|| / ||b||`.
    pub relative_residual: T,
    pub tolerance: T,
    pub converged: bool,
}

fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// `||b - A x|| / ||b||` (absolute residual when `b = 0`).
pub fn relative_residual<T: Real>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> T {
    let ax = a.mul(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let nb = norm(b);
    if nb > T::zero() {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Sparse LU factorization with partial pivoting, computed in double precision.
pub struct LuFactorization {
    n: usize,
    lu: Lu<usize, f64>,
}

impl fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LuFactorization").field("n", &self.n).finish_non_exhaustive()
    }
}

pub(crate) fn to_faer<T: Real>(a: &SparseMatrix<T>) -> Result<SparseColMat<usize, f64>> {
    let triplets: Vec<Triplet<usize, usize, f64>> = a
        .triplets()
        .filter(|t| t.2 != T::zero())
        .map(|(r, c, v)| Triplet::new(r, c, v.to_f64_lossy()))
        .collect();
    SparseColMat::try_new_from_triplets(a.n(), a.n(), &triplets)
        .map_err(|e| Error::DimensionMismatch(format!("{e:?}")))
}

impl LuFactorization {
    pub fn new<T: Real>(a: &SparseMatrix<T>) -> Result<Self> {
        let m = to_faer(a)?;
        let lu = m.sp_lu().map_err(|_| Error::SingularMatrix)?;
        Ok(Self { n: a.n(), lu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn run(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = if transpose {
            self.lu.solve_transpose(&rhs)
        } else {
            self.lu.solve(&rhs)
        };
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::SingularMatrix)
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, false)
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, true)
    }
}

/// Sparse LU solve. Singular systems are reported as errors.
pub fn solve_direct<T: Real>(a: &SparseMatrix<T>, b: &[T]) -> Result<SolveReport<T>> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for a {}x{} matrix",
            b.len(),
            a.n(),
            a.n()
        )));
    }
    let lu = LuFactorization::new(a)?;
    let b64: Vec<f64> = b.iter().map(|v| v.to_f64_lossy()).collect();
    let x: Vec<T> = lu.solve(&b64)?.into_iter().map(T::lit).collect();
    let res = relative_residual(a, &x, b);
    let tol = T::lit(DEFAULT_TOLERANCE).max(T::epsilon() * T::lit(100.0));
    Ok(SolveReport {
        solution: x,
        method: SolverMethod::Direct,
        iterations: 1,
        relative_residual: res,
        tolerance: tol,
        converged: res <= tol,
    })
}

/// Jacobi-preconditioned BiCGStab. Returns the iterate with the smallest
/// residual seen, flagged as not converged when the tolerance was not met.
pub fn solve_bicgstab<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    tol: T,
    max_iterations: usize,
) -> Result<SolveReport<T>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for a {n}x{n} matrix",
            b.len()
        )));
    }
    if max_iterations == 0 {
        return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
        .collect();
    let precond = |v: &[T], out: &mut [T]| {
        for ((o, &vi), &di) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = vi * di;
        }
    };

    let bnorm = norm(b);
    let scale = if bnorm > T::zero() { bnorm } else { T::one() };
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut p = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());

    let mut best_x = x.clone();
    let mut best_res = norm(&r) / scale;
    let mut iterations = 0;
    if best_res > tol {
        for it in 1..=max_iterations {
            iterations = it;
            let rho_new = dot(&r_hat, &r);
            if rho_new == T::zero() || !rho_new.is_finite() {
                break;
            }
            if it == 1 {
                p.copy_from_slice(&r);
            } else {
                let beta = (rho_new / rho) * (alpha / omega);
                for i in 0..n {
                    p[i] = r[i] + beta * (p[i] - omega * v[i]);
                }
            }
            rho = rho_new;
            precond(&p, &mut y);
            a.matvec(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == T::zero() || !denom.is_finite() {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / scale <= tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                best_x.copy_from_slice(&x);
                break;
            }
            precond(&s, &mut z);
            a.matvec(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == T::zero() || !tt.is_finite() {
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            let res = norm(&r) / scale;
            if res.is_finite() && res < best_res {
                best_res = res;
                best_x.copy_from_slice(&x);
            }
            if res <= tol || omega == T::zero() || !res.is_finite() {
                break;
            }
        }
    }
    // The recursive residual can drift; report the true one.
    let true_res = relative_residual(a, &best_x, b);
    Ok(SolveReport {
        solution: best_x,
        method: SolverMethod::Bicgstab,
        iterations,
        relative_residual: true_res,
        tolerance: tol,
        converged: true_res <= tol,
    })
}

pub fn solve<T: Real>(a: &SparseMatrix<T>, b: &[T], options: &SolverOptions) -> Result<SolveReport<T>> {
    match options.method {
        SolverMethod::Direct => solve_direct(a, b),
        SolverMethod::Bicgstab => solve_bicgstab(
            a,
            b,
            T::lit(options.tolerance),
            options.max_iterations,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        SparseMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn identity_direct() {
        let a = SparseMatrix::<f64>::identity(4);
        let r = solve_direct(&a, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.solution, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(r.converged);
    }

    #[test]
    fn diagonal_bicgstab_converges_immediately() {
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 1, 5.0), (2, 2, 0.5)]).unwrap();
        let r = solve_bicgstab(&a, &[1.0f64, 1.0, 1.0], 1e-12, 100).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!((r.solution[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn methods_agree() {
        let a = tridiag(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let d = solve_direct(&a, &b).unwrap();
        let it = solve_bicgstab(&a, &b, 1e-12, 1000).unwrap();
        assert!(it.converged);
        for (x, y) in d.solution.iter().zip(&it.solution) {
            assert!((x - y).abs() < 1e-10);
        }
        let lu = LuFactorization::new(&a).unwrap();
        let xt = lu.solve_transpose(&b).unwrap();
        let r = relative_residual(&a.transpose(), &xt, &b);
        assert!(r < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(solve_direct(&a, &[1.0, 2.0]).is_err() || !solve_direct(&a, &[1.0, 2.0]).unwrap().converged);
        let r = solve_bicgstab(&a, &[1.0, 2.0], 1e-10, 50).unwrap();
        assert!(!r.converged);
        assert!(solve_bicgstab(&a, &[1.0, 2.0], 1e-10, 0).is_err());
    }
}
