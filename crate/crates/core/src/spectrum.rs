//! Extreme eigen- and singular value estimates.
//!
//! Sparse estimates use restarted Lanczos with full reorthogonalization in a
//! possibly non-Euclidean inner product; the smallest values are obtained as
//! the largest eigenvalues of inverse operators applied through a sparse LU.
//! Dense routines are provided as reference implementations for small sizes.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::LuFactorization;
use crate::sparse::SparseMatrix;

/// Largest size accepted by the dense routines.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// Relative tolerance on the Ritz residual.
    pub tolerance: f64,
    /// Maximum number of operator applications.
    pub max_iterations: usize,
    /// Krylov basis size before a restart.
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
            max_basis: 120,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub sigma_max: f64,
    /// `None` when the matrix could not be factorized.
    pub sigma_min: Option<f64>,
    pub cond: Option<f64>,
    pub iterations_max: usize,
    pub iterations_min: usize,
    pub converged_max: bool,
    pub converged_min: bool,
    pub failure: Option<String>,
}

impl SpectrumReport {
    /// Both extremes were obtained and converged.
    pub fn is_complete(&self) -> bool {
        self.cond.is_some() && self.converged_max && self.converged_min
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Largest eigenvalue of an operator that is self-adjoint in the inner
/// product `<x, y> = x . B y`. `apply_b` computes `B x`.
pub fn lanczos_largest(
    n: usize,
    mut op: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut apply_b: impl FnMut(&[f64]) -> Vec<f64>,
    options: &SpectrumOptions,
) -> Result<EigenEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let m_max = options.max_basis.clamp(2, n.max(2));
    let mut start = random_vector(n, options.seed);
    let mut iterations = 0;
    loop {
        let bnorm = dot(&start, &apply_b(&start)).sqrt();
        if !(bnorm > 0.0) || !bnorm.is_finite() {
            return Err(Error::NotPositiveDefinite("inner product matrix".into()));
        }
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / bnorm).collect()];
        let mut bbasis: Vec<Vec<f64>> = vec![apply_b(&basis[0])];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            let mut w = op(&basis[j])?;
            iterations += 1;
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("Lanczos operator application"));
            }
            let alpha = dot(&w, &bbasis[j]);
            alphas.push(alpha);
            for _ in 0..2 {
                for (v, bv) in basis.iter().zip(&bbasis) {
                    let c = dot(&w, bv);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let bw = apply_b(&w);
            let beta = dot(&w, &bw).max(0.0).sqrt();

            let k = alphas.len();
            let t = Mat::<f64>::from_fn(k, k, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = t
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::NotConverged(format!("{e:?}")))?;
            let theta = eig.S().column_vector()[k - 1];
            let last = eig.U()[(k - 1, k - 1)];
            let residual = beta * last.abs();
            let scale = theta.abs().max(f64::MIN_POSITIVE);
            let invariant = beta <= 1e-14 * scale;
            if residual <= options.tolerance * scale || invariant || k >= n {
                return Ok(EigenEstimate {
                    value: theta,
                    iterations,
                    converged: true,
                });
            }
            if iterations >= options.max_iterations {
                return Ok(EigenEstimate {
                    value: theta,
                    iterations,
                    converged: false,
                });
            }
            if k >= m_max {
                // Restart from the current Ritz vector.
                let mut ritz = vec![0.0; n];
                for (i, v) in basis.iter().enumerate() {
                    let c = eig.U()[(i, k - 1)];
                    for (r, vi) in ritz.iter_mut().zip(v) {
                        *r += c * vi;
                    }
                }
                start = ritz;
                break;
            }
            betas.push(beta);
            let next: Vec<f64> = w.iter().map(|v| v / beta).collect();
            bbasis.push(bw.iter().map(|v| v / beta).collect());
            basis.push(next);
        }
    }
}

fn to_f64<T: Real>(a: &SparseMatrix<T>) -> SparseMatrix<f64> {
    let t: Vec<(usize, usize, f64)> = a.triplets().map(|(r, c, v)| (r, c, v.to_f64_lossy())).collect();
    SparseMatrix::from_triplets(a.n(), &t).expect("indices in range")
}

/// `sigma_max` from `A^T A`, `sigma_min` from `(A A^T)^{-1}` with the LU of `A`.
pub fn estimate_condition<T: Real>(a: &SparseMatrix<T>, options: &SpectrumOptions) -> Result<SpectrumReport> {
    let a64 = to_f64(a);
    let n = a64.n();
    let mut tmp = vec![0.0; n];
    let max = lanczos_largest(
        n,
        |x| {
            a64.matvec(x, &mut tmp);
            let mut y = vec![0.0; n];
            a64.matvec_transpose(&tmp, &mut y);
            Ok(y)
        },
        |x| x.to_vec(),
        options,
    )?;
    let sigma_max = max.value.max(0.0).sqrt();
    let mut report = SpectrumReport {
        sigma_max,
        sigma_min: None,
        cond: None,
        iterations_max: max.iterations,
        iterations_min: 0,
        converged_max: max.converged,
        converged_min: false,
        failure: None,
    };
    let lu = match LuFactorization::new(&a64) {
        Ok(lu) => lu,
        Err(e) => {
            report.failure = Some(e.to_string());
            return Ok(report);
        }
    };
    let inv = lanczos_largest(
        n,
        |x| lu.solve(&lu.solve_transpose(x)?),
        |x| x.to_vec(),
        &SpectrumOptions {
            seed: options.seed.wrapping_add(1),
            ..*options
        },
    );
    match inv {
        Ok(est) if est.value > 0.0 => {
            let sigma_min = 1.0 / est.value.sqrt();
            report.sigma_min = Some(sigma_min);
            report.cond = Some(sigma_max / sigma_min);
            report.iterations_min = est.iterations;
            report.converged_min = est.converged;
            if !est.converged {
                report.failure = Some("smallest singular value did not converge".into());
            }
        }
        Ok(_) => report.failure = Some("inverse iteration produced a non-positive value".into()),
        Err(e) => report.failure = Some(e.to_string()),
    }
    Ok(report)
}

/// Smallest eigenvalue of `S x = lambda G x` for symmetric `S` and SPD `G`,
/// as the reciprocal of the largest eigenvalue of `S^{-1} G`. A singular `S`
/// yields zero.
pub fn min_generalized_eigenvalue<T: Real>(
    s: &SparseMatrix<T>,
    g: &SparseMatrix<T>,
    options: &SpectrumOptions,
) -> Result<EigenEstimate> {
    let s64 = to_f64(s);
    let g64 = to_f64(g);
    let lu = match LuFactorization::new(&s64) {
        Ok(lu) => lu,
        Err(_) => {
            return Ok(EigenEstimate {
                value: 0.0,
                iterations: 0,
                converged: true,
            })
        }
    };
    let est = match lanczos_largest(s64.n(), |x| lu.solve(&g64.mul(x)), |x| g64.mul(x), options) {
        Ok(est) => est,
        Err(Error::SingularMatrix) => {
            return Ok(EigenEstimate {
                value: 0.0,
                iterations: 0,
                converged: true,
            })
        }
        Err(e) => return Err(e),
    };
    Ok(EigenEstimate {
        value: if est.value > 0.0 { 1.0 / est.value } else { 0.0 },
        ..est
    })
}

/// Smallest singular value of `L^{-1} A L^{-T}` where `L L^T = G`, from the
/// largest eigenvalue of `A^{-1} G A^{-T} G` in the `G` inner product.
pub fn min_generalized_singular_value<T: Real>(
    a: &SparseMatrix<T>,
    g: &SparseMatrix<T>,
    options: &SpectrumOptions,
) -> Result<EigenEstimate> {
    let a64 = to_f64(a);
    let g64 = to_f64(g);
    let lu = LuFactorization::new(&a64)?;
    let est = lanczos_largest(
        a64.n(),
        |x| lu.solve(&g64.mul(&lu.solve_transpose(&g64.mul(x))?)),
        |x| g64.mul(x),
        options,
    )?;
    Ok(EigenEstimate {
        value: if est.value > 0.0 { 1.0 / est.value.sqrt() } else { 0.0 },
        ..est
    })
}

fn dense<T: Real>(a: &SparseMatrix<T>) -> Result<Mat<f64>> {
    let n = a.n();
    if n > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense routines are limited to n <= {DENSE_LIMIT}, got {n}"
        )));
    }
    let mut m = Mat::<f64>::zeros(n, n);
    for (r, c, v) in a.triplets() {
        m[(r, c)] = v.to_f64_lossy();
    }
    Ok(m)
}

/// All singular values, nonincreasing.
pub fn dense_singular_values<T: Real>(a: &SparseMatrix<T>) -> Result<Vec<f64>> {
    dense(a)?
        .singular_values()
        .map_err(|e| Error::NotConverged(format!("{e:?}")))
}

pub fn dense_condition<T: Real>(a: &SparseMatrix<T>) -> Result<SpectrumReport> {
    let s = dense_singular_values(a)?;
    let (max, min) = (s[0], s[s.len() - 1]);
    Ok(SpectrumReport {
        sigma_max: max,
        sigma_min: Some(min),
        cond: Some(max / min),
        iterations_max: 0,
        iterations_min: 0,
        converged_max: true,
        converged_min: true,
        failure: None,
    })
}

/// `G^{-1/2}` of a symmetric positive definite matrix.
fn inverse_sqrt(g: &Mat<f64>) -> Result<Mat<f64>> {
    let eig = g
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NotConverged(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let n = g.nrows();
    let smax = s[n - 1];
    if !(s[0] > 1e-14 * smax) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {} relative to {}",
            s[0], smax
        )));
    }
    let u = eig.U();
    Ok(Mat::from_fn(n, n, |r, c| {
        (0..n).map(|k| u[(r, k)] * u[(c, k)] / s[k].sqrt()).sum()
    }))
}

/// Eigenvalues of `S x = lambda G x`, nondecreasing.
pub fn dense_generalized_eigenvalues<T: Real>(s: &SparseMatrix<T>, g: &SparseMatrix<T>) -> Result<Vec<f64>> {
    let w = inverse_sqrt(&dense(g)?)?;
    let m = &w * dense(s)? * &w;
    let sym = Mat::from_fn(m.nrows(), m.ncols(), |r, c| 0.5 * (m[(r, c)] + m[(c, r)]));
    sym.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NotConverged(format!("{e:?}")))
}

/// Singular values of `G^{-1/2} A G^{-1/2}`, nonincreasing. They coincide with
/// those of `L^{-1} A L^{-T}` for any factor `L L^T = G`.
pub fn dense_generalized_singular_values<T: Real>(a: &SparseMatrix<T>, g: &SparseMatrix<T>) -> Result<Vec<f64>> {
    let w = inverse_sqrt(&dense(g)?)?;
    let m = &w * dense(a)? * &w;
    m.singular_values()
        .map_err(|e| Error::NotConverged(format!("{e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let id = SparseMatrix::<f64>::identity(10);
        let r = estimate_condition(&id, &SpectrumOptions::default()).unwrap();
        assert!((r.cond.unwrap() - 1.0).abs() < 1e-10);
        let d = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 10.0)]).unwrap();
        let r = estimate_condition(&d, &SpectrumOptions::default()).unwrap();
        assert!((r.cond.unwrap() - 10.0).abs() < 1e-8);
        assert!(r.is_complete());
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0)]).unwrap();
        let r = estimate_condition(&a, &SpectrumOptions::default()).unwrap();
        assert!(r.sigma_min.is_none());
        assert!(r.failure.is_some());
    }

    #[test]
    fn generalized_eigenvalue_matches_dense() {
        let n = 30;
        let mut s = Vec::new();
        let mut g = Vec::new();
        for i in 0..n {
            s.push((i, i, 2.0 + i as f64 * 0.1));
            g.push((i, i, 1.0 + (i % 3) as f64));
            if i + 1 < n {
                s.push((i, i + 1, -0.5));
                s.push((i + 1, i, -0.5));
                g.push((i, i + 1, 0.2));
                g.push((i + 1, i, 0.2));
            }
        }
        let s = SparseMatrix::from_triplets(n, &s).unwrap();
        let g = SparseMatrix::from_triplets(n, &g).unwrap();
        let dense = dense_generalized_eigenvalues(&s, &g).unwrap();
        let est = min_generalized_eigenvalue(&s, &g, &SpectrumOptions::default()).unwrap();
        assert!((est.value - dense[0]).abs() < 1e-8 * dense[0]);
        let sv = dense_generalized_singular_values(&s, &g).unwrap();
        let est = min_generalized_singular_value(&s, &g, &SpectrumOptions::default()).unwrap();
        assert!((est.value - sv[n - 1]).abs() < 1e-8 * sv[n - 1]);
    }
}
