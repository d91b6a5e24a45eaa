//! Tensor-product Legendre basis on the reference cube `[-1, 1]^3`.
//!
//! Local index of the function `P_i(x) P_j(y) P_l(z)` is `i + (k+1) (j + (k+1) l)`.

use crate::scalar::Real;
use crate::vec3::Vec3;

/// Values and derivatives of `P_0..=P_k` at `t`.
pub fn legendre<T: Real>(k: usize, t: T, values: &mut [T], derivs: &mut [T]) {
    values[0] = T::one();
    derivs[0] = T::zero();
    if k == 0 {
        return;
    }
    values[1] = t;
    derivs[1] = T::one();
    for n in 2..=k {
        let nf = T::from_usize_lossy(n);
        let two_n_minus_one = T::from_usize_lossy(2 * n - 1);
        values[n] = (two_n_minus_one * t * values[n - 1] - (nf - T::one()) * values[n - 2]) / nf;
        // P_n' = P_{n-2}' + (2n - 1) P_{n-1}
        derivs[n] = derivs[n - 2] + two_n_minus_one * values[n - 1];
    }
}

#[derive(Clone, Debug)]
pub struct TensorBasis {
    degree: usize,
}

/// Basis values and physical gradients at one point.
#[derive(Clone, Debug, Default)]
pub struct BasisEval<T> {
    pub values: Vec<T>,
    pub gradients: Vec<Vec3<T>>,
}

impl TensorBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        (self.degree + 1).pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        let m = self.degree + 1;
        i + m * (j + m * l)
    }

    /// Diagonal of the reference mass matrix: `prod 2 / (2 n + 1)`.
    pub fn reference_mass<T: Real>(&self) -> Vec<T> {
        let m = self.degree + 1;
        let one_d: Vec<T> = (0..m)
            .map(|n| T::lit(2.0) / T::from_usize_lossy(2 * n + 1))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for l in 0..m {
            for j in 0..m {
                for i in 0..m {
                    out.push(one_d[i] * one_d[j] * one_d[l]);
                }
            }
        }
        out
    }

    /// Evaluates all basis functions at a physical point of the cell
    /// `[origin, origin + size]`; gradients are with respect to physical coordinates.
    pub fn eval<T: Real>(&self, origin: Vec3<T>, size: Vec3<T>, x: Vec3<T>, out: &mut BasisEval<T>) {
        let m = self.degree + 1;
        let two = T::lit(2.0);
        let mut v = [[T::zero(); 8]; 3];
        let mut d = [[T::zero(); 8]; 3];
        assert!(m <= 8, "basis degree above 7 not supported");
        for axis in 0..3 {
            let t = two * (x[axis] - origin[axis]) / size[axis] - T::one();
            legendre(self.degree, t, &mut v[axis][..m], &mut d[axis][..m]);
            let scale = two / size[axis];
            for n in 0..m {
                d[axis][n] *= scale;
            }
        }
        out.values.clear();
        out.gradients.clear();
        for l in 0..m {
            for j in 0..m {
                for i in 0..m {
                    out.values.push(v[0][i] * v[1][j] * v[2][l]);
                    out.gradients.push(Vec3::new(
                        d[0][i] * v[1][j] * v[2][l],
                        v[0][i] * d[1][j] * v[2][l],
                        v[0][i] * v[1][j] * d[2][l],
                    ));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_known_values() {
        let mut v = [0.0; 4];
        let mut d = [0.0; 4];
        legendre(3, 0.5f64, &mut v, &mut d);
        assert!((v[2] - (-0.125)).abs() < 1e-15);
        assert!((v[3] - (-0.4375)).abs() < 1e-15);
        // P_3' = (15 t^2 - 3) / 2
        assert!((d[3] - 0.375).abs() < 1e-15);
        assert!((d[2] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn reference_mass_matches_quadrature() {
        use crate::quadrature::QuadratureRule;
        let basis = TensorBasis::new(2);
        let rule = QuadratureRule::<f64>::cell(Vec3::splat(-1.0), Vec3::splat(2.0), 6).unwrap();
        let mass = basis.reference_mass::<f64>();
        let mut ev = BasisEval::default();
        let n = basis.len();
        let mut m = vec![0.0; n * n];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            basis.eval(Vec3::splat(-1.0), Vec3::splat(2.0), *x, &mut ev);
            for a in 0..n {
                for b in 0..n {
                    m[a * n + b] += w * ev.values[a] * ev.values[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let expected = if a == b { mass[a] } else { 0.0 };
                assert!((m[a * n + b] - expected).abs() < 1e-13);
            }
        }
    }
}
