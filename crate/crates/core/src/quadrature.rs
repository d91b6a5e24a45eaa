//! Quadrature rules in physical coordinates: segments, triangles, axis-aligned
//! rectangles (cell faces) and boxes (cells).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Highest polynomial degree any rule is built for.
pub const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug, Default)]
pub struct QuadratureRule<T> {
    pub points: Vec<Vec3<T>>,
    pub weights: Vec<T>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed in `f64`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points needed for exactness of `degree`.
#[inline]
pub fn gauss_points_for(degree: usize) -> usize {
    degree / 2 + 1
}

fn check_degree(degree: usize) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        Err(Error::UnsupportedDegree(degree))
    } else {
        Ok(())
    }
}

/// Barycentric points and weights (summing to one) on a triangle.
fn triangle_reference(degree: usize) -> Vec<([f64; 3], f64)> {
    let mut out = Vec::new();
    let orbit3 = |a: f64, w: f64, out: &mut Vec<([f64; 3], f64)>| {
        let b = 1.0 - 2.0 * a;
        out.push(([a, a, b], w));
        out.push(([a, b, a], w));
        out.push(([b, a, a], w));
    };
    match degree {
        1 => out.push(([1.0 / 3.0; 3], 1.0)),
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut out),
        3 | 4 => {
            orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut out);
            orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut out);
        }
        5 => {
            let s15 = 15f64.sqrt();
            out.push(([1.0 / 3.0; 3], 0.225));
            orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0, &mut out);
            orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0, &mut out);
        }
        _ => {
            // Collapsed (Duffy) tensor Gauss rule: x = u, y = v (1 - u),
            // Jacobian 1 - u. Reference triangle area 1/2 is normalized away.
            let n = gauss_points_for(degree + 1);
            let (g, w) = gauss_legendre(n);
            for (&gu, &wu) in g.iter().zip(&w) {
                let u = 0.5 * (gu + 1.0);
                for (&gv, &wv) in g.iter().zip(&w) {
                    let v = 0.5 * (gv + 1.0);
                    let x = u;
                    let y = v * (1.0 - u);
                    let weight = 0.25 * wu * wv * (1.0 - u) * 2.0;
                    out.push(([1.0 - x - y, x, y], weight));
                }
            }
        }
    }
    out
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(Vec3<T>) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Gauss-Legendre rule on the segment `[a, b]`.
    pub fn segment(a: Vec3<T>, b: Vec3<T>, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let (g, w) = gauss_legendre(gauss_points_for(degree));
        let len = (b - a).norm();
        let half = T::lit(0.5);
        let points = g
            .iter()
            .map(|&t| a + (b - a) * (half * (T::lit(t) + T::one())))
            .collect();
        let weights = w.iter().map(|&wi| half * len * T::lit(wi)).collect();
        Ok(Self {
            points,
            weights,
            degree,
        })
    }

    /// Symmetric rule (degree <= 5) or collapsed Gauss rule on a triangle.
    pub fn triangle(v: [Vec3<T>; 3], degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let area = T::lit(0.5) * (v[1] - v[0]).cross(v[2] - v[0]).norm();
        let mut rule = Self {
            degree,
            ..Default::default()
        };
        for (bary, w) in triangle_reference(degree) {
            let x = v[0] * T::lit(bary[0]) + v[1] * T::lit(bary[1]) + v[2] * T::lit(bary[2]);
            rule.points.push(x);
            rule.weights.push(area * T::lit(w));
        }
        Ok(rule)
    }

    /// Tensor Gauss rule on the box `[origin, origin + size]`.
    pub fn cell(origin: Vec3<T>, size: Vec3<T>, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let (g, w) = gauss_legendre(gauss_points_for(degree));
        let half = T::lit(0.5);
        let jac = size.x * size.y * size.z * T::lit(0.125);
        let mut rule = Self {
            degree,
            ..Default::default()
        };
        for (k, &wz) in w.iter().enumerate() {
            for (j, &wy) in w.iter().enumerate() {
                for (i, &wx) in w.iter().enumerate() {
                    let r = Vec3::new(T::lit(g[i]), T::lit(g[j]), T::lit(g[k]));
                    rule.points.push(Vec3::new(
                        origin.x + half * (r.x + T::one()) * size.x,
                        origin.y + half * (r.y + T::one()) * size.y,
                        origin.z + half * (r.z + T::one()) * size.z,
                    ));
                    rule.weights.push(jac * T::lit(wx * wy * wz));
                }
            }
        }
        Ok(rule)
    }

    /// Tensor Gauss rule on the axis-aligned rectangle through `origin`
    /// perpendicular to `axis`, spanning `size` in the other two directions.
    pub fn face(origin: Vec3<T>, size: Vec3<T>, axis: usize, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let (g, w) = gauss_legendre(gauss_points_for(degree));
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            2 => (0, 1),
            _ => return Err(Error::InvalidArgument(format!("axis {axis}"))),
        };
        let half = T::lit(0.5);
        let jac = size[a] * size[b] * T::lit(0.25);
        let mut rule = Self {
            degree,
            ..Default::default()
        };
        for (j, &wb) in w.iter().enumerate() {
            for (i, &wa) in w.iter().enumerate() {
                let mut x = origin;
                x[a] += half * (T::lit(g[i]) + T::one()) * size[a];
                x[b] += half * (T::lit(g[j]) + T::one()) * size[b];
                rule.points.push(x);
                rule.weights.push(jac * T::lit(wa * wb));
            }
        }
        Ok(rule)
    }
}
