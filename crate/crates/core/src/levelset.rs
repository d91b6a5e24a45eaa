//! Analytic level set functions and their closest point maps.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

type ScalarFn<T> = Arc<dyn Fn(Vec3<T>) -> T + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>;

const NEWTON_MAX_ITERS: usize = 50;

/// Surfaces given as the zero level set of a function `phi`, negative inside.
#[derive(Clone)]
pub enum LevelSet<T> {
    /// `|x - center| - radius`.
    Sphere { center: Vec3<T>, radius: T },
    /// `sqrt(z^2 + (sqrt(x^2 + y^2) - major)^2) - minor`, axis along z.
    Torus { major: T, minor: T },
    /// `normal . x - offset` with a unit normal.
    Plane { normal: Vec3<T>, offset: T },
    /// User supplied function and gradient with a curvature bound.
    Custom {
        value: ScalarFn<T>,
        gradient: VectorFn<T>,
        max_curvature: T,
    },
}

impl<T: fmt::Debug> fmt::Debug for LevelSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere { center, radius } => f
                .debug_struct("Sphere")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Self::Torus { major, minor } => f
                .debug_struct("Torus")
                .field("major", major)
                .field("minor", minor)
                .finish(),
            Self::Plane { normal, offset } => f
                .debug_struct("Plane")
                .field("normal", normal)
                .field("offset", offset)
                .finish(),
            Self::Custom { max_curvature, .. } => f
                .debug_struct("Custom")
                .field("max_curvature", max_curvature)
                .finish_non_exhaustive(),
        }
    }
}

fn point<T: Real>(x: Vec3<T>) -> [f64; 3] {
    x.cast::<f64>().to_array()
}

impl<T: Real> LevelSet<T> {
    pub fn sphere(radius: T) -> Self {
        Self::Sphere {
            center: Vec3::zero(),
            radius,
        }
    }

    pub fn torus(major: T, minor: T) -> Self {
        Self::Torus { major, minor }
    }

    /// Plane through `offset * normal`; `normal` is normalized here.
    pub fn plane(normal: Vec3<T>, offset: T) -> Self {
        let normal = normal.normalized().expect("plane normal must be nonzero");
        Self::Plane { normal, offset }
    }

    pub fn custom(
        value: impl Fn(Vec3<T>) -> T + Send + Sync + 'static,
        gradient: impl Fn(Vec3<T>) -> Vec3<T> + Send + Sync + 'static,
        max_curvature: T,
    ) -> Self {
        Self::Custom {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            max_curvature,
        }
    }

    pub fn value(&self, x: Vec3<T>) -> T {
        match self {
            Self::Sphere { center, radius } => (x - *center).norm() - *radius,
            Self::Torus { major, minor } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                let q = rho - *major;
                (x.z * x.z + q * q).sqrt() - *minor
            }
            Self::Plane { normal, offset } => normal.dot(x) - *offset,
            Self::Custom { value, .. } => value(x),
        }
    }

    /// Analytic gradient. Fails where the level set is not differentiable
    /// (sphere center, torus axis and tube center circle).
    pub fn gradient(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        match self {
            Self::Sphere { center, .. } => {
                let d = x - *center;
                d.normalized()
                    .ok_or(Error::SingularLevelSet { point: point(x) })
            }
            Self::Torus { major, .. } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                if rho == T::zero() {
                    return Err(Error::SingularLevelSet { point: point(x) });
                }
                let q = rho - *major;
                let dist = (x.z * x.z + q * q).sqrt();
                if dist == T::zero() {
                    return Err(Error::SingularLevelSet { point: point(x) });
                }
                let s = q / (rho * dist);
                Ok(Vec3::new(s * x.x, s * x.y, x.z / dist))
            }
            Self::Plane { normal, .. } => Ok(*normal),
            Self::Custom { gradient, .. } => {
                let g = gradient(x);
                if g.norm() == T::zero() || !g.is_finite() {
                    Err(Error::SingularLevelSet { point: point(x) })
                } else {
                    Ok(g)
                }
            }
        }
    }

    /// Unit normal field `grad(phi) / |grad(phi)|`, defined off the surface as well.
    pub fn extended_normal(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        self.gradient(x)?
            .normalized()
            .ok_or(Error::SingularLevelSet { point: point(x) })
    }

    /// Largest principal curvature `kappa` of the zero level set.
    pub fn max_curvature(&self) -> T {
        match self {
            Self::Sphere { radius, .. } => T::one() / *radius,
            Self::Torus { minor, .. } => T::one() / *minor,
            Self::Plane { .. } => T::zero(),
            Self::Custom { max_curvature, .. } => *max_curvature,
        }
    }

    /// Area of the zero level set when known in closed form.
    pub fn area(&self) -> Option<T> {
        match self {
            Self::Sphere { radius, .. } => Some(T::lit(4.0) * T::PI() * *radius * *radius),
            Self::Torus { major, minor } => Some(T::lit(4.0) * T::PI() * T::PI() * *major * *minor),
            _ => None,
        }
    }

    /// Whether `phi` is the signed distance, so that `grad(phi)` is constant
    /// along normal lines and the closest point extension has no normal derivative.
    pub fn is_distance_function(&self) -> bool {
        !matches!(self, Self::Custom { .. })
    }

    /// Closest point projection `p(x)`.
    ///
    /// Sphere, torus and plane use closed forms and only fail on their medial
    /// sets. Custom level sets use the gradient iteration
    /// `x <- x - phi grad(phi) / |grad(phi)|^2` and require `|phi| < 1 / kappa`.
    pub fn closest_point(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        match self {
            Self::Sphere { center, radius } => {
                let d = (x - *center)
                    .normalized()
                    .ok_or(Error::OutsideReach { point: point(x) })?;
                Ok(*center + d * *radius)
            }
            Self::Torus { major, minor } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                if rho == T::zero() {
                    return Err(Error::SingularLevelSet { point: point(x) });
                }
                let c = Vec3::new(*major * x.x / rho, *major * x.y / rho, T::zero());
                let d = (x - c)
                    .normalized()
                    .ok_or(Error::SingularLevelSet { point: point(x) })?;
                Ok(c + d * *minor)
            }
            Self::Plane { normal, offset } => Ok(x - *normal * (normal.dot(x) - *offset)),
            Self::Custom { max_curvature, .. } => {
                if *max_curvature > T::zero() && self.value(x).abs() * *max_curvature >= T::one() {
                    return Err(Error::OutsideReach { point: point(x) });
                }
                let scale = T::one().max(x.max_abs());
                let tol = T::lit(1e-14).max(T::epsilon() * T::lit(4.0)) * scale;
                let mut y = x;
                for _ in 0..NEWTON_MAX_ITERS {
                    let phi = self.value(y);
                    if phi.abs() <= tol {
                        return Ok(y);
                    }
                    let g = self.gradient(y)?;
                    y -= g * (phi / g.norm_squared());
                    if !y.is_finite() {
                        break;
                    }
                }
                Err(Error::ClosestPointNotConverged { point: point(x) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_values() {
        let s = LevelSet::<f64>::sphere(1.0);
        assert_eq!(s.value(Vec3::new(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(s.value(Vec3::zero()), -1.0);
        assert_eq!(s.max_curvature(), 1.0);
        let p = s.closest_point(Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(p, Vec3::new(1.0, 0.0, 0.0));
        assert!(s.closest_point(Vec3::zero()).is_err());
    }

    #[test]
    fn custom_closest_point_outside_reach() {
        let ls = LevelSet::<f64>::custom(|x| x.norm() - 1.0, |x| x * (1.0 / x.norm()), 1.0);
        assert!(matches!(
            ls.closest_point(Vec3::new(0.0, 0.0, 2.5)),
            Err(Error::OutsideReach { .. })
        ));
    }

    #[test]
    fn torus_values_and_projection() {
        let t = LevelSet::<f64>::torus(1.0, 1.0 / 3.0);
        assert!(t.value(Vec3::new(1.0, 0.0, 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(t.max_curvature(), 3.0);
        let p = t.closest_point(Vec3::new(1.0, 0.0, 0.5)).unwrap();
        assert!((p - Vec3::new(1.0, 0.0, 1.0 / 3.0)).norm() < 1e-15);
        assert!(t.gradient(Vec3::new(0.0, 0.0, 0.2)).is_err());
        assert!(t.gradient(Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn extended_normals() {
        let s = LevelSet::<f64>::sphere(1.0);
        assert_eq!(s.extended_normal(Vec3::new(0.0, 0.0, 2.0)).unwrap(), Vec3::unit(2));
        assert_eq!(s.extended_normal(Vec3::new(2.0, 0.0, 0.0)).unwrap(), Vec3::unit(0));
        let p = LevelSet::<f64>::plane(Vec3::unit(2), 0.5);
        assert_eq!(p.extended_normal(Vec3::new(0.3, 0.7, 0.1)).unwrap(), Vec3::unit(2));
    }

    #[test]
    fn custom_level_set_uses_newton() {
        // Sphere of radius 1 written as x^2 + y^2 + z^2 - 1.
        let ls = LevelSet::<f64>::custom(|x| x.norm_squared() - 1.0, |x| x * 2.0, 1.0);
        let q = ls.closest_point(Vec3::new(0.3, 0.4, 1.0)).unwrap();
        assert!(ls.value(q).abs() < 1e-13);
        // Radial points converge to the radial projection.
        let r = ls.closest_point(Vec3::new(0.0, 1.2, 0.0)).unwrap();
        assert!((r - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn surface_points_are_fixed() {
        let t = LevelSet::<f64>::torus(1.0, 1.0 / 3.0);
        for i in 0..20 {
            let a = i as f64 * 0.31;
            let b = i as f64 * 0.77;
            let x = Vec3::new(
                (1.0 + b.cos() / 3.0) * a.cos(),
                (1.0 + b.cos() / 3.0) * a.sin(),
                b.sin() / 3.0,
            );
            let p = t.closest_point(x).unwrap();
            assert!((p - x).norm() < 1e-14);
        }
    }
}
