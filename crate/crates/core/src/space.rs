//! Discontinuous tensor-product polynomial space on the active mesh.

use std::collections::HashMap;

use crate::basis::{legendre, BasisEval, TensorBasis};
use crate::error::{Error, Result};
use crate::geometry::SurfaceGeometry;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 7;

/// `Q^k` on every active cell with a Legendre basis; dofs are stored cell by cell.
#[derive(Clone, Debug)]
pub struct DgSpace<T> {
    geometry: SurfaceGeometry<T>,
    basis: TensorBasis,
}

/// Coefficients of a function in a [`DgSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector<T> {
    coeffs: Vec<T>,
}

impl<T: Real> FieldVector<T> {
    pub fn zeros(space: &DgSpace<T>) -> Self {
        Self {
            coeffs: vec![T::zero(); space.ndofs()],
        }
    }

    pub fn from_vec(space: &DgSpace<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} coefficients, space has {} dofs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(Self { coeffs })
    }

    /// The field equal to `value` everywhere.
    pub fn constant(space: &DgSpace<T>, value: T) -> Self {
        let mut f = Self::zeros(space);
        for cell in 0..space.num_cells() {
            f.coeffs[space.dof_offset(cell)] = value;
        }
        f
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl<T: Real> DgSpace<T> {
    pub fn new(geometry: SurfaceGeometry<T>, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree must be in 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        Ok(Self {
            geometry,
            basis: TensorBasis::new(degree),
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn geometry(&self) -> &SurfaceGeometry<T> {
        &self.geometry
    }

    pub fn num_cells(&self) -> usize {
        self.geometry.active().num_cells()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.basis.len()
    }

    pub fn ndofs(&self) -> usize {
        self.num_cells() * self.dofs_per_cell()
    }

    pub fn dof_offset(&self, cell: usize) -> usize {
        cell * self.dofs_per_cell()
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell < self.num_cells() {
            Ok(())
        } else {
            Err(Error::InactiveCell(cell))
        }
    }

    /// Basis values and gradients of active cell `cell` at `x`.
    #[inline]
    pub fn eval_basis(&self, cell: usize, x: Vec3<T>, out: &mut BasisEval<T>) {
        let (origin, size) = self.geometry.cell_box(cell);
        self.basis.eval(origin, size, x, out);
    }

    /// Diagonal of the cell mass matrix.
    pub fn mass_diagonal(&self, cell: usize) -> Vec<T> {
        let (_, size) = self.geometry.cell_box(cell);
        let jac = size.x * size.y * size.z / T::lit(8.0);
        self.basis
            .reference_mass::<T>()
            .into_iter()
            .map(|m| m * jac)
            .collect()
    }

    fn local<'a>(&self, field: &'a FieldVector<T>, cell: usize) -> &'a [T] {
        let o = self.dof_offset(cell);
        &field.coeffs[o..o + self.dofs_per_cell()]
    }

    pub fn eval(&self, field: &FieldVector<T>, cell: usize, x: Vec3<T>) -> Result<T> {
        self.check_cell(cell)?;
        let mut ev = BasisEval::default();
        self.eval_basis(cell, x, &mut ev);
        Ok(self
            .local(field, cell)
            .iter()
            .zip(&ev.values)
            .map(|(&c, &v)| c * v)
            .sum())
    }

    pub fn eval_gradient(&self, field: &FieldVector<T>, cell: usize, x: Vec3<T>) -> Result<Vec3<T>> {
        self.check_cell(cell)?;
        let mut ev = BasisEval::default();
        self.eval_basis(cell, x, &mut ev);
        let mut g = Vec3::zero();
        for (&c, &d) in self.local(field, cell).iter().zip(&ev.gradients) {
            g += d * c;
        }
        Ok(g)
    }

    /// Cell-wise `L^2` projection of an ambient function.
    pub fn l2_project(&self, mut f: impl FnMut(Vec3<T>) -> T) -> Result<FieldVector<T>> {
        let n = self.dofs_per_cell();
        let degree = 2 * self.degree() + 2;
        let mut out = FieldVector::zeros(self);
        let mut ev = BasisEval::default();
        for cell in 0..self.num_cells() {
            let rule = self.geometry.volume_quadrature(cell, degree)?;
            let mass = self.mass_diagonal(cell);
            let o = self.dof_offset(cell);
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let fx = f(x);
                self.eval_basis(cell, x, &mut ev);
                for i in 0..n {
                    out.coeffs[o + i] += w * fx * ev.values[i];
                }
            }
            for i in 0..n {
                out.coeffs[o + i] /= mass[i];
            }
        }
        Ok(out)
    }

    /// Projection of the closest point extension `f o p`.
    pub fn l2_project_extension(&self, f: impl Fn(Vec3<T>) -> T) -> Result<FieldVector<T>> {
        let ls = self.geometry.levelset();
        let mut failure = None;
        let out = self.l2_project(|x| match ls.closest_point(x) {
            Ok(p) => f(p),
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Oswald interpolant: nodal values on the `(k+1)^3` equispaced grid are
    /// averaged over all active cells sharing a node.
    pub fn oswald_interpolate(&self, field: &FieldVector<T>) -> FieldVector<T> {
        let k = self.degree();
        let m = k + 1;
        let vand = nodal_vandermonde::<T>(k);
        let inv = invert(&vand, m);
        let mesh = self.geometry.mesh();

        let key = |cell: usize, i: usize, j: usize, l: usize| {
            let c = mesh.cell_coords(self.geometry.active().cell(cell));
            [k * c[0] + i, k * c[1] + j, k * c[2] + l]
        };

        let mut nodal: Vec<Vec<T>> = Vec::with_capacity(self.num_cells());
        let mut sums: HashMap<[usize; 3], (T, usize)> = HashMap::new();
        for cell in 0..self.num_cells() {
            let values = tensor_apply(&vand, m, self.local(field, cell));
            for l in 0..m {
                for j in 0..m {
                    for i in 0..m {
                        let e = sums.entry(key(cell, i, j, l)).or_insert((T::zero(), 0));
                        e.0 += values[self.basis.index(i, j, l)];
                        e.1 += 1;
                    }
                }
            }
            nodal.push(values);
        }

        let mut out = FieldVector::zeros(self);
        for (cell, mut values) in nodal.into_iter().enumerate() {
            for l in 0..m {
                for j in 0..m {
                    for i in 0..m {
                        let (s, c) = sums[&key(cell, i, j, l)];
                        values[self.basis.index(i, j, l)] = s / T::from_usize_lossy(c);
                    }
                }
            }
            let modal = tensor_apply(&inv, m, &values);
            let o = self.dof_offset(cell);
            out.coeffs[o..o + modal.len()].copy_from_slice(&modal);
        }
        out
    }
}

/// `V[i][n] = P_n(t_i)` on the equispaced nodes `t_i = -1 + 2 i / k`.
fn nodal_vandermonde<T: Real>(k: usize) -> Vec<T> {
    let m = k + 1;
    let mut v = vec![T::zero(); m * m];
    let mut vals = vec![T::zero(); m];
    let mut ders = vec![T::zero(); m];
    for i in 0..m {
        let t = T::lit(-1.0) + T::lit(2.0) * T::from_usize_lossy(i) / T::from_usize_lossy(k);
        legendre(k, t, &mut vals, &mut ders);
        v[i * m..(i + 1) * m].copy_from_slice(&vals);
    }
    v
}

/// Gauss-Jordan inverse of a small dense row-major matrix.
fn invert<T: Real>(a: &[T], m: usize) -> Vec<T> {
    let mut a = a.to_vec();
    let mut inv = vec![T::zero(); m * m];
    for i in 0..m {
        inv[i * m + i] = T::one();
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r, &s| a[r * m + col].abs().partial_cmp(&a[s * m + col].abs()).unwrap())
            .unwrap();
        for c in 0..m {
            a.swap(col * m + c, pivot * m + c);
            inv.swap(col * m + c, pivot * m + c);
        }
        let d = a[col * m + col];
        for c in 0..m {
            a[col * m + c] /= d;
            inv[col * m + c] /= d;
        }
        for r in 0..m {
            if r != col {
                let f = a[r * m + col];
                for c in 0..m {
                    let (ac, ic) = (a[col * m + c], inv[col * m + c]);
                    a[r * m + c] -= f * ac;
                    inv[r * m + c] -= f * ic;
                }
            }
        }
    }
    inv
}

/// Applies `M ⊗ M ⊗ M` to a tensor stored with the first index fastest.
fn tensor_apply<T: Real>(mat: &[T], m: usize, x: &[T]) -> Vec<T> {
    let mut cur = x.to_vec();
    let strides = [1, m, m * m];
    for &stride in &strides {
        let mut next = vec![T::zero(); cur.len()];
        for (idx, slot) in next.iter_mut().enumerate() {
            let row = (idx / stride) % m;
            let base = idx - row * stride;
            let mut s = T::zero();
            for n in 0..m {
                s += mat[row * m + n] * cur[base + n * stride];
            }
            *slot = s;
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryOptions;
    use crate::levelset::LevelSet;
    use crate::mesh::BackgroundMesh;

    fn plane_space(k: usize, counts: [usize; 3]) -> DgSpace<f64> {
        let upper = Vec3::new(counts[0] as f64, counts[1] as f64, counts[2] as f64);
        let mesh = BackgroundMesh::build(Vec3::zero(), upper, counts).unwrap();
        let ls = LevelSet::plane(Vec3::new(0.1, 0.2, 1.0), 0.5);
        let geom = SurfaceGeometry::build(ls, mesh, GeometryOptions::for_degree(k)).unwrap();
        DgSpace::new(geom, k).unwrap()
    }

    #[test]
    fn constant_and_linear_fields() {
        let s = plane_space(1, [3, 3, 1]);
        let one = FieldVector::constant(&s, 1.0);
        let x = Vec3::new(1.3, 0.2, 0.7);
        let cell = 0;
        assert!((s.eval(&one, cell, x).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.eval_gradient(&one, cell, x).unwrap().norm() < 1e-15);
        let lin = s.l2_project(|p| p.x).unwrap();
        for c in 0..s.num_cells() {
            let g = s.eval_gradient(&lin, c, x).unwrap();
            assert!((g - Vec3::unit(0)).norm() < 1e-13);
        }
        assert!(s.eval(&one, s.num_cells(), x).is_err());
    }

    #[test]
    fn dof_count() {
        let s = plane_space(2, [2, 2, 1]);
        assert_eq!(s.dofs_per_cell(), 27);
        assert_eq!(s.ndofs(), s.num_cells() * 27);
    }

    #[test]
    fn oswald_two_cell_average() {
        let s = plane_space(1, [2, 1, 1]);
        assert_eq!(s.num_cells(), 2);
        let mut f = FieldVector::zeros(&s);
        f.coeffs_mut()[s.dof_offset(1)] = 1.0;
        let o = s.oswald_interpolate(&f);
        let node = Vec3::new(1.0, 0.0, 0.0);
        assert!((s.eval(&o, 0, node).unwrap() - 0.5).abs() < 1e-14);
        assert!((s.eval(&o, 1, node).unwrap() - 0.5).abs() < 1e-14);
        assert!(s.eval(&o, 0, Vec3::zero()).unwrap().abs() < 1e-14);
    }

    #[test]
    fn vandermonde_inverse() {
        for k in 1..=4 {
            let m = k + 1;
            let v = nodal_vandermonde::<f64>(k);
            let inv = invert(&v, m);
            for i in 0..m {
                for j in 0..m {
                    let s: f64 = (0..m).map(|n| v[i * m + n] * inv[n * m + j]).sum();
                    assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }
}
