//! Cartesian background mesh and the active mesh of cut cells.
//!
//! Cells are axis-aligned hexahedra indexed lexicographically with the x index
//! running fastest. Vertices use the same ordering on the `(n + 1)` lattice.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Relative tolerance used to decide whether cells are cubes.
const ISOTROPY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BackgroundMesh<T> {
    lower: Vec3<T>,
    upper: Vec3<T>,
    counts: [usize; 3],
    shift: Vec3<T>,
    h: Vec3<T>,
}

impl<T: Real> BackgroundMesh<T> {
    /// Builds a mesh of cubic cells. Fails if the cells would be anisotropic.
    pub fn build(lower: Vec3<T>, upper: Vec3<T>, counts: [usize; 3]) -> Result<Self> {
        let mesh = Self::build_anisotropic(lower, upper, counts)?;
        if !mesh.is_isotropic() {
            return Err(Error::AnisotropicCells {
                h: mesh.h.cast::<f64>().to_array(),
            });
        }
        Ok(mesh)
    }

    /// Same as [`BackgroundMesh::build`] but accepts box-shaped cells.
    pub fn build_anisotropic(lower: Vec3<T>, upper: Vec3<T>, counts: [usize; 3]) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::ZeroSubdivision { counts });
        }
        for axis in 0..3 {
            let len = upper[axis] - lower[axis];
            if !(len > T::zero()) || !len.is_finite() {
                return Err(Error::DegenerateBox { axis });
            }
        }
        let h = Vec3::new(
            (upper.x - lower.x) / T::from_usize_lossy(counts[0]),
            (upper.y - lower.y) / T::from_usize_lossy(counts[1]),
            (upper.z - lower.z) / T::from_usize_lossy(counts[2]),
        );
        Ok(Self {
            lower,
            upper,
            counts,
            shift: Vec3::zero(),
            h,
        })
    }

    /// Cube `[-half, half]^3` with `n` cells per direction.
    pub fn cube(half: T, n: usize) -> Result<Self> {
        Self::build(Vec3::splat(-half), Vec3::splat(half), [n, n, n])
    }

    pub fn is_isotropic(&self) -> bool {
        let tol = T::lit(ISOTROPY_TOL) * self.h.max_abs();
        (self.h.x - self.h.y).abs() <= tol && (self.h.x - self.h.z).abs() <= tol
    }

    /// Translates every vertex by `delta * h / sqrt(3) * (1, 1, 1)`, so the
    /// displacement has length `delta * h`.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        if !(delta >= T::zero() && delta < T::one()) {
            return Err(Error::ShiftOutOfRange(delta.to_f64_lossy()));
        }
        let step = delta * self.h() / T::lit(3.0).sqrt();
        let mut out = self.clone();
        out.shift = self.shift + Vec3::splat(step);
        Ok(out)
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn num_vertices(&self) -> usize {
        self.counts.iter().map(|c| c + 1).product()
    }

    /// Per-axis cell size.
    pub fn cell_size(&self) -> Vec3<T> {
        self.h
    }

    /// Characteristic mesh size (largest edge length).
    pub fn h(&self) -> T {
        self.h.x.max(self.h.y).max(self.h.z)
    }

    pub fn shift(&self) -> Vec3<T> {
        self.shift
    }

    /// Bounds of the (possibly shifted) meshed box.
    pub fn bounds(&self) -> (Vec3<T>, Vec3<T>) {
        (self.lower + self.shift, self.upper + self.shift)
    }

    #[inline]
    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2])
    }

    #[inline]
    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    #[inline]
    pub fn vertex_index(&self, ijk: [usize; 3]) -> usize {
        let nx = self.counts[0] + 1;
        let ny = self.counts[1] + 1;
        ijk[0] + nx * (ijk[1] + ny * ijk[2])
    }

    #[inline]
    pub fn vertex_coords(&self, vertex: usize) -> [usize; 3] {
        let nx = self.counts[0] + 1;
        let ny = self.counts[1] + 1;
        [vertex % nx, (vertex / nx) % ny, vertex / (nx * ny)]
    }

    #[inline]
    pub fn vertex_position(&self, ijk: [usize; 3]) -> Vec3<T> {
        let base = self.lower + self.shift;
        Vec3::new(
            base.x + T::from_usize_lossy(ijk[0]) * self.h.x,
            base.y + T::from_usize_lossy(ijk[1]) * self.h.y,
            base.z + T::from_usize_lossy(ijk[2]) * self.h.z,
        )
    }

    /// Lower corner of a cell.
    #[inline]
    pub fn cell_origin(&self, cell: usize) -> Vec3<T> {
        self.vertex_position(self.cell_coords(cell))
    }

    pub fn cell_center(&self, cell: usize) -> Vec3<T> {
        self.cell_origin(cell) + self.h * T::lit(0.5)
    }

    /// Neighbor across the face with outward normal `+e_axis` (`upper`) or `-e_axis`.
    pub fn neighbor(&self, cell: usize, axis: usize, upper: bool) -> Option<usize> {
        let mut c = self.cell_coords(cell);
        if upper {
            if c[axis] + 1 >= self.counts[axis] {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(self.cell_index(c))
    }
}

/// Subdivision counts of refinement level `level`: `floor(2^(level/2)) * base`.
pub fn refine_counts(level: u32, base: [usize; 3]) -> [usize; 3] {
    let factor = 2f64.powf(level as f64 / 2.0).floor() as usize;
    base.map(|c| c * factor)
}

/// A face shared by two active cells. `plus` is the cell on the lower side
/// along `axis`, so the face normal `n_F = +e_axis` points from `plus` to `minus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorFace {
    /// Active (local) index of the lower cell.
    pub plus: usize,
    /// Active (local) index of the upper cell.
    pub minus: usize,
    pub axis: usize,
}

#[derive(Clone, Debug)]
pub struct ActiveMesh {
    cells: Vec<usize>,
    local: BTreeMap<usize, usize>,
    faces: Vec<InteriorFace>,
    cell_faces: Vec<Vec<usize>>,
}

impl ActiveMesh {
    /// Collects the background cells for which `is_active` holds, in
    /// lexicographic order, together with the faces they share.
    pub fn extract<T: Real>(
        mesh: &BackgroundMesh<T>,
        mut is_active: impl FnMut(usize) -> bool,
    ) -> Result<Self> {
        let cells: Vec<usize> = (0..mesh.num_cells()).filter(|&c| is_active(c)).collect();
        Self::from_cells(mesh, cells)
    }

    /// Builds the active mesh from an ascending list of background cells.
    pub fn from_cells<T: Real>(mesh: &BackgroundMesh<T>, mut cells: Vec<usize>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyActiveMesh);
        }
        cells.sort_unstable();
        cells.dedup();
        let local: BTreeMap<usize, usize> =
            cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut faces = Vec::new();
        let mut cell_faces = vec![Vec::new(); cells.len()];
        for (plus, &cell) in cells.iter().enumerate() {
            for axis in 0..3 {
                if let Some(nb) = mesh.neighbor(cell, axis, true) {
                    if let Some(&minus) = local.get(&nb) {
                        let idx = faces.len();
                        faces.push(InteriorFace { plus, minus, axis });
                        cell_faces[plus].push(idx);
                        cell_faces[minus].push(idx);
                    }
                }
            }
        }
        Ok(Self {
            cells,
            local,
            faces,
            cell_faces,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Background index of active cell `local`.
    pub fn cell(&self, local: usize) -> usize {
        self.cells[local]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Active index of a background cell.
    pub fn local_index(&self, background: usize) -> Option<usize> {
        self.local.get(&background).copied()
    }

    pub fn faces(&self) -> &[InteriorFace] {
        &self.faces
    }

    /// Interior faces touching active cell `local`.
    pub fn cell_faces(&self, local: usize) -> &[usize] {
        &self.cell_faces[local]
    }

    /// Active neighbors of `local` across interior faces.
    pub fn neighbors(&self, local: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[local].iter().map(move |&f| {
            let face = self.faces[f];
            if face.plus == local {
                face.minus
            } else {
                face.plus
            }
        })
    }

    /// Face between two active cells, if they share one.
    pub fn face_between(&self, a: usize, b: usize) -> Option<usize> {
        self.cell_faces[a].iter().copied().find(|&f| {
            let face = self.faces[f];
            (face.plus == a && face.minus == b) || (face.plus == b && face.minus == a)
        })
    }

    /// Number of connected components of the face-adjacency graph.
    pub fn connected_components(&self) -> usize {
        let n = self.num_cells();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                for nb in self.neighbors(c) {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh(counts: [usize; 3]) -> BackgroundMesh<f64> {
        BackgroundMesh::build_anisotropic(Vec3::zero(), Vec3::splat(1.0), counts).unwrap()
    }

    #[test]
    fn sphere_grid_sizes() {
        let mesh = BackgroundMesh::<f64>::cube(1.21, 12).unwrap();
        assert_eq!(mesh.num_cells(), 1728);
        assert!((mesh.h() - 2.42 / 12.0).abs() < 1e-15);
        assert!(mesh.is_isotropic());
    }

    #[test]
    fn torus_grid_is_isotropic() {
        let alpha = 1.03;
        let (big_r, r) = (1.0, 1.0 / 3.0);
        let w = alpha * (big_r + r);
        let hh = alpha * r;
        let mesh =
            BackgroundMesh::<f64>::build(Vec3::new(-w, -w, -hh), Vec3::new(w, w, hh), [12, 12, 3])
                .unwrap();
        assert!(mesh.is_isotropic());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            BackgroundMesh::<f64>::build(Vec3::zero(), Vec3::splat(1.0), [0, 1, 1]),
            Err(Error::ZeroSubdivision { .. })
        ));
        assert!(matches!(
            BackgroundMesh::<f64>::build(Vec3::zero(), Vec3::new(1.0, 0.0, 1.0), [1, 1, 1]),
            Err(Error::DegenerateBox { axis: 1 })
        ));
        assert!(matches!(
            BackgroundMesh::<f64>::build(Vec3::zero(), Vec3::splat(1.0), [2, 1, 1]),
            Err(Error::AnisotropicCells { .. })
        ));
    }

    #[test]
    fn single_and_double_cell_faces() {
        let one = unit_mesh([1, 1, 1]);
        let active = ActiveMesh::extract(&one, |_| true).unwrap();
        assert_eq!(active.num_cells(), 1);
        assert!(active.faces().is_empty());

        let two = unit_mesh([2, 1, 1]);
        let active = ActiveMesh::extract(&two, |_| true).unwrap();
        assert_eq!(active.num_cells(), 2);
        assert_eq!(active.faces().len(), 1);
        let f = active.faces()[0];
        assert_eq!((f.plus, f.minus, f.axis), (0, 1, 0));
    }

    #[test]
    fn empty_active_mesh_is_an_error() {
        let mesh = unit_mesh([2, 2, 2]);
        assert!(matches!(
            ActiveMesh::extract(&mesh, |_| false),
            Err(Error::EmptyActiveMesh)
        ));
    }

    #[test]
    fn refinement_counts() {
        assert_eq!(refine_counts(0, [12, 12, 3]), [12, 12, 3]);
        assert_eq!(refine_counts(1, [12, 12, 12]), [12, 12, 12]);
        assert_eq!(refine_counts(2, [12, 12, 12]), [24, 24, 24]);
        assert_eq!(refine_counts(3, [12, 12, 12]), [24, 24, 24]);
        assert_eq!(refine_counts(4, [12, 12, 12]), [48, 48, 48]);
    }

    #[test]
    fn shift_arithmetic() {
        let mesh = BackgroundMesh::<f64>::cube(1.21, 12).unwrap();
        let same = mesh.shifted(0.0).unwrap();
        assert_eq!(same.vertex_position([3, 4, 5]), mesh.vertex_position([3, 4, 5]));

        let half = mesh.shifted(0.5).unwrap();
        let expected = 0.5 * (2.42 / 12.0) / 3f64.sqrt();
        let s = half.shift();
        assert!((s.x - expected).abs() < 1e-15);
        assert!((s.x - 0.058_216).abs() < 1e-6);
        assert_eq!(half.num_cells(), mesh.num_cells());
        assert_eq!(half.h(), mesh.h());

        let almost = unit_mesh([5, 5, 5]).shifted(1.0 - 1e-12).unwrap();
        assert!((almost.shift().norm() - 0.2).abs() < 1e-10);

        assert!(mesh.shifted(1.0).is_err());
        assert!(mesh.shifted(-0.1).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let mesh = unit_mesh([3, 4, 5]);
        for c in 0..mesh.num_cells() {
            assert_eq!(mesh.cell_index(mesh.cell_coords(c)), c);
        }
        for v in 0..mesh.num_vertices() {
            assert_eq!(mesh.vertex_index(mesh.vertex_coords(v)), v);
        }
    }

    #[test]
    fn face_count_consistency() {
        let mesh = unit_mesh([4, 3, 2]);
        let active = ActiveMesh::extract(&mesh, |c| c % 3 != 0).unwrap();
        let degree_sum: usize = (0..active.num_cells())
            .map(|c| active.neighbors(c).count())
            .sum();
        assert_eq!(degree_sum, 2 * active.faces().len());
    }
}
