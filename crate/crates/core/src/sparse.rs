//! Compressed sparse row matrices with a cell-block sparsity pattern.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::ActiveMesh;
use crate::scalar::Real;

/// Which cell blocks are coupled: every cell with itself and its face neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPattern {
    block_size: usize,
    cell_ptr: Vec<usize>,
    cell_cols: Vec<usize>,
}

impl BlockPattern {
    pub fn from_active(active: &ActiveMesh, block_size: usize) -> Self {
        let mut cell_ptr = vec![0];
        let mut cell_cols = Vec::new();
        for cell in 0..active.num_cells() {
            let mut cols: Vec<usize> = active.neighbors(cell).collect();
            cols.push(cell);
            cols.sort_unstable();
            cols.dedup();
            cell_cols.extend(cols);
            cell_ptr.push(cell_cols.len());
        }
        Self {
            block_size,
            cell_ptr,
            cell_cols,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cell_ptr.len() - 1
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Cells coupled to `cell`, ascending.
    pub fn coupled(&self, cell: usize) -> &[usize] {
        &self.cell_cols[self.cell_ptr[cell]..self.cell_ptr[cell + 1]]
    }

    pub fn is_coupled(&self, a: usize, b: usize) -> bool {
        self.coupled(a).binary_search(&b).is_ok()
    }
}

/// Square CSR matrix. Column indices in each row are ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// All-zero matrix with the full block pattern allocated.
    pub fn zeros(pattern: &BlockPattern) -> Self {
        let nb = pattern.block_size;
        let n = pattern.num_cells() * nb;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cell in 0..pattern.num_cells() {
            for _ in 0..nb {
                for &c in pattern.coupled(cell) {
                    col_idx.extend(c * nb..(c + 1) * nb);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![T::zero(); col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({r}, {c}) outside a {n}x{n} matrix"
            )));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<T> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|p| self.row_ptr[row] + p)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.position(row, col)
            .map_or(T::zero(), |p| self.values[p])
    }

    /// Adds a dense `nb x nb` block (row major) at cell block `(a, b)`.
    pub fn add_block(&mut self, nb: usize, a: usize, b: usize, block: &[T]) {
        for i in 0..nb {
            let row = a * nb + i;
            let start = self
                .position(row, b * nb)
                .expect("block outside the sparsity pattern");
            for j in 0..nb {
                self.values[start + j] += block[i * nb + j];
            }
        }
    }

    /// `self += alpha * other`; both must share the same pattern.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        for (v, &o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// Zero matrix with the same pattern.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = T::zero());
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn matvec_transpose(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, &xi) in x.iter().enumerate() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * xi;
            }
        }
    }

    /// `x^T M y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let my = self.mul(y);
        x.iter().zip(&my).map(|(&a, &b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<(usize, usize, T)> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.n, &triplets).expect("indices in range")
    }

    /// Symmetric part `(M + M^T) / 2`.
    pub fn symmetric_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(2 * self.nnz());
        for (r, c, v) in self.triplets() {
            triplets.push((r, c, half * v));
            triplets.push((c, r, half * v));
        }
        Self::from_triplets(self.n, &triplets).expect("indices in range")
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> T {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n * self.n];
        for (r, c, v) in self.triplets() {
            d[r * self.n + c] = v;
        }
        d
    }

    /// Writes the nonzeros as `row col value` lines (0-based), preceded by a
    /// `n n nnz` header line.
    pub fn write_coordinate(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {:.17e}", v.to_f64_lossy())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (2, 1, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(2, 1), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert!(SparseMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn transpose_products() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (1, 2, -1.0), (2, 0, 0.5), (1, 1, 3.0)]).unwrap();
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        m.matvec_transpose(&x, &mut y);
        assert_eq!(y.to_vec(), m.transpose().mul(&x));
        assert_eq!(m.symmetric_part().asymmetry(), 0.0);
        assert_eq!(m.bilinear(&x, &x), x.iter().zip(m.mul(&x)).map(|(a, b)| a * b).sum::<f64>());
    }

    #[test]
    fn coordinate_export() {
        let m = SparseMatrix::<f64>::identity(2);
        let mut buf = Vec::new();
        m.write_coordinate(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("2 2 2\n0 0 1.00000000000000000e0"));
    }
}
