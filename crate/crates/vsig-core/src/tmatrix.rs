//! Matrices over the truncated tensor algebra.
//!
//! `(T^N(R^m), ⊗_N)` is a (noncommutative) ring; the state-space recursion
//! works with row vectors and square matrices over it, mixed with plain real
//! matrices acting entrywise by scalar multiplication.

use crate::tensor::{TensorError, TruncatedTensor};

/// A `rows × cols` matrix with entries in `T^N(R^m)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<TruncatedTensor>,
}

impl TensorMatrix {
    pub fn zero(rows: usize, cols: usize, m: usize, trunc: usize) -> Self {
        TensorMatrix {
            rows,
            cols,
            entries: vec![TruncatedTensor::zero(m, trunc); rows * cols],
        }
    }

    /// Identity over the tensor ring (unit tensors on the diagonal).
    pub fn identity(n: usize, m: usize, trunc: usize) -> Self {
        let mut out = Self::zero(n, n, m, trunc);
        for i in 0..n {
            *out.get_mut(i, i) = TruncatedTensor::unit(m, trunc);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &TruncatedTensor {
        &self.entries[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut TruncatedTensor {
        &mut self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[TruncatedTensor] {
        &self.entries
    }

    fn shape_of(&self) -> (usize, usize) {
        let t = &self.entries[0];
        (t.dim(), t.trunc())
    }

    /// Ring matrix product `(self.other)^{ij} = Σ_l self^{il} ⊗_N other^{lj}`.
    pub fn dot(&self, other: &Self) -> Result<Self, TensorError> {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let (m, trunc) = self.shape_of();
        let mut out = Self::zero(self.rows, other.cols, m, trunc);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let acc = out.get_mut(i, j);
                // borrow gymnastics: accumulate into a local then move
                let mut local = TruncatedTensor::zero(m, trunc);
                for l in 0..self.cols {
                    local.add_truncated_product(1.0, self.get(i, l), other.get(l, j))?;
                }
                *acc = local;
            }
        }
        Ok(out)
    }

    /// Right action of a plain real matrix: `(self.E)^{ij} = Σ_l self^{il} E_{lj}`.
    pub fn dot_real(&self, e: &[f64], e_rows: usize, e_cols: usize) -> Self {
        assert_eq!(self.cols, e_rows, "inner dimensions must agree");
        let (m, trunc) = self.shape_of();
        let mut out = Self::zero(self.rows, e_cols, m, trunc);
        for i in 0..self.rows {
            for j in 0..e_cols {
                let mut local = TruncatedTensor::zero(m, trunc);
                for l in 0..e_rows {
                    let c = e[l * e_cols + j];
                    if c != 0.0 {
                        local.axpy(c, self.get(i, l)).expect("shapes agree");
                    }
                }
                *out.get_mut(i, j) = local;
            }
        }
        out
    }

    /// Right action of a real column vector: `Σ_l self^{il} v_l`, one tensor per row.
    pub fn dot_real_vector(&self, v: &[f64]) -> Vec<TruncatedTensor> {
        assert_eq!(self.cols, v.len());
        let (m, trunc) = self.shape_of();
        (0..self.rows)
            .map(|i| {
                let mut acc = TruncatedTensor::zero(m, trunc);
                for (l, &c) in v.iter().enumerate() {
                    if c != 0.0 {
                        acc.axpy(c, self.get(i, l)).expect("shapes agree");
                    }
                }
                acc
            })
            .collect()
    }

    /// `self += a * other`, entrywise.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<(), TensorError> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.entries.iter_mut().zip(&other.entries) {
            x.axpy(a, y)?;
        }
        Ok(())
    }

    /// Entrywise right tensor product with a fixed tensor.
    pub fn tensor_right(&self, y: &TruncatedTensor) -> Result<Self, TensorError> {
        let (m, trunc) = self.shape_of();
        let mut out = Self::zero(self.rows, self.cols, m, trunc);
        for (dst, src) in out.entries.iter_mut().zip(&self.entries) {
            dst.add_truncated_product(1.0, src, y)?;
        }
        Ok(out)
    }
}
