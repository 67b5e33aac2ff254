//! Sparse complex matrices in triplet and compressed-row form, plus the
//! Hermitian wrapper that carries a basis tag.
//!
//! Second-quantized operators are assembled as triplet lists (duplicates sum),
//! compressed once, and applied as mat-vecs. The [`SparseHermitian`] wrapper
//! validates hermiticity on construction and refuses to act on vectors from a
//! differently tagged basis, which catches most dimension-bookkeeping mistakes
//! at the boundary instead of deep inside an eigensolver.

use num_complex::Complex64;
use std::collections::HashMap;
use thiserror::Error;

/// Relative hermiticity tolerance enforced by [`SparseHermitian::new`].
pub const HERMITICITY_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("matrix is {rows}x{cols}, basis `{basis}` has dimension {dim}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        basis: String,
        dim: usize,
    },
    #[error("hermiticity defect {defect:.3e} exceeds {tol:.3e} (scale {scale:.3e})")]
    NotHermitian { defect: f64, tol: f64, scale: f64 },
    #[error("basis mismatch: operator on `{expected}`, operand on `{found}`")]
    BasisMismatch { expected: String, found: String },
}

/// Identifies the ordered basis an operator acts on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisTag {
    pub label: String,
    pub dim: usize,
}

impl BasisTag {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        BasisTag {
            label: label.into(),
            dim,
        }
    }
}

impl std::fmt::Display for BasisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (dim {})", self.label, self.dim)
    }
}

/// Triplet (coordinate) matrix; duplicate entries add.
#[derive(Clone, Debug)]
pub struct CooMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(u32, u32, Complex64)>,
}

impl CooMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows < u32::MAX as usize && cols < u32::MAX as usize);
        CooMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CooMatrix::new(n, n);
        for i in 0..n {
            m.push(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn push(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.rows && col < self.cols);
        if value != Complex64::ZERO {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries
            .iter()
            .map(|&(r, c, v)| (r as usize, c as usize, v))
    }

    pub fn scale(mut self, factor: Complex64) -> Self {
        for e in &mut self.entries {
            e.2 *= factor;
        }
        self
    }

    /// Sum of two triplet matrices of identical shape.
    pub fn add(mut self, other: &CooMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries.extend_from_slice(&other.entries);
        self
    }

    pub fn adjoint(&self) -> CooMatrix {
        let mut out = CooMatrix::new(self.cols, self.rows);
        for &(r, c, v) in &self.entries {
            out.entries.push((c, r, v.conj()));
        }
        out
    }

    /// Kronecker product; the left factor indexes the slow axis, so the
    /// composite index is `i_left * other.rows + i_right`.
    pub fn kron(&self, other: &CooMatrix) -> CooMatrix {
        let mut out = CooMatrix::new(self.rows * other.rows, self.cols * other.cols);
        out.entries.reserve(self.nnz() * other.nnz());
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &other.entries {
                out.entries.push((
                    r1 * other.rows as u32 + r2,
                    c1 * other.cols as u32 + c2,
                    v1 * v2,
                ));
            }
        }
        out
    }

    /// Product `self * other` (dimensions must chain).
    pub fn matmul(&self, other: &CooMatrix) -> CooMatrix {
        assert_eq!(self.cols, other.rows);
        let a = self.to_csr();
        let b = other.to_csr();
        let mut out = CooMatrix::new(self.rows, other.cols);
        let mut acc: HashMap<u32, Complex64> = HashMap::new();
        for r in 0..self.rows {
            acc.clear();
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let mid = a.col_idx[k] as usize;
                let va = a.values[k];
                for j in b.row_ptr[mid]..b.row_ptr[mid + 1] {
                    *acc.entry(b.col_idx[j]).or_insert(Complex64::ZERO) += va * b.values[j];
                }
            }
            for (&c, &v) in &acc {
                if v.norm_sqr() > 0.0 {
                    out.entries.push((r as u32, c, v));
                }
            }
        }
        out
    }

    /// Compress to CSR, summing duplicates and dropping exact zeros.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut sorted = self.entries.clone();
        sorted.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (r, c, mut v) = sorted[i];
            let mut j = i + 1;
            while j < sorted.len() && sorted[j].0 == r && sorted[j].1 == c {
                v += sorted[j].2;
                j += 1;
            }
            if v != Complex64::ZERO {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] += 1;
            }
            i = j;
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let mut m = faer::Mat::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    pub fn from_dense(m: &faer::Mat<Complex64>) -> CooMatrix {
        let mut out = CooMatrix::new(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.push(r, c, m[(r, c)]);
            }
        }
        out
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    /// y = A x.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let mut acc = Complex64::ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::ZERO; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Max absolute row sum; an upper bound on the spectral norm for
    /// Hermitian matrices.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| {
                self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |A\[i,j\] − conj(A\[j,i\])| over stored entries, and the largest
    /// entry magnitude, for hermiticity validation.
    pub fn hermiticity_defect(&self) -> (f64, f64) {
        let mut index: HashMap<(u32, u32), Complex64> = HashMap::with_capacity(self.nnz());
        let mut scale = 0.0f64;
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                index.insert((r as u32, self.col_idx[k]), self.values[k]);
                scale = scale.max(self.values[k].norm());
            }
        }
        let mut defect = 0.0f64;
        for (&(r, c), &v) in &index {
            let vt = index
                .get(&(c, r))
                .copied()
                .unwrap_or(Complex64::ZERO);
            defect = defect.max((v - vt.conj()).norm());
        }
        (defect, scale)
    }

    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let mut m = faer::Mat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k] as usize)] = self.values[k];
            }
        }
        m
    }
}

/// A sparse Hermitian operator tagged with the basis it acts on.
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    csr: CsrMatrix,
    basis: BasisTag,
}

impl SparseHermitian {
    /// Compress `coo` and validate shape and hermiticity (relative 1e−13).
    pub fn new(coo: CooMatrix, basis: BasisTag) -> Result<Self, SparseError> {
        if coo.rows != coo.cols || coo.rows != basis.dim {
            return Err(SparseError::ShapeMismatch {
                rows: coo.rows,
                cols: coo.cols,
                basis: basis.label,
                dim: basis.dim,
            });
        }
        let csr = coo.to_csr();
        let (defect, scale) = csr.hermiticity_defect();
        let tol = HERMITICITY_TOL * scale.max(1e-300);
        if defect > tol {
            return Err(SparseError::NotHermitian { defect, tol, scale });
        }
        Ok(SparseHermitian { csr, basis })
    }

    pub fn dim(&self) -> usize {
        self.csr.rows
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn norm_inf(&self) -> f64 {
        self.csr.norm_inf()
    }

    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        self.csr.to_dense()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.csr.matvec(x)
    }

    /// Checked apply: the operand must carry this operator's basis tag.
    pub fn apply_tagged(
        &self,
        x: &[Complex64],
        operand_basis: &BasisTag,
    ) -> Result<Vec<Complex64>, SparseError> {
        if operand_basis != &self.basis {
            return Err(SparseError::BasisMismatch {
                expected: self.basis.to_string(),
                found: operand_basis.to_string(),
            });
        }
        Ok(self.matvec(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn csr_sums_duplicates_and_multiplies() {
        let mut a = CooMatrix::new(2, 2);
        a.push(0, 1, c(1.0, 0.0));
        a.push(0, 1, c(2.0, 0.0));
        a.push(1, 0, c(0.5, 0.0));
        let csr = a.to_csr();
        assert_eq!(csr.nnz(), 2);
        let y = csr.matvec(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(y[0], c(3.0, 0.0));
        assert_eq!(y[1], c(0.5, 0.0));
    }

    #[test]
    fn kron_matches_dense_blocks() {
        let mut a = CooMatrix::new(2, 2);
        a.push(0, 1, c(2.0, 0.0));
        let mut b = CooMatrix::new(2, 2);
        b.push(1, 0, c(0.0, 1.0));
        let k = a.kron(&b).to_csr();
        // only entry: row (0,1)=1, col (1,0)=2, value 2i
        assert_eq!(k.nnz(), 1);
        let d = k.to_dense();
        assert_eq!(d[(1, 2)], c(0.0, 2.0));
    }

    #[test]
    fn hermitian_wrapper_accepts_and_rejects() {
        let mut h = CooMatrix::new(2, 2);
        h.push(0, 1, c(0.0, 1.0));
        h.push(1, 0, c(0.0, -1.0));
        assert!(SparseHermitian::new(h.clone(), BasisTag::new("b", 2)).is_ok());

        let mut bad = CooMatrix::new(2, 2);
        bad.push(0, 1, c(1.0, 0.0));
        let err = SparseHermitian::new(bad, BasisTag::new("b", 2)).unwrap_err();
        assert!(matches!(err, SparseError::NotHermitian { .. }));
    }

    #[test]
    fn basis_tag_guards_application() {
        let h = SparseHermitian::new(CooMatrix::identity(2), BasisTag::new("b", 2)).unwrap();
        let wrong = BasisTag::new("other", 2);
        assert!(h.apply_tagged(&[c(1.0, 0.0); 2], &wrong).is_err());
        assert!(h
            .apply_tagged(&[c(1.0, 0.0); 2], &BasisTag::new("b", 2))
            .is_ok());
    }

    #[test]
    fn matmul_agrees_with_dense() {
        let mut a = CooMatrix::new(2, 3);
        a.push(0, 0, c(1.0, 1.0));
        a.push(0, 2, c(2.0, 0.0));
        a.push(1, 1, c(0.0, -1.0));
        let mut b = CooMatrix::new(3, 2);
        b.push(0, 1, c(3.0, 0.0));
        b.push(2, 0, c(1.0, 2.0));
        b.push(1, 0, c(4.0, 0.0));
        let prod = a.matmul(&b).to_dense();
        let ad = a.to_dense();
        let bd = b.to_dense();
        let want = &ad * &bd;
        for i in 0..2 {
            for j in 0..2 {
                assert!((prod[(i, j)] - want[(i, j)]).norm() < 1e-14);
            }
        }
    }
}
