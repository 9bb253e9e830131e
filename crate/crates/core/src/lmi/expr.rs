//! Matrices whose entries are affine forms in a vector of scalar decision
//! variables.
//!
//! Every LMI in this crate is assembled as an [`AffineMatrix`], so affinity in
//! the decision variables holds by construction and constant matrices, selector
//! products and block layouts compose the same way they would on numbers.

use std::ops::{Add, Neg, Sub};

use nalgebra::DMatrix;

/// `constant + Σ coef·x[var]`, terms sorted by variable index without repeats.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn var(index: usize, coef: f64) -> Self {
        Self { constant: 0.0, terms: vec![(index, coef)] }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(k, c)| acc + c * x[k])
    }

    /// `self += alpha · other`, leaving the terms unsorted until [`Self::normalize`].
    fn axpy_raw(&mut self, alpha: f64, other: &LinExpr) {
        self.constant += alpha * other.constant;
        self.terms.extend(other.terms.iter().map(|&(k, c)| (k, alpha * c)));
    }

    fn normalize(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|&(_, c)| c != 0.0);
            return;
        }
        self.terms.sort_unstable_by_key(|&(k, _)| k);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(k, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    fn scaled(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return Self::default();
        }
        Self {
            constant: alpha * self.constant,
            terms: self.terms.iter().map(|&(k, c)| (k, alpha * c)).collect(),
        }
    }
}

/// Dense `rows × cols` matrix of [`LinExpr`] entries, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<LinExpr>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![LinExpr::default(); rows * cols] }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.entries[i * m.ncols() + j].constant = m[(i, j)];
            }
        }
        out
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// `scalar · m` for an affine scalar and a constant matrix.
    pub fn scaled_constant(scalar: &LinExpr, m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| scalar.scaled(m[(i, j)]))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &LinExpr)> {
        self.entries.iter().enumerate().map(move |(idx, e)| (idx / self.cols, idx % self.cols, e))
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(x))
    }

    /// Value at `x = 0`.
    pub fn constant_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).constant)
    }

    /// Largest decision-variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.entries.iter().filter_map(|e| e.terms.last().map(|t| t.0)).max()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.entry(j, i).clone())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|e| e.scaled(alpha)).collect() }
    }

    /// `X + Xᵀ`.
    pub fn sym(&self) -> Self {
        assert_eq!(self.rows, self.cols, "sym of a non-square matrix");
        self + &self.transpose()
    }

    /// `(X + Xᵀ)/2`, exactly symmetric entry by entry.
    pub fn symmetrized(&self) -> Self {
        self.sym().scale(0.5)
    }

    /// Exact structural symmetry: entry `(i, j)` equals entry `(j, i)`.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.entry(i, j) == self.entry(j, i)))
    }

    /// `c · self` for a constant matrix `c`.
    pub fn lmul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(c.ncols(), self.rows, "lmul: inner dimensions differ");
        let mut out = Self::zeros(c.nrows(), self.cols);
        for i in 0..c.nrows() {
            for k in 0..self.rows {
                let cik = c[(i, k)];
                if cik == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    let src = &self.entries[k * self.cols + j];
                    if !src.is_zero() {
                        out.entries[i * self.cols + j].axpy_raw(cik, src);
                    }
                }
            }
        }
        out.entries.iter_mut().for_each(LinExpr::normalize);
        out
    }

    /// `self · c` for a constant matrix `c`.
    pub fn rmul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(self.cols, c.nrows(), "rmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, c.ncols());
        for i in 0..self.rows {
            for k in 0..self.cols {
                let src = &self.entries[i * self.cols + k];
                if src.is_zero() {
                    continue;
                }
                for j in 0..c.ncols() {
                    let ckj = c[(k, j)];
                    if ckj != 0.0 {
                        out.entries[i * c.ncols() + j].axpy_raw(ckj, src);
                    }
                }
            }
        }
        out.entries.iter_mut().for_each(LinExpr::normalize);
        out
    }

    /// Congruence `cᵀ · self · c`.
    pub fn congruence(&self, c: &DMatrix<f64>) -> Self {
        self.rmul(c).lmul(&c.transpose())
    }

    /// Assembles a block matrix; `None` blocks are zero. Every block row must
    /// contain at least one `Some` to fix its height, likewise every column.
    pub fn from_blocks(blocks: &[Vec<Option<&AffineMatrix>>]) -> Self {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, row) in blocks.iter().enumerate() {
            assert_eq!(row.len(), nbc, "ragged block layout");
            for (bj, blk) in row.iter().enumerate() {
                if let Some(b) = blk {
                    for (slot, val) in [(&mut heights[bi], b.rows), (&mut widths[bj], b.cols)] {
                        match slot {
                            Some(existing) => assert_eq!(*existing, val, "inconsistent block sizes"),
                            None => *slot = Some(val),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights.into_iter().map(|h| h.expect("empty block row")).collect();
        let widths: Vec<usize> = widths.into_iter().map(|w| w.expect("empty block column")).collect();
        let rows = heights.iter().sum();
        let cols = widths.iter().sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                if let Some(b) = blk {
                    for i in 0..b.rows {
                        for j in 0..b.cols {
                            out.entries[(r0 + i) * cols + c0 + j] = b.entry(i, j).clone();
                        }
                    }
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(blocks: &[AffineMatrix]) -> Self {
        let nb = blocks.len();
        let layout: Vec<Vec<Option<&AffineMatrix>>> = (0..nb)
            .map(|i| (0..nb).map(|j| if i == j { Some(&blocks[i]) } else { None }).collect())
            .collect();
        if blocks.iter().all(|b| b.rows > 0 && b.cols > 0) {
            return Self::from_blocks(&layout);
        }
        // Degenerate empty blocks: fall back to explicit placement.
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.entries[(r0 + i) * cols + c0 + j] = b.entry(i, j).clone();
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    fn zip(&self, other: &Self, alpha: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in affine add/sub");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let mut e = a.clone();
                e.axpy_raw(alpha, b);
                e.normalize();
                e
            })
            .collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }
}

impl Add for &AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, rhs: &AffineMatrix) -> AffineMatrix {
        self.zip(rhs, 1.0)
    }
}

impl Sub for &AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, rhs: &AffineMatrix) -> AffineMatrix {
        self.zip(rhs, -1.0)
    }
}

impl Add for AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, rhs: AffineMatrix) -> AffineMatrix {
        &self + &rhs
    }
}

impl Sub for AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, rhs: AffineMatrix) -> AffineMatrix {
        &self - &rhs
    }
}

impl Neg for &AffineMatrix {
    type Output = AffineMatrix;
    fn neg(self) -> AffineMatrix {
        self.scale(-1.0)
    }
}

/// Sums a list of equally shaped affine matrices.
pub fn sum(parts: &[&AffineMatrix]) -> AffineMatrix {
    let (first, rest) = parts.split_first().expect("sum of an empty list");
    let mut out = (*first).clone();
    for p in rest {
        assert_eq!(out.shape(), p.shape(), "shape mismatch in sum");
        for (e, o) in out.entries.iter_mut().zip(&p.entries) {
            e.axpy_raw(1.0, o);
        }
    }
    out.entries.iter_mut().for_each(LinExpr::normalize);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var_matrix(rows: usize, cols: usize, offset: usize) -> AffineMatrix {
        AffineMatrix::from_fn(rows, cols, |i, j| LinExpr::var(offset + i * cols + j, 1.0))
    }

    #[test]
    fn products_match_numeric_evaluation() {
        let x: Vec<f64> = (0..6).map(|k| 0.3 * k as f64 - 0.7).collect();
        let v = var_matrix(2, 3, 0);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 4.0]);
        let vx = v.eval(&x);
        assert!((v.rmul(&c).eval(&x) - &vx * &c).abs().max() < 1e-14);
        assert!((v.lmul(&d).eval(&x) - &d * &vx).abs().max() < 1e-14);
        let sq = v.rmul(&c);
        assert!((sq.sym().eval(&x) - (&vx * &c + (&vx * &c).transpose())).abs().max() < 1e-14);
    }

    #[test]
    fn sym_is_exactly_symmetric() {
        let v = var_matrix(3, 3, 0).lmul(&DMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64));
        assert!(v.sym().is_symmetric());
        assert!(!v.is_symmetric());
    }

    #[test]
    fn blocks_and_cancellation() {
        let a = var_matrix(1, 1, 0);
        let b = var_matrix(1, 2, 1);
        let m = AffineMatrix::from_blocks(&[vec![Some(&a), Some(&b)], vec![None, Some(&b)]]);
        assert_eq!(m.shape(), (2, 3));
        assert!(m.entry(1, 0).is_zero());
        assert_eq!(m.entry(1, 2), &LinExpr::var(2, 1.0));
        assert!((&a - &a).entry(0, 0).is_zero());
    }
}
