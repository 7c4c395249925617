//! Dense complex linear algebra: Hermitian pivoted Cholesky, singular values,
//! numerical rank.
//!
//! Matrices here are small (a few hundred rows at most) and frequently
//! ill-conditioned, so every routine favours robustness over asymptotics.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = Error;

    fn try_from(r: RawMatrix) -> Result<Self> {
        Self::from_row_major(r.rows, r.cols, r.data)
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ M`, i.e. the row vector of column sums weighted by `v`.
    pub fn vec_mul(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(M + Mᴴ)/2`.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * 0.5)
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular values, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma1(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `σ_{k+1}/σ₁` (zero-based `k`); 0 when out of range or σ₁ = 0.
    pub fn ratio(&self, k: usize) -> f64 {
        let s1 = self.sigma1();
        match self.values.get(k) {
            Some(v) if s1 > 0.0 => v / s1,
            _ => 0.0,
        }
    }
}

/// Lower-triangular pivoted Cholesky factor of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    /// `r × r`, with `L Lᴴ = G[retained, retained]`.
    pub l: ComplexMatrix,
    /// Retained indices in pivot order.
    pub retained: Vec<usize>,
    /// Indices whose pivot fell below the threshold.
    pub dropped: Vec<usize>,
}

/// Relative Hermitian defect accepted before symmetrization.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Diagonally pivoted Cholesky factorization of a Hermitian PSD matrix.
///
/// The input is replaced by `(G + Gᴴ)/2` first. Pivoting stops at the first
/// pivot below `pivot_tol × max diag(G)`; every remaining index is reported as
/// dropped.
pub fn cholesky_hermitian(g: &ComplexMatrix, pivot_tol: f64) -> Result<CholeskyFactor> {
    if !g.is_square() {
        return Err(Error::NotSquare {
            rows: g.rows(),
            cols: g.cols(),
        });
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("Gram matrix".into()));
    }
    let norm = g.frobenius_norm();
    let defect = g.sub(&g.conj_transpose()).frobenius_norm();
    if norm > 0.0 && defect > HERMITIAN_TOL * norm {
        return Err(Error::NotHermitian(defect / norm));
    }
    let n = g.rows();
    let mut a = g.hermitian_part();
    let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    if n == 0 || max_diag <= 0.0 {
        return Err(Error::GramNumericallyZero);
    }
    let threshold = pivot_tol * max_diag;

    let mut perm: Vec<usize> = (0..n).collect();
    // Columns of L in the permuted ordering, stored row-major n×n.
    let mut l = ComplexMatrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let (best, best_val) = (k..n)
            .map(|j| (j, a[(perm[j], perm[j])].re))
            .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best_val > threshold) {
            break;
        }
        perm.swap(k, best);
        for c in 0..k {
            let t = l[(k, c)];
            l[(k, c)] = l[(best, c)];
            l[(best, c)] = t;
        }
        let pk = perm[k];
        let d = best_val.sqrt();
        l[(k, k)] = C64::new(d, 0.0);
        for i in k + 1..n {
            let pi = perm[i];
            l[(i, k)] = a[(pi, pk)] / d;
        }
        // Right-looking update of the trailing block.
        for i in k + 1..n {
            let pi = perm[i];
            let lik = l[(i, k)];
            for j in k + 1..=i {
                let pj = perm[j];
                let upd = lik * l[(j, k)].conj();
                a[(pi, pj)] -= upd;
                if i != j {
                    a[(pj, pi)] = a[(pi, pj)].conj();
                }
            }
        }
        rank += 1;
    }
    if rank == 0 {
        return Err(Error::GramNumericallyZero);
    }
    let factor = ComplexMatrix::from_fn(rank, rank, |i, j| if j <= i { l[(i, j)] } else { C64::new(0.0, 0.0) });
    Ok(CholeskyFactor {
        l: factor,
        retained: perm[..rank].to_vec(),
        dropped: perm[rank..].to_vec(),
    })
}

/// Inverse of a nonsingular lower-triangular matrix.
pub fn lower_triangular_inverse(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut inv = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = C64::new(1.0, 0.0) / l[(j, j)];
        for i in j + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Singular values by one-sided (Hestenes) Jacobi rotations.
pub fn singular_values(m: &ComplexMatrix) -> SingularSpectrum {
    // Work on whichever orientation has fewer columns; the spectrum is shared.
    let work = if m.cols() > m.rows() { m.conj_transpose() } else { m.clone() };
    let (rows, cols) = (work.rows(), work.cols());
    if cols == 0 {
        return SingularSpectrum::new(Vec::new());
    }
    let mut columns: Vec<Vec<C64>> = (0..cols)
        .map(|j| (0..rows).map(|i| work[(i, j)]).collect())
        .collect();

    const MAX_SWEEPS: usize = 80;
    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&columns[p], &columns[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = C64::new(0.0, 0.0);
                    for (a, b) in cp.iter().zip(cq) {
                        alpha += a.norm_sqr();
                        beta += b.norm_sqr();
                        gamma += a.conj() * b;
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = columns.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
                    let bq = *b * phase.conj();
                    let new_a = *a * c - bq * s;
                    let new_b = *a * s + bq * c;
                    *a = new_a;
                    *b = new_b * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    SingularSpectrum::new(
        columns
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect(),
    )
}

/// Number of singular values strictly above `tau × σ₁`; 0 when σ₁ = 0.
pub fn numerical_rank(s: &SingularSpectrum, tau: f64) -> usize {
    let s1 = s.sigma1();
    if s1 <= 0.0 {
        return 0;
    }
    s.values().iter().filter(|&&v| v > tau * s1).count()
}
