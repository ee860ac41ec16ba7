//! Dense symmetric matrix primitives.
//!
//! Every solver in the crate works on small dense matrices (p in the tens to
//! low hundreds), so storage is a flat row-major `Vec<f64>`. Inverses used
//! inside iterative code go through [`Cholesky`] and triangular solves; an
//! explicit inverse is only formed by [`spd_inverse`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold: a Cholesky pivot must exceed this multiple of the
/// largest diagonal entry.
pub const SPD_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Dense symmetric `dim x dim` matrix.
///
/// Writes go through [`SpdMatrix::set`], which updates both `(i, j)` and
/// `(j, i)`, so the stored entries are always exactly symmetric. Positive
/// definiteness is a property checked by factorization, see [`SpdMatrix::is_spd`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    /// Builds a matrix from the upper triangle produced by `f(i, j)` with `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from nested rows. The input must be square and
    /// symmetric up to `1e-12` relative to its largest entry; the stored
    /// matrix is the exact symmetrization `(A + A^T) / 2`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (rows[i][j] - rows[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    /// Symmetrizes a general row-major square buffer.
    pub fn symmetrize(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| 0.5 * (data[i * dim + j] + data[j * dim + i])))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_offdiag(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                best = best.max(self.get(i, j).abs());
            }
        }
        best
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add_diag(&mut self, value: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += value;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    /// General (not necessarily symmetric) product, row-major.
    pub fn mul_dense(&self, other: &SpdMatrix) -> Vec<f64> {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    out[i * p + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Largest elementwise deviation of `self * other` from the identity.
    pub fn identity_defect(&self, other: &SpdMatrix) -> f64 {
        let p = self.dim;
        self.mul_dense(other)
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let target = if k / p == k % p { 1.0 } else { 0.0 };
                (v - target).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SpdMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_diff(&self, other: &SpdMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Simultaneous row/column permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(perm[i], perm[j]))
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn is_spd(&self) -> bool {
        Cholesky::new(self).is_ok()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(m: &SpdMatrix) -> Result<Self> {
        let p = m.dim();
        let max_diag = m.diag().into_iter().fold(0.0f64, f64::max);
        let tol = SPD_RELATIVE_TOLERANCE * max_diag;
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            if !(d > tol) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * p + j] = djj;
            for i in (j + 1)..p {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / djj;
            }
        }
        Ok(Self { dim: p, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    /// The factor as nested rows (upper triangle zero).
    pub fn factor_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.l[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let p = self.dim;
        for i in 0..p {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * p + k] * b[k];
            }
            b[i] = s / self.l[i * p + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let p = self.dim;
        for i in (0..p).rev() {
            let mut s = b[i];
            for k in (i + 1)..p {
                s -= self.l[k * p + i] * b[k];
            }
            b[i] = s / self.l[i * p + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `b^T A^{-1} b` as the squared norm of `L^{-1} b`.
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        let mut z = b.to_vec();
        self.solve_lower_in_place(&mut z);
        z.iter().map(|v| v * v).sum()
    }

    /// `L x` for a vector `x`.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        let p = self.dim;
        (0..p)
            .map(|i| (0..=i).map(|k| self.l[i * p + k] * x[k]).sum())
            .collect()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l(i, i).ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let p = self.dim;
        let mut inv = SpdMatrix::zeros(p);
        let mut e = vec![0.0; p];
        for j in 0..p {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in j..p {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

pub fn cholesky(m: &SpdMatrix) -> Result<Cholesky> {
    Cholesky::new(m)
}

pub fn log_det(m: &SpdMatrix) -> Result<f64> {
    Ok(Cholesky::new(m)?.log_det())
}

pub fn spd_inverse(m: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(Cholesky::new(m)?.inverse())
}

/// `(y - mu)^T psi^{-1} (y - mu)` via triangular solves.
pub fn mahalanobis(y: &[f64], mu: &[f64], psi: &SpdMatrix) -> Result<f64> {
    check_dim(psi.dim(), y.len())?;
    check_dim(psi.dim(), mu.len())?;
    let chol = Cholesky::new(psi)?;
    Ok(mahalanobis_with(&chol, y, mu))
}

/// Same as [`mahalanobis`] with a precomputed factor of `psi`.
pub fn mahalanobis_with(chol: &Cholesky, y: &[f64], mu: &[f64]) -> f64 {
    let r: Vec<f64> = y.iter().zip(mu).map(|(a, b)| a - b).collect();
    chol.inv_quad_form(&r).max(0.0)
}

/// Entry `(i, j)` of the Schur complement `psi_AA - psi_AC psi_CC^{-1} psi_CA`
/// with `A = {i, j}`: the conditional covariance of coordinates `i` and `j`
/// given the coordinates in `given`.
pub fn schur_conditional(psi: &SpdMatrix, targets: (usize, usize), given: &[usize]) -> Result<f64> {
    let p = psi.dim();
    let (i, j) = targets;
    for &k in [i, j].iter().chain(given) {
        if k >= p {
            return Err(Error::IndexOutOfRange { index: k, dim: p });
        }
    }
    if i == j || given.contains(&i) || given.contains(&j) {
        return Err(Error::InvalidArgument(
            "targets must be distinct and outside the conditioning set".into(),
        ));
    }
    if given.is_empty() {
        return Ok(psi.get(i, j));
    }
    let cc = psi.submatrix(given);
    let chol = Cholesky::new(&cc)?;
    let ci: Vec<f64> = given.iter().map(|&k| psi.get(k, i)).collect();
    let cj: Vec<f64> = given.iter().map(|&k| psi.get(k, j)).collect();
    let solved = chol.solve(&cj);
    Ok(psi.get(i, j) - dot(&ci, &solved))
}

/// The three pieces left after removing row/column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub block: SpdMatrix,
    pub column: Vec<f64>,
    pub corner: f64,
}

pub fn partition_drop(m: &SpdMatrix, j: usize) -> Result<Partition> {
    let p = m.dim();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, dim: p });
    }
    let rest: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    Ok(Partition {
        block: m.submatrix(&rest),
        column: rest.iter().map(|&k| m.get(k, j)).collect(),
        corner: m.get(j, j),
    })
}

/// Inverse of [`partition_drop`].
pub fn partition_insert(part: &Partition, j: usize) -> Result<SpdMatrix> {
    let p = part.block.dim() + 1;
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, dim: p });
    }
    check_dim(part.block.dim(), part.column.len())?;
    let shrink = |k: usize| if k < j { k } else { k - 1 };
    Ok(SpdMatrix::from_fn(p, |a, b| match (a == j, b == j) {
        (true, true) => part.corner,
        (true, false) => part.column[shrink(b)],
        (false, true) => part.column[shrink(a)],
        (false, false) => part.block.get(shrink(a), shrink(b)),
    }))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
