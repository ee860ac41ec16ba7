use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// `n` observations of `p` real variables, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument(
                "a dataset needs at least one row and one column".into(),
            ));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at row {}, column {}",
                k / p,
                k % p
            )));
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
        }
        Self::new(rows.len(), p, rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.p + j] = value;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    pub fn median(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| {
                let mut col = self.column(j);
                col.sort_by(f64::total_cmp);
                let mid = col.len() / 2;
                if col.len() % 2 == 1 {
                    col[mid]
                } else {
                    0.5 * (col[mid - 1] + col[mid])
                }
            })
            .collect()
    }

    /// Scatter around `center` with divisor `n`.
    pub fn scatter_about(&self, center: &[f64]) -> SpdMatrix {
        let p = self.p;
        let mut acc = vec![0.0; p * p];
        let mut r = vec![0.0; p];
        for row in self.rows() {
            for k in 0..p {
                r[k] = row[k] - center[k];
            }
            for a in 0..p {
                for b in a..p {
                    acc[a * p + b] += r[a] * r[b];
                }
            }
        }
        let n = self.n as f64;
        SpdMatrix::from_fn(p, |a, b| acc[a * p + b] / n)
    }

    /// Empirical covariance with divisor `n`, around the sample mean.
    pub fn covariance(&self) -> SpdMatrix {
        self.scatter_about(&self.mean())
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.rows().map(&mut f).collect();
        Self::from_rows(&rows)
    }

    pub fn shifted(&self, c: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v += c[k % self.p];
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// Keeps the rows for which `keep` is true.
    pub fn select_rows(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..self.n).filter(|&i| keep(i)).map(|i| self.row(i).to_vec()).collect();
        Self::from_rows(&rows)
    }
}
