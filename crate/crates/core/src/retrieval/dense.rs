//! Single-vector dot product and token-level MaxSim.

use crate::error::{Error, Result};

/// Row-major view of `rows × dim` floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<'a> {
    data: &'a [f32],
    dim: usize,
}

impl<'a> Matrix<'a> {
    pub fn new(data: &'a [f32], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionError {
                expected: dim,
                actual: data.len(),
            });
        }
        Ok(Matrix { data, dim })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &'a [f32]> + 'a {
        self.data.chunks_exact(self.dim)
    }
}

const LANES: usize = 8;

/// f64 dot product over eight independent partial sums.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ac, bc) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    for (x, y) in ac.zip(bc) {
        for i in 0..LANES {
            acc[i] += f64::from(x[i]) * f64::from(y[i]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub fn dot_score(query: &[f32], paragraph: &[f32]) -> Result<f64> {
    if query.len() != paragraph.len() {
        return Err(Error::DimensionError {
            expected: query.len(),
            actual: paragraph.len(),
        });
    }
    Ok(dot(query, paragraph))
}

/// Reciprocal norm of each row; zero rows get zero so they stay zero.
fn inverse_norms(m: Matrix<'_>) -> Vec<f64> {
    m.iter_rows()
        .map(|r| {
            let norm = dot(r, r).sqrt();
            if norm > 0.0 {
                1.0 / norm
            } else {
                0.0
            }
        })
        .collect()
}

/// `Σ_i max_j Q_i · D_j`, optionally on unit-normalised rows.
pub fn maxsim_score(query: Matrix<'_>, doc: Matrix<'_>, normalize: bool) -> Result<f64> {
    if query.dim() != doc.dim() {
        return Err(Error::DimensionError {
            expected: query.dim(),
            actual: doc.dim(),
        });
    }
    if query.rows() == 0 || doc.rows() == 0 {
        return Err(Error::Embedding("MaxSim needs at least one row on each side".into()));
    }
    let (qn, dn) = if normalize {
        (inverse_norms(query), inverse_norms(doc))
    } else {
        (vec![1.0; query.rows()], vec![1.0; doc.rows()])
    };
    Ok(query
        .iter_rows()
        .zip(&qn)
        .map(|(q, &qs)| {
            doc.iter_rows()
                .zip(&dn)
                .map(|(d, &ds)| dot(q, d) * qs * ds)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}
