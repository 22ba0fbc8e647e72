//! Dense linear-algebra helpers shared by the estimation and inference code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative size of the first diagonal jitter, as a fraction of the mean diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Number of jittered retries after the plain factorization fails.
pub const JITTER_RETRIES: usize = 3;

/// Relative singular-value threshold below which a direction of `H` is treated as null.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A Cholesky factor together with the diagonal jitter that was needed to obtain it.
#[derive(Clone, Debug)]
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }

    /// Solves `L x = b` for the lower factor.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        l.solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.chol.l_dirty();
        l.solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// The inverse of the factored matrix, obtained by solving against the identity.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// The plain matrix is tried first. On failure `JITTER_START * mean(diag)` is added to the
/// diagonal and the attempt is repeated up to `JITTER_RETRIES` times, growing the jitter
/// tenfold each time.
pub fn cholesky_jittered(matrix: &DMatrix<f64>) -> Result<Factor> {
    if let Some(chol) = try_cholesky(matrix.clone()) {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let n = matrix.nrows();
    let mean_diag = if n == 0 {
        0.0
    } else {
        matrix.diagonal().iter().sum::<f64>() / n as f64
    };
    let mut jitter = JITTER_START * mean_diag.abs().max(f64::MIN_POSITIVE);
    for _ in 0..JITTER_RETRIES {
        let mut m = matrix.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = try_cholesky(m) {
            return Ok(Factor { chol, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::DegenerateCovariance {
        jitter: jitter / 10.0,
    })
}

/// Plain Cholesky without jitter; `None` if the matrix is not numerically positive definite.
pub fn cholesky_strict(matrix: &DMatrix<f64>) -> Option<Factor> {
    try_cholesky(matrix.clone()).map(|chol| Factor { chol, jitter: 0.0 })
}

fn try_cholesky(matrix: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = Cholesky::new(matrix)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite());
    ok.then_some(chol)
}

/// Orthonormal basis of the column space of `h`, from its thin SVD.
///
/// Columns whose singular value falls below `RANK_TOLERANCE * s_max` are discarded, so the
/// number of returned columns is the numerical rank.
pub fn column_space(h: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = h.shape();
    if n == 0 || m == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("U requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    if s_max <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..s.len())
        .filter(|&j| s[j] > RANK_TOLERANCE * s_max)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, k| u[(i, keep[k])])
}

pub fn numerical_rank(h: &DMatrix<f64>) -> usize {
    column_space(h).ncols()
}

/// Symmetrizes a matrix in place by averaging it with its transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
