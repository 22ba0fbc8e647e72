//! Restricted maximum likelihood for the model-error hyper-parameters `(sigma2, lengths)`.
//!
//! For error contrasts `w = W y_obs` with `W H = 0` the restricted objective is
//!
//! ```text
//! q = ln|W R Wᵗ| + wᵗ (W R Wᵗ)⁻¹ w
//! ```
//!
//! and does not depend on `beta`. The production evaluator works with an orthonormal basis
//! `U` of the column space of `H` instead of `W`:
//!
//! ```text
//! q = ln|Uᵗ R⁻¹ U| + ln|R| + yᵗ R⁻¹ y − yᵗ R⁻¹ U (Uᵗ R⁻¹ U)⁻¹ Uᵗ R⁻¹ y
//! ```
//!
//! which differs from the contrast form by a constant and never touches the singular values
//! of `H`, so an ill-conditioned or rank-deficient `H` is harmless.

mod estimate;
pub mod nelder_mead;

pub use estimate::{
    estimate_hyperparameters, LengthMode, OptimizerConfig, RemlEstimate, StartTrace,
};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gpmodel::{total_covariance, GpModel};
use crate::kernels::CovarianceSpec;
use crate::linalg::{cholesky_jittered, column_space, numerical_rank};

/// Value of the restricted objective; only meaningful up to an additive constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemlObjectiveValue {
    pub q: f64,
    pub valid: bool,
}

impl RemlObjectiveValue {
    fn invalid() -> Self {
        RemlObjectiveValue {
            q: f64::INFINITY,
            valid: false,
        }
    }

    /// The value as a minimization target, with invalid candidates at `+inf`.
    pub fn score(&self) -> f64 {
        if self.valid {
            self.q
        } else {
            f64::INFINITY
        }
    }
}

fn check_candidate(model: &GpModel, candidate: &CovarianceSpec) -> Result<()> {
    check_dim(
        "candidate lengths",
        model.design().kernel_dim(),
        candidate.dim(),
    )?;
    let (n, rank) = (model.n(), model.rank());
    if n <= rank {
        return Err(Error::InsufficientDof { n, rank });
    }
    Ok(())
}

/// Restricted objective via the column-space basis of `H`.
pub fn reml_objective_svd(
    model: &GpModel,
    candidate: &CovarianceSpec,
) -> Result<RemlObjectiveValue> {
    check_candidate(model, candidate)?;
    Ok(objective_svd_unchecked(model, candidate))
}

pub(crate) fn objective_svd_unchecked(
    model: &GpModel,
    candidate: &CovarianceSpec,
) -> RemlObjectiveValue {
    let r = match total_covariance(candidate, model.design(), model.noise()) {
        Ok(r) => r,
        Err(_) => return RemlObjectiveValue::invalid(),
    };
    let factor = match cholesky_jittered(&r) {
        Ok(f) => f,
        Err(_) => return RemlObjectiveValue::invalid(),
    };
    let a = factor.solve_lower_mat(model.trend_basis());
    let b = factor.solve_lower(model.y_shifted());
    let gram = a.transpose() * &a;
    let gram_factor = match cholesky_jittered(&gram) {
        Ok(f) => f,
        Err(_) => return RemlObjectiveValue::invalid(),
    };
    let atb = a.transpose() * &b;
    let projected = atb.dot(&gram_factor.solve(&atb));
    let q = gram_factor.log_det() + factor.log_det() + b.dot(&b) - projected;
    if q.is_finite() {
        RemlObjectiveValue { q, valid: true }
    } else {
        RemlObjectiveValue::invalid()
    }
}

/// Restricted objective evaluated directly from an explicit contrast matrix `W`.
pub fn reml_objective_contrast(
    model: &GpModel,
    candidate: &CovarianceSpec,
    w: &DMatrix<f64>,
) -> Result<RemlObjectiveValue> {
    check_candidate(model, candidate)?;
    let n = model.n();
    check_dim("contrast columns", n, w.ncols())?;
    check_dim("contrast rows", n - model.rank(), w.nrows())?;
    let wh = w * model.h();
    let h_norm = model.h().norm();
    if crate::linalg::max_abs(&wh) > 1e-8 * h_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(
            "contrast matrix does not annihilate H".into(),
        ));
    }
    if numerical_rank(&w.transpose()) < w.nrows() {
        return Err(Error::InvalidArgument(
            "contrast matrix is not of full row rank".into(),
        ));
    }
    let r = total_covariance(candidate, model.design(), model.noise())?;
    let s = w * r * w.transpose();
    let factor = match cholesky_jittered(&s) {
        Ok(f) => f,
        Err(_) => return Ok(RemlObjectiveValue::invalid()),
    };
    let wy = w * model.y_shifted();
    let q = factor.log_det() + wy.dot(&factor.solve(&wy));
    Ok(RemlObjectiveValue {
        q,
        valid: q.is_finite(),
    })
}

/// An orthonormal set of error contrasts: `(n - rank) x n` with `W Wᵗ = I` and `W H = 0`.
pub fn orthogonal_contrasts(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let u = column_space(h);
    let projector = DMatrix::identity(n, n) - &u * u.transpose();
    let eig = SymmetricEigen::new(projector);
    let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    keep.sort_unstable();
    DMatrix::from_fn(keep.len(), n, |k, j| eig.eigenvectors[(j, keep[k])])
}
