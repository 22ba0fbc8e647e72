//! Calibration of the model parameters and prediction of the physical system for fixed
//! hyper-parameters.
//!
//! Every `R⁻¹` product goes through triangular solves against the Cholesky factor `L` of `R`:
//! with `A = L⁻¹ H` the information matrix is `Hᵗ R⁻¹ H = Aᵗ A`, which is formed explicitly
//! (it is only `m x m`) and factored on its own.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gpmodel::GpModel;
use crate::kernels::covariance_vector;
use crate::linalg::{cholesky_jittered, cholesky_strict, numerical_rank, Factor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    NoPrior,
    Prior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub regime: Regime,
    /// Estimate (no prior) or posterior mean (prior), in shifted coordinates.
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// `beta + beta_nom`.
    pub beta_unshifted: DVector<f64>,
    /// Inverse of `covariance`: `Hᵗ R⁻¹ H`, plus `Q_prior⁻¹` in the prior regime.
    precision: DMatrix<f64>,
}

impl CalibrationResult {
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.covariance
            .diagonal()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }

    pub fn correlation(&self) -> DMatrix<f64> {
        let sd = self.std_devs();
        DMatrix::from_fn(self.covariance.nrows(), self.covariance.ncols(), |i, j| {
            let den = sd[i] * sd[j];
            if den > 0.0 {
                (self.covariance[(i, j)] / den).clamp(-1.0, 1.0)
            } else if i == j {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Serializable view of a [`CalibrationResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub regime: Regime,
    pub beta: Vec<f64>,
    pub beta_unshifted: Vec<f64>,
    /// Row-major covariance matrix.
    pub covariance: Vec<Vec<f64>>,
    pub std_devs: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
}

impl From<&CalibrationResult> for CalibrationSummary {
    fn from(c: &CalibrationResult) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        CalibrationSummary {
            regime: c.regime,
            beta: c.beta.iter().copied().collect(),
            beta_unshifted: c.beta_unshifted.iter().copied().collect(),
            covariance: rows(&c.covariance),
            std_devs: c.std_devs(),
            correlation: rows(&c.correlation()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Linearized computer model at the calibrated parameters, including the nominal output.
    pub calibrated_model_term: f64,
    /// Kriging correction from the residuals at the design points.
    pub inferred_model_error_term: f64,
    /// Set when a slightly negative variance was clamped to zero.
    pub clamped: bool,
}

impl Prediction {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    P90,
    P95,
}

impl Level {
    pub fn multiplier(self) -> f64 {
        match self {
            Level::P90 => 1.64,
            Level::P95 => 1.96,
        }
    }
}

/// Symmetric interval `mean ± k sd` with `k = 1.64` (90%) or `1.96` (95%).
pub fn confidence_interval(pred: &Prediction, level: Level) -> (f64, f64) {
    let half = level.multiplier() * pred.sd();
    (pred.mean - half, pred.mean + half)
}

fn whitened(model: &GpModel) -> (DMatrix<f64>, DVector<f64>) {
    let f = model.factor();
    (
        f.solve_lower_mat(model.h()),
        f.solve_lower(model.y_shifted()),
    )
}

fn finish(
    model: &GpModel,
    regime: Regime,
    beta: DVector<f64>,
    precision: DMatrix<f64>,
    factor: &Factor,
) -> CalibrationResult {
    let mut covariance = factor.inverse();
    crate::linalg::symmetrize(&mut covariance);
    let beta_unshifted = &beta + model.linear_model().beta_nom();
    CalibrationResult {
        regime,
        beta,
        covariance,
        beta_unshifted,
        precision,
    }
}

/// Generalized least squares: `beta = (Hᵗ R⁻¹ H)⁻¹ Hᵗ R⁻¹ y`, `cov = (Hᵗ R⁻¹ H)⁻¹`.
pub fn calibrate_gls(model: &GpModel) -> Result<CalibrationResult> {
    let m = model.m();
    let rank = numerical_rank(model.h());
    if rank < m {
        return Err(Error::NonIdentifiable { null_dim: m - rank });
    }
    let (a, b) = whitened(model);
    let info = a.transpose() * &a;
    let factor = cholesky_strict(&info).ok_or(Error::NonIdentifiable { null_dim: 0 })?;
    let beta = factor.solve(&(a.transpose() * b));
    Ok(finish(model, Regime::NoPrior, beta, info, &factor))
}

/// Gaussian posterior of `beta` under the model's prior.
///
/// `beta_post = beta_prior + (Q⁻¹ + Hᵗ R⁻¹ H)⁻¹ Hᵗ R⁻¹ (y − H beta_prior)` and
/// `Q_post = (Q⁻¹ + Hᵗ R⁻¹ H)⁻¹`.
pub fn calibrate_bayes(model: &GpModel) -> Result<CalibrationResult> {
    let prior = model.prior().ok_or(Error::MissingPrior)?;
    let q_factor = cholesky_strict(&prior.covariance).ok_or(Error::PriorNotPositiveDefinite)?;
    let mut q_inv = q_factor.inverse();
    crate::linalg::symmetrize(&mut q_inv);
    let prior_mean = &prior.mean - model.linear_model().beta_nom();

    let (a, b) = whitened(model);
    let precision = a.transpose() * &a + q_inv;
    let factor = cholesky_jittered(&precision)?;
    let innovation = b - &a * &prior_mean;
    let beta = &prior_mean + factor.solve(&(a.transpose() * innovation));
    Ok(finish(model, Regime::Prior, beta, precision, &factor))
}

/// Calibrates in the regime implied by the presence of a prior.
pub fn calibrate(model: &GpModel) -> Result<CalibrationResult> {
    if model.prior().is_some() {
        calibrate_bayes(model)
    } else {
        calibrate_gls(model)
    }
}

/// Predicts the physical system at a raw point, evaluating `h(x_new)` and the nominal output
/// through the model's linearization.
pub fn predict(model: &GpModel, calib: &CalibrationResult, xnew: &[f64]) -> Result<Prediction> {
    let lm = model.linear_model();
    let h = lm.basis_at(xnew)?;
    let nominal = lm.nominal_at(xnew)?;
    predict_with_basis(model, calib, xnew, &h, nominal)
}

/// Prediction with an explicitly supplied derivative row `h(x_new)` and nominal output
/// `f(x_new, beta_nom)`.
///
/// The mean is `h(x)ᵗ beta + r(x)ᵗ R⁻¹ (y − H beta)` (plus the nominal output) and the variance
/// `sigma2 − rᵗ R⁻¹ r + uᵗ M⁻¹ u` with `u = h − Hᵗ R⁻¹ r` and `M` the precision of the
/// calibration.
pub fn predict_with_basis(
    model: &GpModel,
    calib: &CalibrationResult,
    xnew: &[f64],
    h: &DVector<f64>,
    nominal: f64,
) -> Result<Prediction> {
    let has_prior = model.prior().is_some();
    if (calib.regime == Regime::Prior) != has_prior {
        return Err(Error::RegimeMismatch {
            calib: calib.regime,
            has_prior,
        });
    }
    check_dim("h(x_new)", model.m(), h.len())?;
    check_dim("calibrated beta", model.m(), calib.beta.len())?;
    if xnew.iter().any(|v| !v.is_finite()) || !nominal.is_finite() {
        return Err(Error::InvalidArgument(
            "prediction point is not finite".into(),
        ));
    }
    let cov = model.covariance();
    let r = covariance_vector(cov, model.design(), xnew)?;
    let f = model.factor();
    let v = f.solve_lower(&r);
    let resid = model.y_shifted() - model.h() * &calib.beta;
    let e = f.solve_lower(&resid);

    let calibrated_model_term = nominal + h.dot(&calib.beta);
    let inferred_model_error_term = v.dot(&e);

    let a = f.solve_lower_mat(model.h());
    let u = h - a.transpose() * &v;
    let m_factor = cholesky_jittered(calib.precision())?;
    let correction = u.dot(&m_factor.solve(&u));
    let raw = cov.sigma2 - v.dot(&v) + correction;

    let threshold = -1e-8 * cov.sigma2;
    if raw < threshold {
        return Err(Error::NegativeVariance {
            variance: raw,
            threshold,
        });
    }
    Ok(Prediction {
        mean: calibrated_model_term + inferred_model_error_term,
        variance: raw.max(0.0),
        calibrated_model_term,
        inferred_model_error_term,
        clamped: raw < 0.0,
    })
}

/// Predictions at many raw points; runs in parallel and returns results in input order.
pub fn predict_many(
    model: &GpModel,
    calib: &CalibrationResult,
    points: &[Vec<f64>],
) -> Result<Vec<Prediction>> {
    points
        .par_iter()
        .map(|x| predict(model, calib, x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpmodel::{Bounds, Design, LinearModel, Observations, Prior};
    use crate::kernels::{CovarianceSpec, KernelFamily, NoiseSpec};

    fn parabola(prior: Option<Prior>) -> GpModel {
        let xs = [0.2, 0.5, 0.8];
        let design = Design::with_bounds(
            DMatrix::from_column_slice(3, 1, &xs),
            vec![Bounds { min: 0.0, max: 1.0 }],
        )
        .unwrap();
        let lm = LinearModel::from_basis(&design, 2, |x| vec![1.0, x[0]]).unwrap();
        GpModel::assemble(
            design,
            Observations::new(xs.iter().map(|x| x * x).collect()).unwrap(),
            lm,
            CovarianceSpec::new(KernelFamily::Gaussian, 0.09, vec![0.5]).unwrap(),
            NoiseSpec::Homoscedastic(0.0),
            prior,
        )
        .unwrap()
    }

    fn identity_model(y: Vec<f64>) -> GpModel {
        // Two points far apart with a tiny length: R = I exactly.
        let design = Design::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let lm = LinearModel::tabulated(DMatrix::identity(2, 2)).unwrap();
        GpModel::assemble(
            design,
            Observations::new(y).unwrap(),
            lm,
            CovarianceSpec::new(KernelFamily::Gaussian, 1.0, vec![1e-3]).unwrap(),
            NoiseSpec::Homoscedastic(0.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_system() {
        let c = calibrate_gls(&identity_model(vec![1.0, 2.0])).unwrap();
        assert!((c.beta[0] - 1.0).abs() < 1e-14 && (c.beta[1] - 2.0).abs() < 1e-14);
        assert!(crate::linalg::max_abs(&(c.covariance - DMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn exact_reproduction() {
        let m = parabola(None);
        let y: Vec<f64> = [0.2, 0.5, 0.8].iter().map(|x| 0.3 - 2.0 * x).collect();
        let m = m.with_observations(Observations::new(y).unwrap()).unwrap();
        let c = calibrate_gls(&m).unwrap();
        assert!((c.beta[0] - 0.3).abs() < 1e-10 && (c.beta[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn parabola_line_misses_points() {
        let m = parabola(None);
        let c = calibrate_gls(&m).unwrap();
        let resid = m.y_shifted() - m.h() * &c.beta;
        assert!(resid.amax() > 1e-3);
        assert!(c.correlation()[(0, 1)] < 0.0);
    }

    #[test]
    fn rank_deficient_h_is_non_identifiable() {
        let design = Design::new(DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0])).unwrap();
        let lm = LinearModel::from_basis(&design, 2, |x| vec![x[0], 2.0 * x[0]]).unwrap();
        let m = GpModel::assemble(
            design,
            Observations::new(vec![0.0, 1.0, 2.0]).unwrap(),
            lm,
            CovarianceSpec::new(KernelFamily::Gaussian, 1.0, vec![0.3]).unwrap(),
            NoiseSpec::Homoscedastic(0.1),
            None,
        )
        .unwrap();
        assert!(matches!(
            calibrate_gls(&m),
            Err(Error::NonIdentifiable { null_dim: 1 })
        ));
    }

    #[test]
    fn bayes_needs_prior() {
        assert!(matches!(
            calibrate_bayes(&parabola(None)),
            Err(Error::MissingPrior)
        ));
    }

    #[test]
    fn zero_innovation_keeps_prior_mean() {
        let prior = Prior::diagonal(vec![0.2, 1.0], vec![0.09, 0.09]).unwrap();
        let m = parabola(Some(prior));
        let y: Vec<f64> = [0.2, 0.5, 0.8].iter().map(|x| 0.2 + x).collect();
        let m = m.with_observations(Observations::new(y).unwrap()).unwrap();
        let c = calibrate_bayes(&m).unwrap();
        assert!((c.beta[0] - 0.2).abs() < 1e-12 && (c.beta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_case_posterior_correlation_is_negative() {
        let prior = Prior::diagonal(vec![0.2, 1.0], vec![0.09, 0.09]).unwrap();
        let c = calibrate_bayes(&parabola(Some(prior))).unwrap();
        assert!(c.correlation()[(0, 1)] < 0.0);
    }

    #[test]
    fn vague_prior_matches_gls() {
        let prior = Prior::diagonal(vec![0.0, 0.0], vec![1e8, 1e8]).unwrap();
        let gls = calibrate_gls(&parabola(None)).unwrap();
        let bay = calibrate_bayes(&parabola(Some(prior))).unwrap();
        for j in 0..2 {
            assert!((gls.beta[j] - bay.beta[j]).abs() <= 1e-4 * gls.beta[j].abs());
        }
    }

    #[test]
    fn interpolates_noiseless_points() {
        let m = parabola(None);
        let c = calibrate_gls(&m).unwrap();
        for x in [0.2, 0.5, 0.8] {
            let p = predict(&m, &c, &[x]).unwrap();
            assert!((p.mean - x * x).abs() < 1e-8);
            assert!(p.variance <= 1e-10 * 0.09);
            assert!(
                (p.mean - p.calibrated_model_term - p.inferred_model_error_term).abs()
                    <= 1e-10 * p.mean.abs().max(1.0)
            );
        }
    }

    #[test]
    fn far_extrapolation_uses_calibrated_model() {
        let m = parabola(None);
        let c = calibrate_gls(&m).unwrap();
        let p = predict(&m, &c, &[25.0]).unwrap();
        assert!(p.inferred_model_error_term.abs() < 1e-12);
        assert!((p.mean - (c.beta[0] + 25.0 * c.beta[1])).abs() < 1e-10);
    }

    #[test]
    fn regime_mismatch_is_rejected() {
        let prior = Prior::diagonal(vec![0.2, 1.0], vec![0.09, 0.09]).unwrap();
        let c = calibrate_gls(&parabola(None)).unwrap();
        assert!(matches!(
            predict(&parabola(Some(prior)), &c, &[0.3]),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn intervals() {
        let p = |mean: f64, variance: f64| Prediction {
            mean,
            variance,
            calibrated_model_term: mean,
            inferred_model_error_term: 0.0,
            clamped: false,
        };
        assert_eq!(confidence_interval(&p(3.0, 0.0), Level::P95), (3.0, 3.0));
        assert_eq!(confidence_interval(&p(0.0, 1.0), Level::P95), (-1.96, 1.96));
        let (lo, hi) = confidence_interval(&p(10.0, 4.0), Level::P90);
        assert!((lo - 6.72).abs() < 1e-12 && (hi - 13.28).abs() < 1e-12);
    }
}
