//! The universal-Kriging model `y_obs = H beta + z + eps` and its cached matrices.

mod design;
mod linear;

pub use design::{Bounds, Design};
pub use linear::{
    default_fd_steps, finite_difference_jacobian, BasisFn, LinearModel, ModelRunner, NominalShift,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{covariance_matrix, noise_matrix, CovarianceSpec, NoiseSpec};
use crate::linalg::{cholesky_jittered, cholesky_strict, column_space, Factor};

/// Observed outputs of the physical system.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations(DVector<f64>);

impl Observations {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("observation {i} is not finite")));
        }
        Ok(Observations(DVector::from_vec(y)))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Observations {
        Observations(DVector::from_fn(rows.len(), |i, _| self.0[rows[i]]))
    }
}

/// Gaussian prior `N(mean, covariance)` on the model parameters, in unshifted coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Prior {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_dim("prior covariance", mean.len(), covariance.nrows())?;
        check_dim("prior covariance", mean.len(), covariance.ncols())?;
        let asym = crate::linalg::max_abs(&(&covariance - covariance.transpose()));
        if asym > 1e-12 * crate::linalg::max_abs(&covariance).max(f64::MIN_POSITIVE)
            || cholesky_strict(&covariance).is_none()
        {
            return Err(Error::PriorNotPositiveDefinite);
        }
        Ok(Prior { mean, covariance })
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Prior::new(
            DVector::from_vec(mean),
            DMatrix::from_diagonal(&DVector::from_vec(variances)),
        )
    }
}

/// An assembled model: design, observations, linearized computer model, covariance of the
/// model error and of the measurement error, and an optional prior.
///
/// Holds `R = R_mod + R_mes` together with its Cholesky factor, the observations in shifted
/// coordinates, and an orthonormal basis of the column space of `H`.
#[derive(Clone, Debug)]
pub struct GpModel {
    design: Design,
    obs: Observations,
    linmodel: LinearModel,
    cov: CovarianceSpec,
    noise: NoiseSpec,
    prior: Option<Prior>,
    y_shifted: DVector<f64>,
    r: DMatrix<f64>,
    factor: Factor,
    trend_basis: DMatrix<f64>,
}

impl GpModel {
    pub fn assemble(
        design: Design,
        obs: Observations,
        linmodel: LinearModel,
        cov: CovarianceSpec,
        noise: NoiseSpec,
        prior: Option<Prior>,
    ) -> Result<Self> {
        let n = design.n();
        check_dim("observations", n, obs.len())?;
        check_dim("rows of H", n, linmodel.n())?;
        check_dim("covariance lengths", design.kernel_dim(), cov.dim())?;
        if let NoiseSpec::FullMatrix(m) = &noise {
            check_dim("noise matrix", n, m.nrows())?;
        }
        if let Some(p) = &prior {
            check_dim("prior mean", linmodel.m(), p.mean.len())?;
        }
        let y_shifted = obs.values() - linmodel.f_nom();
        let r = total_covariance(&cov, &design, &noise)?;
        let factor = cholesky_jittered(&r)?;
        let trend_basis = column_space(linmodel.h());
        Ok(GpModel {
            design,
            obs,
            linmodel,
            cov,
            noise,
            prior,
            y_shifted,
            r,
            factor,
            trend_basis,
        })
    }

    /// Re-assembles the model with a different model-error covariance.
    pub fn with_covariance(&self, cov: CovarianceSpec) -> Result<GpModel> {
        check_dim("covariance lengths", self.design.kernel_dim(), cov.dim())?;
        let r = total_covariance(&cov, &self.design, &self.noise)?;
        let factor = cholesky_jittered(&r)?;
        Ok(GpModel {
            cov,
            r,
            factor,
            ..self.clone()
        })
    }

    /// Same model with the observations replaced.
    pub fn with_observations(&self, obs: Observations) -> Result<GpModel> {
        check_dim("observations", self.design.n(), obs.len())?;
        let y_shifted = obs.values() - self.linmodel.f_nom();
        Ok(GpModel {
            obs,
            y_shifted,
            ..self.clone()
        })
    }

    pub fn with_prior(&self, prior: Option<Prior>) -> Result<GpModel> {
        if let Some(p) = &prior {
            check_dim("prior mean", self.m(), p.mean.len())?;
        }
        Ok(GpModel {
            prior,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn m(&self) -> usize {
        self.linmodel.m()
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn observations(&self) -> &Observations {
        &self.obs
    }

    pub fn linear_model(&self) -> &LinearModel {
        &self.linmodel
    }

    pub fn h(&self) -> &DMatrix<f64> {
        self.linmodel.h()
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.cov
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn prior(&self) -> Option<&Prior> {
        self.prior.as_ref()
    }

    /// Observations minus the nominal model outputs.
    pub fn y_shifted(&self) -> &DVector<f64> {
        &self.y_shifted
    }

    /// `R = R_mod + R_mes` (without jitter).
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    /// Orthonormal basis `U` of the column space of `H`; its width is the numerical rank.
    pub fn trend_basis(&self) -> &DMatrix<f64> {
        &self.trend_basis
    }

    pub fn rank(&self) -> usize {
        self.trend_basis.ncols()
    }
}

/// `R_mod + R_mes` for a candidate covariance.
pub fn total_covariance(
    cov: &CovarianceSpec,
    design: &Design,
    noise: &NoiseSpec,
) -> Result<DMatrix<f64>> {
    Ok(covariance_matrix(cov, design)? + noise_matrix(noise, design.n())?)
}
