use nalgebra::DMatrix;
use serde::Serialize;

use crate::crossval::{partition, run_cv, CvMode, CvReport};
use crate::dataset::Table;
use crate::error::Result;
use crate::friction::{
    self, FrictionConfig, FrictionData, CONDITION_COLUMNS, H_COLUMNS, NOMINAL_COLUMN, OUTPUT_COLUMN,
};
use crate::gpmodel::{Bounds, Design, GpModel, LinearModel, Observations, Prior};
use crate::infer::{calibrate, confidence_interval, predict, CalibrationSummary, Level, Regime};
use crate::kernels::{CovarianceSpec, KernelFamily, NoiseSpec};
use crate::reml::OptimizerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParabolaRegime {
    NoPrior,
    Prior,
}

/// Observation points of the parabola example.
pub const PARABOLA_POINTS: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub truth: f64,
    pub calibrated_line: f64,
    pub mean: f64,
    pub sd: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationRow {
    pub x: f64,
    pub y: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParabolaReport {
    pub regime: Regime,
    pub hyperparameters: CovarianceSpec,
    pub prior_mean: Option<Vec<f64>>,
    pub prior_variances: Option<Vec<f64>>,
    pub calibration: CalibrationSummary,
    pub observations: Vec<ObservationRow>,
    pub grid: Vec<GridRow>,
}

impl ParabolaReport {
    pub fn grid_table(&self) -> Table {
        let mut t = Table::new(
            ["x", "truth", "calibrated_line", "mean", "lo95", "hi95"]
                .map(String::from)
                .to_vec(),
        );
        for g in &self.grid {
            t.push(vec![
                g.x,
                g.truth,
                g.calibrated_line,
                g.mean,
                g.lo95,
                g.hi95,
            ]);
        }
        t
    }
}

/// The parabola model: `x -> x^2` observed without error at 0.2, 0.5 and 0.8, the line
/// `beta_0 + beta_1 x` as computer model, a Gaussian kernel with `sigma = 0.3` and
/// `l = 0.5` held fixed.
pub fn parabola_model(prior: Option<Prior>) -> Result<GpModel> {
    let design = Design::with_bounds(
        DMatrix::from_column_slice(3, 1, &PARABOLA_POINTS),
        vec![Bounds { min: 0.0, max: 1.0 }],
    )?
    .with_labels(vec!["x".into()])?;
    let lm = LinearModel::from_basis(&design, 2, |x| vec![1.0, x[0]])?;
    GpModel::assemble(
        design,
        Observations::new(PARABOLA_POINTS.iter().map(|x| x * x).collect())?,
        lm,
        CovarianceSpec::new(KernelFamily::Gaussian, 0.09, vec![0.5])?,
        NoiseSpec::Homoscedastic(0.0),
        prior,
    )
}

/// Prior of the parabola example: mean `(0.2, 1)`, covariance `diag(0.09, 0.09)`.
pub fn parabola_prior() -> Prior {
    Prior::diagonal(vec![0.2, 1.0], vec![0.09, 0.09]).expect("positive definite")
}

pub fn demo_parabola(regime: ParabolaRegime, grid_size: usize) -> Result<ParabolaReport> {
    let prior = match regime {
        ParabolaRegime::NoPrior => None,
        ParabolaRegime::Prior => Some(parabola_prior()),
    };
    let model = parabola_model(prior)?;
    parabola_report(&model, grid_size)
}

/// Calibration and grid predictions for any variant of the parabola model.
pub fn parabola_report(model: &GpModel, grid_size: usize) -> Result<ParabolaReport> {
    if grid_size < 2 {
        return Err(crate::Error::InvalidArgument(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    let calib = calibrate(model)?;
    let beta = &calib.beta_unshifted;
    let observations = PARABOLA_POINTS
        .iter()
        .map(|&x| {
            let p = predict(model, &calib, &[x])?;
            Ok(ObservationRow {
                x,
                y: x * x,
                mean: p.mean,
                sd: p.sd(),
            })
        })
        .collect::<Result<_>>()?;
    let grid = (0..grid_size)
        .map(|i| {
            let x = i as f64 / (grid_size - 1) as f64;
            let p = predict(model, &calib, &[x])?;
            let (lo95, hi95) = confidence_interval(&p, Level::P95);
            Ok(GridRow {
                x,
                truth: x * x,
                calibrated_line: beta[0] + beta[1] * x,
                mean: p.mean,
                sd: p.sd(),
                lo95,
                hi95,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ParabolaReport {
        regime: calib.regime,
        hyperparameters: model.covariance().clone(),
        prior_mean: model.prior().map(|p| p.mean.iter().copied().collect()),
        prior_variances: model
            .prior()
            .map(|p| p.covariance.diagonal().iter().copied().collect()),
        calibration: CalibrationSummary::from(&calib),
        observations,
        grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrictionKernelRow {
    pub kernel: KernelFamily,
    pub rmse: f64,
    pub ic: f64,
    pub baseline_rmse: f64,
    /// `baseline_rmse / rmse`.
    pub improvement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrictionReport {
    pub seed: u64,
    pub n_iso: usize,
    pub n_heated: usize,
    pub folds: usize,
    pub mode: CvMode,
    pub beta_true: [f64; 2],
    pub comparison: Vec<FrictionKernelRow>,
    pub reports: Vec<CvReport>,
}

impl FrictionReport {
    /// Kernel comparison as CSV text.
    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("kernel,rmse,ic,baseline_rmse,improvement\n");
        for r in &self.comparison {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.kernel, r.rmse, r.ic, r.baseline_rmse, r.improvement
            ));
        }
        s
    }

    pub fn row(&self, kernel: KernelFamily) -> Option<&FrictionKernelRow> {
        self.comparison.iter().find(|r| r.kernel == kernel)
    }
}

/// Generates the synthetic friction database and cross-validates the Gaussian-process
/// prediction against the calibrated model alone, once per kernel family.
pub fn demo_friction(
    config: &FrictionConfig,
    folds: usize,
    mode: CvMode,
    optimizer: &OptimizerConfig,
    kernels: &[KernelFamily],
) -> Result<(FrictionData, FrictionReport)> {
    let data = friction::generate(config)?;
    let inputs = data.cv_inputs()?;
    let part = partition(&inputs.design, folds, config.seed)?;
    let mut reports = Vec::with_capacity(kernels.len());
    for &k in kernels {
        reports.push(run_cv(&inputs, k, &part, mode, optimizer)?);
    }
    let comparison = reports
        .iter()
        .map(|r| FrictionKernelRow {
            kernel: r.kernel,
            rmse: r.rmse,
            ic: r.ic,
            baseline_rmse: r.baseline_rmse,
            improvement: r.baseline_rmse / r.rmse,
        })
        .collect();
    let report = FrictionReport {
        seed: config.seed,
        n_iso: config.n_iso,
        n_heated: config.n_heated,
        folds,
        mode,
        beta_true: config.beta_true,
        comparison,
        reports,
    };
    Ok((data, report))
}

/// The database as a table: conditions, observed pressure drop, derivative columns and the
/// nominal model output.
pub fn friction_table(data: &FrictionData) -> Table {
    let header = CONDITION_COLUMNS
        .iter()
        .chain(std::iter::once(&OUTPUT_COLUMN))
        .chain(H_COLUMNS.iter())
        .chain(std::iter::once(&NOMINAL_COLUMN))
        .map(|s| s.to_string())
        .collect();
    let mut t = Table::new(header);
    for i in 0..data.n() {
        let mut row: Vec<f64> = data.conditions.row(i).iter().copied().collect();
        row.push(data.observed[i]);
        row.extend(data.h.row(i).iter());
        row.push(data.nominal[i]);
        t.push(row);
    }
    t
}
