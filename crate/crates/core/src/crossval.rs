//! K-fold cross validation of the estimate / calibrate / predict pipeline.
//!
//! For each fold the model is rebuilt from the remaining folds only, the held-out points are
//! predicted, and two criteria are accumulated over all held-out points:
//!
//! * `RMSE² = (1/n) Σ (ŷ(x) − y_obs(x))²`
//! * `IC = (1/n) Σ 1{|ŷ(x) − y_obs(x)| ≤ 1.64 σ̂(x)}`
//!
//! The interval half-width uses the predictive standard deviation of the *observation*, i.e.
//! the model-error variance plus the measurement-error variance of the held-out point.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpmodel::{Design, GpModel, LinearModel, Observations, Prior};
use crate::infer::{calibrate, predict_with_basis, CalibrationSummary, Level};
use crate::kernels::{CovarianceSpec, KernelFamily, NoiseSpec, LENGTH_MIN};
use crate::reml::{estimate_hyperparameters, OptimizerConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl FoldPartition {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 folds, got {k}"
            )));
        }
        if let Some(a) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::InvalidArgument(format!(
                "fold index {a} out of range"
            )));
        }
        let p = FoldPartition { assignments, k };
        if let Some(f) = p.sizes().iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("fold {f} is empty")));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Sort along the first principal direction of the normalized design, then deal the
    /// points round-robin into the folds.
    PrincipalDirection,
    /// Seeded random permutation, then round-robin.
    Shuffled,
}

/// Default partitioner: principal-direction stratification.
pub fn partition(design: &Design, k: usize, seed: u64) -> Result<FoldPartition> {
    partition_with(design, k, seed, PartitionStrategy::PrincipalDirection)
}

pub fn partition_with(
    design: &Design,
    k: usize,
    seed: u64,
    strategy: PartitionStrategy,
) -> Result<FoldPartition> {
    let n = design.n();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count must satisfy 2 <= K <= n = {n}, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = match strategy {
        PartitionStrategy::PrincipalDirection => {
            let proj = principal_projection(design.normalized());
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
            idx
        }
        PartitionStrategy::Shuffled => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx
        }
    };
    let mut labels: Vec<usize> = (0..k).collect();
    labels.shuffle(&mut rng);
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = labels[pos % k];
    }
    FoldPartition::new(assignments, k)
}

fn principal_projection(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = x.shape();
    if d == 0 {
        return vec![0.0; n];
    }
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(cov);
    let top = (0..d)
        .max_by(|&a, &b| {
            eig.eigenvalues[a]
                .total_cmp(&eig.eigenvalues[b])
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut dir: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let lead = dir
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if lead < 0.0 {
        dir.iter_mut().for_each(|v| *v = -*v);
    }
    (0..n)
        .map(|i| (0..d).map(|j| centered[(i, j)] * dir[j]).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// Re-estimate the hyper-parameters on every training set.
    #[serde(alias = "refit")]
    RefitPerFold,
    /// Estimate once on all data and reuse the result in every fold.
    #[serde(alias = "fixed")]
    FixedHyperparameters,
}

/// Everything the pipeline needs except the covariance hyper-parameters.
#[derive(Clone, Debug)]
pub struct CvInputs {
    pub design: Design,
    pub obs: Observations,
    pub linmodel: LinearModel,
    pub noise: NoiseSpec,
    pub prior: Option<Prior>,
}

impl CvInputs {
    fn subset(&self, rows: &[usize]) -> CvInputs {
        CvInputs {
            design: self.design.subset(rows),
            obs: self.obs.subset(rows),
            linmodel: self.linmodel.subset(rows),
            noise: self.noise.subset(rows),
            prior: self.prior.clone(),
        }
    }

    /// Assembles a model with a placeholder white-ish covariance, for use as a container for
    /// hyper-parameter estimation.
    pub fn assemble_placeholder(&self, family: KernelFamily) -> Result<GpModel> {
        let spec = CovarianceSpec {
            family,
            sigma2: 1.0,
            lengths: vec![LENGTH_MIN; self.design.kernel_dim()],
        };
        self.assemble(spec)
    }

    pub fn assemble(&self, spec: CovarianceSpec) -> Result<GpModel> {
        GpModel::assemble(
            self.design.clone(),
            self.obs.clone(),
            self.linmodel.clone(),
            spec,
            self.noise.clone(),
            self.prior.clone(),
        )
    }
}

/// One held-out point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub index: usize,
    pub observed: f64,
    pub mean: f64,
    /// Predictive standard deviation of the physical system.
    pub sd: f64,
    /// Predictive standard deviation of the observation (includes measurement error).
    pub obs_sd: f64,
    pub covered: bool,
    /// Prediction of the calibrated computer model alone.
    pub calibrated_model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub rmse: f64,
    pub coverage: f64,
    pub spec: CovarianceSpec,
    pub calibration: CalibrationSummary,
    pub held_out: Vec<HeldOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kernel: KernelFamily,
    pub mode: CvMode,
    pub k: usize,
    pub n: usize,
    pub rmse: f64,
    pub ic: f64,
    /// Same loop, predicting with the calibrated computer model only.
    pub baseline_rmse: f64,
    pub per_fold: Vec<FoldResult>,
}

impl CvReport {
    fn from_folds(kernel: KernelFamily, mode: CvMode, k: usize, per_fold: Vec<FoldResult>) -> Self {
        let all: Vec<&HeldOut> = per_fold.iter().flat_map(|f| &f.held_out).collect();
        let n = all.len();
        let sq: f64 = all.iter().map(|h| (h.mean - h.observed).powi(2)).sum();
        let sq_base: f64 = all
            .iter()
            .map(|h| (h.calibrated_model - h.observed).powi(2))
            .sum();
        let covered = all.iter().filter(|h| h.covered).count();
        CvReport {
            kernel,
            mode,
            k,
            n,
            rmse: (sq / n as f64).sqrt(),
            ic: covered as f64 / n as f64,
            baseline_rmse: (sq_base / n as f64).sqrt(),
            per_fold,
        }
    }
}

/// Runs K-fold cross validation of the full pipeline for one kernel family.
pub fn run_cv(
    inputs: &CvInputs,
    kernel: KernelFamily,
    partition: &FoldPartition,
    mode: CvMode,
    config: &OptimizerConfig,
) -> Result<CvReport> {
    check_inputs(inputs, partition)?;
    check_fold_sizes(inputs, partition)?;
    let fixed = match mode {
        CvMode::RefitPerFold => None,
        CvMode::FixedHyperparameters => {
            let model = inputs.assemble_placeholder(kernel)?;
            Some(estimate_hyperparameters(&model, config)?.spec)
        }
    };
    let folds: Vec<FoldResult> = (0..partition.k)
        .into_par_iter()
        .map(|fold| {
            run_fold(inputs, kernel, partition, fold, fixed.as_ref(), config)
                .map_err(|e| wrap_fold(fold, e))
        })
        .collect::<Result<_>>()?;
    Ok(CvReport::from_folds(kernel, mode, partition.k, folds))
}

/// Cross validation with the hyper-parameters held at a given spec in every fold.
pub fn run_cv_with_spec(
    inputs: &CvInputs,
    spec: &CovarianceSpec,
    partition: &FoldPartition,
) -> Result<CvReport> {
    check_inputs(inputs, partition)?;
    check_fold_sizes(inputs, partition)?;
    let config = OptimizerConfig::default();
    let folds: Vec<FoldResult> = (0..partition.k)
        .into_par_iter()
        .map(|fold| {
            run_fold(inputs, spec.family, partition, fold, Some(spec), &config)
                .map_err(|e| wrap_fold(fold, e))
        })
        .collect::<Result<_>>()?;
    Ok(CvReport::from_folds(
        spec.family,
        CvMode::FixedHyperparameters,
        partition.k,
        folds,
    ))
}

/// Cross-validated RMSE of the calibrated computer model alone (no model-error inference).
pub fn rmse_baseline_calibrated_model(
    inputs: &CvInputs,
    kernel: KernelFamily,
    partition: &FoldPartition,
    mode: CvMode,
    config: &OptimizerConfig,
) -> Result<f64> {
    Ok(run_cv(inputs, kernel, partition, mode, config)?.baseline_rmse)
}

fn wrap_fold(fold: usize, e: Error) -> Error {
    match e {
        Error::FoldTooSmall { .. } => e,
        other => Error::Fold {
            fold,
            source: Box::new(other),
        },
    }
}

fn check_inputs(inputs: &CvInputs, partition: &FoldPartition) -> Result<()> {
    let n = inputs.design.n();
    crate::error::check_dim("partition", n, partition.n())?;
    crate::error::check_dim("observations", n, inputs.obs.len())?;
    crate::error::check_dim("rows of H", n, inputs.linmodel.n())?;
    Ok(())
}

fn check_fold_sizes(inputs: &CvInputs, partition: &FoldPartition) -> Result<()> {
    for fold in 0..partition.k {
        let rows = partition.train_rows(fold);
        let h = inputs.linmodel.subset(&rows);
        let rank = crate::linalg::numerical_rank(h.h());
        if rows.len() <= rank {
            return Err(Error::FoldTooSmall {
                fold,
                n_train: rows.len(),
                rank,
            });
        }
    }
    Ok(())
}

fn run_fold(
    inputs: &CvInputs,
    kernel: KernelFamily,
    partition: &FoldPartition,
    fold: usize,
    fixed: Option<&CovarianceSpec>,
    config: &OptimizerConfig,
) -> Result<FoldResult> {
    let train = inputs.subset(&partition.train_rows(fold));
    let spec = match fixed {
        Some(s) => s.clone(),
        None => {
            let placeholder = train.assemble_placeholder(kernel)?;
            estimate_hyperparameters(&placeholder, config)?.spec
        }
    };
    let model = train.assemble(spec.clone())?;
    let calib = calibrate(&model)?;

    let h_all = inputs.linmodel.h();
    let f_nom = inputs.linmodel.f_nom();
    let k90 = Level::P90.multiplier();
    let mut held_out = Vec::new();
    for i in partition.test_rows(fold) {
        let h = h_all.row(i).transpose();
        let x = inputs.design.point(i);
        let p = predict_with_basis(&model, &calib, &x, &h, f_nom[i])?;
        let observed = inputs.obs.values()[i];
        let obs_sd = (p.variance + inputs.noise.variance(i)).sqrt();
        held_out.push(HeldOut {
            index: i,
            observed,
            mean: p.mean,
            sd: p.sd(),
            obs_sd,
            covered: (p.mean - observed).abs() <= k90 * obs_sd,
            calibrated_model: p.calibrated_model_term,
        });
    }
    let m = held_out.len() as f64;
    let rmse = (held_out
        .iter()
        .map(|h| (h.mean - h.observed).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let coverage = held_out.iter().filter(|h| h.covered).count() as f64 / m;
    Ok(FoldResult {
        fold,
        rmse,
        coverage,
        spec,
        calibration: CalibrationSummary::from(&calib),
        held_out,
    })
}
