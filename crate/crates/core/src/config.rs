//! Run configuration, read from a TOML file.
//!
//! ```toml
//! kernel = "matern52"
//!
//! [noise]
//! sigma_mes = 150.0          # or: matrix = [[..], ..]
//!
//! [prior]                    # optional
//! mean = [0.22, 0.21]
//! variances = [0.0121, 0.011025]   # or: covariance = [[..], ..]
//!
//! [hyperparameters]          # optional; estimated by REML when absent
//! sigma2 = 1.0
//! lengths = [0.3, 0.3]
//!
//! [optimizer]
//! n_starts = 10
//! seed = 0
//!
//! [cv]
//! folds = 10
//! seed = 0
//! mode = "refit"             # or "fixed"
//!
//! [io]
//! input = "data.csv"
//! output = "y"
//! output_dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory of the configuration file. Unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::crossval::{CvMode, PartitionStrategy};
use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::gpmodel::Prior;
use crate::kernels::{CovarianceSpec, KernelFamily, NoiseSpec};
use crate::reml::OptimizerConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelFamily,
    pub noise: NoiseConfig,
    pub prior: Option<PriorConfig>,
    pub hyperparameters: Option<HyperConfig>,
    pub optimizer: OptimizerConfig,
    pub cv: Option<CvConfig>,
    pub io: IoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelFamily::Matern52,
            noise: NoiseConfig::default(),
            prior: None,
            hyperparameters: None,
            optimizer: OptimizerConfig::default(),
            cv: None,
            io: IoConfig::default(),
        }
    }
}

/// Measurement error: a standard deviation shared by all points, or a full covariance matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_mes: Option<f64>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: Vec<f64>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub variances: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub sigma2: f64,
    pub lengths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub mode: CvMode,
    pub strategy: PartitionStrategy,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            seed: 0,
            mode: CvMode::RefitPerFold,
            strategy: PartitionStrategy::PrincipalDirection,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Output column of the input table.
    pub output: String,
    /// Condition columns; empty means every column not claimed by another role.
    pub conditions: Vec<String>,
    /// Precomputed columns of `H`; the affine trend `(1, x)` is used when empty.
    pub h_columns: Vec<String>,
    /// Column holding the model output at the nominal parameters.
    pub nominal_column: Option<String>,
    /// Nominal parameters that `h_columns` and `nominal_column` were computed at.
    pub beta_nominal: Option<Vec<f64>>,
    /// Points to predict at, for the `predict` subcommand.
    pub predict_input: Option<PathBuf>,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            input: None,
            output_dir: None,
            output: "y".into(),
            conditions: Vec::new(),
            h_columns: Vec::new(),
            nominal_column: None,
            beta_nominal: None,
            predict_input: None,
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.io.input,
            &mut cfg.io.output_dir,
            &mut cfg.io.predict_input,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.noise.sigma_mes.is_some() && self.noise.matrix.is_some() {
            return Err(Error::Config(
                "noise: give either sigma_mes or matrix, not both".into(),
            ));
        }
        if let Some(p) = &self.prior {
            if p.covariance.is_some() == p.variances.is_some() {
                return Err(Error::Config(
                    "prior: give exactly one of covariance or variances".into(),
                ));
            }
        }
        if let Some(cv) = &self.cv {
            if cv.folds < 2 {
                return Err(Error::Config(format!(
                    "cv.folds must be at least 2, got {}",
                    cv.folds
                )));
            }
        }
        if self.optimizer.tolerance.is_nan() || self.optimizer.tolerance < 0.0 {
            return Err(Error::Config(
                "optimizer.tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        match (&self.noise.sigma_mes, &self.noise.matrix) {
            (_, Some(rows)) => NoiseSpec::full(matrix_from_rows(rows, "noise.matrix")?),
            (Some(s), None) => NoiseSpec::homoscedastic(*s),
            (None, None) => Ok(NoiseSpec::Homoscedastic(0.0)),
        }
        .map_err(|e| Error::Config(format!("noise: {e}")))
    }

    pub fn prior(&self) -> Result<Option<Prior>> {
        let Some(p) = &self.prior else {
            return Ok(None);
        };
        let prior = match (&p.covariance, &p.variances) {
            (Some(rows), _) => Prior::new(
                DVector::from_column_slice(&p.mean),
                matrix_from_rows(rows, "prior.covariance")?,
            ),
            (None, Some(v)) => Prior::diagonal(p.mean.clone(), v.clone()),
            (None, None) => unreachable!("validated"),
        };
        prior
            .map(Some)
            .map_err(|e| Error::Config(format!("prior: {e}")))
    }

    /// Fixed hyper-parameters, when the configuration gives them.
    pub fn covariance_spec(&self) -> Result<Option<CovarianceSpec>> {
        self.hyperparameters
            .as_ref()
            .map(|h| {
                CovarianceSpec::new(self.kernel, h.sigma2, h.lengths.clone())
                    .map_err(|e| Error::Config(format!("hyperparameters: {e}")))
            })
            .transpose()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            conditions: self.io.conditions.clone(),
            output: self.io.output.clone(),
            h_columns: self.io.h_columns.clone(),
            nominal: self.io.nominal_column.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_example_parses() {
        let text = r#"
kernel = "gaussian"
[noise]
sigma_mes = 0.1
[prior]
mean = [0.2, 1.0]
variances = [0.09, 0.09]
[hyperparameters]
sigma2 = 0.09
lengths = [0.5]
[optimizer]
n_starts = 4
seed = 7
[cv]
folds = 3
mode = "fixed"
[io]
input = "data.csv"
output = "y"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.kernel, KernelFamily::Gaussian);
        assert_eq!(cfg.optimizer.n_starts, 4);
        assert_eq!(cfg.optimizer.max_iters, 400);
        assert_eq!(cfg.cv.as_ref().unwrap().mode, CvMode::FixedHyperparameters);
        assert_eq!(cfg.noise_spec().unwrap(), NoiseSpec::Homoscedastic(0.1));
        assert_eq!(cfg.prior().unwrap().unwrap().mean.len(), 2);
        assert_eq!(cfg.covariance_spec().unwrap().unwrap().lengths, vec![0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "colour = 1",
            "[io]\ninptu = \"x\"",
            "[optimizer]\nstarts = 3",
        ] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert_eq!(err.kind(), crate::ErrorKind::Usage, "{text}");
        }
    }

    #[test]
    fn conflicting_noise() {
        let err = RunConfig::from_toml("[noise]\nsigma_mes = 1.0\nmatrix = [[1.0]]").unwrap_err();
        assert!(err.to_string().contains("not both"));
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "[io]\ninput = \"d.csv\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.io.input.unwrap(), dir.path().join("d.csv"));
    }
}
