use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{self, Options};
use super::objective_svd_unchecked;
use crate::error::{Error, Result};
use crate::gpmodel::GpModel;
use crate::kernels::{CovarianceSpec, LENGTH_MAX, LENGTH_MIN};

/// Correlation length used by the heuristic first start and for non-identified dimensions.
pub const DEFAULT_START_LENGTH: f64 = 0.3;

/// Range of `sigma2` explored, relative to the residual-variance scale of the data.
const SIGMA2_BELOW: f64 = 1e-8;
const SIGMA2_ABOVE: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMode {
    /// Lengths are estimated together with the variance.
    Estimate,
    /// Lengths are held at the given values; only the variance is estimated.
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of space-filling starts, in addition to the heuristic start.
    pub n_starts: usize,
    /// Iteration budget of each local search.
    pub max_iters: usize,
    /// Relative spread of objective values at which a local search stops.
    pub tolerance: f64,
    pub seed: u64,
    pub lengths: LengthMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_starts: 10,
            max_iters: 400,
            tolerance: 1e-10,
            seed: 0,
            lengths: LengthMode::Estimate,
        }
    }
}

/// One local search of the multi-start procedure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub start: CovarianceSpec,
    pub end: CovarianceSpec,
    pub q: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemlEstimate {
    pub spec: CovarianceSpec,
    pub q_min: f64,
    pub n_starts: usize,
    /// `true` for a length along which every design point shares the same coordinate; the
    /// objective is flat there and the length is reported at its start value.
    pub non_identified: Vec<bool>,
    pub trace: Vec<StartTrace>,
}

/// Minimizes the restricted objective over `(ln sigma2, ln lengths)` with multi-start
/// Nelder–Mead.
///
/// Start 0 is `(residual variance, lengths = 0.3)`; starts `1..=n_starts` come from a seeded
/// Latin hypercube over the variance range and the length clamp box. The best start wins, ties
/// going to the lowest index, so the result does not depend on thread scheduling.
pub fn estimate_hyperparameters(model: &GpModel, config: &OptimizerConfig) -> Result<RemlEstimate> {
    let (n, rank) = (model.n(), model.rank());
    if n <= rank {
        return Err(Error::InsufficientDof { n, rank });
    }
    let family = model.covariance().family;
    let d = model.design().kernel_dim();

    let non_identified: Vec<bool> = (0..d)
        .map(|k| {
            let col = model.design().normalized().column(k);
            col.iter().all(|&v| v == col[0])
        })
        .collect();
    let (free, fixed_lengths): (Vec<usize>, Vec<f64>) = match &config.lengths {
        LengthMode::Estimate => (
            (0..d).filter(|&k| !non_identified[k]).collect(),
            vec![DEFAULT_START_LENGTH; d],
        ),
        LengthMode::Fixed(l) => {
            crate::error::check_dim("fixed lengths", d, l.len())?;
            (Vec::new(), l.clone())
        }
    };

    let scale = residual_scale(model);
    let log_s2_lo = (scale * SIGMA2_BELOW).ln();
    let log_s2_hi = (scale * SIGMA2_ABOVE).ln();
    let (log_l_lo, log_l_hi) = (LENGTH_MIN.ln(), LENGTH_MAX.ln());

    // Free parameters: [ln sigma2, ln l_k for k in free].
    let to_spec = |p: &[f64]| -> CovarianceSpec {
        let mut lengths = fixed_lengths.clone();
        for (slot, &k) in free.iter().enumerate() {
            lengths[k] = p[slot + 1]
                .clamp(log_l_lo, log_l_hi)
                .exp()
                .clamp(LENGTH_MIN, LENGTH_MAX);
        }
        CovarianceSpec {
            family,
            sigma2: p[0].clamp(log_s2_lo, log_s2_hi).exp(),
            lengths,
        }
    };
    let objective = |p: &[f64]| objective_svd_unchecked(model, &to_spec(p)).score();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.n_starts + 1);
    let mut first = vec![scale.ln()];
    first.extend(free.iter().map(|_| DEFAULT_START_LENGTH.ln()));
    starts.push(first);
    let mut lows = vec![log_s2_lo.max(scale.ln() - 3.0 * std::f64::consts::LN_10)];
    let mut highs = vec![log_s2_hi.min(scale.ln() + 2.0 * std::f64::consts::LN_10)];
    lows.extend(free.iter().map(|_| log_l_lo));
    highs.extend(free.iter().map(|_| log_l_hi));
    starts.extend(latin_hypercube(config.n_starts, &lows, &highs, config.seed));

    let opts = Options {
        max_iters: config.max_iters,
        ftol: config.tolerance,
        ..Options::default()
    };
    let trace: Vec<StartTrace> = starts
        .par_iter()
        .map(|s| {
            let m = nelder_mead::minimize(objective, s, &opts);
            StartTrace {
                start: to_spec(s),
                end: to_spec(&m.x),
                q: m.f,
                iterations: m.iterations,
                converged: m.converged,
            }
        })
        .collect();

    let best = trace
        .iter()
        .enumerate()
        .filter(|(_, t)| t.q.is_finite())
        .min_by(|(ia, a), (ib, b)| a.q.total_cmp(&b.q).then(ia.cmp(ib)))
        .map(|(i, _)| i);
    match best {
        Some(i) => Ok(RemlEstimate {
            spec: trace[i].end.clone(),
            q_min: trace[i].q,
            n_starts: trace.len(),
            non_identified,
            trace,
        }),
        None => Err(Error::EstimationFailed {
            n_starts: trace.len(),
            trace,
        }),
    }
}

/// Variance of the ordinary-least-squares residuals, floored away from zero.
fn residual_scale(model: &GpModel) -> f64 {
    let u = model.trend_basis();
    let y = model.y_shifted();
    let resid = y - u * (u.transpose() * y);
    let dof = (model.n() - model.rank()) as f64;
    let v = resid.norm_squared() / dof;
    let floor = 1e-12 * (1.0 + y.norm_squared() / model.n() as f64);
    v.max(floor)
}

fn latin_hypercube(count: usize, lows: &[f64], highs: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = lows.len();
    let mut pts = vec![vec![0.0; dim]; count];
    for k in 0..dim {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u: f64 = rng.random();
            let t = (s as f64 + u) / count as f64;
            pts[i][k] = lows[k] + t * (highs[k] - lows[k]);
        }
    }
    pts
}
