//! Command-line front end.
//!
//! Every subcommand writes a JSON report plus flat CSV tables into the output directory. All
//! randomness flows from `--seed` (or the configuration), so identical inputs give
//! byte-identical files.

mod demos;
mod output;

pub use demos::{
    demo_friction, demo_parabola, friction_table, parabola_model, parabola_prior, parabola_report,
    FrictionKernelRow, FrictionReport, GridRow, ObservationRow, ParabolaRegime, ParabolaReport,
    PARABOLA_POINTS,
};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::config::RunConfig;
use crate::crossval::{partition_with, run_cv, CvInputs, CvMode};
use crate::dataset::{load_dataset, load_points, Dataset, Table};
use crate::error::{Error, ErrorKind, Result};
use crate::friction::FrictionConfig;
use crate::infer::CalibrationSummary;
use crate::infer::{calibrate, calibrate_gls, confidence_interval, predict_with_basis, Level};
use crate::kernels::{CovarianceSpec, KernelFamily};
use crate::reml::{estimate_hyperparameters, RemlEstimate};
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(
    name = "ukcal",
    version,
    about = "Calibrate linearized computer models and predict with an inferred model error"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the model-error hyper-parameters by restricted maximum likelihood.
    Fit(Common),
    /// Calibrate the model parameters (without and, if configured, with the prior).
    Calibrate(Common),
    /// Predict the physical system at new points.
    Predict(PredictArgs),
    /// K-fold cross validation of the whole pipeline.
    Cv(Common),
    /// Analytic parabola-versus-line example with known hyper-parameters.
    DemoParabola(ParabolaArgs),
    /// Synthetic friction database and a kernel comparison by cross validation.
    DemoFriction(FrictionArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Input table; overrides the configured input.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed of the optimizer starts and of the fold assignment.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Kernel family: exponential, matern32, matern52 or gaussian.
    #[arg(long, value_name = "NAME")]
    pub kernel: Option<String>,
    /// Number of cross-validation folds.
    #[arg(long, value_name = "K")]
    pub folds: Option<usize>,
    /// Cross-validation mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Points to predict at; overrides the configured predict input.
    #[arg(long, value_name = "PATH")]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParabolaArgs {
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of grid points over [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = RegimeArg::Both)]
    pub regime: RegimeArg,
}

#[derive(Debug, Clone, Args)]
pub struct FrictionArgs {
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub n_iso: usize,
    #[arg(long, default_value_t = 60)]
    pub n_heated: usize,
    /// Restrict the comparison to one kernel family.
    #[arg(long, value_name = "NAME")]
    pub kernel: Option<String>,
    #[arg(long, value_name = "K", default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Refit)]
    pub mode: ModeArg,
    /// Space-filling optimizer starts per estimation.
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Refit,
    Fixed,
}

impl From<ModeArg> for CvMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Refit => CvMode::RefitPerFold,
            ModeArg::Fixed => CvMode::FixedHyperparameters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    NoPrior,
    Prior,
    Both,
}

/// Exit code for an error category.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code. Errors are reported
/// on standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(c) => cmd_fit(&c).map_err(|e| e.context("fit")),
        Command::Calibrate(c) => cmd_calibrate(&c).map_err(|e| e.context("calibrate")),
        Command::Predict(p) => cmd_predict(&p).map_err(|e| e.context("predict")),
        Command::Cv(c) => cmd_cv(&c).map_err(|e| e.context("cv")),
        Command::DemoParabola(p) => cmd_parabola(&p).map_err(|e| e.context("demo-parabola")),
        Command::DemoFriction(f) => cmd_friction(&f).map_err(|e| e.context("demo-friction")),
    }
}

fn parse_kernel(name: &str) -> Result<KernelFamily> {
    name.parse()
}

/// Configuration with command-line overrides applied.
fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &c.data {
        cfg.io.input = Some(d.clone());
    }
    if let Some(o) = &c.out {
        cfg.io.output_dir = Some(o.clone());
    }
    if let Some(k) = &c.kernel {
        cfg.kernel = parse_kernel(k)?;
    }
    if let Some(s) = c.seed {
        cfg.optimizer.seed = s;
    }
    if c.folds.is_some() || c.mode.is_some() || c.seed.is_some() {
        let cv = cfg.cv.get_or_insert_with(Default::default);
        if let Some(k) = c.folds {
            cv.folds = k;
        }
        if let Some(m) = c.mode {
            cv.mode = m.into();
        }
        if let Some(s) = c.seed {
            cv.seed = s;
        }
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<OutputDir> {
    let dir = cfg.io.output_dir.clone().ok_or_else(|| {
        Error::Config("no output directory: pass --out or set io.output_dir".into())
    })?;
    OutputDir::create(dir)
}

struct Problem {
    dataset: Dataset,
    inputs: CvInputs,
}

fn load_problem(cfg: &RunConfig) -> Result<Problem> {
    let path = cfg
        .io
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input data: pass --data or set io.input".into()))?;
    let dataset = load_dataset(path, &cfg.schema())?;
    let design = dataset.design()?;
    let linmodel = dataset.linear_model(cfg.io.beta_nominal.as_deref())?;
    let inputs = CvInputs {
        obs: dataset.observations()?,
        linmodel,
        noise: cfg.noise_spec()?,
        prior: cfg.prior()?,
        design,
    };
    Ok(Problem { dataset, inputs })
}

/// Configured hyper-parameters, or the REML estimate when none are configured.
fn hyperparameters(
    cfg: &RunConfig,
    inputs: &CvInputs,
) -> Result<(CovarianceSpec, Option<RemlEstimate>)> {
    match cfg.covariance_spec()? {
        Some(spec) => Ok((spec, None)),
        None => {
            let model = inputs.assemble_placeholder(cfg.kernel)?;
            let est = estimate_hyperparameters(&model, &cfg.optimizer)?;
            Ok((est.spec.clone(), Some(est)))
        }
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    kernel: KernelFamily,
    n: usize,
    dim: usize,
    kernel_dims: Vec<String>,
    estimate: &'a RemlEstimate,
}

fn cmd_fit(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let out = out_dir(&cfg)?;
    let p = load_problem(&cfg)?;
    let model = p.inputs.assemble_placeholder(cfg.kernel)?;
    let est = estimate_hyperparameters(&model, &cfg.optimizer)?;
    let design = &p.inputs.design;
    out.json(
        "fit.json",
        &FitReport {
            kernel: cfg.kernel,
            n: design.n(),
            dim: design.dim(),
            kernel_dims: design
                .active_dims()
                .iter()
                .map(|&j| design.label(j))
                .collect(),
            estimate: &est,
        },
    )?;
    let mut trace = Table::new(
        ["start", "q", "iterations", "converged", "sigma2"]
            .iter()
            .map(|s| s.to_string())
            .chain(
                (0..design.kernel_dim())
                    .map(|k| format!("l_{}", design.label(design.active_dims()[k]))),
            )
            .collect(),
    );
    for (i, t) in est.trace.iter().enumerate() {
        let mut row = vec![
            i as f64,
            t.q,
            t.iterations as f64,
            f64::from(u8::from(t.converged)),
            t.end.sigma2,
        ];
        row.extend(&t.end.lengths);
        trace.push(row);
    }
    out.table("fit_starts.csv", &trace)
}

#[derive(Serialize)]
struct CalibrateReport {
    kernel: KernelFamily,
    hyperparameters: CovarianceSpec,
    estimated: bool,
    no_prior: Option<CalibrationSummary>,
    prior: Option<CalibrationSummary>,
}

fn cmd_calibrate(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let out = out_dir(&cfg)?;
    let p = load_problem(&cfg)?;
    let (spec, est) = hyperparameters(&cfg, &p.inputs)?;
    let model = p.inputs.assemble(spec.clone())?;
    // Without a prior the GLS estimate is required; with one it is reported when identifiable.
    let gls = match (calibrate_gls(&model), model.prior()) {
        (Ok(c), _) => Some(c),
        (Err(e), None) => return Err(e),
        (Err(e), Some(_)) => {
            log::warn!("no-prior calibration skipped: {e}");
            None
        }
    };
    let bayes = match model.prior() {
        Some(_) => Some(calibrate(&model)?),
        None => None,
    };
    out.json(
        "calibration.json",
        &CalibrateReport {
            kernel: spec.family,
            hyperparameters: spec.clone(),
            estimated: est.is_some(),
            no_prior: gls.as_ref().map(CalibrationSummary::from),
            prior: bayes.as_ref().map(CalibrationSummary::from),
        },
    )?;

    let chosen = bayes
        .as_ref()
        .or(gls.as_ref())
        .expect("one regime is always present");
    let mut header = p.dataset.condition_names.clone();
    header.extend(["observed", "calibrated_model", "residual"].map(String::from));
    let mut table = Table::new(header);
    let fitted = model.h() * &chosen.beta + model.linear_model().f_nom();
    for i in 0..model.n() {
        let mut row: Vec<f64> = p.dataset.conditions.row(i).iter().copied().collect();
        let y = p.dataset.output[i];
        row.extend([y, fitted[i], y - fitted[i]]);
        table.push(row);
    }
    out.table("calibration_residuals.csv", &table)
}

#[derive(Serialize)]
struct PredictRow {
    point: Vec<f64>,
    mean: f64,
    variance: f64,
    sd: f64,
    ci90: (f64, f64),
    ci95: (f64, f64),
    calibrated_model_term: f64,
    inferred_model_error_term: f64,
    clamped: bool,
}

#[derive(Serialize)]
struct PredictReport {
    kernel: KernelFamily,
    hyperparameters: CovarianceSpec,
    calibration: CalibrationSummary,
    predictions: Vec<PredictRow>,
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let points_path = a
        .points
        .clone()
        .or_else(|| cfg.io.predict_input.clone())
        .ok_or_else(|| {
            Error::Config("no points to predict: pass --points or set io.predict_input".into())
        })?;
    let out = out_dir(&cfg)?;
    let p = load_problem(&cfg)?;
    let points = load_points(&points_path, &cfg.schema())?;
    if points.conditions.ncols() != p.dataset.dim() {
        return Err(Error::Data(format!(
            "{}: {} condition columns, training data has {}",
            points_path.display(),
            points.conditions.ncols(),
            p.dataset.dim()
        )));
    }
    let (spec, _) = hyperparameters(&cfg, &p.inputs)?;
    let model = p.inputs.assemble(spec.clone())?;
    let calib = calibrate(&model)?;
    let lm = model.linear_model();

    let mut rows = Vec::with_capacity(points.n());
    for i in 0..points.n() {
        let x: Vec<f64> = points.conditions.row(i).iter().copied().collect();
        let (h, nominal) = match &points.h {
            Some(h) => (
                h.row(i).transpose(),
                points.nominal.as_ref().map_or(0.0, |f| f[i]),
            ),
            None if lm.can_evaluate() => (lm.basis_at(&x)?, lm.nominal_at(&x)?),
            None => {
                return Err(Error::Data(format!(
                    "{}: H columns are required to predict with a tabulated model",
                    points_path.display()
                )))
            }
        };
        let h: DVector<f64> = h;
        let pr = predict_with_basis(&model, &calib, &x, &h, nominal)
            .map_err(|e| e.context(format!("point {}", i + 1)))?;
        rows.push(PredictRow {
            point: x,
            mean: pr.mean,
            variance: pr.variance,
            sd: pr.sd(),
            ci90: confidence_interval(&pr, Level::P90),
            ci95: confidence_interval(&pr, Level::P95),
            calibrated_model_term: pr.calibrated_model_term,
            inferred_model_error_term: pr.inferred_model_error_term,
            clamped: pr.clamped,
        });
    }

    let mut header = p.dataset.condition_names.clone();
    header.extend(
        [
            "mean",
            "variance",
            "lo90",
            "hi90",
            "lo95",
            "hi95",
            "calibrated_model",
            "model_error",
        ]
        .map(String::from),
    );
    let mut table = Table::new(header);
    for r in &rows {
        let mut row = r.point.clone();
        row.extend([
            r.mean,
            r.variance,
            r.ci90.0,
            r.ci90.1,
            r.ci95.0,
            r.ci95.1,
            r.calibrated_model_term,
            r.inferred_model_error_term,
        ]);
        table.push(row);
    }
    out.json(
        "predictions.json",
        &PredictReport {
            kernel: spec.family,
            hyperparameters: spec,
            calibration: CalibrationSummary::from(&calib),
            predictions: rows,
        },
    )?;
    out.table("predictions.csv", &table)
}

fn cmd_cv(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let cv = cfg.cv.clone().unwrap_or_default();
    let out = out_dir(&cfg)?;
    let p = load_problem(&cfg)?;
    let n = p.inputs.design.n();
    if cv.folds < 2 || cv.folds > n {
        return Err(Error::InvalidArgument(format!(
            "number of folds must lie in [2, n = {n}], got {}",
            cv.folds
        )));
    }
    let part = partition_with(&p.inputs.design, cv.folds, cv.seed, cv.strategy)?;
    let report = run_cv(&p.inputs, cfg.kernel, &part, cv.mode, &cfg.optimizer)?;
    out.json("cv.json", &report)?;
    out.table("cv_points.csv", &output::cv_points(&report))
}

fn cmd_parabola(a: &ParabolaArgs) -> Result<()> {
    let dir = a
        .out
        .clone()
        .ok_or_else(|| Error::Config("pass --out".into()))?;
    if a.grid < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be at least 2, got {}",
            a.grid
        )));
    }
    let out = OutputDir::create(dir)?;
    let regimes: &[ParabolaRegime] = match a.regime {
        RegimeArg::NoPrior => &[ParabolaRegime::NoPrior],
        RegimeArg::Prior => &[ParabolaRegime::Prior],
        RegimeArg::Both => &[ParabolaRegime::NoPrior, ParabolaRegime::Prior],
    };
    for &r in regimes {
        let report = demo_parabola(r, a.grid)?;
        let stem = match r {
            ParabolaRegime::NoPrior => "parabola_no_prior",
            ParabolaRegime::Prior => "parabola_prior",
        };
        out.json(&format!("{stem}.json"), &report)?;
        out.table(&format!("{stem}.csv"), &report.grid_table())?;
    }
    Ok(())
}

fn cmd_friction(a: &FrictionArgs) -> Result<()> {
    let dir = a
        .out
        .clone()
        .ok_or_else(|| Error::Config("pass --out".into()))?;
    let kernels = match &a.kernel {
        Some(k) => vec![parse_kernel(k)?],
        None => KernelFamily::ALL.to_vec(),
    };
    let cfg = FrictionConfig {
        seed: a.seed,
        n_iso: a.n_iso,
        n_heated: a.n_heated,
        ..FrictionConfig::default()
    };
    let optimizer = crate::reml::OptimizerConfig {
        n_starts: a.starts,
        seed: a.seed,
        ..Default::default()
    };
    let n = a.n_iso + a.n_heated;
    if a.folds < 2 || a.folds > n {
        return Err(Error::InvalidArgument(format!(
            "number of folds must lie in [2, n = {n}], got {}",
            a.folds
        )));
    }
    let out = OutputDir::create(dir)?;
    let (data, report) = demo_friction(&cfg, a.folds, a.mode.into(), &optimizer, &kernels)?;
    out.table("friction_data.csv", &friction_table(&data))?;
    out.json("friction_cv.json", &report)?;
    out.text("friction_cv_table.csv", &report.comparison_csv())?;
    for r in &report.reports {
        out.table(
            &format!("friction_cv_points_{}.csv", r.kernel),
            &output::cv_points(r),
        )?;
    }
    Ok(())
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
