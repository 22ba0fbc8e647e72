//! Synthetic friction database: kernel comparison of the Gaussian-process prediction against
//! the calibrated model alone.
//!
//! Pass an output directory as first argument to also write the database as CSV.

use std::path::PathBuf;

use ukcal::cli::{demo_friction, friction_table};
use ukcal::crossval::CvMode;
use ukcal::dataset::write_table;
use ukcal::friction::FrictionConfig;
use ukcal::{KernelFamily, OptimizerConfig};

fn main() -> ukcal::Result<()> {
    let cfg = FrictionConfig::default();
    let (data, report) = demo_friction(
        &cfg,
        10,
        CvMode::RefitPerFold,
        &OptimizerConfig::default(),
        &KernelFamily::ALL,
    )?;
    println!(
        "{} isothermal + {} heated experiments",
        cfg.n_iso, cfg.n_heated
    );
    println!(
        "{:>12} {:>10} {:>10} {:>6} {:>8}",
        "kernel", "rmse [Pa]", "baseline", "IC", "factor"
    );
    for r in &report.comparison {
        println!(
            "{:>12} {:>10.1} {:>10.1} {:>6.3} {:>8.2}",
            r.kernel, r.rmse, r.baseline_rmse, r.ic, r.improvement
        );
    }
    let beta = &report.reports[0].per_fold[0].calibration.beta_unshifted;
    println!(
        "fold 0 posterior (a_t, b_t) = ({:.4}, {:.4})",
        beta[0], beta[1]
    );
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir).expect("create output directory");
        write_table(&dir.join("friction_data.csv"), &friction_table(&data))?;
    }
    Ok(())
}
