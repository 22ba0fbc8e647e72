//! K-fold cross validation on a one-dimensional problem, refitting the hyper-parameters in
//! every fold, for each kernel family.

use nalgebra::DMatrix;
use ukcal::crossval::{partition, run_cv, CvInputs, CvMode};
use ukcal::{Design, KernelFamily, LinearModel, NoiseSpec, Observations, OptimizerConfig};

fn main() -> ukcal::Result<()> {
    let n = 40;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    // Linear computer model; the system adds a smooth wiggle the line cannot represent.
    let ys: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| 1.0 + 0.5 * x + 0.3 * (6.0 * x).sin() + 0.01 * ((i * 7 % 5) as f64 - 2.0))
        .collect();
    let design = Design::new(DMatrix::from_column_slice(n, 1, &xs))?;
    let inputs = CvInputs {
        linmodel: LinearModel::affine(&design)?,
        obs: Observations::new(ys)?,
        noise: NoiseSpec::homoscedastic(0.02)?,
        prior: None,
        design,
    };
    let folds = partition(&inputs.design, 5, 0)?;
    println!(
        "{:>12} {:>10} {:>10} {:>6}",
        "kernel", "rmse", "baseline", "IC"
    );
    for k in KernelFamily::ALL {
        let r = run_cv(
            &inputs,
            k,
            &folds,
            CvMode::RefitPerFold,
            &OptimizerConfig::default(),
        )?;
        println!(
            "{:>12} {:>10.4} {:>10.4} {:>6.2}",
            k, r.rmse, r.baseline_rmse, r.ic
        );
    }
    Ok(())
}
