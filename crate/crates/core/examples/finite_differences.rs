//! Linearizing a nonlinear computer model around nominal parameters by forward differences,
//! then calibrating the linearized model.

use nalgebra::DMatrix;
use ukcal::gpmodel::{default_fd_steps, finite_difference_jacobian};
use ukcal::infer::calibrate;
use ukcal::{CovarianceSpec, Design, GpModel, KernelFamily, NoiseSpec, Observations, Prior};

fn main() -> ukcal::Result<()> {
    // f(x, beta) = beta_0 exp(beta_1 x), nominal beta = (1, 0.5).
    let model = |x: &[f64], b: &[f64]| b[0] * (b[1] * x[0]).exp();
    let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let design = Design::new(DMatrix::from_column_slice(xs.len(), 1, &xs))?;
    let prior = Prior::diagonal(vec![1.0, 0.5], vec![0.04, 0.01])?;
    let steps = default_fd_steps(&[1.0, 0.5], Some(&prior));
    let lm = finite_difference_jacobian(model, &design, &[1.0, 0.5], &steps)?;
    println!("steps = {steps:?}\nH =\n{}", lm.h());

    // Observations from slightly different parameters plus a small bump.
    let y: Vec<f64> = xs
        .iter()
        .map(|&x| 1.05 * (0.55 * x).exp() + 0.02 * (3.0 * x).sin())
        .collect();
    let gp = GpModel::assemble(
        design,
        Observations::new(y)?,
        lm,
        CovarianceSpec::new(KernelFamily::Matern52, 4e-4, vec![0.4])?,
        NoiseSpec::homoscedastic(1e-3)?,
        Some(prior),
    )?;
    let c = calibrate(&gp)?;
    println!("posterior beta = {:.4?}", c.beta_unshifted.as_slice());
    println!("posterior sd   = {:.4?}", c.std_devs());
    Ok(())
}
