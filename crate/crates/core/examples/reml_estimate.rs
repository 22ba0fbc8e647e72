//! Restricted-maximum-likelihood estimation of `(sigma2, lengths)` on data drawn from a known
//! Gaussian process.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ukcal::kernels::covariance_matrix;
use ukcal::reml::estimate_hyperparameters;
use ukcal::{
    CovarianceSpec, Design, GpModel, KernelFamily, LinearModel, NoiseSpec, Observations,
    OptimizerConfig,
};

fn main() -> ukcal::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 60;
    let pts = DMatrix::from_fn(n, 2, |i, j| {
        ((i * (j + 3) * 37 + 11 * j) % 97) as f64 / 96.0
    });
    let design = Design::new(pts)?;
    let truth = CovarianceSpec::new(KernelFamily::Matern52, 1.5, vec![0.25, 0.6])?;
    let mut k = covariance_matrix(&truth, &design)?;
    for i in 0..n {
        k[(i, i)] += 0.01 + 1e-10;
    }
    let l = k.cholesky().expect("positive definite").l();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let trend = DVector::from_fn(n, |i, _| 2.0 - design.points()[(i, 0)]);
    let y = trend + l * z;

    let lm = LinearModel::affine(&design)?;
    let model = GpModel::assemble(
        design,
        Observations::new(y.iter().copied().collect())?,
        lm,
        CovarianceSpec::new(KernelFamily::Matern52, 1.0, vec![0.3, 0.3])?,
        NoiseSpec::homoscedastic(0.1)?,
        None,
    )?;
    let est = estimate_hyperparameters(&model, &OptimizerConfig::default())?;
    println!(
        "true:      sigma2 = {:.3}, lengths = {:?}",
        truth.sigma2, truth.lengths
    );
    println!(
        "estimated: sigma2 = {:.3}, lengths = {:.3?} (q = {:.4}, {} starts)",
        est.spec.sigma2, est.spec.lengths, est.q_min, est.n_starts
    );
    for (i, t) in est.trace.iter().enumerate() {
        println!(
            "  start {i:>2}: q = {:>10.4} after {:>3} iterations",
            t.q, t.iterations
        );
    }
    Ok(())
}
