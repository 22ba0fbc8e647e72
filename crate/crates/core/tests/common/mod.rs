#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ukcal::gpmodel::total_covariance;
use ukcal::{
    CovarianceSpec, Design, GpModel, KernelFamily, LinearModel, NoiseSpec, Observations, Prior,
};

/// Design with explicit unit-cube bounds, so raw and normalized coordinates coincide.
pub fn unit_design(points: DMatrix<f64>) -> Design {
    let d = points.ncols();
    Design::with_bounds(
        points,
        vec![ukcal::gpmodel::Bounds { min: 0.0, max: 1.0 }; d],
    )
    .unwrap()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())
}

/// Trend basis with `m` terms: `1`, then the coordinates, then products.
pub fn basis(m: usize) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static {
    move |x: &[f64]| {
        let mut v = vec![1.0];
        v.extend(x.iter().copied());
        v.push(x.iter().product());
        v.truncate(m);
        v
    }
}

/// A random, well-conditioned instance with `n` points in `d` dimensions and `m` trend terms.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    m: usize,
    family: KernelFamily,
    prior: bool,
) -> GpModel {
    let design = unit_design(uniform_points(rng, n, d));
    let lm = LinearModel::from_basis(&design, m, basis(m)).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let spec = CovarianceSpec::new(
        family,
        rng.random_range(0.5..2.0),
        (0..d).map(|_| rng.random_range(0.2..0.8)).collect(),
    )
    .unwrap();
    let noise = NoiseSpec::homoscedastic(rng.random_range(0.1..0.4)).unwrap();
    let prior = prior.then(|| {
        Prior::diagonal(
            (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..m).map(|_| rng.random_range(0.2..2.0)).collect(),
        )
        .unwrap()
    });
    GpModel::assemble(design, Observations::new(y).unwrap(), lm, spec, noise, prior).unwrap()
}

/// One draw of `N(0, sigma2 C + noise)` on the design.
pub fn sample_gp(
    rng: &mut ChaCha8Rng,
    design: &Design,
    spec: &CovarianceSpec,
    noise: &NoiseSpec,
) -> DVector<f64> {
    let mut k = total_covariance(spec, design, noise).unwrap();
    let n = design.n();
    for i in 0..n {
        k[(i, i)] += 1e-10 * spec.sigma2;
    }
    let l = k.cholesky().expect("positive definite").l();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    l * z
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(a.abs()).max(f64::MIN_POSITIVE)
}
