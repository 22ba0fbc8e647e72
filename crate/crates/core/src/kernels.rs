//! Stationary correlation families for the model-error process and the covariance
//! matrices built from them.
//!
//! All kernels act on normalized experimental conditions (see [`Design`]). The correlation
//! lengths are per-dimension and the weighted lag norm is
//! `|h|_l = sqrt(sum_i h_i^2 / l_i^2)`.
//!
//! The Matérn families use the scale constants `sqrt(6)` (smoothness 3/2) and `sqrt(10)`
//! (smoothness 5/2) in front of the weighted norm.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gpmodel::Design;

/// Smallest correlation length reachable by the optimizer.
pub const LENGTH_MIN: f64 = 1e-3;
/// Largest correlation length reachable by the optimizer. A length at this value means the
/// model error is practically constant along that input.
pub const LENGTH_MAX: f64 = 1e2;

const SQRT_6: f64 = 2.449_489_742_783_178;
const SQRT_10: f64 = 3.162_277_660_168_379_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    Matern32,
    Matern52,
    Gaussian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Exponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
        KernelFamily::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Gaussian => "gaussian",
        }
    }

    /// Correlation at lag `h` (normalized coordinates) for correlation lengths `lengths`.
    #[inline]
    pub fn correlation_at(self, h: impl Iterator<Item = f64>, lengths: &[f64]) -> f64 {
        match self {
            KernelFamily::Exponential => {
                let s: f64 = h.zip(lengths).map(|(hi, li)| hi.abs() / li).sum();
                (-s).exp()
            }
            _ => {
                let r2: f64 = h
                    .zip(lengths)
                    .map(|(hi, li)| {
                        let t = hi / li;
                        t * t
                    })
                    .sum();
                match self {
                    KernelFamily::Gaussian => (-r2).exp(),
                    KernelFamily::Matern32 => {
                        let a = SQRT_6 * r2.sqrt();
                        (1.0 + a) * (-a).exp()
                    }
                    KernelFamily::Matern52 => {
                        let a = SQRT_10 * r2.sqrt();
                        (1.0 + a + (10.0 / 3.0) * r2) * (-a).exp()
                    }
                    KernelFamily::Exponential => unreachable!(),
                }
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "exponential" | "exp" => Ok(KernelFamily::Exponential),
            "matern32" | "matern3/2" => Ok(KernelFamily::Matern32),
            "matern52" | "matern5/2" => Ok(KernelFamily::Matern52),
            "gaussian" | "gauss" | "rbf" => Ok(KernelFamily::Gaussian),
            _ => Err(Error::InvalidArgument(format!(
                "unknown kernel family '{s}'"
            ))),
        }
    }
}

/// `sigma2 * C_l`: variance and correlation lengths of the model-error process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub family: KernelFamily,
    pub sigma2: f64,
    pub lengths: Vec<f64>,
}

impl CovarianceSpec {
    pub fn new(family: KernelFamily, sigma2: f64, lengths: Vec<f64>) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "variance must be positive and finite, got {sigma2}"
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "correlation lengths must be positive and finite, got {l}"
            )));
        }
        Ok(CovarianceSpec {
            family,
            sigma2,
            lengths,
        })
    }

    /// Builds a spec from log-parameters `[ln sigma2, ln l_1, ..]`, clamping the lengths to
    /// `[LENGTH_MIN, LENGTH_MAX]`.
    pub fn from_log_params(family: KernelFamily, params: &[f64]) -> Self {
        CovarianceSpec {
            family,
            sigma2: params[0].exp(),
            lengths: params[1..].iter().map(|p| clamp_length(p.exp())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }
}

pub fn clamp_length(l: f64) -> f64 {
    if l.is_nan() {
        return LENGTH_MAX;
    }
    l.clamp(LENGTH_MIN, LENGTH_MAX)
}

/// Correlation between two normalized points.
pub fn correlation(spec: &CovarianceSpec, xa: &[f64], xb: &[f64]) -> Result<f64> {
    check_dim("correlation point", spec.dim(), xa.len())?;
    check_dim("correlation point", spec.dim(), xb.len())?;
    Ok(spec
        .family
        .correlation_at(xa.iter().zip(xb).map(|(a, b)| a - b), &spec.lengths))
}

/// `R_mod`: the `n x n` model-error covariance over the design.
pub fn covariance_matrix(spec: &CovarianceSpec, design: &Design) -> Result<DMatrix<f64>> {
    check_dim("covariance lengths", design.kernel_dim(), spec.dim())?;
    let x = design.normalized();
    let n = x.nrows();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = spec.sigma2;
        for j in 0..i {
            let c = spec.family.correlation_at(
                x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| a - b),
                &spec.lengths,
            );
            let v = spec.sigma2 * c;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// `r_mod(x_new)`: covariances between the design points and a raw new point.
pub fn covariance_vector(
    spec: &CovarianceSpec,
    design: &Design,
    xnew: &[f64],
) -> Result<DVector<f64>> {
    check_dim("covariance lengths", design.kernel_dim(), spec.dim())?;
    let z = design.normalize(xnew)?;
    let x = design.normalized();
    Ok(DVector::from_fn(x.nrows(), |i, _| {
        spec.sigma2
            * spec.family.correlation_at(
                x.row(i).iter().zip(z.iter()).map(|(a, b)| a - b),
                &spec.lengths,
            )
    }))
}

/// Covariance of the measurement errors.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    /// `sigma_mes^2 * I_n`.
    Homoscedastic(f64),
    /// A known `n x n` covariance matrix.
    FullMatrix(DMatrix<f64>),
}

impl NoiseSpec {
    pub fn homoscedastic(sigma_mes: f64) -> Result<Self> {
        if !(sigma_mes >= 0.0 && sigma_mes.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "measurement standard deviation must be >= 0, got {sigma_mes}"
            )));
        }
        Ok(NoiseSpec::Homoscedastic(sigma_mes))
    }

    /// Wraps a full covariance matrix, checking symmetry and positive semi-definiteness.
    pub fn full(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("noise matrix is not square".into()));
        }
        let scale = crate::linalg::max_abs(&matrix).max(1.0);
        let asym = crate::linalg::max_abs(&(&matrix - matrix.transpose()));
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(
                "noise matrix is not symmetric".into(),
            ));
        }
        let n = matrix.nrows();
        let mut shifted = matrix.clone();
        for i in 0..n {
            shifted[(i, i)] += 1e-10 * scale;
        }
        if crate::linalg::cholesky_strict(&shifted).is_none() {
            return Err(Error::InvalidArgument(
                "noise matrix is not positive semi-definite".into(),
            ));
        }
        Ok(NoiseSpec::FullMatrix(matrix))
    }

    /// Variance of the measurement error of observation `i`.
    pub fn variance(&self, i: usize) -> f64 {
        match self {
            NoiseSpec::Homoscedastic(s) => s * s,
            NoiseSpec::FullMatrix(m) => m[(i, i)],
        }
    }

    pub fn subset(&self, rows: &[usize]) -> NoiseSpec {
        match self {
            NoiseSpec::Homoscedastic(s) => NoiseSpec::Homoscedastic(*s),
            NoiseSpec::FullMatrix(m) => {
                NoiseSpec::FullMatrix(DMatrix::from_fn(rows.len(), rows.len(), |i, j| {
                    m[(rows[i], rows[j])]
                }))
            }
        }
    }
}

/// `R_mes` for `n` observations.
pub fn noise_matrix(noise: &NoiseSpec, n: usize) -> Result<DMatrix<f64>> {
    match noise {
        NoiseSpec::Homoscedastic(s) => Ok(DMatrix::from_diagonal_element(n, n, s * s)),
        NoiseSpec::FullMatrix(m) => {
            check_dim("noise matrix", n, m.nrows())?;
            Ok(m.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpmodel::Bounds;
    use approx::assert_relative_eq;

    fn unit_design(xs: &[f64]) -> Design {
        Design::with_bounds(
            DMatrix::from_column_slice(xs.len(), 1, xs),
            vec![Bounds { min: 0.0, max: 1.0 }],
        )
        .unwrap()
    }

    fn spec(family: KernelFamily, sigma2: f64, l: f64) -> CovarianceSpec {
        CovarianceSpec::new(family, sigma2, vec![l]).unwrap()
    }

    // Reference values below were evaluated with 30-digit arithmetic from the closed forms.

    #[test]
    fn zero_lag_is_one() {
        for f in KernelFamily::ALL {
            let s = CovarianceSpec::new(f, 2.0, vec![0.3, 1.7]).unwrap();
            assert_eq!(correlation(&s, &[0.4, 0.1], &[0.4, 0.1]).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_closed_form() {
        let s = spec(KernelFamily::Gaussian, 1.0, 0.5);
        assert_relative_eq!(
            correlation(&s, &[0.0], &[0.5]).unwrap(),
            0.367_879_441_171_442_32,
            max_relative = 1e-14
        );
    }

    #[test]
    fn matern32_closed_form() {
        let s = spec(KernelFamily::Matern32, 1.0, 1.0);
        assert_relative_eq!(
            correlation(&s, &[0.0], &[1.0]).unwrap(),
            0.297_820_767_929_631_5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn matern52_and_exponential_closed_forms() {
        // (1 + sqrt(10)*0.5 + 10/3*0.25) * exp(-sqrt(10)*0.5)
        let s = spec(KernelFamily::Matern52, 1.0, 2.0);
        assert_relative_eq!(
            correlation(&s, &[0.0], &[1.0]).unwrap(),
            0.702_495_760_153_803_3,
            max_relative = 1e-13
        );
        let s = CovarianceSpec::new(KernelFamily::Exponential, 1.0, vec![0.5, 2.0]).unwrap();
        assert_relative_eq!(
            correlation(&s, &[0.0, 0.0], &[0.25, -1.0]).unwrap(),
            (-1.0_f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = spec(KernelFamily::Gaussian, 1.0, 0.5);
        assert!(matches!(
            correlation(&s, &[0.0, 1.0], &[0.5, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parabola_covariance_matrix() {
        let d = unit_design(&[0.2, 0.5, 0.8]);
        let r = covariance_matrix(&spec(KernelFamily::Gaussian, 0.09, 0.5), &d).unwrap();
        assert_eq!(r[(0, 0)], 0.09);
        assert_eq!(r[(2, 2)], 0.09);
        assert_relative_eq!(r[(1, 2)], 0.062_790_869_346_392_79, max_relative = 1e-13);
        assert_eq!(r[(1, 2)], r[(2, 1)]);
    }

    #[test]
    fn single_point_and_coincident_points() {
        let d = unit_design(&[0.3]);
        let s = CovarianceSpec::new(KernelFamily::Matern52, 0.7, vec![]).unwrap();
        let r = covariance_matrix(&s, &d).unwrap();
        assert_eq!(r.shape(), (1, 1));
        assert_eq!(r[(0, 0)], 0.7);

        let d = unit_design(&[0.3, 0.3, 0.3]);
        assert_eq!(d.kernel_dim(), 0);
        let r = covariance_matrix(&s, &d).unwrap();
        assert!(r.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn covariance_vector_cases() {
        let d = unit_design(&[0.2, 0.5, 0.8]);
        let s = spec(KernelFamily::Gaussian, 0.09, 0.5);
        let r = covariance_vector(&s, &d, &[0.35]).unwrap();
        assert_relative_eq!(r[0], 0.082_253_806_674_410_53, max_relative = 1e-13);
        let r = covariance_vector(&s, &d, &[0.5]).unwrap();
        assert_eq!(r[1], 0.09);
        let flat = spec(KernelFamily::Gaussian, 0.09, LENGTH_MAX);
        let r = covariance_vector(&flat, &d, &[0.0]).unwrap();
        assert!(r.iter().all(|v| (v - 0.09).abs() < 0.09 * 1e-4));
    }

    #[test]
    fn noise_matrices() {
        let m = noise_matrix(&NoiseSpec::homoscedastic(150.0).unwrap(), 3).unwrap();
        assert_eq!(m, DMatrix::from_diagonal_element(3, 3, 22_500.0));
        let z = noise_matrix(&NoiseSpec::Homoscedastic(0.0), 4).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let full = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let ns = NoiseSpec::full(full.clone()).unwrap();
        assert_eq!(noise_matrix(&ns, 2).unwrap(), full);
        assert!(noise_matrix(&ns, 3).is_err());
        assert!(NoiseSpec::full(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(NoiseSpec::homoscedastic(-1.0).is_err());
    }

    #[test]
    fn parse_family_names() {
        assert_eq!(
            "Matern32".parse::<KernelFamily>().unwrap(),
            KernelFamily::Matern32
        );
        assert_eq!(
            "matern-5/2".parse::<KernelFamily>().unwrap(),
            KernelFamily::Matern52
        );
        assert!("cubic".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CovarianceSpec::new(KernelFamily::Gaussian, 0.0, vec![1.0]).is_err());
        assert!(CovarianceSpec::new(KernelFamily::Gaussian, 1.0, vec![-1.0]).is_err());
        let s = CovarianceSpec::from_log_params(KernelFamily::Gaussian, &[0.0, 20.0, -20.0]);
        assert_eq!(s.lengths, vec![LENGTH_MAX, LENGTH_MIN]);
    }
}
