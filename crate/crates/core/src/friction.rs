//! Synthetic single-phase friction model and experiment generator.
//!
//! The frictional pressure drop of a heated channel is
//!
//! ```text
//! dP = H / (2 rho D_h) * G^2 * f_iso * f_h
//! ```
//!
//! with the isothermal coefficient `f_iso` piecewise in the Reynolds number (laminar
//! `a_l / Re`, turbulent `a_t / Re^b_t`, linear blend in between) and the heated correction
//!
//! ```text
//! f_h = 1 - (P_h / P_w) * C_f (T_w - T_b) / (1 + d ((T_w + T_b) / (2 T_0))^n)
//! ```
//!
//! Only `(a_t, b_t)` are calibrated; every other coefficient is held at a nominal value. The
//! fluid properties are smooth textbook-style fits for pressurized water and are only meant to
//! give the generator realistic magnitudes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpmodel::Observations;
use crate::gpmodel::{default_fd_steps, finite_difference_jacobian, Design, LinearModel, Prior};
use crate::kernels::NoiseSpec;

/// Condition columns, in design order: mass flux, wall heat flux, inlet liquid enthalpy,
/// outlet pressure, friction height, hydraulic diameter.
pub const CONDITION_COLUMNS: [&str; 6] = ["G_i", "phi_w", "h_i_l", "P_o", "H_f", "D_h"];
pub const OUTPUT_COLUMN: &str = "dP_fric";
/// Derivative columns of the linearized model with respect to `(a_t, b_t)`.
pub const H_COLUMNS: [&str; 2] = ["dP_da_t", "dP_db_t"];
/// Model output at the nominal parameters.
pub const NOMINAL_COLUMN: &str = "dP_nom";

pub const NOMINAL_BETA: [f64; 2] = [0.22, 0.21];
pub const PRIOR_SD: [f64; 2] = [0.11, 0.105];
pub const NOISE_SD: f64 = 150.0;

/// Control variables `(H_f, D_h)` of the synthetic campaigns.
pub const CAMPAIGNS: [(f64, f64); 4] = [(1.0, 0.008), (1.5, 0.010), (2.0, 0.012), (2.5, 0.014)];

/// Coefficients held fixed during calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedCoefficients {
    pub a_l: f64,
    pub re_l: f64,
    pub re_t: f64,
    /// Heated over wetted perimeter.
    pub perimeter_ratio: f64,
    pub c_f: f64,
    pub d: f64,
    pub n: f64,
    /// Normalization temperature, degrees Celsius.
    pub t0: f64,
}

impl Default for FixedCoefficients {
    fn default() -> Self {
        FixedCoefficients {
            a_l: 64.0,
            re_l: 2000.0,
            re_t: 4000.0,
            perimeter_ratio: 1.0,
            c_f: 4e-3,
            d: 0.5,
            n: 1.5,
            t0: 100.0,
        }
    }
}

/// Isothermal friction coefficient.
pub fn f_iso(re: f64, a_l: f64, a_t: f64, b_t: f64, re_l: f64, re_t: f64) -> f64 {
    let laminar = |re: f64| a_l / re;
    let turbulent = |re: f64| a_t / re.powf(b_t);
    if re < re_l {
        laminar(re)
    } else if re > re_t {
        turbulent(re)
    } else {
        let w = re_t - re_l;
        laminar(re) * (re_t - re) / w + turbulent(re) * (re - re_l) / w
    }
}

/// Heated-flow correction factor; exactly 1 when `t_w == t_b`.
pub fn f_h(coeffs: &FixedCoefficients, t_w: f64, t_b: f64) -> f64 {
    let dt = t_w - t_b;
    if dt == 0.0 {
        return 1.0;
    }
    let mean = (t_w + t_b) / (2.0 * coeffs.t0);
    1.0 - coeffs.perimeter_ratio * coeffs.c_f * dt / (1.0 + coeffs.d * mean.powf(coeffs.n))
}

/// Local fluid state derived from the thermal-hydraulic conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidState {
    /// Bulk temperature, degrees Celsius.
    pub t_b: f64,
    /// Wall temperature, degrees Celsius.
    pub t_w: f64,
    /// Density, kg/m^3.
    pub rho: f64,
    /// Dynamic viscosity, Pa s.
    pub mu: f64,
}

/// `h_i_l` in kJ/kg, `p_o` in bar, `phi_w` in W/m^2.
pub fn fluid_state(h_i_l: f64, p_o: f64, phi_w: f64) -> FluidState {
    let t_b = h_i_l / 4.8;
    let t_w = t_b + phi_w / 30_000.0;
    let rho = (1005.0 - 1.1 * t_b) * (1.0 + 4e-4 * (p_o - 155.0));
    let mu = 2.4e-5 * 10f64.powf(247.8 / (t_b + 133.15));
    FluidState { t_b, t_w, rho, mu }
}

/// Frictional pressure drop in Pa at conditions `x` (ordered as [`CONDITION_COLUMNS`]) and
/// parameters `beta = (a_t, b_t)`.
pub fn pressure_drop(x: &[f64], beta: &[f64], coeffs: &FixedCoefficients) -> f64 {
    let (g, phi_w, h_i_l, p_o, h_f, d_h) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let s = fluid_state(h_i_l, p_o, phi_w);
    let re = g * d_h / s.mu;
    let fi = f_iso(re, coeffs.a_l, beta[0], beta[1], coeffs.re_l, coeffs.re_t);
    h_f / (2.0 * s.rho * d_h) * g * g * fi * f_h(coeffs, s.t_w, s.t_b)
}

/// Sampling ranges of the environment variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrictionRanges {
    /// Mass flux, kg/m^2/s.
    pub g_i: (f64, f64),
    /// Wall heat flux of heated tests, W/m^2.
    pub phi_w: (f64, f64),
    /// Inlet liquid enthalpy, kJ/kg.
    pub h_i_l: (f64, f64),
    /// Outlet pressure, bar.
    pub p_o: (f64, f64),
}

impl Default for FrictionRanges {
    fn default() -> Self {
        FrictionRanges {
            g_i: (1000.0, 5000.0),
            phi_w: (2e5, 1.5e6),
            h_i_l: (800.0, 1300.0),
            p_o: (100.0, 160.0),
        }
    }
}

impl FrictionRanges {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("G_i", self.g_i),
            ("phi_w", self.phi_w),
            ("h_i_l", self.h_i_l),
            ("P_o", self.p_o),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate range for {name}: [{lo}, {hi}]"
                )));
            }
        }
        if self.g_i.0 <= 0.0 || self.phi_w.0 <= 0.0 || self.h_i_l.0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "G_i, phi_w and h_i_l ranges must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrictionConfig {
    pub seed: u64,
    pub n_iso: usize,
    pub n_heated: usize,
    /// Parameters of the synthetic truth.
    pub beta_true: [f64; 2],
    /// Peak size of the injected model error, Pa.
    pub discrepancy_amplitude: f64,
    pub noise_sd: f64,
    pub ranges: FrictionRanges,
    pub coefficients: FixedCoefficients,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        FrictionConfig {
            seed: 0,
            n_iso: 60,
            n_heated: 60,
            beta_true: [0.225, 0.212],
            discrepancy_amplitude: 1000.0,
            noise_sd: NOISE_SD,
            ranges: FrictionRanges::default(),
            coefficients: FixedCoefficients::default(),
        }
    }
}

/// A generated set of experiments, ready for calibration.
#[derive(Clone, Debug)]
pub struct FrictionData {
    /// `n x 6` conditions, isothermal rows first.
    pub conditions: DMatrix<f64>,
    pub observed: Vec<f64>,
    /// Noise-free truth, model term plus injected discrepancy.
    pub truth: Vec<f64>,
    pub discrepancy: Vec<f64>,
    /// `n x 2` derivatives with respect to `(a_t, b_t)` at the nominal parameters.
    pub h: DMatrix<f64>,
    pub nominal: Vec<f64>,
    pub config: FrictionConfig,
}

/// Smooth low-frequency model error in the normalized mass flux `u` and heat flux `v`.
fn discrepancy(u: f64, v: f64, amplitude: f64) -> f64 {
    use std::f64::consts::PI;
    amplitude * ((1.6 * PI * u).sin() * (1.0 - 0.6 * v) - 0.5 * (PI * v).cos() * u)
}

/// Draws a synthetic database: `n_iso` isothermal and `n_heated` heated experiments spread over
/// the campaigns, each campaign holding `(H_f, D_h)` constant.
pub fn generate(config: &FrictionConfig) -> Result<FrictionData> {
    let n = config.n_iso + config.n_heated;
    if n < 30 {
        return Err(Error::InvalidArgument(format!(
            "n_iso + n_heated must be at least 30, got {n}"
        )));
    }
    if !(config.noise_sd >= 0.0 && config.noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd must be finite and non-negative, got {}",
            config.noise_sd
        )));
    }
    let ranges = &config.ranges;
    ranges.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let mut conditions = DMatrix::zeros(n, 6);
    for i in 0..n {
        let heated = i >= config.n_iso;
        let within = if heated { i - config.n_iso } else { i };
        let (h_f, d_h) = CAMPAIGNS[within % CAMPAIGNS.len()];
        let g = uniform(ranges.g_i);
        let phi = if heated { uniform(ranges.phi_w) } else { 0.0 };
        let h_i_l = uniform(ranges.h_i_l);
        let p_o = uniform(ranges.p_o);
        for (j, v) in [g, phi, h_i_l, p_o, h_f, d_h].into_iter().enumerate() {
            conditions[(i, j)] = v;
        }
    }

    let coeffs = config.coefficients.clone();
    let noise = Normal::new(0.0, config.noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut truth = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = conditions.row(i).iter().copied().collect();
        let u = (x[0] - ranges.g_i.0) / (ranges.g_i.1 - ranges.g_i.0);
        let v = x[1] / ranges.phi_w.1;
        let d = discrepancy(u, v, config.discrepancy_amplitude);
        let t = pressure_drop(&x, &config.beta_true, &coeffs) + d;
        delta.push(d);
        truth.push(t);
        observed.push(t + noise.sample(&mut rng));
    }

    let design = Design::new(conditions.clone())?;
    let lm = linearize(&design, &coeffs)?;
    Ok(FrictionData {
        conditions,
        observed,
        truth,
        discrepancy: delta,
        h: lm.h().clone(),
        nominal: lm.f_nom().iter().copied().collect(),
        config: config.clone(),
    })
}

/// Gaussian prior on `(a_t, b_t)` centred on the nominal values.
pub fn nominal_prior() -> Prior {
    Prior::diagonal(
        NOMINAL_BETA.to_vec(),
        PRIOR_SD.iter().map(|s| s * s).collect(),
    )
    .expect("nominal prior is positive definite")
}

/// Forward-difference linearization of [`pressure_drop`] in `(a_t, b_t)` around the nominal
/// values, with steps of one hundredth of the prior standard deviations.
pub fn linearize(design: &Design, coeffs: &FixedCoefficients) -> Result<LinearModel> {
    let prior = nominal_prior();
    let steps = default_fd_steps(&NOMINAL_BETA, Some(&prior));
    let coeffs = coeffs.clone();
    finite_difference_jacobian(
        move |x, b| pressure_drop(x, b, &coeffs),
        design,
        &NOMINAL_BETA,
        &steps,
    )
}

impl FrictionData {
    pub fn n(&self) -> usize {
        self.observed.len()
    }

    /// Design with labelled columns, normalized by the data range.
    pub fn design(&self) -> Result<Design> {
        Design::new(self.conditions.clone())?
            .with_labels(CONDITION_COLUMNS.iter().map(|s| s.to_string()).collect())
    }

    /// The inputs of a calibration run: linearized model, prior and measurement noise.
    pub fn cv_inputs(&self) -> Result<crate::crossval::CvInputs> {
        let design = self.design()?;
        let linmodel = linearize(&design, &self.config.coefficients)?;
        Ok(crate::crossval::CvInputs {
            design,
            obs: Observations::new(self.observed.clone())?,
            linmodel,
            noise: NoiseSpec::homoscedastic(self.config.noise_sd)?,
            prior: Some(nominal_prior()),
        })
    }

    pub fn nominal_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.nominal)
    }
}
