use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Design, Prior};
use crate::error::{check_dim, Error, Result};

/// Derivative row `h(x)` of the linearized computer model, evaluated at a raw point.
pub type BasisFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A computer model `f(x, beta)`.
pub type ModelRunner = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Basis {
    Function(BasisFn),
    FiniteDifference {
        runner: ModelRunner,
        steps: Vec<f64>,
    },
    Tabulated,
}

/// Nominal point of a linearization: `beta_nom` and the model outputs `f(x_i, beta_nom)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalShift {
    pub beta_nom: DVector<f64>,
    pub f_nom: DVector<f64>,
}

/// Linear approximation `f(x, beta) = f(x, beta_nom) + h(x)^t (beta - beta_nom)` of a computer
/// model, with the derivative matrix `H` cached over the design.
///
/// Models built without a nominal shift have `beta_nom = 0` and `f(x, beta_nom) = 0`.
#[derive(Clone)]
pub struct LinearModel {
    h: DMatrix<f64>,
    basis: Basis,
    shift: Option<NominalShift>,
}

impl fmt::Debug for LinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.basis {
            Basis::Function(_) => "function",
            Basis::FiniteDifference { .. } => "finite-difference",
            Basis::Tabulated => "tabulated",
        };
        f.debug_struct("LinearModel")
            .field("basis", &kind)
            .field("h", &self.h)
            .field("shift", &self.shift)
            .finish()
    }
}

impl LinearModel {
    /// Evaluates `basis` at every design point to build `H`.
    pub fn from_basis<F>(design: &Design, m: usize, basis: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let basis: BasisFn = Arc::new(basis);
        let mut h = DMatrix::zeros(design.n(), m);
        for i in 0..design.n() {
            let row = basis(&design.point(i));
            check_dim("basis row", m, row.len())?;
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteModelOutput {
                        point: i,
                        param: Some(j),
                    });
                }
                h[(i, j)] = v;
            }
        }
        Ok(LinearModel {
            h,
            basis: Basis::Function(basis),
            shift: None,
        })
    }

    /// The polynomial trend `(1, x_1, .., x_d)` in raw coordinates.
    pub fn affine(design: &Design) -> Result<Self> {
        Self::from_basis(design, design.dim() + 1, |x| {
            std::iter::once(1.0).chain(x.iter().copied()).collect()
        })
    }

    /// A precomputed `H` with no evaluator; derivative rows at new points must be supplied
    /// by the caller.
    pub fn tabulated(h: DMatrix<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("H contains non-finite entries".into()));
        }
        Ok(LinearModel {
            h,
            basis: Basis::Tabulated,
            shift: None,
        })
    }

    /// Attaches a nominal shift to a model.
    pub fn with_shift(mut self, shift: NominalShift) -> Result<Self> {
        check_dim("nominal outputs", self.h.nrows(), shift.f_nom.len())?;
        check_dim("nominal parameters", self.h.ncols(), shift.beta_nom.len())?;
        self.shift = Some(shift);
        Ok(self)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    /// Parameter count `m`.
    pub fn m(&self) -> usize {
        self.h.ncols()
    }

    pub fn shift(&self) -> Option<&NominalShift> {
        self.shift.as_ref()
    }

    pub fn beta_nom(&self) -> DVector<f64> {
        match &self.shift {
            Some(s) => s.beta_nom.clone(),
            None => DVector::zeros(self.m()),
        }
    }

    /// Nominal outputs at the design points (zero without a shift).
    pub fn f_nom(&self) -> DVector<f64> {
        match &self.shift {
            Some(s) => s.f_nom.clone(),
            None => DVector::zeros(self.n()),
        }
    }

    pub fn can_evaluate(&self) -> bool {
        !matches!(self.basis, Basis::Tabulated)
    }

    /// `h(x)` at a raw point.
    pub fn basis_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        match &self.basis {
            Basis::Function(f) => {
                let row = f(x);
                check_dim("basis row", self.m(), row.len())?;
                Ok(DVector::from_vec(row))
            }
            Basis::FiniteDifference { runner, steps } => {
                let beta_nom = self.beta_nom();
                let (_, row) = fd_row(runner, x, &beta_nom, steps)
                    .map_err(|param| Error::NonFiniteModelOutput { point: 0, param })?;
                Ok(row)
            }
            Basis::Tabulated => Err(Error::InvalidArgument(
                "linear model is tabulated; supply h(x) for new points explicitly".into(),
            )),
        }
    }

    /// `f(x, beta_nom)` at a raw point.
    pub fn nominal_at(&self, x: &[f64]) -> Result<f64> {
        match (&self.basis, &self.shift) {
            (_, None) => Ok(0.0),
            (Basis::FiniteDifference { runner, .. }, Some(s)) => {
                let v = runner(x, s.beta_nom.as_slice());
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteModelOutput {
                        point: 0,
                        param: None,
                    })
                }
            }
            (_, Some(_)) => Err(Error::InvalidArgument(
                "nominal output at new points is only available for finite-difference models"
                    .into(),
            )),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> LinearModel {
        let h = DMatrix::from_fn(rows.len(), self.m(), |i, j| self.h[(rows[i], j)]);
        let shift = self.shift.as_ref().map(|s| NominalShift {
            beta_nom: s.beta_nom.clone(),
            f_nom: DVector::from_fn(rows.len(), |i, _| s.f_nom[rows[i]]),
        });
        LinearModel {
            h,
            basis: self.basis.clone(),
            shift,
        }
    }
}

/// Default finite-difference steps: one hundredth of each prior standard deviation when a prior
/// is given, otherwise one hundredth of `|beta_nom|` floored at `1e-4`.
pub fn default_fd_steps(beta_nom: &[f64], prior: Option<&Prior>) -> Vec<f64> {
    match prior {
        Some(p) => (0..beta_nom.len())
            .map(|j| 1e-2 * p.covariance[(j, j)].sqrt())
            .collect(),
        None => beta_nom
            .iter()
            .map(|b| (1e-2 * b.abs()).max(1e-4))
            .collect(),
    }
}

/// Linearizes `runner` around `beta_nom` by one-sided forward differences.
///
/// `H[i, j] = (f(x_i, beta_nom + step_j e_j) - f(x_i, beta_nom)) / step_j`. The nominal outputs
/// `f(x_i, beta_nom)` are recorded so that observations can be moved to shifted coordinates.
pub fn finite_difference_jacobian<F>(
    runner: F,
    design: &Design,
    beta_nom: &[f64],
    steps: &[f64],
) -> Result<LinearModel>
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
{
    let m = beta_nom.len();
    check_dim("finite-difference steps", m, steps.len())?;
    if let Some(s) = steps.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference steps must be strictly positive, got {s}"
        )));
    }
    let runner: ModelRunner = Arc::new(runner);
    let beta = DVector::from_column_slice(beta_nom);
    let n = design.n();
    let mut h = DMatrix::zeros(n, m);
    let mut f_nom = DVector::zeros(n);
    for i in 0..n {
        let (nominal, row) = fd_row(&runner, &design.point(i), &beta, steps)
            .map_err(|param| Error::NonFiniteModelOutput { point: i, param })?;
        f_nom[i] = nominal;
        h.row_mut(i).copy_from(&row.transpose());
    }
    Ok(LinearModel {
        h,
        basis: Basis::FiniteDifference {
            runner,
            steps: steps.to_vec(),
        },
        shift: Some(NominalShift {
            beta_nom: beta,
            f_nom,
        }),
    })
}

fn fd_row(
    runner: &ModelRunner,
    x: &[f64],
    beta_nom: &DVector<f64>,
    steps: &[f64],
) -> std::result::Result<(f64, DVector<f64>), Option<usize>> {
    let nominal = runner(x, beta_nom.as_slice());
    if !nominal.is_finite() {
        return Err(None);
    }
    let mut row = DVector::zeros(steps.len());
    let mut shifted = beta_nom.clone();
    for (j, &step) in steps.iter().enumerate() {
        shifted[j] = beta_nom[j] + step;
        let v = runner(x, shifted.as_slice());
        shifted[j] = beta_nom[j];
        if !v.is_finite() {
            return Err(Some(j));
        }
        row[j] = (v - nominal) / step;
    }
    Ok((nominal, row))
}
