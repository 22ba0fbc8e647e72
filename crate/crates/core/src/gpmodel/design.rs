use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Affine range of one input dimension, mapped onto `[0, 1]` before kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Experimental conditions `x^(1) .. x^(n)` with the per-dimension normalization metadata.
///
/// Dimensions on which every design point takes the same value carry no information for the
/// model-error kernel and are excluded from it; `active_dims` lists the ones kept.
#[derive(Clone, Debug)]
pub struct Design {
    points: DMatrix<f64>,
    bounds: Vec<Bounds>,
    labels: Option<Vec<String>>,
    active: Vec<usize>,
    normalized: DMatrix<f64>,
}

impl Design {
    /// Builds a design from an `n x d` matrix of raw conditions, normalizing by the data range.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        let bounds = data_bounds(&points)?;
        Self::with_bounds(points, bounds)
    }

    /// Builds a design with explicit normalization bounds per dimension.
    pub fn with_bounds(points: DMatrix<f64>, bounds: Vec<Bounds>) -> Result<Self> {
        let (n, d) = points.shape();
        if n == 0 {
            return Err(Error::Data("empty design".into()));
        }
        if d == 0 {
            return Err(Error::Data("design has no input dimension".into()));
        }
        check_dim("design bounds", d, bounds.len())?;
        if let Some((i, j)) = first_non_finite(&points) {
            return Err(Error::Data(format!(
                "non-finite condition at point {i}, dimension {j}"
            )));
        }
        for (j, b) in bounds.iter().enumerate() {
            if !(b.min.is_finite() && b.max.is_finite()) || b.max < b.min {
                return Err(Error::InvalidArgument(format!(
                    "bounds of dimension {j} are invalid: [{}, {}]",
                    b.min, b.max
                )));
            }
        }
        let active: Vec<usize> = (0..d)
            .filter(|&j| {
                let col = points.column(j);
                let first = col[0];
                col.iter().any(|&v| v != first) && bounds[j].span() > 0.0
            })
            .collect();
        Ok(Self::from_parts(points, bounds, None, active))
    }

    fn from_parts(
        points: DMatrix<f64>,
        bounds: Vec<Bounds>,
        labels: Option<Vec<String>>,
        active: Vec<usize>,
    ) -> Self {
        let n = points.nrows();
        let normalized = DMatrix::from_fn(n, active.len(), |i, k| {
            let j = active[k];
            (points[(i, j)] - bounds[j].min) / bounds[j].span()
        });
        let design = Design {
            points,
            bounds,
            labels,
            active,
            normalized,
        };
        for j in 0..design.dim() {
            if !design.active.contains(&j) {
                warn!(
                    "input dimension {} is constant over the design and is dropped from the kernel",
                    design.label(j)
                );
            }
        }
        design
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        check_dim("design labels", self.dim(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    /// Raw input dimension `d`.
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Number of dimensions seen by the kernel.
    pub fn kernel_dim(&self) -> usize {
        self.active.len()
    }

    pub fn active_dims(&self) -> &[usize] {
        &self.active
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, j: usize) -> String {
        match &self.labels {
            Some(l) => l[j].clone(),
            None => format!("x{j}"),
        }
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// `n x kernel_dim` matrix of normalized active coordinates.
    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    pub fn normalized_point(&self, i: usize) -> Vec<f64> {
        self.normalized.row(i).iter().copied().collect()
    }

    /// Maps a raw point into the kernel's normalized coordinates.
    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("point", self.dim(), x.len())?;
        Ok(self
            .active
            .iter()
            .map(|&j| (x[j] - self.bounds[j].min) / self.bounds[j].span())
            .collect())
    }

    /// Restriction to a subset of rows. Normalization and the active-dimension set are
    /// inherited unchanged so that kernel hyper-parameters stay comparable.
    pub fn subset(&self, rows: &[usize]) -> Design {
        let d = self.dim();
        let points = DMatrix::from_fn(rows.len(), d, |i, j| self.points[(rows[i], j)]);
        let normalized = DMatrix::from_fn(rows.len(), self.kernel_dim(), |i, k| {
            self.normalized[(rows[i], k)]
        });
        Design {
            points,
            bounds: self.bounds.clone(),
            labels: self.labels.clone(),
            active: self.active.clone(),
            normalized,
        }
    }
}

fn data_bounds(points: &DMatrix<f64>) -> Result<Vec<Bounds>> {
    if let Some((i, j)) = first_non_finite(points) {
        return Err(Error::Data(format!(
            "non-finite condition at point {i}, dimension {j}"
        )));
    }
    Ok(points
        .column_iter()
        .map(|c| Bounds {
            min: c.iter().cloned().fold(f64::INFINITY, f64::min),
            max: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect())
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}
