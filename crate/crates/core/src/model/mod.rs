//! Datasets, candidate models and maximum-likelihood fits.
//!
//! Every candidate model carries an unpenalised intercept. Gaussian models
//! are fitted by Householder least squares and scored with the profile
//! likelihood at `sigma2 = RSS / n`; Bernoulli (logit) and Poisson (log)
//! models are fitted by iteratively reweighted least squares.

mod fitter;
pub(crate) mod glm;
mod linear;
mod spec;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fitter::ModelFitter;
pub use glm::{fit_glm, fit_glm_with, IrlsOptions};
pub use linear::fit_lm;
pub use spec::ModelSpec;

/// Response distribution. Each family uses its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        }
    }

    /// `sigma2` is a free parameter only for the Gaussian family.
    pub fn extra_params(self) -> usize {
        match self {
            Family::Gaussian => 1,
            Family::Bernoulli | Family::Poisson => 0,
        }
    }

    pub(crate) fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Bernoulli => logistic(eta),
            Family::Poisson => eta.exp(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "bernoulli" | "binomial" | "logistic" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidConfig(format!("unknown family `{other}`"))),
        }
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// A response vector paired with an `n x p` regressor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    family: Family,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, family: Family) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyInput("dataset needs at least one observation"));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} observations but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        for (index, &value) in y.iter().enumerate() {
            let ok = match family {
                Family::Gaussian => value.is_finite(),
                Family::Bernoulli => value == 0.0 || value == 1.0,
                Family::Poisson => value >= 0.0 && value.fract() == 0.0 && value.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidResponse {
                    family: family.name(),
                    index,
                    value,
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("X contains non-finite entries".into()));
        }
        Ok(Self { y, x, family })
    }

    /// Builds a dataset from row-major regressor rows.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>], family: Family) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged regressor rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(DVector::from_vec(y), x, family)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `rows` of this dataset, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(rows.iter());
        Self {
            y,
            x,
            family: self.family,
        }
    }

    /// `[1 | X_spec]`.
    pub fn design(&self, spec: &ModelSpec) -> DMatrix<f64> {
        let cols: Vec<usize> = spec.indices().collect();
        let mut a = DMatrix::from_element(self.n(), cols.len() + 1, 1.0);
        for (c, &j) in cols.iter().enumerate() {
            a.set_column(c + 1, &self.x.column(j));
        }
        a
    }

    pub(crate) fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        if spec.width() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "model spec has width {} but dataset has p = {}",
                spec.width(),
                self.p()
            )));
        }
        Ok(())
    }

    pub(crate) fn response_variance(&self) -> f64 {
        let n = self.n() as f64;
        let mean = self.y.sum() / n;
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

/// Maximum-likelihood fit of one candidate model.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub beta0: f64,
    /// Coefficients of the included regressors, in increasing index order.
    pub beta: Vec<f64>,
    pub loglik: f64,
    /// Number of estimated parameters, including the intercept and, for the
    /// Gaussian family, the error variance.
    pub k: usize,
    pub converged: bool,
    pub sigma2_hat: Option<f64>,
}

/// Log-likelihood of `data` at the supplied coefficients. The Gaussian
/// value is profiled over `sigma2`.
pub fn loglik(data: &Dataset, spec: &ModelSpec, beta0: f64, beta: &[f64]) -> Result<f64> {
    data.check_spec(spec)?;
    if beta.len() != spec.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients supplied for a model with {} regressors",
            beta.len(),
            spec.len()
        )));
    }
    let cols: Vec<usize> = spec.indices().collect();
    let x = data.x();
    let eta = (0..data.n()).map(|i| {
        beta0
            + cols
                .iter()
                .zip(beta)
                .map(|(&j, b)| x[(i, j)] * b)
                .sum::<f64>()
    });
    Ok(loglik_at(data.family(), data.y(), eta))
}

pub(crate) fn loglik_at(family: Family, y: &DVector<f64>, eta: impl Iterator<Item = f64>) -> f64 {
    let n = y.len() as f64;
    match family {
        Family::Gaussian => {
            let rss: f64 = y.iter().zip(eta).map(|(yi, e)| (yi - e).powi(2)).sum();
            gaussian_profile_loglik(rss, n)
        }
        Family::Bernoulli => y
            .iter()
            .zip(eta)
            .map(|(&yi, e)| {
                let p = logistic(e).clamp(glm::PROB_CLAMP, 1.0 - glm::PROB_CLAMP);
                yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
            })
            .sum(),
        Family::Poisson => y
            .iter()
            .zip(eta)
            .map(|(&yi, e)| yi * e - e.exp() - libm::lgamma(yi + 1.0))
            .sum(),
    }
}

pub(crate) fn gaussian_profile_loglik(rss: f64, n: f64) -> f64 {
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (rss / n).ln() + 1.0)
}
