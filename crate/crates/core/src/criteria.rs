//! Information criteria and the model ranking used by every search.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FittedModel, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "BIC")]
    Bic,
}

impl Criterion {
    /// Per-parameter penalty weight: `2` or `ln n`.
    pub fn penalty(self, n: usize) -> f64 {
        self.penalty_at(n as f64)
    }

    /// [`Criterion::penalty`] for a real-valued sample size.
    pub fn penalty_at(self, n: f64) -> f64 {
        match self {
            Criterion::Aic => 2.0,
            Criterion::Bic => n.ln(),
        }
    }

    /// `-2 loglik + penalty * k`.
    pub fn score(self, loglik: f64, k: usize, n: usize) -> Result<f64> {
        self.score_at(loglik, k, n as f64)
    }

    pub fn score_at(self, loglik: f64, k: usize, n: f64) -> Result<f64> {
        if !loglik.is_finite() {
            return Err(Error::NonFiniteLoglik);
        }
        Ok(-2.0 * loglik + self.penalty_at(n) * k as f64)
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AIC" => Ok(Criterion::Aic),
            "BIC" => Ok(Criterion::Bic),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

pub fn evaluate(criterion: Criterion, fit: &FittedModel, n: usize) -> Result<f64> {
    criterion.score(fit.loglik, fit.k, n)
}

/// Total order over scored models: lower score first, then fewer
/// regressors, then the lexicographically smaller index set.
pub fn compare_scored(a: (f64, &ModelSpec), b: (f64, &ModelSpec)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(b.1))
}

/// Index of the best entry under [`compare_scored`].
pub fn argmin<'a, I>(scored: I) -> Option<usize>
where
    I: IntoIterator<Item = (f64, &'a ModelSpec)>,
{
    let mut best: Option<(usize, f64, &ModelSpec)> = None;
    for (i, (score, spec)) in scored.into_iter().enumerate() {
        match best {
            Some((_, s, sp)) if compare_scored((score, spec), (s, sp)) != Ordering::Less => {}
            _ => best = Some((i, score, spec)),
        }
    }
    best.map(|(i, _, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn formula_values() {
        assert_relative_eq!(Criterion::Aic.score(-10.0, 3, 100).unwrap(), 26.0);
        assert_relative_eq!(
            Criterion::Bic.score(-10.0, 3, 100).unwrap(),
            20.0 + 3.0 * 100f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(Criterion::Bic.score(-10.0, 3, 100).unwrap(), 33.8155, epsilon = 1e-4);
    }

    #[test]
    fn non_finite_loglik_is_an_error() {
        assert_eq!(
            Criterion::Aic.score(f64::NEG_INFINITY, 2, 10),
            Err(Error::NonFiniteLoglik)
        );
        assert_eq!(Criterion::Bic.score(f64::NAN, 2, 10), Err(Error::NonFiniteLoglik));
    }

    #[test]
    fn ties_prefer_smaller_then_lexicographic() {
        let big = ModelSpec::from_indices(3, [0, 1]);
        let a = ModelSpec::from_indices(3, [1]);
        let b = ModelSpec::from_indices(3, [0]);
        let scored = [(1.0, &big), (1.0, &a), (1.0, &b), (2.0, &b)];
        assert_eq!(argmin(scored), Some(2));
        assert_eq!(argmin(std::iter::empty()), None);
    }

    #[test]
    fn parses_names() {
        assert_eq!("bic".parse::<Criterion>().unwrap(), Criterion::Bic);
        assert!("dic".parse::<Criterion>().is_err());
    }
}
