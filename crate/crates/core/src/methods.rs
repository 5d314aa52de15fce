//! The nine named selection procedures behind one entry point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::lasso::{cv_select, lasso_path_with, lasso_select_ic_with, IcScoring, LassoOptions};
use crate::model::{Dataset, ModelSpec};
use crate::search::{exhaustive_search, ga_search, stepwise_search, GaConfig};
use crate::simgen::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodName {
    #[serde(rename = "BIC")]
    Bic,
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "GA_BIC")]
    GaBic,
    #[serde(rename = "GA_AIC")]
    GaAic,
    #[serde(rename = "LASSO_BIC")]
    LassoBic,
    #[serde(rename = "LASSO_AIC")]
    LassoAic,
    #[serde(rename = "LASSO_CV")]
    LassoCv,
    #[serde(rename = "Stepwise_BIC")]
    StepwiseBic,
    #[serde(rename = "Stepwise_AIC")]
    StepwiseAic,
}

impl MethodName {
    pub const ALL: [MethodName; 9] = [
        MethodName::Bic,
        MethodName::Aic,
        MethodName::GaBic,
        MethodName::GaAic,
        MethodName::LassoBic,
        MethodName::LassoAic,
        MethodName::LassoCv,
        MethodName::StepwiseBic,
        MethodName::StepwiseAic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodName::Bic => "BIC",
            MethodName::Aic => "AIC",
            MethodName::GaBic => "GA_BIC",
            MethodName::GaAic => "GA_AIC",
            MethodName::LassoBic => "LASSO_BIC",
            MethodName::LassoAic => "LASSO_AIC",
            MethodName::LassoCv => "LASSO_CV",
            MethodName::StepwiseBic => "Stepwise_BIC",
            MethodName::StepwiseAic => "Stepwise_AIC",
        }
    }

    /// Criterion used for scoring; `None` for cross-validation.
    pub fn criterion(self) -> Option<Criterion> {
        match self {
            MethodName::Bic | MethodName::GaBic | MethodName::LassoBic | MethodName::StepwiseBic => {
                Some(Criterion::Bic)
            }
            MethodName::Aic | MethodName::GaAic | MethodName::LassoAic | MethodName::StepwiseAic => {
                Some(Criterion::Aic)
            }
            MethodName::LassoCv => None,
        }
    }

    /// Enumerates all `2^p` models.
    pub fn is_exhaustive(self) -> bool {
        matches!(self, MethodName::Bic | MethodName::Aic)
    }

    /// Stable small id used when deriving per-method seeds.
    pub fn id(self) -> u64 {
        Self::ALL.iter().position(|&m| m == self).unwrap() as u64
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Tuning shared by the methods.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodSettings {
    pub ga: GaConfig,
    pub lasso: LassoOptions,
    pub n_folds: Option<usize>,
    pub ic_scoring: IcScoring,
}

impl MethodSettings {
    pub const DEFAULT_FOLDS: usize = 10;

    pub fn n_folds(&self) -> usize {
        self.n_folds.unwrap_or(Self::DEFAULT_FOLDS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub method: MethodName,
    pub selected: ModelSpec,
    /// Criterion value of the selected model; `None` for cross-validation.
    pub score: Option<f64>,
    pub n_models_evaluated: usize,
}

/// Runs `method` on `data`. Randomised methods draw from `seed` only.
pub fn select_model(
    data: &Dataset,
    method: MethodName,
    settings: &MethodSettings,
    seed: u64,
) -> Result<Selection> {
    let scored = |r: crate::search::SearchResult| Selection {
        method,
        selected: r.best.spec,
        score: Some(r.best_score),
        n_models_evaluated: r.n_models_evaluated,
    };
    match method {
        MethodName::Bic | MethodName::Aic => {
            exhaustive_search(data, method.criterion().unwrap()).map(scored)
        }
        MethodName::StepwiseBic | MethodName::StepwiseAic => {
            let start = ModelSpec::empty(data.p());
            stepwise_search(data, method.criterion().unwrap(), &start).map(scored)
        }
        MethodName::GaBic | MethodName::GaAic => {
            let config = GaConfig {
                seed: mix_seed(&[seed, settings.ga.seed]),
                ..settings.ga.clone()
            };
            ga_search(data, method.criterion().unwrap(), &config).map(scored)
        }
        MethodName::LassoBic | MethodName::LassoAic => {
            let path = lasso_path_with(data, &settings.lasso)?;
            let criterion = method.criterion().unwrap();
            lasso_select_ic_with(data, &path, criterion, settings.ic_scoring).map(scored)
        }
        MethodName::LassoCv => {
            let path = lasso_path_with(data, &settings.lasso)?;
            let cv = cv_select(data, &path, settings.n_folds(), seed)?;
            Ok(Selection {
                method,
                selected: cv.selected,
                score: None,
                n_models_evaluated: path.distinct_supports().len(),
            })
        }
    }
}
