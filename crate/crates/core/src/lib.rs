//! Best-subset variable selection for Gaussian, logistic and Poisson
//! regression, with exhaustive, stepwise, genetic-algorithm and LASSO
//! search strategies, plus simulation and scoring utilities for comparing
//! them.

pub mod criteria;
pub mod error;
pub mod lasso;
mod linalg;
pub mod methods;
pub mod metrics;
pub mod model;
pub mod search;
pub mod simgen;

pub use criteria::Criterion;
pub use error::{Error, Result};
pub use lasso::{cv_select, lasso_path, lasso_select_ic, CvResult, IcScoring, LassoOptions, LassoPath};
pub use methods::{select_model, MethodName, MethodSettings, Selection};
pub use metrics::{aggregate, replicate_metrics, MetricsSummary, ReplicateMetrics};
pub use model::{fit_glm, fit_lm, loglik, Dataset, Family, FittedModel, ModelFitter, ModelSpec};
pub use search::{
    exhaustive_search, ga_search, stepwise_search, GaConfig, SearchResult, StepwiseDirection,
};
pub use simgen::{simulate, SimData, SimSetting, Study};
