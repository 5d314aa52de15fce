//! Benchmark configuration: TOML parsing, defaults and validation.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use varsel::lasso::IcScoring;
use varsel::search::EXHAUSTIVE_MAX_P;
use varsel::{Family, GaConfig, LassoOptions, MethodName, MethodSettings, Study};

/// Invalid configuration, with the 1-based source line when known.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Worker threads; `None` uses every available core. Never affects
    /// results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Methods run in every study that does not list its own.
    #[serde(default)]
    pub methods: Vec<MethodName>,
    #[serde(default, rename = "study")]
    pub studies: Vec<StudyConfig>,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub lasso: LassoConfig,
}

fn default_replicates() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Label used in output files; defaults to the design name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub design: Study,
    #[serde(default = "default_family")]
    pub family: Family,
    pub n: Vec<usize>,
    pub rho: Vec<f64>,
    /// Error variances; only meaningful for the Gaussian family.
    #[serde(default = "default_sigma2")]
    pub sigma2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodName>>,
}

fn default_family() -> Family {
    Family::Gaussian
}

fn default_sigma2() -> Vec<f64> {
    vec![1.0]
}

impl StudyConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.design.name().to_string())
    }

    pub fn p(&self) -> usize {
        self.p.unwrap_or_else(|| self.design.default_p())
    }

    pub fn beta_value(&self) -> f64 {
        self.beta_value
            .unwrap_or_else(|| self.design.default_beta_value(self.family))
    }

    pub fn methods<'a>(&'a self, global: &'a [MethodName]) -> &'a [MethodName] {
        self.methods.as_deref().unwrap_or(global)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub n_lambda: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min_ratio: Option<f64>,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub max_outer: usize,
    pub n_folds: usize,
    pub ic_scoring: IcScoring,
}

impl Default for LassoConfig {
    fn default() -> Self {
        let o = LassoOptions::default();
        Self {
            n_lambda: o.n_lambda,
            lambda_min_ratio: o.lambda_min_ratio,
            tolerance: o.tolerance,
            max_sweeps: o.max_sweeps,
            max_outer: o.max_outer,
            n_folds: MethodSettings::DEFAULT_FOLDS,
            ic_scoring: IcScoring::default(),
        }
    }
}

impl Config {
    /// Parses and validates `src`.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(src, s.start)),
            message: e.message().to_string(),
        })?;
        config.validate_with_source(Some(src))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, src: Option<&str>) -> Result<(), ConfigError> {
        let top = |key: &str, message: String| ConfigError {
            line: src.and_then(|s| locate(s, None, key)),
            message,
        };
        if self.replicates == 0 {
            return Err(top("replicates", "replicates must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(top("workers", "workers must be at least 1".into()));
        }
        if self.studies.is_empty() {
            return Err(top("study", "at least one [[study]] table is required".into()));
        }
        self.ga
            .validate()
            .map_err(|e| top("ga", format!("invalid [ga] table: {e}")))?;
        if self.lasso.n_lambda == 0 {
            return Err(top("n_lambda", "lasso.n_lambda must be positive".into()));
        }
        if self.lasso.n_folds < 2 {
            return Err(top("n_folds", "lasso.n_folds must be at least 2".into()));
        }
        let mut labels = BTreeSet::new();
        for (i, study) in self.studies.iter().enumerate() {
            let err = |key: &str, message: String| ConfigError {
                line: src.and_then(|s| locate(s, Some(i), key).or_else(|| locate(s, Some(i), ""))),
                message: format!("study {} ({}): {message}", i + 1, study.label()),
            };
            if !labels.insert((study.label(), study.family)) {
                return Err(err(
                    "name",
                    "duplicate study label and family; give each study a distinct `name`".into(),
                ));
            }
            let methods = study.methods(&self.methods);
            if methods.is_empty() {
                return Err(err("methods", "no methods listed here or at the top level".into()));
            }
            let p = study.p();
            if p == 0 {
                return Err(err("p", "p must be positive".into()));
            }
            if p > 64 {
                return Err(err("p", format!("p = {p} exceeds the supported maximum of 64")));
            }
            if p > EXHAUSTIVE_MAX_P {
                if let Some(m) = methods.iter().find(|m| m.is_exhaustive()) {
                    return Err(err(
                        "methods",
                        format!("{m} enumerates all 2^p models and needs p <= {EXHAUSTIVE_MAX_P}, but p = {p}"),
                    ));
                }
            }
            if study.n.is_empty() || study.rho.is_empty() || study.sigma2.is_empty() {
                return Err(err("n", "n, rho and sigma2 grids must be non-empty".into()));
            }
            let min_n = if methods.contains(&MethodName::LassoCv) {
                self.lasso.n_folds.max(2)
            } else {
                2
            };
            if let Some(&n) = study.n.iter().find(|&&n| n < min_n) {
                return Err(err("n", format!("n = {n} is below the minimum of {min_n}")));
            }
            if let Some(&r) = study.rho.iter().find(|r| !(0.0..1.0).contains(*r)) {
                return Err(err("rho", format!("rho = {r} is outside [0, 1)")));
            }
            if let Some(&s) = study.sigma2.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(err("sigma2", format!("sigma2 = {s} must be positive")));
            }
            if study.beta_value.is_some_and(|b| !b.is_finite()) {
                return Err(err("beta_value", "beta_value must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn method_settings(&self) -> MethodSettings {
        MethodSettings {
            ga: self.ga.clone(),
            lasso: LassoOptions {
                n_lambda: self.lasso.n_lambda,
                lambda_min_ratio: self.lasso.lambda_min_ratio,
                tolerance: self.lasso.tolerance,
                max_sweeps: self.lasso.max_sweeps,
                max_outer: self.lasso.max_outer,
            },
            n_folds: Some(self.lasso.n_folds),
            ic_scoring: self.lasso.ic_scoring,
        }
    }

    /// The configuration as written to the manifest, with every default
    /// spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` at the top level (`table = None`) or inside the given
/// `[[study]]` table. An empty key locates the table header itself.
fn locate(src: &str, table: Option<usize>, key: &str) -> Option<usize> {
    let mut current: Option<usize> = None;
    let mut in_other_table = false;
    let mut seen = 0usize;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with("[[study]]") {
            current = Some(seen);
            seen += 1;
            in_other_table = false;
            if key.is_empty() && current == table {
                return Some(i + 1);
            }
            continue;
        }
        if line.starts_with('[') {
            current = None;
            in_other_table = true;
            if table.is_none() && line.trim_matches(|c| c == '[' || c == ']') == key {
                return Some(i + 1);
            }
            continue;
        }
        let in_scope = match table {
            Some(t) => current == Some(t),
            None => current.is_none() && !in_other_table,
        };
        if in_scope && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
replicates = 2
methods = ["BIC"]

[[study]]
design = "S1_equicorr"
n = [50]
rho = [0.0]
sigma2 = [6.25]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = Config::parse(MINIMAL).unwrap();
        assert_eq!(c.replicates, 2);
        assert_eq!(c.studies[0].family, Family::Gaussian);
        assert_eq!(c.studies[0].p(), 6);
        assert_eq!(c.ga, GaConfig::default());
        assert_eq!(c.lasso.n_folds, 10);
        let back = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn exhaustive_on_wide_design_reports_line() {
        let src = r#"replicates = 1

[[study]]
design = "S1_equicorr"
n = [50]
rho = [0.0]
methods = ["BIC"]

[[study]]
design = "S2_ar1"
n = [200]
rho = [0.0]
methods = ["GA_BIC", "AIC"]
"#;
        let e = Config::parse(src).unwrap_err();
        assert_eq!(e.line, Some(13));
        assert!(e.message.contains("AIC"), "{e}");
    }

    #[test]
    fn syntax_and_type_errors_report_lines() {
        let e = Config::parse("replicates = 2\nseed = \"x\"\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse("replicates = 2\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse(&MINIMAL.replace("rho = [0.0]", "rho = [1.5]")).unwrap_err();
        assert_eq!(e.line, Some(9));
        let e = Config::parse(&MINIMAL.replace("replicates = 2", "replicates = 0")).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn unknown_method_rejected() {
        let e = Config::parse(&MINIMAL.replace("\"BIC\"", "\"CIB\"")).unwrap_err();
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn cv_needs_enough_observations() {
        let src = MINIMAL.replace("[\"BIC\"]", "[\"LASSO_CV\"]").replace("[50]", "[5]");
        assert!(Config::parse(&src).is_err());
    }
}
