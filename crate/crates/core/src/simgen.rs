//! Synthetic datasets for the simulation studies: equicorrelated and AR(1)
//! Gaussian designs with Gaussian, Bernoulli or Poisson responses.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logistic, Dataset, Family, ModelSpec};

/// Poisson linear predictors are clamped to this value before sampling.
pub const POISSON_ETA_CAP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Study {
    /// `p = 6`, equicorrelated design, truth `{x1, x2, x3}`.
    #[serde(rename = "S1_equicorr")]
    S1Equicorr,
    /// `p = 50`, AR(1) design, truth = odd-numbered regressors.
    #[serde(rename = "S2_ar1")]
    S2Ar1,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::S1Equicorr => "S1_equicorr",
            Study::S2Ar1 => "S2_ar1",
        }
    }

    pub fn default_p(self) -> usize {
        match self {
            Study::S1Equicorr => 6,
            Study::S2Ar1 => 50,
        }
    }

    pub fn default_support(self, p: usize) -> ModelSpec {
        match self {
            Study::S1Equicorr => ModelSpec::from_indices(p, (0..p.min(3)).collect::<Vec<_>>()),
            // x1, x3, x5, ... are zero-based indices 0, 2, 4, ...
            Study::S2Ar1 => ModelSpec::from_indices(p, (0..p).step_by(2)),
        }
    }

    /// Effect per true regressor. GLM designs with many regressors use a
    /// smaller value to keep linear predictors in a realistic range.
    pub fn default_beta_value(self, family: Family) -> f64 {
        match (self, family) {
            (_, Family::Gaussian) | (Study::S1Equicorr, _) => 1.0,
            (Study::S2Ar1, _) => 0.3,
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1_equicorr" | "S1" => Ok(Study::S1Equicorr),
            "S2_ar1" | "S2" => Ok(Study::S2Ar1),
            other => Err(Error::InvalidConfig(format!("unknown study `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSetting {
    pub study: Study,
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Error variance; ignored for GLM families.
    pub sigma2: f64,
    pub true_support: ModelSpec,
    pub beta_value: f64,
    pub beta0: f64,
    pub seed: u64,
}

impl SimSetting {
    /// A setting with the study's default `p`, support and effect size.
    pub fn new(study: Study, family: Family, n: usize, rho: f64, sigma2: f64, seed: u64) -> Self {
        let p = study.default_p();
        Self {
            study,
            family,
            n,
            p,
            rho,
            sigma2,
            true_support: study.default_support(p),
            beta_value: study.default_beta_value(family),
            beta0: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.family == Family::Gaussian && !(self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if self.true_support.width() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "true support has width {} but p = {}",
                self.true_support.width(),
                self.p
            )));
        }
        Ok(())
    }

    /// Cohen's f for the Gaussian design, `1 / sigma`.
    pub fn cohens_f(&self) -> Option<f64> {
        (self.family == Family::Gaussian).then(|| 1.0 / self.sigma2.sqrt())
    }

    pub fn coefficients(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| if self.true_support.contains(j) { self.beta_value } else { 0.0 })
            .collect()
    }
}

/// Rows i.i.d. `N(0, (1 - rho) I + rho J)`, drawn through its Cholesky factor.
pub fn gen_design_equicorr<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rho: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig(format!("equicorrelation {rho} is not positive definite")))?;
    let l = chol.l();
    let mut x = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let row = &l * &z;
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    Ok(x)
}

/// Per row, `x1 ~ N(0, 1 / (1 - rho^2))` and `x_k = rho x_{k-1} + eta_k`.
pub fn gen_design_ar1<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rho: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    let sd0 = 1.0 / (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = if j == 0 { sd0 * e } else { rho * prev + e };
            x[(i, j)] = prev;
        }
    }
    Ok(x)
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("rho must lie in [0, 1), got {rho}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub y: DVector<f64>,
    /// Poisson observations whose linear predictor hit [`POISSON_ETA_CAP`].
    pub clamp_events: usize,
}

pub fn gen_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    setting: &SimSetting,
    rng: &mut R,
) -> Result<Response> {
    if x.ncols() != setting.p || x.nrows() != setting.n {
        return Err(Error::DimensionMismatch(format!(
            "design is {}x{} but setting expects {}x{}",
            x.nrows(),
            x.ncols(),
            setting.n,
            setting.p
        )));
    }
    let beta = DVector::from_vec(setting.coefficients());
    let eta = (x * beta).add_scalar(setting.beta0);
    let mut clamp_events = 0;
    let y = match setting.family {
        Family::Gaussian => {
            let sd = setting.sigma2.sqrt();
            eta.map(|e| e + sd * rng.sample::<f64, _>(StandardNormal))
        }
        Family::Bernoulli => eta.map(|e| if rng.random_bool(logistic(e)) { 1.0 } else { 0.0 }),
        Family::Poisson => eta.map(|e| {
            let capped = if e > POISSON_ETA_CAP {
                clamp_events += 1;
                POISSON_ETA_CAP
            } else {
                e
            };
            let lambda = capped.exp();
            Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(0.0)
        }),
    };
    if clamp_events > 0 {
        log::info!("{clamp_events} Poisson linear predictors clamped at {POISSON_ETA_CAP}");
    }
    Ok(Response { y, clamp_events })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub dataset: Dataset,
    pub setting: SimSetting,
    pub cohens_f: Option<f64>,
    pub clamp_events: usize,
}

/// Generates one dataset; identical settings give bit-identical data.
pub fn simulate(setting: &SimSetting) -> Result<SimData> {
    setting.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setting.seed);
    let x = match setting.study {
        Study::S1Equicorr => gen_design_equicorr(setting.n, setting.p, setting.rho, &mut rng)?,
        Study::S2Ar1 => gen_design_ar1(setting.n, setting.p, setting.rho, &mut rng)?,
    };
    let response = gen_response(&x, setting, &mut rng)?;
    Ok(SimData {
        dataset: Dataset::new(response.y, x, setting.family)?,
        setting: setting.clone(),
        cohens_f: setting.cohens_f(),
        clamp_events: response.clamp_events,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive mix of seed components.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |h, &x| splitmix64(h ^ splitmix64(x)))
}

/// Seed of one replicate; depends only on its coordinates, never on
/// scheduling order.
pub fn replicate_seed(base_seed: u64, cell_key: u64, replicate: u64) -> u64 {
    mix_seed(&[base_seed, cell_key, replicate])
}

/// CSV with header `y,x1,...,xp`.
pub fn write_csv<W: Write>(data: &Dataset, mut out: W) -> io::Result<()> {
    let mut header = String::from("y");
    for j in 0..data.p() {
        header.push_str(&format!(",x{}", j + 1));
    }
    writeln!(out, "{header}")?;
    for i in 0..data.n() {
        write!(out, "{}", data.y()[i])?;
        for j in 0..data.p() {
            write!(out, ",{}", data.x()[(i, j)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
