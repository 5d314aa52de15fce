use nalgebra::DVector;

use super::{loglik_at, Dataset, Family, FittedModel, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Fitted Bernoulli probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`
/// inside the likelihood.
pub(crate) const PROB_CLAMP: f64 = 1e-10;

const WEIGHT_FLOOR: f64 = 1e-12;

/// Max-norm of the log-likelihood gradient required on top of the deviance test.
const SCORE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    /// Convergence on `|dev - dev_old| / (|dev| + 0.1)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Any `|eta|` above this is reported as separation.
    pub eta_limit: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            max_halvings: 10,
            eta_limit: 30.0,
        }
    }
}

/// Maximum-likelihood fit of a Bernoulli or Poisson model by IRLS.
pub fn fit_glm(data: &Dataset, spec: &ModelSpec) -> Result<FittedModel> {
    fit_glm_with(data, spec, &IrlsOptions::default())
}

pub fn fit_glm_with(data: &Dataset, spec: &ModelSpec, opts: &IrlsOptions) -> Result<FittedModel> {
    let family = data.family();
    if family == Family::Gaussian {
        return Err(Error::WrongFamily {
            expected: "bernoulli or poisson",
        });
    }
    data.check_spec(spec)?;
    let a = data.design(spec);
    let y = data.y();
    let n = data.n();

    let mean = y.mean();
    let start = match family {
        Family::Bernoulli => {
            let m = mean.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            (m / (1.0 - m)).ln()
        }
        _ => mean.max(PROB_CLAMP).ln(),
    };
    let mut beta = DVector::zeros(a.ncols());
    beta[0] = start;
    let mut eta = &a * &beta;
    let mut dev = deviance(family, y, &eta);

    let mut converged = false;
    let mut separated = false;
    for _ in 0..opts.max_iterations {
        let mu = eta.map(|e| family.inverse_link(e));
        let w = mu.map(|m| variance(family, m).max(WEIGHT_FLOOR));
        let sw = w.map(f64::sqrt);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / w[i]);
        let mut wa = a.clone();
        for (i, mut row) in wa.row_iter_mut().enumerate() {
            row *= sw[i];
        }
        let wz = z.component_mul(&sw);
        let mut next = least_squares(wa, &wz, None)?.coef;
        let mut next_eta = &a * &next;
        let mut next_dev = deviance(family, y, &next_eta);

        let mut halvings = 0;
        while !(next_dev <= dev + 1e-12 * dev.abs()) && halvings < opts.max_halvings {
            next = (&beta + &next) * 0.5;
            next_eta = &a * &next;
            next_dev = deviance(family, y, &next_eta);
            halvings += 1;
        }

        let change = (next_dev - dev).abs() / (next_dev.abs() + 0.1);
        beta = next;
        eta = next_eta;
        dev = next_dev;

        if eta.iter().any(|e| e.abs() > opts.eta_limit) {
            separated = true;
            break;
        }
        // A stalled deviance cannot improve further, so it also counts as converged.
        if change < opts.tolerance && (change == 0.0 || score_norm(family, &a, y, &eta) <= SCORE_TOL) {
            converged = true;
            break;
        }
    }
    if separated {
        log::warn!(
            "IRLS for {spec} stopped: |linear predictor| exceeded {} (separation or divergence)",
            opts.eta_limit
        );
    } else if !converged {
        return Err(Error::NotConverged {
            iterations: opts.max_iterations,
        });
    }

    let loglik = loglik_at(family, y, eta.iter().copied());
    Ok(FittedModel {
        spec: spec.clone(),
        beta0: beta[0],
        beta: beta.iter().skip(1).copied().collect(),
        loglik,
        k: spec.len() + 1,
        converged,
        sigma2_hat: None,
    })
}

fn score_norm(family: Family, a: &nalgebra::DMatrix<f64>, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let resid = DVector::from_fn(y.len(), |i, _| y[i] - family.inverse_link(eta[i]));
    a.tr_mul(&resid).amax()
}

fn variance(family: Family, mu: f64) -> f64 {
    match family {
        Family::Bernoulli => mu * (1.0 - mu),
        Family::Poisson => mu,
        Family::Gaussian => 1.0,
    }
}

/// Unit deviance summed over observations.
pub(crate) fn deviance(family: Family, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| unit_deviance(family, yi, family.inverse_link(e)))
        .sum()
}

pub(crate) fn unit_deviance(family: Family, y: f64, mu: f64) -> f64 {
    match family {
        Family::Gaussian => (y - mu).powi(2),
        Family::Bernoulli => {
            let p = mu.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
        Family::Poisson => {
            let ylogy = if y > 0.0 { y * (y / mu).ln() } else { 0.0 };
            2.0 * (ylogy - (y - mu))
        }
    }
}

/// `X' (y - mu)` including the intercept, used to verify stationarity.
#[cfg(test)]
pub(crate) fn score(data: &Dataset, fit: &FittedModel) -> DVector<f64> {
    let a: nalgebra::DMatrix<f64> = data.design(&fit.spec);
    let coef = DVector::from_iterator(
        fit.beta.len() + 1,
        std::iter::once(fit.beta0).chain(fit.beta.iter().copied()),
    );
    let eta = &a * coef;
    let resid = DVector::from_fn(data.n(), |i, _| data.y()[i] - data.family().inverse_link(eta[i]));
    a.transpose() * resid
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dataset(y: Vec<f64>, x: Vec<f64>, family: Family) -> Dataset {
        let rows: Vec<Vec<f64>> = x.into_iter().map(|v| vec![v]).collect();
        Dataset::from_rows(y, &rows, family).unwrap()
    }

    #[test]
    fn bernoulli_null_fit_is_logit_of_mean() {
        let d = dataset(vec![1.0, 1.0, 0.0, 1.0], vec![0.1, 0.2, 0.3, 0.4], Family::Bernoulli);
        let fit = fit_glm(&d, &ModelSpec::empty(1)).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.beta0, 3.0f64.ln(), epsilon = 1e-8);
        assert_eq!(fit.k, 1);
    }

    #[test]
    fn poisson_null_fit_is_log_of_mean() {
        let d = dataset(vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3], Family::Poisson);
        let fit = fit_glm(&d, &ModelSpec::empty(1)).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.beta0, 2.0f64.ln(), epsilon = 1e-8);
        let expected: f64 = [1.0, 2.0, 3.0]
            .iter()
            .map(|&y: &f64| y * 2.0f64.ln() - 2.0 - libm::lgamma(y + 1.0))
            .sum();
        assert_relative_eq!(fit.loglik, expected, epsilon = 1e-10);
    }

    #[test]
    fn separation_is_flagged() {
        let d = dataset(
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            Family::Bernoulli,
        );
        let fit = fit_glm(&d, &ModelSpec::full(1)).unwrap();
        assert!(!fit.converged);
        assert!(fit.beta[0] > 0.0);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let d = dataset(
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            Family::Bernoulli,
        );
        let opts = IrlsOptions {
            max_iterations: 1,
            tolerance: 0.0,
            ..IrlsOptions::default()
        };
        assert!(matches!(
            fit_glm_with(&d, &ModelSpec::full(1), &opts),
            Err(Error::NotConverged { iterations: 1 })
        ));
    }

    #[test]
    fn score_vanishes_at_poisson_optimum() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| ((1.0 + 0.8 * v).exp() + (i % 3) as f64 - 1.0).round().max(0.0))
            .collect();
        let d = dataset(y, x, Family::Poisson);
        let fit = fit_glm(&d, &ModelSpec::full(1)).unwrap();
        assert!(fit.converged);
        assert!(score(&d, &fit).amax() < 1e-6);
    }

    #[test]
    fn gaussian_is_rejected() {
        let d = dataset(vec![0.0, 1.0], vec![0.1, 0.2], Family::Gaussian);
        assert!(fit_glm(&d, &ModelSpec::empty(1)).is_err());
    }
}
