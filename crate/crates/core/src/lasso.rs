//! L1-penalised regression paths by cyclic coordinate descent.
//!
//! Regressors are centred and scaled to unit variance (divisor `n`) before
//! fitting; the intercept is unpenalised. The Gaussian objective is
//! `(1 / 2n) ||y - b0 - X b||^2 + lambda ||b||_1`, the GLM objective
//! `(1 / n) (negative log-likelihood) + lambda ||b||_1`. Coefficients are
//! reported on the original scale.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::model::glm::unit_deviance;
use crate::model::{loglik, logistic, Dataset, Family, ModelFitter, ModelSpec};
use crate::search::SearchResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoOptions {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of `lambda_max`. `None` picks `1e-4`
    /// when `n > p` and `1e-2` otherwise.
    pub lambda_min_ratio: Option<f64>,
    /// Convergence on the largest standardised coefficient change per sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Proximal-Newton iterations per lambda (GLM families only).
    pub max_outer: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            lambda_min_ratio: None,
            tolerance: 1e-7,
            max_sweeps: 100_000,
            max_outer: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Per lambda, one coefficient per regressor, original scale.
    pub coefs: Vec<Vec<f64>>,
    pub supports: Vec<ModelSpec>,
    /// `false` where the sweep or Newton cap was hit.
    pub converged: Vec<bool>,
    pub options: LassoOptions,
    std_coefs: Vec<Vec<f64>>,
    std_intercepts: Vec<f64>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Coefficients on the standardised scale at lambda index `i`.
    pub fn standardized_coefs(&self, i: usize) -> &[f64] {
        &self.std_coefs[i]
    }

    /// Distinct supports in path order with the index where each first occurs.
    pub fn distinct_supports(&self) -> Vec<(usize, &ModelSpec)> {
        let mut seen = std::collections::HashSet::new();
        self.supports
            .iter()
            .enumerate()
            .filter(|(_, s)| seen.insert(*s))
            .collect()
    }

    fn linear_predictor(&self, i: usize, x: &DMatrix<f64>, row: usize) -> f64 {
        self.intercepts[i]
            + self.coefs[i]
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(j, b)| x[(row, j)] * b)
                .sum::<f64>()
    }
}

pub fn lasso_path(data: &Dataset, n_lambda: usize) -> Result<LassoPath> {
    lasso_path_with(
        data,
        &LassoOptions {
            n_lambda,
            ..LassoOptions::default()
        },
    )
}

pub fn lasso_path_with(data: &Dataset, opts: &LassoOptions) -> Result<LassoPath> {
    if data.p() == 0 {
        return Err(Error::DimensionMismatch("LASSO path needs at least one regressor".into()));
    }
    if opts.n_lambda == 0 {
        return Err(Error::InvalidConfig("n_lambda must be positive".into()));
    }
    let problem = Problem::new(data);
    let ratio = opts
        .lambda_min_ratio
        .unwrap_or(if data.n() > data.p() { 1e-4 } else { 1e-2 });
    let lambdas = lambda_grid(problem.lambda_max, ratio, opts.n_lambda);
    Ok(problem.path(&lambdas, opts))
}

/// Path on a caller-supplied grid (used to refit cross-validation folds on
/// the full-data grid).
pub fn lasso_path_on_grid(data: &Dataset, lambdas: &[f64], opts: &LassoOptions) -> Result<LassoPath> {
    if data.p() == 0 {
        return Err(Error::DimensionMismatch("LASSO path needs at least one regressor".into()));
    }
    if lambdas.is_empty() || lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidConfig("lambda grid must be non-empty and strictly decreasing".into()));
    }
    Ok(Problem::new(data).path(lambdas, opts))
}

fn lambda_grid(lambda_max: f64, ratio: f64, n_lambda: usize) -> Vec<f64> {
    if lambda_max <= 0.0 || !lambda_max.is_finite() {
        return vec![0.0];
    }
    if n_lambda == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect()
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    b0: f64,
    b: Vec<f64>,
}

/// Standardised problem data.
struct Problem<'a> {
    family: Family,
    y: &'a DVector<f64>,
    xs: DMatrix<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    n: f64,
    ybar: f64,
    lambda_max: f64,
    gaussian: Option<Gram>,
}

/// `X'X / n` and `X'(y - ybar) / n` on the standardised scale.
struct Gram {
    gram: DMatrix<f64>,
    cov_y: Vec<f64>,
    yss: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset) -> Self {
        let x = data.x();
        let (rows, p) = x.shape();
        let n = rows as f64;
        let mut xs = x.clone();
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let mut col = xs.column_mut(j);
            let m = col.sum() / n;
            col.add_scalar_mut(-m);
            let s = (col.norm_squared() / n).sqrt();
            if s > 1e-12 * (1.0 + m.abs()) {
                col /= s;
                scales[j] = s;
            } else {
                col.fill(0.0);
            }
            means[j] = m;
        }
        let y = data.y();
        let ybar = y.sum() / n;
        let yc = y.add_scalar(-ybar);
        let cov: Vec<f64> = (xs.tr_mul(&yc) / n).iter().copied().collect();
        let lambda_max = cov.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let gaussian = (data.family() == Family::Gaussian).then(|| Gram {
            gram: xs.tr_mul(&xs) / n,
            cov_y: cov.clone(),
            yss: yc.norm_squared() / n,
        });
        Self {
            family: data.family(),
            y,
            xs,
            means,
            scales,
            n,
            ybar,
            lambda_max,
            gaussian,
        }
    }

    fn p(&self) -> usize {
        self.scales.len()
    }

    fn usable(&self, j: usize) -> bool {
        self.scales[j] > 0.0
    }

    fn null_state(&self) -> State {
        let b0 = match self.family {
            Family::Gaussian => 0.0,
            Family::Bernoulli => {
                let m = self.ybar.clamp(1e-10, 1.0 - 1e-10);
                (m / (1.0 - m)).ln()
            }
            Family::Poisson => self.ybar.max(1e-10).ln(),
        };
        State {
            b0,
            b: vec![0.0; self.p()],
        }
    }

    fn path(&self, lambdas: &[f64], opts: &LassoOptions) -> LassoPath {
        let p = self.p();
        let mut state = self.null_state();
        let mut out = LassoPath {
            lambdas: lambdas.to_vec(),
            intercepts: Vec::with_capacity(lambdas.len()),
            coefs: Vec::with_capacity(lambdas.len()),
            supports: Vec::with_capacity(lambdas.len()),
            converged: Vec::with_capacity(lambdas.len()),
            options: opts.clone(),
            std_coefs: Vec::with_capacity(lambdas.len()),
            std_intercepts: Vec::with_capacity(lambdas.len()),
        };
        for &lambda in lambdas {
            let converged = self.solve(lambda, &mut state, opts);
            if !converged {
                log::warn!("coordinate descent hit its iteration cap at lambda = {lambda:e}");
            }
            let coefs: Vec<f64> = (0..p)
                .map(|j| if self.usable(j) { state.b[j] / self.scales[j] } else { 0.0 })
                .collect();
            let shift: f64 = coefs.iter().zip(&self.means).map(|(b, m)| b * m).sum();
            let b0 = match self.family {
                Family::Gaussian => self.ybar,
                _ => state.b0,
            };
            out.intercepts.push(b0 - shift);
            out.supports
                .push(ModelSpec::from_indices(p, (0..p).filter(|&j| state.b[j] != 0.0)));
            out.coefs.push(coefs);
            out.converged.push(converged);
            out.std_coefs.push(state.b.clone());
            out.std_intercepts.push(state.b0);
        }
        out
    }

    /// Minimises the penalised objective at `lambda`, warm-starting from and
    /// overwriting `state`. Returns whether the iteration caps were respected.
    fn solve(&self, lambda: f64, state: &mut State, opts: &LassoOptions) -> bool {
        if lambda >= self.lambda_max {
            // Every score component is within the penalty at the null fit.
            *state = self.null_state();
            return true;
        }
        match &self.gaussian {
            Some(gram) => self.solve_gaussian(gram, lambda, &mut state.b, opts),
            None => self.solve_glm(lambda, state, opts),
        }
    }

    fn solve_gaussian(&self, g: &Gram, lambda: f64, b: &mut [f64], opts: &LassoOptions) -> bool {
        let p = self.p();
        let mut gb: Vec<f64> = (0..p)
            .map(|k| (0..p).map(|j| g.gram[(k, j)] * b[j]).sum())
            .collect();
        let mut sweeps = 0;
        let pass = |b: &mut [f64], gb: &mut [f64], active_only: bool| -> f64 {
            let mut max_delta = 0.0f64;
            for j in 0..p {
                if !self.usable(j) || (active_only && b[j] == 0.0) {
                    continue;
                }
                let gjj = g.gram[(j, j)];
                let old = b[j];
                let rho = g.cov_y[j] - gb[j] + gjj * old;
                let new = soft_threshold(rho, lambda) / gjj;
                if new != old {
                    let delta = new - old;
                    for (k, v) in gb.iter_mut().enumerate() {
                        *v += delta * g.gram[(k, j)];
                    }
                    b[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            max_delta
        };
        loop {
            let d = pass(b, &mut gb, false);
            sweeps += 1;
            if d <= opts.tolerance {
                return true;
            }
            loop {
                if sweeps >= opts.max_sweeps {
                    return false;
                }
                let d = pass(b, &mut gb, true);
                sweeps += 1;
                if d <= opts.tolerance {
                    break;
                }
            }
        }
    }

    fn mean_and_weight(&self, eta: f64) -> (f64, f64) {
        match self.family {
            Family::Bernoulli => {
                let mu = logistic(eta);
                (mu, (mu * (1.0 - mu)).max(1e-10))
            }
            _ => {
                let mu = eta.exp();
                (mu, mu.max(1e-10))
            }
        }
    }

    fn eta(&self, state: &State) -> DVector<f64> {
        let mut eta = DVector::from_element(self.xs.nrows(), state.b0);
        for (j, &bj) in state.b.iter().enumerate() {
            if bj != 0.0 {
                eta.axpy(bj, &self.xs.column(j), 1.0);
            }
        }
        eta
    }

    /// Penalised objective on the standardised scale.
    fn objective(&self, lambda: f64, state: &State) -> f64 {
        let l1: f64 = state.b.iter().map(|v| v.abs()).sum();
        let smooth = match &self.gaussian {
            Some(g) => {
                let p = self.p();
                let mut quad = 0.0;
                for j in 0..p {
                    for k in 0..p {
                        quad += state.b[j] * g.gram[(j, k)] * state.b[k];
                    }
                }
                let lin: f64 = g.cov_y.iter().zip(&state.b).map(|(c, b)| c * b).sum();
                0.5 * g.yss - lin + 0.5 * quad
            }
            None => {
                let eta = self.eta(state);
                let nll: f64 = self
                    .y
                    .iter()
                    .zip(eta.iter())
                    .map(|(&y, &e)| match self.family {
                        Family::Bernoulli => softplus(e) - y * e,
                        _ => e.exp() - y * e,
                    })
                    .sum();
                nll / self.n
            }
        };
        smooth + lambda * l1
    }

    /// Gradient of the smooth part with respect to each standardised slope.
    #[cfg(test)]
    fn gradient(&self, state: &State) -> Vec<f64> {
        match &self.gaussian {
            Some(g) => (0..self.p())
                .map(|j| {
                    let gb: f64 = (0..self.p()).map(|k| g.gram[(j, k)] * state.b[k]).sum();
                    gb - g.cov_y[j]
                })
                .collect(),
            None => {
                let eta = self.eta(state);
                let resid = DVector::from_fn(eta.len(), |i, _| {
                    self.y[i] - self.mean_and_weight(eta[i]).0
                });
                (self.xs.tr_mul(&resid) / -self.n).iter().copied().collect()
            }
        }
    }

    fn solve_glm(&self, lambda: f64, state: &mut State, opts: &LassoOptions) -> bool {
        let p = self.p();
        let rows = self.xs.nrows();
        let mut sweeps = 0;
        for _ in 0..opts.max_outer {
            let eta = self.eta(state);
            let mut w = DVector::zeros(rows);
            let mut resid = DVector::zeros(rows);
            for i in 0..rows {
                let (mu, wi) = self.mean_and_weight(eta[i]);
                w[i] = wi;
                resid[i] = (self.y[i] - mu) / wi;
            }
            let xwx: Vec<f64> = (0..p)
                .map(|j| {
                    self.xs
                        .column(j)
                        .iter()
                        .zip(w.iter())
                        .map(|(x, wi)| wi * x * x)
                        .sum::<f64>()
                        / self.n
                })
                .collect();
            let w_sum = w.sum();

            let mut next = state.clone();
            let pass = |next: &mut State, resid: &mut DVector<f64>, active_only: bool| -> f64 {
                let mut max_delta = 0.0f64;
                let shift = resid.dot(&w) / w_sum;
                if shift != 0.0 {
                    next.b0 += shift;
                    resid.add_scalar_mut(-shift);
                    max_delta = shift.abs();
                }
                for j in 0..p {
                    if !self.usable(j) || (active_only && next.b[j] == 0.0) || xwx[j] <= 0.0 {
                        continue;
                    }
                    let col = self.xs.column(j);
                    let old = next.b[j];
                    let g: f64 = col
                        .iter()
                        .zip(resid.iter().zip(w.iter()))
                        .map(|(x, (r, wi))| wi * x * r)
                        .sum::<f64>()
                        / self.n
                        + xwx[j] * old;
                    let new = soft_threshold(g, lambda) / xwx[j];
                    if new != old {
                        resid.axpy(old - new, &col, 1.0);
                        next.b[j] = new;
                        max_delta = max_delta.max((new - old).abs());
                    }
                }
                max_delta
            };
            'inner: loop {
                let d = pass(&mut next, &mut resid, false);
                sweeps += 1;
                if d <= opts.tolerance {
                    break;
                }
                loop {
                    if sweeps >= opts.max_sweeps {
                        break 'inner;
                    }
                    let d = pass(&mut next, &mut resid, true);
                    sweeps += 1;
                    if d <= opts.tolerance {
                        break;
                    }
                }
            }

            let old_obj = self.objective(lambda, state);
            let mut new_obj = self.objective(lambda, &next);
            let mut halvings = 0;
            while !(new_obj <= old_obj + 1e-12 * old_obj.abs()) && halvings < 10 {
                next.b0 = 0.5 * (next.b0 + state.b0);
                for (nb, ob) in next.b.iter_mut().zip(&state.b) {
                    *nb = 0.5 * (*nb + ob);
                }
                new_obj = self.objective(lambda, &next);
                halvings += 1;
            }
            let change = state
                .b
                .iter()
                .zip(&next.b)
                .map(|(a, b)| (a - b).abs())
                .fold((state.b0 - next.b0).abs(), f64::max);
            *state = next;
            if sweeps >= opts.max_sweeps {
                return false;
            }
            if change <= opts.tolerance {
                return true;
            }
        }
        false
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda_min: f64,
    /// Index of `lambda_min` on the path grid.
    pub index_min: usize,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub fold_assignment: Vec<usize>,
    /// Support of the full-data path at `lambda_min`.
    pub selected: ModelSpec,
}

/// K-fold cross-validation over the grid of `path`, which must have been
/// computed on `data`. Validation loss is MSE (Gaussian) or mean deviance.
pub fn cv_select(data: &Dataset, path: &LassoPath, n_folds: usize, seed: u64) -> Result<CvResult> {
    if n_folds < 2 {
        return Err(Error::InvalidConfig(format!("n_folds must be at least 2, got {n_folds}")));
    }
    let n = data.n();
    if n < n_folds {
        return Err(Error::InvalidConfig(format!(
            "n = {n} is smaller than n_folds = {n_folds}"
        )));
    }
    let mut folds = assign_folds(n, n_folds, seed);
    if data.family() == Family::Bernoulli {
        if single_class_fold(data, &folds, n_folds).is_some() {
            folds = assign_folds(n, n_folds, seed ^ 0x5eed_5eed_5eed_5eed);
            if let Some(fold) = single_class_fold(data, &folds, n_folds) {
                return Err(Error::FoldDegenerate { fold });
            }
        }
    }

    let n_lambda = path.len();
    let per_fold: Vec<(usize, Vec<f64>)> = (0..n_folds)
        .into_par_iter()
        .map(|k| -> Result<(usize, Vec<f64>)> {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
            let fold_path = lasso_path_on_grid(&data.subset_rows(&train), &path.lambdas, &path.options)?;
            let x = data.x();
            let y = data.y();
            let losses = (0..n_lambda)
                .map(|l| {
                    test.iter()
                        .map(|&i| {
                            let eta = fold_path.linear_predictor(l, x, i);
                            match data.family() {
                                Family::Gaussian => (y[i] - eta).powi(2),
                                fam => unit_deviance(fam, y[i], fam.inverse_link(eta)),
                            }
                        })
                        .sum::<f64>()
                })
                .collect();
            Ok((test.len(), losses))
        })
        .collect::<Result<_>>()?;

    let mut cv_mean = vec![0.0; n_lambda];
    let mut cv_se = vec![0.0; n_lambda];
    for l in 0..n_lambda {
        let total: f64 = per_fold.iter().map(|(_, loss)| loss[l]).sum();
        let mean = total / n as f64;
        let var = per_fold
            .iter()
            .map(|(size, loss)| *size as f64 * (loss[l] / *size as f64 - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        cv_mean[l] = mean;
        cv_se[l] = (var / (n_folds - 1) as f64).sqrt();
    }
    let index_min = cv_mean
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < cv_mean[best] { i } else { best });
    Ok(CvResult {
        lambda_min: path.lambdas[index_min],
        index_min,
        cv_mean,
        cv_se,
        fold_assignment: folds,
        selected: path.supports[index_min].clone(),
    })
}

/// Seeded shuffle, then round-robin, so fold sizes differ by at most one.
fn assign_folds(n: usize, n_folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % n_folds;
    }
    folds
}

fn single_class_fold(data: &Dataset, folds: &[usize], n_folds: usize) -> Option<usize> {
    (0..n_folds).find(|&k| {
        let mut classes = folds
            .iter()
            .zip(data.y().iter())
            .filter(|(f, _)| **f != k)
            .map(|(_, y)| *y == 1.0);
        match classes.next() {
            None => true,
            Some(first) => classes.all(|c| c == first),
        }
    })
}

/// How path models are scored by an information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcScoring {
    /// Refit each distinct support by unpenalised maximum likelihood.
    #[default]
    Refit,
    /// Evaluate the likelihood at the penalised coefficients, counting
    /// nonzero coefficients as parameters.
    Penalized,
}

pub fn lasso_select_ic(data: &Dataset, path: &LassoPath, criterion: Criterion) -> Result<SearchResult> {
    lasso_select_ic_with(data, path, criterion, IcScoring::Refit)
}

/// Scores the distinct supports of `path` and returns the minimiser; ties go
/// to the smaller support, then to the larger lambda.
pub fn lasso_select_ic_with(
    data: &Dataset,
    path: &LassoPath,
    criterion: Criterion,
    scoring: IcScoring,
) -> Result<SearchResult> {
    let fitter = ModelFitter::new(data);
    let n = data.n();
    let candidates = path.distinct_supports();
    let mut trace = Vec::with_capacity(candidates.len());
    let mut skipped = Vec::new();
    let mut best: Option<(f64, usize, crate::model::FittedModel)> = None;
    for &(idx, spec) in &candidates {
        let fitted = match scoring {
            IcScoring::Refit => fitter.fit(spec),
            IcScoring::Penalized => penalized_fit(data, path, idx),
        };
        let scored = fitted.and_then(|f| criterion.score(f.loglik, f.k, n).map(|s| (s, f)));
        match scored {
            Ok((score, fit)) => {
                trace.push((spec.clone(), score));
                let better = match &best {
                    None => true,
                    Some((bs, bidx, bfit)) => {
                        let ord = score
                            .total_cmp(bs)
                            .then_with(|| spec.len().cmp(&bfit.spec.len()))
                            .then_with(|| idx.cmp(bidx));
                        ord.is_lt()
                    }
                };
                if better {
                    best = Some((score, idx, fit));
                }
            }
            Err(err) => {
                log::debug!("skipping path support {spec}: {err}");
                skipped.push(spec.clone());
            }
        }
    }
    let (best_score, _, best) = best.ok_or(Error::AllModelsDegenerate)?;
    Ok(SearchResult {
        best,
        best_score,
        n_models_evaluated: candidates.len(),
        trace: Some(trace),
        skipped,
    })
}

fn penalized_fit(data: &Dataset, path: &LassoPath, idx: usize) -> Result<crate::model::FittedModel> {
    let spec = path.supports[idx].clone();
    let beta: Vec<f64> = spec.indices().map(|j| path.coefs[idx][j]).collect();
    let beta0 = path.intercepts[idx];
    let ll = loglik(data, &spec, beta0, &beta)?;
    if !ll.is_finite() {
        return Err(Error::NonFiniteLoglik);
    }
    let k = spec.len() + 1 + data.family().extra_params();
    Ok(crate::model::FittedModel {
        sigma2_hat: None,
        k,
        loglik: ll,
        converged: path.converged[idx],
        beta0,
        beta,
        spec,
    })
}
