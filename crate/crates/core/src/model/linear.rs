use nalgebra::{DMatrix, DVector};

use super::{gaussian_profile_loglik, Dataset, Family, FittedModel, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Ordinary least squares for a Gaussian dataset restricted to `spec`.
pub fn fit_lm(data: &Dataset, spec: &ModelSpec) -> Result<FittedModel> {
    if data.family() != Family::Gaussian {
        return Err(Error::WrongFamily { expected: "gaussian" });
    }
    data.check_spec(spec)?;
    let ls = least_squares(data.design(spec), data.y(), None)?;
    finish(data, spec, ls.coef, ls.rss)
}

fn finish(data: &Dataset, spec: &ModelSpec, coef: DVector<f64>, rss: f64) -> Result<FittedModel> {
    let n = data.n() as f64;
    if rss <= n * f64::EPSILON * data.response_variance() {
        return Err(Error::DegenerateFit { rss });
    }
    let loglik = gaussian_profile_loglik(rss, n);
    Ok(FittedModel {
        spec: spec.clone(),
        beta0: coef[0],
        beta: coef.iter().skip(1).copied().collect(),
        loglik,
        k: spec.len() + 2,
        converged: true,
        sigma2_hat: Some(rss / n),
    })
}

/// Fits Gaussian submodels from one factorisation of the full design.
///
/// With `[1 | X] = Q R` and `Q' y = (z, t)`, the residual sum of squares of
/// any column subset `S` is `||z - R_S b||^2 + ||t||^2`, so every subset fit
/// reduces to a least-squares problem with at most `p + 1` rows.
#[derive(Debug, Clone)]
pub(crate) struct ReducedGaussian {
    r: DMatrix<f64>,
    z: DVector<f64>,
    tail_rss: f64,
    col_norms: Vec<f64>,
}

impl ReducedGaussian {
    pub(crate) fn new(data: &Dataset) -> Self {
        let a = data.design(&ModelSpec::full(data.p()));
        let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        let rows = a.nrows();
        let qr = a.qr();
        let r = qr.r();
        let mut qty = data.y().clone();
        qr.q_tr_mul(&mut qty);
        let m = r.nrows();
        let z = qty.rows(0, m).into_owned();
        let tail_rss = qty.rows(m, rows - m).norm_squared();
        Self {
            r,
            z,
            tail_rss,
            col_norms,
        }
    }

    pub(crate) fn fit(&self, data: &Dataset, spec: &ModelSpec) -> Result<FittedModel> {
        data.check_spec(spec)?;
        let cols: Vec<usize> = std::iter::once(0).chain(spec.indices().map(|j| j + 1)).collect();
        let sub = self.r.select_columns(cols.iter());
        let norms: Vec<f64> = cols.iter().map(|&c| self.col_norms[c]).collect();
        let ls = least_squares(sub, &self.z, Some(&norms))?;
        finish(data, spec, ls.coef, ls.rss + self.tail_rss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::loglik;
    use approx::assert_relative_eq;

    fn line(y: Vec<f64>, x: Vec<f64>) -> Dataset {
        let rows: Vec<Vec<f64>> = x.into_iter().map(|v| vec![v]).collect();
        Dataset::from_rows(y, &rows, Family::Gaussian).unwrap()
    }

    #[test]
    fn exact_interpolation_is_degenerate() {
        let d = line(vec![2.0, 4.0, 6.0], vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_lm(&d, &ModelSpec::full(1)),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn three_point_regression() {
        let d = line(vec![1.0, 2.0, 2.0], vec![1.0, 2.0, 3.0]);
        let fit = fit_lm(&d, &ModelSpec::full(1)).unwrap();
        assert_relative_eq!(fit.beta0, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.sigma2_hat.unwrap() * 3.0, 1.0 / 6.0, epsilon = 1e-12);
        assert_eq!(fit.k, 3);
        let expected = -1.5 * ((2.0 * std::f64::consts::PI).ln() + (1.0f64 / 18.0).ln() + 1.0);
        assert_relative_eq!(fit.loglik, expected, epsilon = 1e-12);
    }

    #[test]
    fn null_model_is_mean_and_population_variance() {
        let y = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let d = line(y.clone(), vec![0.1, 0.2, 0.3, 0.5, 0.8]);
        let fit = fit_lm(&d, &ModelSpec::empty(1)).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert_relative_eq!(fit.beta0, mean, epsilon = 1e-12);
        assert_relative_eq!(fit.sigma2_hat.unwrap(), var, epsilon = 1e-12);
        assert_eq!(fit.k, 2);
        assert!(fit.beta.is_empty());
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let rows = vec![
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
            vec![4.0, 8.0],
        ];
        let d = Dataset::from_rows(vec![1.0, 3.0, 2.0, 5.0], &rows, Family::Gaussian).unwrap();
        assert!(matches!(
            fit_lm(&d, &ModelSpec::full(2)),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            ReducedGaussian::new(&d).fit(&d, &ModelSpec::full(2)),
            Err(Error::RankDeficient { .. })
        ));
        assert!(ReducedGaussian::new(&d).fit(&d, &ModelSpec::from_indices(2, [1])).is_ok());
    }

    #[test]
    fn wrong_family_rejected() {
        let rows = vec![vec![1.0], vec![2.0]];
        let d = Dataset::from_rows(vec![0.0, 1.0], &rows, Family::Bernoulli).unwrap();
        assert!(matches!(
            fit_lm(&d, &ModelSpec::empty(1)),
            Err(Error::WrongFamily { .. })
        ));
    }

    #[test]
    fn reduced_route_matches_direct_fit() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 1.3).cos(), t / 40.0, (t * 0.11).sin() * 2.0]
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| 1.0 + r[0] - 0.5 * r[2] + ((i * 7919) % 13) as f64 / 13.0)
            .collect();
        let d = Dataset::from_rows(y, &rows, Family::Gaussian).unwrap();
        let reduced = ReducedGaussian::new(&d);
        for mask in 0..16u64 {
            let spec = ModelSpec::from_mask(4, mask);
            let a = fit_lm(&d, &spec).unwrap();
            let b = reduced.fit(&d, &spec).unwrap();
            assert_relative_eq!(a.loglik, b.loglik, epsilon = 1e-9, max_relative = 1e-12);
            assert_relative_eq!(a.beta0, b.beta0, epsilon = 1e-9);
            for (x, y) in a.beta.iter().zip(&b.beta) {
                assert_relative_eq!(x, y, epsilon = 1e-9);
            }
            let direct = loglik(&d, &spec, a.beta0, &a.beta).unwrap();
            assert_relative_eq!(direct, a.loglik, epsilon = 1e-9);
        }
    }
}
