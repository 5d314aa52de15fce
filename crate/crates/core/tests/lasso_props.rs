mod common;

use common::{random_dataset, random_support};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use varsel::simgen::{simulate, SimSetting, Study};
use varsel::{
    cv_select, exhaustive_search, lasso_path, lasso_select_ic, Criterion, Dataset, Family, ModelSpec,
};

fn noise(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Dataset::new(y, x, Family::Gaussian).unwrap()
}

#[test]
fn cv_on_pure_noise_selects_little() {
    let (p, reps) = (10, 50);
    let mut sparse = 0;
    let mut near_top = 0;
    for seed in 0..reps {
        let data = noise(1000 + seed, 500, p);
        let path = lasso_path(&data, 100).unwrap();
        let cv = cv_select(&data, &path, 10, seed).unwrap();
        if cv.selected.len() <= 2 {
            sparse += 1;
        }
        if cv.lambda_min >= 0.1 * path.lambdas[0] {
            near_top += 1;
        }
        let best = cv.cv_mean.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(cv.cv_mean[cv.index_min], best);
        assert!(cv.cv_mean[..cv.index_min].iter().all(|&m| m > best));
    }
    assert!(sparse * 100 >= 80 * reps, "sparse selection in {sparse}/{reps}");
    assert!(near_top * 100 >= 80 * reps, "lambda_min near the top in {near_top}/{reps}");
}

#[test]
fn all_zero_path_gives_the_null_model() {
    let data = noise(7, 200, 5);
    let path = lasso_path(&data, 1).unwrap();
    assert_eq!(path.distinct_supports().len(), 1);
    let r = lasso_select_ic(&data, &path, Criterion::Bic).unwrap();
    assert!(r.best.spec.is_empty());
}

#[test]
fn lasso_bic_is_dominated_by_exhaustive() {
    for seed in 0..10 {
        let data = simulate(&SimSetting::new(Study::S1Equicorr, Family::Gaussian, 400, 0.5, 1.0, seed))
            .unwrap()
            .dataset;
        let path = lasso_path(&data, 100).unwrap();
        let r = lasso_select_ic(&data, &path, Criterion::Bic).unwrap();
        assert!(path.supports.contains(&r.best.spec));
        let ex = exhaustive_search(&data, Criterion::Bic).unwrap();
        assert!(r.best_score >= ex.best_score);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_max_support_is_empty(seed in any::<u64>(), p in 1usize..12, fam in 0usize..3) {
        let family = [Family::Gaussian, Family::Bernoulli, Family::Poisson][fam];
        let data = random_dataset(seed, 60, p, family, &random_support(seed, p), 0.5);
        let path = lasso_path(&data, 20).unwrap();
        prop_assert!(path.supports[0].is_empty());
        prop_assert!(path.coefs[0].iter().all(|&b| b == 0.0));
        prop_assert!(path.lambdas.windows(2).all(|w| w[0] > w[1]));
        for (coefs, support) in path.coefs.iter().zip(&path.supports) {
            let nonzero = ModelSpec::from_indices(p, (0..p).filter(|&j| coefs[j] != 0.0));
            prop_assert_eq!(&nonzero, support);
        }
    }
}
