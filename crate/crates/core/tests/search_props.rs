mod common;

use common::{all_specs, random_dataset, random_support};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use varsel::criteria::{compare_scored, evaluate};
use varsel::search::{exhaustive_search_traced, ga_search_seeded};
use varsel::{
    exhaustive_search, fit_glm, fit_lm, ga_search, stepwise_search, Criterion, Dataset, Family, GaConfig,
    ModelSpec,
};

/// Independent brute force: direct fits of every bit pattern.
fn brute_force(data: &Dataset, criterion: Criterion) -> (ModelSpec, f64) {
    let mut best: Option<(ModelSpec, f64)> = None;
    for spec in all_specs(data.p()) {
        let fit = match data.family() {
            Family::Gaussian => fit_lm(data, &spec),
            _ => fit_glm(data, &spec),
        };
        let Ok(fit) = fit else { continue };
        let score = evaluate(criterion, &fit, data.n()).unwrap();
        let better = match &best {
            None => true,
            Some((s, b)) => {
                score < *b || (score == *b && (spec.len(), spec.indices().collect::<Vec<_>>()) < (s.len(), s.indices().collect()))
            }
        };
        if better {
            best = Some((spec, score));
        }
    }
    best.unwrap()
}

#[test]
fn exhaustive_matches_brute_force_on_50_instances() {
    let families = [Family::Gaussian, Family::Bernoulli, Family::Poisson];
    for i in 0..50u64 {
        let p = 1 + (i % 6) as usize;
        let family = families[(i % 3) as usize];
        let data = random_dataset(100 + i, 80, p, family, &random_support(i, p), 0.5);
        for criterion in [Criterion::Bic, Criterion::Aic] {
            let r = exhaustive_search(&data, criterion).unwrap();
            let (spec, score) = brute_force(&data, criterion);
            assert_eq!(r.best.spec, spec, "instance {i} {criterion}");
            assert!((r.best_score - score).abs() <= 1e-9 * score.abs().max(1.0));
            assert_eq!(r.n_models_evaluated, 1 << p);
        }
    }
}

#[test]
fn exhaustive_p2_recovers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = DMatrix::from_fn(1000, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(1000, |i, _| 1.0 + x[(i, 0)] + rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(y, x, Family::Gaussian).unwrap();
    let r = exhaustive_search_traced(&data, Criterion::Bic).unwrap();
    assert_eq!(r.best.spec, ModelSpec::from_indices(2, [0]));
    let trace = r.trace.unwrap();
    assert_eq!(trace.len(), 4);
    let min = trace
        .iter()
        .min_by(|a, b| compare_scored((a.1, &a.0), (b.1, &b.0)))
        .unwrap();
    assert_eq!(min.0, r.best.spec);
}

#[test]
fn stepwise_stops_at_null_when_null_is_best() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(200, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(200, |_, _| rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(y, x, Family::Gaussian).unwrap();
    let ex = exhaustive_search(&data, Criterion::Bic).unwrap();
    assert!(ex.best.spec.is_empty());
    let r = stepwise_search(&data, Criterion::Bic, &ModelSpec::empty(4)).unwrap();
    assert!(r.best.spec.is_empty());
    assert_eq!(r.trace.unwrap().len(), 1);
    // The start plus its four neighbours.
    assert_eq!(r.n_models_evaluated, 5);
}

#[test]
fn stepwise_equals_exhaustive_on_orthogonal_strong_signal() {
    for seed in 0..10 {
        let truth = ModelSpec::from_indices(6, [0, 1, 2]);
        let data = random_dataset(seed, 400, 6, Family::Gaussian, &truth, 1.0);
        for criterion in [Criterion::Bic, Criterion::Aic] {
            let ex = exhaustive_search(&data, criterion).unwrap();
            let sw = stepwise_search(&data, criterion, &ModelSpec::empty(6)).unwrap();
            assert_eq!(sw.best.spec, ex.best.spec, "seed {seed} {criterion}");
        }
    }
}

/// `x1 = u`, `x2 = u + 0.1 v`, `y = v + noise`: each regressor alone is
/// nearly useless, while the pair reconstructs `v`.
#[test]
fn stepwise_can_stop_at_a_local_optimum() {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = u;
        x[(i, 1)] = u + 0.1 * v;
        y[i] = v + 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    let data = Dataset::new(y, x, Family::Gaussian).unwrap();
    let score = |s: ModelSpec| evaluate(Criterion::Bic, &fit_lm(&data, &s).unwrap(), n).unwrap();
    let null = score(ModelSpec::empty(2));
    assert!(score(ModelSpec::from_indices(2, [0])) > null);
    assert!(score(ModelSpec::from_indices(2, [1])) > null);
    assert!(score(ModelSpec::full(2)) < null);

    let sw = stepwise_search(&data, Criterion::Bic, &ModelSpec::empty(2)).unwrap();
    let ex = exhaustive_search(&data, Criterion::Bic).unwrap();
    assert!(sw.best.spec.is_empty());
    assert_eq!(ex.best.spec, ModelSpec::full(2));
    assert!(ex.best_score < sw.best_score);
}

#[test]
fn ga_matches_exhaustive_at_p6() {
    for seed in 0..5u64 {
        let data = random_dataset(seed, 150, 6, Family::Gaussian, &ModelSpec::from_indices(6, [0, 1, 2]), 0.4);
        for criterion in [Criterion::Bic, Criterion::Aic] {
            let ex = exhaustive_search(&data, criterion).unwrap();
            let ga = ga_search(&data, criterion, &GaConfig { seed, ..GaConfig::default() }).unwrap();
            assert_eq!(ga.best_score, ex.best_score);
            assert_eq!(ga.best.spec, ex.best.spec);
        }
    }
}

#[test]
fn ga_recovers_optimum_on_95_percent_of_instances() {
    let families = [Family::Gaussian, Family::Bernoulli, Family::Poisson];
    let mut hits = 0;
    for i in 0..50u64 {
        let p = 6 + (i % 5) as usize;
        let family = families[(i % 3) as usize];
        let data = random_dataset(500 + i, 120, p, family, &random_support(i, p), 0.3);
        let ex = exhaustive_search(&data, Criterion::Bic).unwrap();
        let ga = ga_search(&data, Criterion::Bic, &GaConfig { seed: i, ..GaConfig::default() }).unwrap();
        assert!(ga.best_score >= ex.best_score);
        if ga.best.spec == ex.best.spec {
            hits += 1;
        }
    }
    assert!(hits >= 48, "GA recovered the optimum on {hits}/50 instances");
}

#[test]
fn ga_keeps_a_seeded_optimum() {
    let data = random_dataset(9, 100, 8, Family::Bernoulli, &ModelSpec::from_indices(8, [1, 4]), 0.8);
    let ex = exhaustive_search(&data, Criterion::Aic).unwrap();
    let config = GaConfig {
        max_generations: 3,
        population_size: 4,
        elite_fraction: 0.25,
        ..GaConfig::default()
    };
    let r = ga_search_seeded(&data, Criterion::Aic, &config, &[ex.best.spec.clone()]).unwrap();
    assert_eq!(r.best.spec, ex.best.spec);
    assert_eq!(r.best_score, ex.best_score);
}

#[test]
fn ga_is_deterministic_under_a_seed() {
    let data = random_dataset(4, 90, 12, Family::Poisson, &ModelSpec::from_indices(12, [0, 5, 7]), 0.4);
    let config = GaConfig { seed: 42, ..GaConfig::default() };
    let a = ga_search(&data, Criterion::Bic, &config).unwrap();
    let b = ga_search(&data, Criterion::Bic, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn aic_and_bic_coincide_at_e_squared() {
    let n = std::f64::consts::E.powi(2);
    for (ll, k) in [(-12.5, 4), (-1e3, 1), (3.25, 9)] {
        let aic = Criterion::Aic.score_at(ll, k, n).unwrap();
        let bic = Criterion::Bic.score_at(ll, k, n).unwrap();
        assert!((aic - bic).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exhaustive_dominates(seed in any::<u64>(), p in 2usize..8, fam in 0usize..3) {
        let family = [Family::Gaussian, Family::Bernoulli, Family::Poisson][fam];
        let data = random_dataset(seed, 100, p, family, &random_support(seed, p), 0.4);
        for criterion in [Criterion::Bic, Criterion::Aic] {
            let ex = exhaustive_search(&data, criterion).unwrap();
            let sw = stepwise_search(&data, criterion, &ModelSpec::empty(p)).unwrap();
            let ga = ga_search(&data, criterion, &GaConfig { seed, max_generations: 20, ..GaConfig::default() }).unwrap();
            prop_assert!(ex.best_score <= sw.best_score);
            prop_assert!(ex.best_score <= ga.best_score);
            prop_assert_eq!(ex.best_score, evaluate(criterion, &ex.best, data.n()).unwrap());

            // Stepwise path: strictly decreasing scores, bounded length.
            let trace = sw.trace.unwrap();
            prop_assert!(trace.windows(2).all(|w| w[1].1 < w[0].1));
            prop_assert!(trace.len() <= p * p + p + 1);
            // GA incumbent never worsens.
            let history = ga.trace.unwrap();
            prop_assert!(history.windows(2).all(|w| w[1].1 <= w[0].1));
        }
    }

    #[test]
    fn stepwise_result_is_a_local_optimum(seed in any::<u64>(), p in 2usize..8) {
        let data = random_dataset(seed, 80, p, Family::Gaussian, &random_support(seed, p), 0.3);
        let sw = stepwise_search(&data, Criterion::Aic, &ModelSpec::empty(p)).unwrap();
        for j in 0..p {
            let neighbour = sw.best.spec.toggled(j);
            if let Ok(fit) = fit_lm(&data, &neighbour) {
                prop_assert!(evaluate(Criterion::Aic, &fit, data.n()).unwrap() >= sw.best_score);
            }
        }
    }

    #[test]
    fn bic_penalises_more_than_aic(seed in any::<u64>(), p in 1usize..7, n in 8usize..200) {
        let data = random_dataset(seed, n.max(p + 3), p, Family::Gaussian, &random_support(seed, p), 0.5);
        let n = data.n();
        let fitter = varsel::ModelFitter::new(&data);
        let fits: Vec<_> = all_specs(p).filter_map(|s| fitter.fit(&s).ok()).collect();
        for f in &fits {
            let (a, b) = (evaluate(Criterion::Aic, f, n).unwrap(), evaluate(Criterion::Bic, f, n).unwrap());
            prop_assert!(b > a);
        }
        let pick = |c: Criterion| {
            fits.iter()
                .map(|f| (evaluate(c, f, n).unwrap(), f))
                .min_by(|a, b| compare_scored((a.0, &a.1.spec), (b.0, &b.1.spec)))
                .unwrap()
                .1
        };
        prop_assert!(pick(Criterion::Bic).k <= pick(Criterion::Aic).k);
    }

    /// Shifting every Poisson log-likelihood by the same constant (here the
    /// `log y!` term) leaves the selected model unchanged.
    #[test]
    fn poisson_constant_does_not_change_selection(seed in any::<u64>(), p in 1usize..6) {
        let data = random_dataset(seed, 100, p, Family::Poisson, &random_support(seed, p), 0.4);
        let constant: f64 = data.y().iter().map(|&y| libm::lgamma(y + 1.0)).sum();
        let ex = exhaustive_search(&data, Criterion::Bic).unwrap();
        let fitter = varsel::ModelFitter::new(&data);
        let without = all_specs(p)
            .filter_map(|s| fitter.fit(&s).ok())
            .map(|f| (Criterion::Bic.score(f.loglik + constant, f.k, data.n()).unwrap(), f.spec))
            .min_by(|a, b| compare_scored((a.0, &a.1), (b.0, &b.1)))
            .unwrap();
        prop_assert_eq!(without.1, ex.best.spec);
    }
}
