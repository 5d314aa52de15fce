//! Searches over the `2^p` model space: exhaustive enumeration, stepwise
//! add/drop moves and a binary-chromosome genetic algorithm.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{compare_scored, Criterion};
use crate::error::{Error, Result};
use crate::model::{Dataset, FittedModel, ModelFitter, ModelSpec};

/// Largest `p` accepted by [`exhaustive_search`].
pub const EXHAUSTIVE_MAX_P: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: FittedModel,
    pub best_score: f64,
    /// Distinct models fitted (or attempted) during the search.
    pub n_models_evaluated: usize,
    /// Exhaustive: every fitted model. Stepwise: the accepted path, starting
    /// with the initial model. GA: the incumbent after each generation.
    pub trace: Option<Vec<(ModelSpec, f64)>>,
    /// Models that could not be fitted (rank deficient or degenerate).
    pub skipped: Vec<ModelSpec>,
}

/// A scored candidate; failed fits score `+inf`.
#[derive(Debug, Clone)]
struct Scored {
    score: f64,
    fit: Option<FittedModel>,
}

fn score_spec(fitter: &ModelFitter<'_>, criterion: Criterion, spec: &ModelSpec) -> Scored {
    let n = fitter.data().n();
    match fitter
        .fit(spec)
        .and_then(|fit| criterion.score(fit.loglik, fit.k, n).map(|s| (s, fit)))
    {
        Ok((score, fit)) => Scored {
            score,
            fit: Some(fit),
        },
        Err(err) => {
            log::debug!("skipping {spec}: {err}");
            Scored {
                score: f64::INFINITY,
                fit: None,
            }
        }
    }
}

/// Memoised scores keyed by model.
struct Evaluator<'a> {
    fitter: ModelFitter<'a>,
    criterion: Criterion,
    cache: HashMap<ModelSpec, Scored>,
    skipped: Vec<ModelSpec>,
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a Dataset, criterion: Criterion) -> Self {
        Self {
            fitter: ModelFitter::new(data),
            criterion,
            cache: HashMap::new(),
            skipped: Vec::new(),
        }
    }

    /// Scores every spec not yet cached; fits run in parallel.
    fn evaluate(&mut self, specs: &[ModelSpec]) {
        let mut fresh: Vec<ModelSpec> = specs
            .iter()
            .filter(|s| !self.cache.contains_key(*s))
            .cloned()
            .collect();
        fresh.sort();
        fresh.dedup();
        let scored: Vec<Scored> = fresh
            .par_iter()
            .map(|s| score_spec(&self.fitter, self.criterion, s))
            .collect();
        for (spec, sc) in fresh.into_iter().zip(scored) {
            if sc.fit.is_none() {
                self.skipped.push(spec.clone());
            }
            self.cache.insert(spec, sc);
        }
    }

    fn score(&self, spec: &ModelSpec) -> f64 {
        self.cache[spec].score
    }

    fn into_result(
        mut self,
        best: &ModelSpec,
        trace: Option<Vec<(ModelSpec, f64)>>,
    ) -> Result<SearchResult> {
        let n_models_evaluated = self.cache.len();
        let scored = self.cache.remove(best).expect("incumbent is always cached");
        let best = scored.fit.ok_or(Error::AllModelsDegenerate)?;
        self.skipped.sort();
        Ok(SearchResult {
            best,
            best_score: scored.score,
            n_models_evaluated,
            trace,
            skipped: self.skipped,
        })
    }
}

/// Fits all `2^p` models and returns the criterion minimiser.
pub fn exhaustive_search(data: &Dataset, criterion: Criterion) -> Result<SearchResult> {
    exhaustive(data, criterion, false)
}

/// As [`exhaustive_search`], also returning every `(model, score)` pair.
pub fn exhaustive_search_traced(data: &Dataset, criterion: Criterion) -> Result<SearchResult> {
    exhaustive(data, criterion, true)
}

fn exhaustive(data: &Dataset, criterion: Criterion, record: bool) -> Result<SearchResult> {
    let p = data.p();
    if p > EXHAUSTIVE_MAX_P {
        return Err(Error::SpaceTooLarge {
            p,
            max: EXHAUSTIVE_MAX_P,
        });
    }
    let fitter = ModelFitter::new(data);
    let total: u64 = 1 << p;

    #[derive(Default)]
    struct Acc {
        best: Option<(f64, FittedModel)>,
        skipped: Vec<ModelSpec>,
        trace: Vec<(ModelSpec, f64)>,
    }
    fn merge(mut a: Acc, b: Acc) -> Acc {
        a.skipped.extend(b.skipped);
        a.trace.extend(b.trace);
        a.best = match (a.best, b.best) {
            (Some(x), Some(y)) => {
                if compare_scored((y.0, &y.1.spec), (x.0, &x.1.spec)).is_lt() {
                    Some(y)
                } else {
                    Some(x)
                }
            }
            (x, y) => x.or(y),
        };
        a
    }

    let acc = (0..total as usize)
        .into_par_iter()
        .with_min_len(64)
        .fold(Acc::default, |mut acc, mask| {
            let spec = ModelSpec::from_mask(p, mask as u64);
            let sc = score_spec(&fitter, criterion, &spec);
            match sc.fit {
                None => acc.skipped.push(spec),
                Some(fit) => {
                    if record {
                        acc.trace.push((spec, sc.score));
                    }
                    let single = Acc {
                        best: Some((sc.score, fit)),
                        ..Acc::default()
                    };
                    acc = merge(acc, single);
                }
            }
            acc
        })
        .reduce(Acc::default, merge);

    let (best_score, best) = acc.best.ok_or(Error::AllModelsDegenerate)?;
    let mut skipped = acc.skipped;
    skipped.sort();
    let trace = record.then(|| {
        let mut t = acc.trace;
        t.sort_by(|a, b| a.0.cmp(&b.0));
        t
    });
    Ok(SearchResult {
        best,
        best_score,
        n_models_evaluated: total as usize,
        trace,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepwiseDirection {
    /// Single-variable additions and deletions.
    #[default]
    Both,
    Forward,
    Backward,
}

/// Bidirectional stepwise search from `start`.
pub fn stepwise_search(
    data: &Dataset,
    criterion: Criterion,
    start: &ModelSpec,
) -> Result<SearchResult> {
    stepwise_search_with(data, criterion, start, StepwiseDirection::Both)
}

/// Greedy search: move to the best single-bit neighbour while it strictly
/// improves the criterion.
pub fn stepwise_search_with(
    data: &Dataset,
    criterion: Criterion,
    start: &ModelSpec,
    direction: StepwiseDirection,
) -> Result<SearchResult> {
    data.check_spec(start)?;
    let mut eval = Evaluator::new(data, criterion);
    eval.evaluate(std::slice::from_ref(start));
    if eval.cache[start].fit.is_none() {
        return Err(eval
            .fitter
            .fit(start)
            .err()
            .unwrap_or(Error::AllModelsDegenerate));
    }
    let mut current = start.clone();
    let mut current_score = eval.score(&current);
    let mut path = vec![(current.clone(), current_score)];

    loop {
        let neighbours: Vec<ModelSpec> = (0..data.p())
            .filter(|&j| match direction {
                StepwiseDirection::Both => true,
                StepwiseDirection::Forward => !current.contains(j),
                StepwiseDirection::Backward => current.contains(j),
            })
            .map(|j| current.toggled(j))
            .collect();
        if neighbours.is_empty() {
            break;
        }
        eval.evaluate(&neighbours);
        let best = neighbours
            .iter()
            .min_by(|a, b| compare_scored((eval.score(a), a), (eval.score(b), b)))
            .expect("non-empty neighbourhood");
        let best_score = eval.score(best);
        if best_score < current_score {
            current = best.clone();
            current_score = best_score;
            path.push((current.clone(), current_score));
        } else {
            break;
        }
    }
    eval.into_result(&current, Some(path))
}

/// Genetic-algorithm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub stall_generations: usize,
    pub crossover_prob: f64,
    /// Per-gene bit-flip probability; `None` means `1 / p`.
    pub mutation_prob_per_gene: Option<f64>,
    pub elite_fraction: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 200,
            stall_generations: 20,
            crossover_prob: 0.8,
            mutation_prob_per_gene: None,
            elite_fraction: 0.05,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population_size < 2 {
            return bad(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            ));
        }
        for (name, v) in [
            ("crossover_prob", Some(self.crossover_prob)),
            ("mutation_prob_per_gene", self.mutation_prob_per_gene),
            ("elite_fraction", Some(self.elite_fraction)),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("{name} must lie in [0, 1], got {v}"));
                }
            }
        }
        if self.n_elite() < 1 {
            return bad(format!(
                "elite_fraction * population_size must be at least 1 (got {} * {})",
                self.elite_fraction, self.population_size
            ));
        }
        Ok(())
    }

    pub fn n_elite(&self) -> usize {
        ((self.elite_fraction * self.population_size as f64) + 1e-9).floor() as usize
    }

    pub fn mutation_rate(&self, p: usize) -> f64 {
        self.mutation_prob_per_gene
            .unwrap_or(1.0 / p.max(1) as f64)
    }
}

pub fn ga_search(data: &Dataset, criterion: Criterion, config: &GaConfig) -> Result<SearchResult> {
    ga_search_seeded(data, criterion, config, &[])
}

/// GA whose initial population starts with `initial` (truncated to the
/// population size) and is filled with fair coin-flip chromosomes.
pub fn ga_search_seeded(
    data: &Dataset,
    criterion: Criterion,
    config: &GaConfig,
    initial: &[ModelSpec],
) -> Result<SearchResult> {
    config.validate()?;
    let p = data.p();
    if p == 0 {
        return Err(Error::InvalidConfig("GA search needs at least one regressor".into()));
    }
    for spec in initial {
        data.check_spec(spec)?;
    }
    let pop_size = config.population_size;
    let n_elite = config.n_elite().min(pop_size);
    let mutation = config.mutation_rate(p);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(data, criterion);

    let mut population: Vec<ModelSpec> = initial.iter().take(pop_size).cloned().collect();
    while population.len() < pop_size {
        let mut chrom = ModelSpec::empty(p);
        for j in 0..p {
            if rng.random_bool(0.5) {
                chrom.insert(j);
            }
        }
        population.push(chrom);
    }
    eval.evaluate(&population);
    sort_population(&mut population, &eval);

    let mut best = population[0].clone();
    let mut best_score = eval.score(&best);
    let mut history = vec![(best.clone(), best_score)];
    let rank_weights = WeightedIndex::new((0..pop_size).map(|r| (pop_size - r) as f64))
        .expect("positive rank weights");
    let mut stall = 0;

    for _ in 0..config.max_generations {
        let mut next: Vec<ModelSpec> = population[..n_elite].to_vec();
        while next.len() < pop_size {
            let a = &population[rank_weights.sample(&mut rng)];
            let b = &population[rank_weights.sample(&mut rng)];
            let (mut c1, mut c2) = if rng.random_bool(config.crossover_prob) {
                uniform_crossover(a, b, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            mutate(&mut c1, mutation, &mut rng);
            mutate(&mut c2, mutation, &mut rng);
            next.push(c1);
            if next.len() < pop_size {
                next.push(c2);
            }
        }
        eval.evaluate(&next);
        sort_population(&mut next, &eval);
        population = next;

        let leader_score = eval.score(&population[0]);
        if compare_scored((leader_score, &population[0]), (best_score, &best)).is_lt() {
            if leader_score < best_score {
                stall = 0;
            } else {
                stall += 1;
            }
            best = population[0].clone();
            best_score = leader_score;
        } else {
            stall += 1;
        }
        history.push((best.clone(), best_score));
        if stall >= config.stall_generations {
            break;
        }
    }
    eval.into_result(&best, Some(history))
}

fn sort_population(pop: &mut [ModelSpec], eval: &Evaluator<'_>) {
    pop.sort_by(|a, b| compare_scored((eval.score(a), a), (eval.score(b), b)));
}

fn uniform_crossover(a: &ModelSpec, b: &ModelSpec, rng: &mut impl Rng) -> (ModelSpec, ModelSpec) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for j in 0..a.width() {
        if a.contains(j) != b.contains(j) && rng.random_bool(0.5) {
            c1.toggle(j);
            c2.toggle(j);
        }
    }
    (c1, c2)
}

fn mutate(chrom: &mut ModelSpec, rate: f64, rng: &mut impl Rng) {
    for j in 0..chrom.width() {
        if rng.random::<f64>() < rate {
            chrom.toggle(j);
        }
    }
}
