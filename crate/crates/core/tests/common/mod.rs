#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use varsel::{Dataset, Family, ModelSpec};

/// Random design with i.i.d. normal entries and a response driven by `truth`.
pub fn random_dataset(seed: u64, n: usize, p: usize, family: Family, truth: &ModelSpec, beta: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        let eta: f64 = 0.5 + truth.indices().map(|j| beta * x[(i, j)]).sum::<f64>();
        match family {
            Family::Gaussian => eta + rng.sample::<f64, _>(StandardNormal),
            Family::Bernoulli => f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))),
            Family::Poisson => Poisson::new(eta.min(5.0).exp()).unwrap().sample(&mut rng),
        }
    });
    Dataset::new(y, x, family).unwrap()
}

/// A random support of width `p` with roughly half the bits set.
pub fn random_support(seed: u64, p: usize) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let mut s = ModelSpec::empty(p);
    for j in 0..p {
        if rng.random_bool(0.5) {
            s.insert(j);
        }
    }
    s
}

pub fn all_specs(p: usize) -> impl Iterator<Item = ModelSpec> {
    (0u64..1 << p).map(move |m| ModelSpec::from_mask(p, m))
}
