//! Fixed datasets shared by the benchmarks.

use varsel::{simulate, Dataset, Family, SimSetting, Study};

/// One simulated dataset from a study design.
pub fn fixture(study: Study, family: Family, n: usize, rho: f64) -> Dataset {
    simulate(&SimSetting::new(study, family, n, rho, 6.25, 0xBE7C))
        .expect("fixture settings are valid")
        .dataset
}

/// Low-dimensional correlated design, `p = 6`.
pub fn small(family: Family, n: usize) -> Dataset {
    fixture(Study::S1Equicorr, family, n, 0.5)
}

/// Wide AR(1) design, `p = 50`.
pub fn wide(family: Family, n: usize) -> Dataset {
    fixture(Study::S2Ar1, family, n, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        assert_eq!(small(Family::Gaussian, 100).p(), 6);
        let w = wide(Family::Bernoulli, 300);
        assert_eq!((w.n(), w.p()), (300, 50));
    }
}
