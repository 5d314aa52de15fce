//! Selection-accuracy metrics against a known true support.

use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateMetrics {
    /// Selected support equals the truth exactly.
    pub correct: bool,
    pub recall: f64,
    /// False selections over selections; `0` for an empty selection.
    pub fdr: f64,
    /// Nothing was selected.
    pub is_null: bool,
    pub n_selected: usize,
    pub n_false: usize,
}

pub fn replicate_metrics(selected: &ModelSpec, truth: &ModelSpec) -> Result<ReplicateMetrics> {
    if selected.width() != truth.width() {
        return Err(Error::DimensionMismatch(format!(
            "selected width {} differs from truth width {}",
            selected.width(),
            truth.width()
        )));
    }
    if truth.is_empty() {
        return Err(Error::TruthEmpty);
    }
    let hits = selected.intersection_len(truth);
    let n_selected = selected.len();
    let n_false = n_selected - hits;
    Ok(ReplicateMetrics {
        correct: selected == truth,
        recall: hits as f64 / truth.len() as f64,
        fdr: if n_selected == 0 { 0.0 } else { n_false as f64 / n_selected as f64 },
        is_null: n_selected == 0,
        n_selected,
        n_false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub n_replicates: usize,
    /// Correct-inclusion rate.
    pub cir: f64,
    pub recall: f64,
    /// Mean per-replicate FDR; `None` when more than half the selections
    /// were empty.
    pub fdr: Option<f64>,
    /// Total false selections over total selections.
    pub pooled_fdr: Option<f64>,
    pub null_rate: f64,
    pub mean_selected: f64,
}

impl MetricsSummary {
    /// Maximum absolute deviation between two summaries, with an NA in
    /// exactly one of them counted as infinite.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        };
        [
            (self.cir - other.cir).abs(),
            (self.recall - other.recall).abs(),
            opt(self.fdr, other.fdr),
            opt(self.pooled_fdr, other.pooled_fdr),
            (self.null_rate - other.null_rate).abs(),
            (self.mean_selected - other.mean_selected).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn aggregate(reps: &[ReplicateMetrics]) -> Result<MetricsSummary> {
    if reps.is_empty() {
        return Err(Error::EmptyInput("no replicates to aggregate"));
    }
    let n = reps.len();
    let nf = n as f64;
    let mean = |f: &dyn Fn(&ReplicateMetrics) -> f64| reps.iter().map(f).sum::<f64>() / nf;
    let n_null = reps.iter().filter(|r| r.is_null).count();
    let total_selected: usize = reps.iter().map(|r| r.n_selected).sum();
    let total_false: usize = reps.iter().map(|r| r.n_false).sum();
    Ok(MetricsSummary {
        n_replicates: n,
        cir: mean(&|r| f64::from(u8::from(r.correct))),
        recall: mean(&|r| r.recall),
        fdr: (2 * n_null <= n).then(|| mean(&|r| r.fdr)),
        pooled_fdr: (total_selected > 0).then(|| total_false as f64 / total_selected as f64),
        null_rate: n_null as f64 / nf,
        mean_selected: mean(&|r| r.n_selected as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bits: &str) -> ModelSpec {
        ModelSpec::from_bit_string(bits).unwrap()
    }

    #[test]
    fn exact_match() {
        let m = replicate_metrics(&spec("111000"), &spec("111000")).unwrap();
        assert!(m.correct);
        assert_eq!((m.recall, m.fdr), (1.0, 0.0));
    }

    #[test]
    fn superset_and_subset() {
        let m = replicate_metrics(&spec("111100"), &spec("111000")).unwrap();
        assert!(!m.correct);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.fdr, 0.25);
        let m = replicate_metrics(&spec("110000"), &spec("111000")).unwrap();
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.fdr, 0.0);
    }

    #[test]
    fn empty_selection() {
        let m = replicate_metrics(&spec("000000"), &spec("111000")).unwrap();
        assert!(m.is_null);
        assert_eq!((m.recall, m.fdr, m.n_selected), (0.0, 0.0, 0));
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(
            replicate_metrics(&spec("100"), &spec("000")),
            Err(Error::TruthEmpty)
        ));
        assert!(replicate_metrics(&spec("10"), &spec("100")).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_means_and_na() {
        let truth = spec("1100");
        let reps: Vec<_> = ["1100", "1110", "0000", "1000"]
            .iter()
            .map(|s| replicate_metrics(&spec(s), &truth).unwrap())
            .collect();
        let s = aggregate(&reps).unwrap();
        assert_eq!(s.cir, 0.25);
        assert!((s.recall - (1.0 + 1.0 + 0.0 + 0.5) / 4.0).abs() < 1e-15);
        assert!((s.fdr.unwrap() - (1.0 / 3.0) / 4.0).abs() < 1e-15);
        assert!((s.pooled_fdr.unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.null_rate, 0.25);

        let nulls: Vec<_> = ["0000", "0000", "1100"]
            .iter()
            .map(|s| replicate_metrics(&spec(s), &truth).unwrap())
            .collect();
        let s = aggregate(&nulls).unwrap();
        assert_eq!(s.fdr, None);
        assert_eq!(s.pooled_fdr, Some(0.0));
    }
}
