//! Result rows and their CSV layouts.
//!
//! * `replicates.csv`: one row per (cell, method, replicate); deterministic.
//! * `timings.csv`: wall-clock seconds per row of `replicates.csv`.
//! * `summary.csv`: the per-(cell, method) aggregate of `replicates.csv`.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use varsel::{aggregate, Family, MethodName, MetricsSummary, ModelSpec, ReplicateMetrics};

/// One method applied to one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Position of the cell in the expanded grid; fixes the canonical order.
    pub cell: usize,
    pub study: String,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub method: MethodName,
    pub replicate: usize,
    /// `ok`, or the error that stopped the method.
    pub status: String,
    /// Bit string, `x1` first.
    pub selected: String,
    pub truth: String,
    pub correct: bool,
    pub recall: f64,
    pub fdr: f64,
    pub is_null: bool,
    pub n_selected: usize,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn sort_key(&self) -> (usize, MethodName, usize) {
        (self.cell, self.method, self.replicate)
    }

    pub fn metrics(&self) -> Option<ReplicateMetrics> {
        if !self.is_ok() {
            return None;
        }
        let selected = ModelSpec::from_bit_string(&self.selected)?;
        let truth = ModelSpec::from_bit_string(&self.truth)?;
        varsel::replicate_metrics(&selected, &truth).ok()
    }
}

#[derive(Serialize)]
struct ReplicateRow<'a> {
    study: &'a str,
    family: Family,
    p: usize,
    n: usize,
    rho: f64,
    sigma2: f64,
    method: MethodName,
    replicate: usize,
    status: &'a str,
    selected: &'a str,
    correct: bool,
    recall: f64,
    fdr: f64,
    is_null: bool,
    n_selected: usize,
}

impl<'a> From<&'a RunRecord> for ReplicateRow<'a> {
    fn from(r: &'a RunRecord) -> Self {
        Self {
            study: &r.study,
            family: r.family,
            p: r.p,
            n: r.n,
            rho: r.rho,
            sigma2: r.sigma2,
            method: r.method,
            replicate: r.replicate,
            status: &r.status,
            selected: &r.selected,
            correct: r.correct,
            recall: r.recall,
            fdr: r.fdr,
            is_null: r.is_null,
            n_selected: r.n_selected,
        }
    }
}

#[derive(Serialize)]
struct TimingRow<'a> {
    study: &'a str,
    family: Family,
    n: usize,
    rho: f64,
    sigma2: f64,
    method: MethodName,
    replicate: usize,
    wall_time: f64,
}

pub fn write_replicates(path: &Path, records: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(ReplicateRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings(path: &Path, records: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(TimingRow {
            study: &r.study,
            family: r.family,
            n: r.n,
            rho: r.rho,
            sigma2: r.sigma2,
            method: r.method,
            replicate: r.replicate,
            wall_time: r.wall_time,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// A row of `replicates.csv` as read back from disk.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StoredReplicate {
    pub study: String,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub method: MethodName,
    pub replicate: usize,
    pub status: String,
    pub selected: String,
    pub correct: bool,
    pub recall: f64,
    pub fdr: f64,
    pub is_null: bool,
    pub n_selected: usize,
}

pub fn read_replicates(path: &Path) -> csv::Result<Vec<StoredReplicate>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study: String,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub method: MethodName,
    pub n_replicates: usize,
    pub n_failed: usize,
    pub cir: f64,
    pub recall: f64,
    /// `NA` when most selections were empty.
    #[serde(with = "na")]
    pub fdr: Option<f64>,
    #[serde(with = "na")]
    pub pooled_fdr: Option<f64>,
    pub null_rate: f64,
    pub mean_selected: f64,
}

impl SummaryRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "cir" => Some(self.cir),
            "recall" => Some(self.recall),
            "fdr" => self.fdr,
            "pooled_fdr" => self.pooled_fdr,
            "null_rate" => Some(self.null_rate),
            _ => None,
        }
    }
}

mod na {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("NA"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "NA" {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

/// Minimal view of a result row needed for aggregation.
pub trait ResultRow {
    fn key(&self) -> (String, Family, usize, usize, u64, u64, MethodName);
    fn metrics(&self) -> Option<ReplicateMetrics>;
}

impl ResultRow for RunRecord {
    fn key(&self) -> (String, Family, usize, usize, u64, u64, MethodName) {
        (self.study.clone(), self.family, self.p, self.n, self.rho.to_bits(), self.sigma2.to_bits(), self.method)
    }

    fn metrics(&self) -> Option<ReplicateMetrics> {
        RunRecord::metrics(self)
    }
}

impl ResultRow for StoredReplicate {
    fn key(&self) -> (String, Family, usize, usize, u64, u64, MethodName) {
        (self.study.clone(), self.family, self.p, self.n, self.rho.to_bits(), self.sigma2.to_bits(), self.method)
    }

    fn metrics(&self) -> Option<ReplicateMetrics> {
        if self.status != "ok" {
            return None;
        }
        Some(ReplicateMetrics {
            correct: self.correct,
            recall: self.recall,
            fdr: self.fdr,
            is_null: self.is_null,
            n_selected: self.n_selected,
            n_false: (self.fdr * self.n_selected as f64).round() as usize,
        })
    }
}

/// Aggregates rows per (cell, method), keeping first-appearance order.
pub fn summarize<R: ResultRow>(rows: &[R]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<_, (Vec<ReplicateMetrics>, usize)> = BTreeMap::new();
    for r in rows {
        let key = r.key();
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), 0)
        });
        match r.metrics() {
            Some(m) => entry.0.push(m),
            None => entry.1 += 1,
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (metrics, failed) = &groups[&key];
            let (study, family, p, n, rho, sigma2, method) = key;
            let s = aggregate(metrics).ok();
            let get = |f: fn(&MetricsSummary) -> f64| s.as_ref().map_or(f64::NAN, f);
            SummaryRow {
                study,
                family,
                p,
                n,
                rho: f64::from_bits(rho),
                sigma2: f64::from_bits(sigma2),
                method,
                n_replicates: metrics.len(),
                n_failed: *failed,
                cir: get(|s| s.cir),
                recall: get(|s| s.recall),
                fdr: s.as_ref().and_then(|s| s.fdr),
                pooled_fdr: s.as_ref().and_then(|s| s.pooled_fdr),
                null_rate: get(|s| s.null_rate),
                mean_selected: get(|s| s.mean_selected),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> csv::Result<Vec<SummaryRow>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

/// Appends complete jobs to the partial-results file, which stores full
/// records including `cell` and `wall_time`.
pub struct PartialWriter {
    inner: csv::Writer<std::fs::File>,
}

impl PartialWriter {
    pub fn create(path: &Path, existing: &[RunRecord]) -> io::Result<Self> {
        let file = std::fs::File::create(path)?;
        let mut inner = csv::Writer::from_writer(file);
        for r in existing {
            inner.serialize(r).map_err(io::Error::other)?;
        }
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn append(&mut self, job: &[RunRecord]) -> io::Result<()> {
        for r in job {
            self.inner.serialize(r).map_err(io::Error::other)?;
        }
        self.inner.flush()
    }
}

/// Rows of a partial file that parsed cleanly; a torn final line is dropped.
pub fn read_partial(path: &Path) -> io::Result<Vec<RunRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(io::Error::other)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RunRecord>() {
        match row {
            Ok(r) => out.push(r),
            Err(e) => {
                log::warn!("ignoring unreadable partial-result row: {e}");
                break;
            }
        }
    }
    Ok(out)
}
