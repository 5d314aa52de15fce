//! Grid expansion and parallel execution of benchmark runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use varsel::simgen::{mix_seed, replicate_seed};
use varsel::{replicate_metrics, select_model, simulate, Family, MethodName, MethodSettings, ModelSpec, SimSetting, Study};

use crate::config::Config;
use crate::records::{self, PartialWriter, RunRecord};

pub const REPLICATES_FILE: &str = "replicates.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PARTIAL_FILE: &str = "replicates.partial.csv";
/// Present while a run is in progress or was interrupted.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// One point of a study grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub label: String,
    pub study: Study,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub beta_value: f64,
    pub methods: Vec<MethodName>,
}

impl Cell {
    /// Seed component that depends only on the cell's coordinates.
    pub fn key(&self) -> u64 {
        let label = self
            .label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01B3));
        mix_seed(&[
            label,
            self.family as u64,
            self.p as u64,
            self.n as u64,
            self.rho.to_bits(),
            self.sigma2.to_bits(),
            self.beta_value.to_bits(),
        ])
    }

    pub fn setting(&self, seed: u64) -> SimSetting {
        let mut s = SimSetting::new(self.study, self.family, self.n, self.rho, self.sigma2, seed);
        s.p = self.p;
        s.true_support = self.study.default_support(self.p);
        s.beta_value = self.beta_value;
        s
    }
}

pub fn expand(config: &Config) -> Vec<Cell> {
    let mut cells = Vec::new();
    for study in &config.studies {
        let methods = {
            let mut m = study.methods(&config.methods).to_vec();
            m.sort();
            m.dedup();
            m
        };
        for &sigma2 in &study.sigma2 {
            for &rho in &study.rho {
                for &n in &study.n {
                    cells.push(Cell {
                        index: cells.len(),
                        label: study.label(),
                        study: study.design,
                        family: study.family,
                        p: study.p(),
                        n,
                        rho,
                        sigma2,
                        beta_value: study.beta_value(),
                        methods: methods.clone(),
                    });
                }
            }
        }
    }
    cells
}

/// Simulates replicate `replicate` of `cell` and runs every method on it.
pub fn run_job(cell: &Cell, replicate: usize, base_seed: u64, settings: &MethodSettings) -> Vec<RunRecord> {
    let seed = replicate_seed(base_seed, cell.key(), replicate as u64);
    let setting = cell.setting(seed);
    let truth = setting.true_support.clone();
    let base = |method: MethodName| RunRecord {
        cell: cell.index,
        study: cell.label.clone(),
        family: cell.family,
        p: cell.p,
        n: cell.n,
        rho: cell.rho,
        sigma2: cell.sigma2,
        method,
        replicate,
        status: "ok".into(),
        selected: ModelSpec::empty(cell.p).to_bit_string(),
        truth: truth.to_bit_string(),
        correct: false,
        recall: 0.0,
        fdr: 0.0,
        is_null: true,
        n_selected: 0,
        wall_time: 0.0,
    };
    let data = match simulate(&setting) {
        Ok(d) => d,
        Err(e) => {
            return cell
                .methods
                .iter()
                .map(|&m| RunRecord {
                    status: format!("simulation failed: {e}"),
                    ..base(m)
                })
                .collect()
        }
    };
    cell.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = select_model(&data.dataset, method, settings, mix_seed(&[seed, method.id()]));
            let wall_time = start.elapsed().as_secs_f64();
            let mut rec = RunRecord { wall_time, ..base(method) };
            match outcome.and_then(|s| replicate_metrics(&s.selected, &truth).map(|m| (s, m))) {
                Ok((sel, m)) => {
                    rec.selected = sel.selected.to_bit_string();
                    rec.correct = m.correct;
                    rec.recall = m.recall;
                    rec.fdr = m.fdr;
                    rec.is_null = m.is_null;
                    rec.n_selected = m.n_selected;
                }
                Err(e) => {
                    log::warn!("{method} failed on {} n={} replicate {replicate}: {e}", cell.label, cell.n);
                    rec.status = e.to_string();
                }
            }
            rec
        })
        .collect()
}

fn sort_canonical(records: &mut [RunRecord]) {
    records.sort_by_key(|r| r.sort_key());
}

fn pool(config: &Config) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        b = b.num_threads(w);
    }
    Ok(b.build()?)
}

fn jobs(cells: &[Cell], replicates: usize) -> Vec<(usize, usize)> {
    (0..cells.len())
        .flat_map(|c| (0..replicates).map(move |r| (c, r)))
        .collect()
}

/// Runs the whole grid in memory and returns records in canonical order.
pub fn run_in_memory(config: &Config) -> anyhow::Result<Vec<RunRecord>> {
    config.validate()?;
    let cells = expand(config);
    let settings = config.method_settings();
    let mut records: Vec<RunRecord> = pool(config)?.install(|| {
        jobs(&cells, config.replicates)
            .into_par_iter()
            .flat_map_iter(|(c, r)| run_job(&cells[c], r, config.seed, &settings))
            .collect()
    });
    sort_canonical(&mut records);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub n_records: usize,
    pub n_resumed: usize,
    pub n_failed: usize,
}

fn manifest_text(config: &Config) -> String {
    let mut resolved = config.clone();
    resolved.workers = None;
    format!(
        "# varsel benchmark manifest\n# format = 1\n# cells = {}\n\n{}",
        expand(config).len(),
        resolved.to_toml()
    )
}

/// Runs the grid into `dir`, streaming completed jobs to a partial file so
/// an interrupted run can be resumed.
pub fn run_to_dir(config: &Config, dir: &Path, resume: bool) -> anyhow::Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let partial_path = dir.join(PARTIAL_FILE);
    let marker = dir.join(INCOMPLETE_MARKER);
    let manifest = manifest_text(config);
    let cells = expand(config);

    let mut done: Vec<RunRecord> = Vec::new();
    if resume {
        if !marker.exists() {
            bail!("{} holds no interrupted run to resume", dir.display());
        }
        let previous = fs::read_to_string(&manifest_path).context("reading manifest")?;
        if previous != manifest {
            bail!("configuration differs from the manifest of the interrupted run");
        }
        if partial_path.exists() {
            done = complete_jobs(records::read_partial(&partial_path)?, &cells);
        }
    } else if dir.join(REPLICATES_FILE).exists() || marker.exists() {
        bail!(
            "{} already holds results; pick a new output directory or pass --resume",
            dir.display()
        );
    }
    fs::write(&marker, "run in progress or interrupted; rerun with --resume\n")?;
    fs::write(&manifest_path, &manifest)?;

    let finished: BTreeSet<(usize, usize)> = done.iter().map(|r| (r.cell, r.replicate)).collect();
    let n_resumed = finished.len();
    let todo: Vec<(usize, usize)> = jobs(&cells, config.replicates)
        .into_iter()
        .filter(|j| !finished.contains(j))
        .collect();
    log::info!(
        "{} cells x {} replicates: {} jobs to run, {} resumed",
        cells.len(),
        config.replicates,
        todo.len(),
        n_resumed
    );

    let mut writer = PartialWriter::create(&partial_path, &done)?;
    let settings = config.method_settings();
    let (tx, rx) = mpsc::channel::<Vec<RunRecord>>();
    let pool = pool(config)?;
    let total = todo.len();
    let new_records = std::thread::scope(|scope| -> anyhow::Result<Vec<RunRecord>> {
        let producer = scope.spawn(|| {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(c, r)| {
                    let _ = tx.send(run_job(&cells[c], r, config.seed, &settings));
                })
            })
        });
        let mut out = Vec::new();
        for (i, job) in rx.iter().enumerate() {
            writer.append(&job)?;
            out.extend(job);
            if (i + 1) % 100 == 0 || i + 1 == total {
                log::info!("{}/{total} jobs complete", i + 1);
            }
        }
        producer.join().expect("worker pool panicked");
        Ok(out)
    })?;

    let mut all = done;
    all.extend(new_records);
    sort_canonical(&mut all);
    records::write_replicates(&dir.join(REPLICATES_FILE), &all)?;
    records::write_timings(&dir.join(TIMINGS_FILE), &all)?;
    records::write_summary(&dir.join(SUMMARY_FILE), &records::summarize(&all))?;
    fs::remove_file(&partial_path)?;
    fs::remove_file(&marker)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        n_records: all.len(),
        n_resumed,
        n_failed: all.iter().filter(|r| !r.is_ok()).count(),
    })
}

/// Keeps only jobs whose every method record is present.
fn complete_jobs(records: Vec<RunRecord>, cells: &[Cell]) -> Vec<RunRecord> {
    let mut by_job: BTreeMap<(usize, usize), Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        by_job.entry((r.cell, r.replicate)).or_default().push(r);
    }
    by_job
        .into_iter()
        .filter(|((c, _), recs)| {
            cells.get(*c).is_some_and(|cell| {
                let have: BTreeSet<MethodName> = recs.iter().map(|r| r.method).collect();
                have.len() == recs.len() && have.iter().copied().eq(cell.methods.iter().copied())
            })
        })
        .flat_map(|(_, recs)| recs)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> Config {
        Config::parse(
            r#"
seed = 3
replicates = 2
methods = ["BIC", "Stepwise_BIC"]

[[study]]
design = "S1_equicorr"
n = [50, 100]
rho = [0.0, 0.5]
sigma2 = [6.25]
"#,
        )
        .unwrap()
    }

    #[test]
    fn grid_expansion_order() {
        let cells = expand(&config());
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[0].n, cells[0].rho), (50, 0.0));
        assert_eq!((cells[1].n, cells[1].rho), (100, 0.0));
        assert_eq!((cells[2].n, cells[2].rho), (50, 0.5));
        assert!(cells.iter().all(|c| c.methods == [MethodName::Bic, MethodName::StepwiseBic]));
        let keys: BTreeSet<u64> = cells.iter().map(Cell::key).collect();
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn job_is_reproducible() {
        let c = config();
        let cells = expand(&c);
        let settings = c.method_settings();
        let strip = |mut v: Vec<RunRecord>| {
            v.iter_mut().for_each(|r| r.wall_time = 0.0);
            v
        };
        assert_eq!(
            strip(run_job(&cells[1], 1, 3, &settings)),
            strip(run_job(&cells[1], 1, 3, &settings))
        );
    }

    #[test]
    fn incomplete_jobs_are_dropped() {
        let c = config();
        let cells = expand(&c);
        let settings = c.method_settings();
        let mut recs = run_job(&cells[0], 0, 3, &settings);
        let partial = run_job(&cells[0], 1, 3, &settings);
        recs.push(partial[0].clone());
        let kept = complete_jobs(recs, &cells);
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|r| r.replicate == 0));
    }
}
