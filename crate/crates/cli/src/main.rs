use std::fs;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use varsel::simgen::{simulate, write_csv};
use varsel::{Family, SimSetting, Study};
use varsel_cli::{render, run_to_dir, Config};

#[derive(Parser)]
#[command(name = "varsel", version, about = "Variable-selection benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (cell, method, replicate) of a configuration.
    Run {
        config: PathBuf,
        /// Worker threads (defaults to the config value, then all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue an interrupted run in the same output directory.
        #[arg(long)]
        resume: bool,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw SVG panel grids from a results directory.
    Render { dir: PathBuf },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Write one simulated dataset as CSV.
    Simulate {
        #[arg(long, default_value = "S1_equicorr")]
        study: Study,
        #[arg(long, default_value = "gaussian")]
        family: Family,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> anyhow::Result<Config> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Config::parse(&src).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            workers,
            seed,
            resume,
            output,
        } => {
            let mut cfg = load(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            let dir = cfg.output.clone();
            let outcome = run_to_dir(&cfg, &dir, resume)?;
            println!(
                "{} records written to {} ({} jobs resumed, {} failed records)",
                outcome.n_records,
                outcome.dir.display(),
                outcome.n_resumed,
                outcome.n_failed
            );
        }
        Command::Render { dir } => {
            let report = render::render_dir(&dir)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            println!("{}", report.figure_data.display());
            if !report.missing.is_empty() {
                eprintln!("warning: {} grid points missing", report.missing.len());
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let cells = varsel_cli::runner::expand(&cfg);
            let runs: usize = cells.iter().map(|c| c.methods.len()).sum::<usize>() * cfg.replicates;
            println!("ok: {} cells, {runs} method runs", cells.len());
        }
        Command::Simulate {
            study,
            family,
            n,
            rho,
            sigma2,
            seed,
            out,
        } => {
            let data = simulate(&SimSetting::new(study, family, n, rho, sigma2, seed))?;
            match out {
                Some(path) => write_csv(&data.dataset, BufWriter::new(fs::File::create(path)?))?,
                None => write_csv(&data.dataset, BufWriter::new(io::stdout().lock()))?,
            }
        }
    }
    Ok(())
}
