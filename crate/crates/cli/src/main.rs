use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mlab_core::harness::{
    load_suite, run_experiment, streams_for, ExperimentConfig, Report, StreamKind,
};
use mlab_core::learners::run_learner_with_events;
use mlab_core::{Index, Manifest, ProgramTable};

/// Simulate learners for computable measures and reals on Cantor space.
#[derive(Parser)]
#[command(name = "mlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print streams drawn from a table entry: seeded samples of a measure, or a real's prefix.
    Sample {
        /// Manifest JSON file.
        #[arg(long)]
        manifest: PathBuf,
        /// Entry to draw from.
        #[arg(long)]
        entry: Index,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Stream length in bits.
        #[arg(long, default_value_t = 64)]
        len: usize,
    },
    /// Run the learner of a config on one stream and print its guesses on the grid.
    Learn(StreamArgs),
    /// Build the transform tree of a config, run it on one stream, and print the entries it outputs.
    Transform(StreamArgs),
    /// Run every experiment of a config file and print success fractions.
    ///
    /// Exits with status 1 when a configured success threshold is missed.
    Bench {
        /// Config file holding one experiment or a list.
        config: PathBuf,
        /// Write the JSON report here (suffixed by the experiment position for lists).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the convergence table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-render the convergence table of a JSON report.
    Report {
        /// JSON report written by `bench`.
        json: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StreamArgs {
    /// Config file; the first experiment is used unless `--experiment` is given.
    config: PathBuf,
    /// Position of the experiment in a config list.
    #[arg(long, default_value_t = 0)]
    experiment: usize,
    /// Truth entry; the first configured truth by default.
    #[arg(long)]
    truth: Option<Index>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream length; the configured horizon by default.
    #[arg(long)]
    len: Option<usize>,
}

fn base_dir(path: &Path) -> Option<&Path> {
    path.parent()
}

fn load_one(args: &StreamArgs) -> Result<ExperimentConfig> {
    let mut suite = load_suite(&args.config)?;
    if args.experiment >= suite.len() {
        bail!(
            "{} holds {} experiments",
            args.config.display(),
            suite.len()
        );
    }
    Ok(suite.swap_remove(args.experiment))
}

fn table_for(cfg: &ExperimentConfig, path: &Path) -> Result<Arc<ProgramTable>> {
    let manifest = cfg.manifest.load(base_dir(path))?;
    let table = Arc::new(ProgramTable::from_manifest(&manifest)?);
    cfg.validate(&table)?;
    Ok(table)
}

fn run_one(args: &StreamArgs, list_entries: bool) -> Result<()> {
    let cfg = load_one(args)?;
    let table = table_for(&cfg, &args.config)?;
    let est = cfg.estimator()?;
    let learner = cfg.learner.build(&table, &est, "learner")?;
    let truth = args.truth.unwrap_or(cfg.truths[0]);
    let len = args.len.unwrap_or(cfg.horizon);
    let (_, x) = streams_for(&table, truth, cfg.stream, &[args.seed], len)?.remove(0);
    let (traj, events) = run_learner_with_events(&learner, &x)?;
    println!("learner: {}", learner.describe());
    if list_entries {
        let mut seen: Vec<Index> = Vec::new();
        for &g in &traj {
            if !seen.contains(&g) {
                seen.push(g);
                println!("{g}\t{}", table.describe(g)?);
            }
        }
        return Ok(());
    }
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_else(|| mlab_core::learners::convergence_grid(len));
    for n in grid.into_iter().filter(|&n| n <= len) {
        println!("n={n}\tguess={}", traj[n]);
    }
    for e in events {
        println!("event n={} {}: {}", e.n, e.kind, e.detail);
    }
    Ok(())
}

fn numbered(path: &Path, i: usize, count: usize) -> PathBuf {
    if count == 1 {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
    path.with_file_name(format!("{stem}.{i}.{ext}"))
}

fn bench(config: &Path, json: Option<PathBuf>, csv: Option<PathBuf>) -> Result<bool> {
    let suite = load_suite(config)?;
    let count = suite.len();
    let mut ok = true;
    for (i, mut cfg) in suite.into_iter().enumerate() {
        if let Some(p) = &json {
            cfg.output.json = Some(numbered(p, i, count));
        }
        if let Some(p) = &csv {
            cfg.output.csv = Some(numbered(p, i, count));
        }
        let report = run_experiment(&cfg, base_dir(config))
            .with_context(|| format!("experiment {:?}", cfg.name))?;
        for r in &report.results {
            println!(
                "{}\ttruth={}\tsuccess={:.3}\t({} seeds)",
                cfg.name,
                r.truth,
                r.success_fraction,
                r.records.len()
            );
        }
        match report.passed {
            Some(true) => println!("{}\tPASS", cfg.name),
            Some(false) => {
                println!("{}\tFAIL", cfg.name);
                ok = false;
            }
            None => {}
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample {
            manifest,
            entry,
            seeds,
            len,
        } => (|| {
            let text = std::fs::read_to_string(&manifest)
                .with_context(|| manifest.display().to_string())?;
            let m: Manifest =
                serde_json::from_str(&text).with_context(|| manifest.display().to_string())?;
            let table = ProgramTable::from_manifest(&m)?;
            for (seed, x) in streams_for(&table, entry, StreamKind::Auto, &seeds, len)? {
                println!("{seed}\t{x}");
            }
            Ok(true)
        })(),
        Command::Learn(args) => run_one(&args, false).map(|_| true),
        Command::Transform(args) => run_one(&args, true).map(|_| true),
        Command::Bench { config, json, csv } => bench(&config, json, csv),
        Command::Report { json, csv } => (|| {
            let report = Report::read_json(&json)?;
            match csv {
                Some(p) => report.write_csv(&p)?,
                None => print!("{}", report.convergence_csv()),
            }
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
