//! Running a configured experiment end to end.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::learners::{evaluate, EvalConfig, Learner, SuccessReport};
use crate::programs::{Index, ProgramTable};

use super::config::{ExperimentConfig, StreamKind};
use super::report::Report;

/// The streams for `truth`: seeded samples of a measure or the prefix of a real.
pub fn streams_for(
    table: &ProgramTable,
    truth: Index,
    kind: StreamKind,
    seeds: &[u64],
    horizon: usize,
) -> Result<Vec<(u64, BitString)>> {
    let sampled = match kind {
        StreamKind::Auto => table.is_measure(truth)?,
        StreamKind::Sampled => true,
        StreamKind::Prefix => false,
    };
    if sampled {
        let mu = table.exact_measure(truth)?.ok_or_else(|| {
            Error::config(
                "truths",
                format!("entry {truth} has no exact measure to sample"),
            )
        })?;
        seeds
            .iter()
            .map(|&s| Ok((s, mu.sample(s, horizon)?)))
            .collect()
    } else {
        let x = table.real_prefix(truth, horizon as u64)?;
        if x.len() < horizon {
            return Err(Error::config(
                "truths",
                format!("real {truth} defines only {} of {horizon} bits", x.len()),
            ));
        }
        let x = x.prefix(horizon);
        Ok(seeds.iter().map(|&s| (s, x.clone())).collect())
    }
}

/// Builds the table and learner, evaluates every truth, and writes the configured outputs.
///
/// Relative manifest paths are resolved against `base`.
pub fn run_experiment(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Report> {
    let start = Instant::now();
    let manifest = cfg.manifest.load(base)?;
    let table = Arc::new(ProgramTable::from_manifest(&manifest)?);
    cfg.validate(&table)?;
    let est = cfg.estimator()?;
    let seeds = cfg.seeds.to_vec();
    let learner = cfg.learner.build(&table, &est, "learner")?.describe();
    let make = |t: Arc<ProgramTable>| -> Result<Box<dyn Learner>> {
        Ok(Box::new(cfg.learner.build(&t, &est, "learner")?))
    };
    let mut results: Vec<SuccessReport> = Vec::with_capacity(cfg.truths.len());
    for &truth in &cfg.truths {
        let streams = streams_for(&table, truth, cfg.stream, &seeds, cfg.horizon)?;
        let eval = EvalConfig {
            notion: cfg.notion,
            truth,
            horizon: cfg.horizon,
            depth: cfg.depth,
            class: cfg.class.clone(),
            threshold: cfg.threshold,
            stage: cfg.stage,
            grid: cfg.grid.clone(),
        };
        results.push(evaluate(&table, &est, &make, &eval, &streams)?);
    }
    let passed = cfg
        .success_threshold
        .map(|t| results.iter().all(|r| r.success_fraction >= t));
    let report = Report {
        config: cfg.clone(),
        manifest_hash: table.manifest_hash().to_string(),
        learner,
        results,
        passed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &cfg.output.json {
        report.write_json(path)?;
    }
    if let Some(path) = &cfg.output.csv {
        report.write_csv(path)?;
    }
    Ok(report)
}
