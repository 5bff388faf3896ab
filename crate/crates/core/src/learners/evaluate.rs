use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measures::Tri;
use crate::programs::{Index, ProgramTable, DEFAULT_EQUALITY_STAGE};
use crate::randomness::{random_verdict_with, ComplexityEstimator, ComplexityProfile};

use super::{run_learner_with_events, Learner, LearnerEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Ex,
    Bc,
    WeakEx,
    WeakBc,
    Partial,
}

impl Notion {
    fn weak(self) -> bool {
        matches!(self, Notion::WeakEx | Notion::WeakBc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Wrong,
    Unknown,
}

impl From<Tri> for Verdict {
    fn from(t: Tri) -> Self {
        match t {
            Tri::Yes => Verdict::Correct,
            Tri::No => Verdict::Wrong,
            Tri::Unknown => Verdict::Unknown,
        }
    }
}

fn default_threshold() -> i64 {
    48
}

fn default_stage() -> u64 {
    DEFAULT_EQUALITY_STAGE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub notion: Notion,
    /// Measure entry the streams come from, or a real entry when streams are its prefixes.
    pub truth: Index,
    pub horizon: usize,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<Vec<Index>>,
    /// Deficiency bound used by the randomness check.
    #[serde(default = "default_threshold")]
    pub threshold: i64,
    /// Stage at which hypotheses are compared.
    #[serde(default = "default_stage")]
    pub stage: u64,
    /// Prefix lengths recorded in the convergence table; powers of two when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
}

impl EvalConfig {
    pub fn new(notion: Notion, truth: Index, horizon: usize, depth: usize) -> Self {
        EvalConfig {
            notion,
            truth,
            horizon,
            depth,
            class: None,
            threshold: default_threshold(),
            stage: default_stage(),
            grid: None,
        }
    }

    pub fn with_class(mut self, class: Vec<Index>) -> Self {
        self.class = Some(class);
        self
    }

    pub fn grid(&self) -> Vec<usize> {
        match &self.grid {
            Some(g) => g.iter().copied().filter(|&n| n <= self.horizon).collect(),
            None => convergence_grid(self.horizon),
        }
    }

    fn final_quarter(&self) -> usize {
        self.horizon - self.horizon / 4
    }
}

/// Powers of two below `horizon`, then `horizon`.
pub fn convergence_grid(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&n| n < horizon)
        .collect();
    if horizon > 0 {
        out.push(horizon);
    }
    out
}

/// Least `n` with `traj[n..]` constant.
pub fn stabilization_point(traj: &[Index]) -> usize {
    let Some(last) = traj.last() else { return 0 };
    traj.iter().rposition(|g| g != last).map_or(0, |p| p + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub guess: Index,
    pub stabilized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    /// Least `n` after which the guess never changes.
    pub stabilization: usize,
    pub final_guess: Index,
    /// Distinct guesses in the final quarter.
    pub final_quarter_distinct: usize,
    /// Most frequent final-quarter guess and its share.
    pub modal_guess: Index,
    pub modal_share: f64,
    pub verdict: Verdict,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<LearnerEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub notion: Notion,
    pub truth: Index,
    pub horizon: usize,
    pub depth: usize,
    pub seeds: Vec<u64>,
    pub records: Vec<StreamRecord>,
    pub success_fraction: f64,
}

/// Judges the trajectory of one stream.
pub fn judge_trajectory(
    table: &ProgramTable,
    est: &ComplexityEstimator,
    cfg: &EvalConfig,
    seed: u64,
    x: &BitString,
    traj: &[Index],
) -> Result<StreamRecord> {
    let h = cfg.horizon;
    if traj.len() != h + 1 || x.len() < h {
        return Err(Error::config(
            "horizon",
            format!("trajectory of length {} for horizon {h}", traj.len()),
        ));
    }
    let q0 = cfg.final_quarter();
    let stab = stabilization_point(traj);
    let last = traj[h];
    let quarter = &traj[q0..];
    let mut counts: HashMap<Index, usize> = HashMap::new();
    for &g in quarter {
        *counts.entry(g).or_default() += 1;
    }
    let (modal, modal_count) = counts
        .iter()
        .map(|(&g, &c)| (g, c))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    let modal_share = modal_count as f64 / quarter.len() as f64;
    let mut judge = Judge {
        table,
        est,
        cfg,
        x: &x.prefix(h),
        profile: None,
    };
    let (verdict, success) = match cfg.notion {
        Notion::Ex | Notion::WeakEx => {
            let v = judge.correct(last)?;
            (v, stab <= q0 && v == Verdict::Correct)
        }
        Notion::Bc | Notion::WeakBc => {
            let mut distinct: Vec<Index> = counts.keys().copied().collect();
            distinct.sort_unstable();
            let mut v = Verdict::Correct;
            for &g in &distinct {
                v = worse(v, judge.correct(g)?);
                if g != distinct[0] {
                    v = worse(v, judge.same(g, distinct[0])?);
                }
                if v == Verdict::Wrong {
                    break;
                }
            }
            (v, v == Verdict::Correct)
        }
        Notion::Partial => {
            let v = judge.same(modal, cfg.truth)?;
            (
                v,
                modal_share >= 0.9 && last == modal && v == Verdict::Correct,
            )
        }
    };
    let grid = cfg
        .grid()
        .into_iter()
        .map(|n| GridPoint {
            n,
            guess: traj[n],
            stabilized: n >= stab,
        })
        .collect();
    Ok(StreamRecord {
        seed,
        grid,
        stabilization: stab,
        final_guess: last,
        final_quarter_distinct: counts.len(),
        modal_guess: modal,
        modal_share,
        verdict,
        success,
        events: Vec::new(),
    })
}

fn worse(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Wrong, _) | (_, Verdict::Wrong) => Verdict::Wrong,
        (Verdict::Unknown, _) | (_, Verdict::Unknown) => Verdict::Unknown,
        _ => Verdict::Correct,
    }
}

struct Judge<'a> {
    table: &'a ProgramTable,
    est: &'a ComplexityEstimator,
    cfg: &'a EvalConfig,
    x: &'a BitString,
    profile: Option<ComplexityProfile>,
}

impl Judge<'_> {
    fn real_mode(&self) -> Result<bool> {
        Ok(!self.table.is_measure(self.cfg.truth)?)
    }

    fn same(&self, a: Index, b: Index) -> Result<Verdict> {
        if self.real_mode()? {
            let depth = self.cfg.depth;
            let pa = self.table.real_prefix(a, self.cfg.stage)?;
            let pb = self.table.real_prefix(b, self.cfg.stage)?;
            let n = pa.common_prefix(&pb).len();
            return Ok(if n >= depth {
                Verdict::Correct
            } else if n < pa.len().min(pb.len()) {
                Verdict::Wrong
            } else {
                Verdict::Unknown
            });
        }
        if !self.table.is_measure(a)? || !self.table.is_measure(b)? {
            return Ok(Verdict::Wrong);
        }
        Ok(self
            .table
            .measures_equal(a, b, self.cfg.depth, self.cfg.stage)?
            .into())
    }

    /// Class membership (for the strong notions) and randomness of the stream.
    fn correct(&mut self, e: Index) -> Result<Verdict> {
        let member = match (&self.cfg.class, self.cfg.notion.weak()) {
            (Some(class), false) => {
                let mut v = Verdict::Wrong;
                for &c in class {
                    match self.same(e, c)? {
                        Verdict::Correct => {
                            v = Verdict::Correct;
                            break;
                        }
                        Verdict::Unknown => v = Verdict::Unknown,
                        Verdict::Wrong => {}
                    }
                }
                v
            }
            _ => Verdict::Correct,
        };
        if member == Verdict::Wrong {
            return Ok(member);
        }
        if self.real_mode()? {
            let truth = self.same(e, self.cfg.truth)?;
            return Ok(worse(member, truth));
        }
        if !self.table.is_measure(e)? {
            return Ok(Verdict::Wrong);
        }
        let profile = self.profile.get_or_insert_with(|| {
            let mut p = self.est.profile();
            p.extend(self.x);
            p
        });
        let random = random_verdict_with(self.table, profile, e, self.cfg.threshold)?;
        Ok(if random { member } else { Verdict::Wrong })
    }
}

/// Constructs a learner for one stream, over that stream's table.
pub type LearnerFactory<'a> = dyn Fn(Arc<ProgramTable>) -> Result<Box<dyn Learner>> + Sync + 'a;

/// Runs a fresh learner on each stream (in parallel, each over its own fork of `table`) and judges it.
pub fn evaluate(
    table: &ProgramTable,
    est: &ComplexityEstimator,
    make: &LearnerFactory<'_>,
    cfg: &EvalConfig,
    streams: &[(u64, BitString)],
) -> Result<SuccessReport> {
    if cfg.horizon == 0 {
        return Err(Error::config("horizon", "horizon must be at least 1"));
    }
    if streams.is_empty() {
        return Err(Error::config("seeds", "no streams to evaluate"));
    }
    let records = streams
        .par_iter()
        .map(|(seed, x)| {
            if x.len() < cfg.horizon {
                return Err(Error::SourceExhausted(x.len()));
            }
            let fork = Arc::new(table.fork());
            let learner = make(Arc::clone(&fork))?;
            let (traj, events) = run_learner_with_events(&*learner, &x.prefix(cfg.horizon))?;
            let mut record = judge_trajectory(&fork, est, cfg, *seed, x, &traj)?;
            record.events = events;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let wins = records.iter().filter(|r| r.success).count();
    Ok(SuccessReport {
        notion: cfg.notion,
        truth: cfg.truth,
        horizon: cfg.horizon,
        depth: cfg.depth,
        seeds: streams.iter().map(|s| s.0).collect(),
        success_fraction: wins as f64 / records.len() as f64,
        records,
    })
}
