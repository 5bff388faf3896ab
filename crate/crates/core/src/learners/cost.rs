use std::sync::Arc;

use crate::bits::BitString;
use crate::error::Result;
use crate::programs::{Index, ProgramTable};
use crate::randomness::Deficiency;
use crate::transforms::ParamMap;

use super::{neg_log2_ceiling, Learner, Session};

/// How a real index `e` is turned into a measure index `g(e)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftKind {
    Bernoulli,
    Param(ParamMap),
}

/// Least `e ≤ |σ|` with `oracle(e, |σ|) = 1` minimizing `e + d(g(e), σ)[|σ|]`; outputs `g(e)`.
///
/// The complexity term of `d` is the same for every `e`, so it is left out of the comparison.
pub struct CostOracleLearner {
    table: Arc<ProgramTable>,
    lifts: Vec<Option<Index>>,
    fallback: Index,
}

impl CostOracleLearner {
    pub fn new(table: Arc<ProgramTable>, kind: LiftKind) -> Result<Self> {
        let mut lifts = Vec::new();
        for e in 0..table.base_len() {
            lifts.push(if table.is_real(e)? {
                Some(match kind {
                    LiftKind::Bernoulli => table.bernoulli_lift(e)?,
                    LiftKind::Param(map) => table.param_lift(map, e)?,
                })
            } else {
                None
            });
        }
        Ok(CostOracleLearner {
            table,
            lifts,
            fallback: 0,
        })
    }

    /// `g(e)` for base entry `e`.
    pub fn lift_of(&self, e: Index) -> Option<Index> {
        self.lifts.get(e as usize).copied().flatten()
    }

    fn choose(&self, zeros: u64, ones: u64, word: &BitString) -> Result<Index> {
        let s = zeros + ones;
        let top = (s as usize).min(self.lifts.len().saturating_sub(1));
        let mut best: Option<(Deficiency, Index)> = None;
        for (e, lift) in self.lifts.iter().enumerate().take(top + 1) {
            let Some(g) = *lift else { continue };
            if !self.table.totality_oracle(e as Index, s)? {
                continue;
            }
            let d = neg_log2_ceiling(&self.table, g, zeros, ones, Some(word))?.unwrap();
            let cost = match d {
                Deficiency::Finite(v) => Deficiency::Finite(v + e as i64),
                Deficiency::Infinite => Deficiency::Infinite,
            };
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, e as Index));
            }
        }
        Ok(best.map_or(self.fallback, |(_, e)| self.lifts[e as usize].unwrap()))
    }
}

struct CostSession<'a> {
    learner: &'a CostOracleLearner,
    word: BitString,
    zeros: u64,
    current: Index,
}

impl Session for CostSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        self.word.push(b);
        self.zeros += u64::from(!b);
        let ones = self.word.len() as u64 - self.zeros;
        self.current = self.learner.choose(self.zeros, ones, &self.word)?;
        Ok(self.current)
    }
}

impl Learner for CostOracleLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        let current = self.choose(0, 0, &BitString::new())?;
        Ok(Box::new(CostSession {
            learner: self,
            word: BitString::new(),
            zeros: 0,
            current,
        }))
    }

    fn describe(&self) -> String {
        "cost_oracle".into()
    }
}
