use std::sync::Arc;

use crate::bits::BitString;
use crate::error::Result;
use crate::programs::{Index, ProgramTable};
use crate::randomness::{ComplexityEstimator, ComplexityProfile, Deficiency};

use super::{neg_log2_ceiling, Learner, Session};

/// Partial learner for every measure in the table.
///
/// At length `s` it takes the least `i` such that `s` is `i`-expansionary and
/// `d_i(σ)[s] ≤ i`, and outputs the first padding copy `p(i, j)` above every stage
/// at which a smaller `k` passed the same test.
pub struct UniversalPartialLearner {
    table: Arc<ProgramTable>,
    est: ComplexityEstimator,
    candidates: Vec<Index>,
}

impl UniversalPartialLearner {
    pub fn new(table: Arc<ProgramTable>, est: ComplexityEstimator) -> Result<Self> {
        let mut candidates = Vec::new();
        for e in 0..table.base_len() {
            if table.is_measure(e)? {
                candidates.push(e);
            }
        }
        Ok(UniversalPartialLearner {
            table,
            est,
            candidates,
        })
    }
}

struct UniversalSession<'a> {
    learner: &'a UniversalPartialLearner,
    word: BitString,
    zeros: u64,
    profile: ComplexityProfile,
    /// `max_{t<s} ℓ_i[t]` per candidate.
    longest: Vec<u64>,
    /// Last stage at which each candidate was expansionary with its gate open.
    gated: Vec<Option<u64>>,
    current: Index,
}

impl Session for UniversalSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        let l = self.learner;
        self.word.push(b);
        self.profile.push(b);
        self.zeros += u64::from(!b);
        let s = self.word.len() as u64;
        let ones = s - self.zeros;
        let k_hat = self.profile.get(s as usize, s);
        let mut winner = None;
        let mut passed = Vec::new();
        for (k, &i) in l.candidates.iter().enumerate() {
            if i > s {
                break;
            }
            let len = l.table.definedness_length(i, s)?;
            if len <= self.longest[k] {
                continue;
            }
            self.longest[k] = len;
            let negl = neg_log2_ceiling(&l.table, i, self.zeros, ones, Some(&self.word))?.unwrap();
            let d = match negl {
                Deficiency::Finite(v) => Deficiency::Finite(v - k_hat as i64),
                inf => inf,
            };
            if d.at_most(i as i64) {
                passed.push(k);
                if winner.is_none() {
                    winner = Some(k);
                }
            }
        }
        if let Some(k) = winner {
            let i = l.candidates[k];
            let bar = self.gated[..k].iter().flatten().max().copied();
            let mut j = 0;
            let mut e = l.table.pad(i, j)?;
            while bar.is_some_and(|t| e <= t) {
                j += 1;
                e = l.table.pad(i, j)?;
            }
            self.current = e;
        }
        for k in passed {
            self.gated[k] = Some(s);
        }
        Ok(self.current)
    }
}

impl Learner for UniversalPartialLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        let n = self.candidates.len();
        let mut longest = vec![0; n];
        for (k, &i) in self.candidates.iter().enumerate() {
            longest[k] = self.table.definedness_length(i, 0)?;
        }
        Ok(Box::new(UniversalSession {
            learner: self,
            word: BitString::new(),
            zeros: 0,
            profile: self.est.profile(),
            longest,
            gated: vec![None; n],
            current: 0,
        }))
    }

    fn describe(&self) -> String {
        "universal_partial".into()
    }
}
