//! Learners as total maps from finite words to table indices, and the success evaluators.

mod cost;
mod evaluate;
mod universal;

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;

use serde::{Deserialize, Serialize};

pub use cost::{CostOracleLearner, LiftKind};
pub use evaluate::{
    convergence_grid, evaluate, judge_trajectory, stabilization_point, EvalConfig, GridPoint,
    LearnerFactory, Notion, StreamRecord, SuccessReport, Verdict,
};
pub use universal::UniversalPartialLearner;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measures::MeasureObject;
use crate::programs::{Index, ProgramTable};
use crate::randomness::Deficiency;

/// A learner fed one bit at a time.
pub trait Session {
    /// The guess for the word pushed so far.
    fn current(&self) -> Index;

    fn push(&mut self, b: bool) -> Result<Index>;

    fn extend(&mut self, bits: &BitString) -> Result<Index> {
        for b in bits.iter() {
            self.push(b)?;
        }
        Ok(self.current())
    }

    /// Notable decisions since the last call (ties, forced switches, skipped levels).
    fn take_events(&mut self) -> Vec<LearnerEvent> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerEvent {
    /// Prefix length at which the event happened.
    pub n: usize,
    pub kind: String,
    pub detail: String,
}

pub trait Learner: Send + Sync {
    fn session(&self) -> Result<Box<dyn Session + '_>>;

    fn guess(&self, sigma: &BitString) -> Result<Index> {
        self.session()?.extend(sigma)
    }

    /// The guess on any word with these counts, for learners that only look at counts.
    fn guess_by_counts(&self, _zeros: u64, _ones: u64) -> Result<Option<Index>> {
        Ok(None)
    }

    fn describe(&self) -> String;
}

impl<L: Learner + ?Sized> Learner for Arc<L> {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        (**self).session()
    }

    fn guess(&self, sigma: &BitString) -> Result<Index> {
        (**self).guess(sigma)
    }

    fn guess_by_counts(&self, zeros: u64, ones: u64) -> Result<Option<Index>> {
        (**self).guess_by_counts(zeros, ones)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        (**self).session()
    }

    fn guess(&self, sigma: &BitString) -> Result<Index> {
        (**self).guess(sigma)
    }

    fn guess_by_counts(&self, zeros: u64, ones: u64) -> Result<Option<Index>> {
        (**self).guess_by_counts(zeros, ones)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

type GuessFn<'a> = Box<dyn Fn(&BitString) -> Result<Index> + 'a>;

/// Session that recomputes the guess from the whole prefix at every step.
pub struct PrefixSession<'a> {
    guess: GuessFn<'a>,
    prefix: BitString,
    current: Index,
}

impl<'a> PrefixSession<'a> {
    pub fn new(guess: impl Fn(&BitString) -> Result<Index> + 'a) -> Result<Self> {
        let current = guess(&BitString::new())?;
        Ok(PrefixSession {
            guess: Box::new(guess),
            prefix: BitString::new(),
            current,
        })
    }
}

impl Session for PrefixSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        self.prefix.push(b);
        self.current = (self.guess)(&self.prefix)?;
        Ok(self.current)
    }
}

/// `L(X↾n)` for `n = 0..=|X|`.
pub fn run_learner(learner: &dyn Learner, x: &BitString) -> Result<Vec<Index>> {
    let mut session = learner.session()?;
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(session.current());
    for b in x.iter() {
        out.push(session.push(b)?);
    }
    Ok(out)
}

/// `run_learner` together with the events the learner reported.
pub fn run_learner_with_events(
    learner: &dyn Learner,
    x: &BitString,
) -> Result<(Vec<Index>, Vec<LearnerEvent>)> {
    let mut session = learner.session()?;
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(session.current());
    for b in x.iter() {
        out.push(session.push(b)?);
    }
    Ok((out, session.take_events()))
}

/// Always the same index.
#[derive(Clone, Debug)]
pub struct ConstantLearner(pub Index);

struct Fixed(Index);

impl Session for Fixed {
    fn current(&self) -> Index {
        self.0
    }

    fn push(&mut self, _: bool) -> Result<Index> {
        Ok(self.0)
    }
}

impl Learner for ConstantLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(Fixed(self.0)))
    }

    fn guess_by_counts(&self, _: u64, _: u64) -> Result<Option<Index>> {
        Ok(Some(self.0))
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Cycles through `indices` by prefix length.
#[derive(Clone, Debug)]
pub struct CyclingLearner {
    indices: Vec<Index>,
}

impl CyclingLearner {
    pub fn new(indices: Vec<Index>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::config("indices", "empty index list"));
        }
        Ok(CyclingLearner { indices })
    }

    /// Alternates between two padding copies of `e`.
    pub fn aliases(table: &ProgramTable, e: Index) -> Result<Self> {
        CyclingLearner::new(vec![table.pad(e, 0)?, table.pad(e, 1)?])
    }

    fn at(&self, n: u64) -> Index {
        self.indices[(n % self.indices.len() as u64) as usize]
    }
}

struct Cycle<'a> {
    learner: &'a CyclingLearner,
    n: u64,
}

impl Session for Cycle<'_> {
    fn current(&self) -> Index {
        self.learner.at(self.n)
    }

    fn push(&mut self, _: bool) -> Result<Index> {
        self.n += 1;
        Ok(self.current())
    }
}

impl Learner for CyclingLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(Cycle {
            learner: self,
            n: 0,
        }))
    }

    fn guess_by_counts(&self, zeros: u64, ones: u64) -> Result<Option<Index>> {
        Ok(Some(self.at(zeros + ones)))
    }

    fn describe(&self) -> String {
        format!("cycle({:?})", self.indices)
    }
}

/// Stage-`|σ|` value `⌈-log2 sup μ_e(σ)⌉` from counts, falling back to the word itself.
pub(crate) fn neg_log2_ceiling(
    table: &ProgramTable,
    e: Index,
    zeros: u64,
    ones: u64,
    word: Option<&BitString>,
) -> Result<Option<Deficiency>> {
    let s = zeros + ones;
    let value = match table.sup_neg_log2_counts(e, zeros, ones, s)? {
        Some(v) => v,
        None => match word {
            Some(w) => table.sup_neg_log2(e, w, s)?,
            None => return Ok(None),
        },
    };
    Ok(Some(Deficiency::from_parts(value, 0)))
}

/// Least family member minimizing the stage-`|σ|` deficiency of `σ`.
///
/// The complexity term is shared by every member, so only `⌈-log2 sup μ_e(σ)⌉` is compared.
pub struct FrequencyLearner {
    table: Arc<ProgramTable>,
    family: Vec<Index>,
}

impl FrequencyLearner {
    pub fn new(table: Arc<ProgramTable>, family: Vec<Index>) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::config("family", "empty family"));
        }
        for (i, &e) in family.iter().enumerate() {
            if !table.is_measure(e)? {
                return Err(Error::config(
                    format!("family[{i}]"),
                    format!("entry {e} is not a measure"),
                ));
            }
        }
        Ok(FrequencyLearner { table, family })
    }

    fn best(&self, zeros: u64, ones: u64, word: Option<&BitString>) -> Result<Option<Index>> {
        if zeros + ones == 0 {
            return Ok(Some(self.family[0]));
        }
        let mut best: Option<(Deficiency, Index)> = None;
        for &e in &self.family {
            let Some(d) = neg_log2_ceiling(&self.table, e, zeros, ones, word)? else {
                return Ok(None);
            };
            if best.is_none_or(|b| (d, e) < b) {
                best = Some((d, e));
            }
        }
        Ok(best.map(|b| b.1))
    }
}

struct FrequencySession<'a> {
    learner: &'a FrequencyLearner,
    word: BitString,
    zeros: u64,
    current: Index,
}

impl Session for FrequencySession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        self.word.push(b);
        self.zeros += u64::from(!b);
        let ones = self.word.len() as u64 - self.zeros;
        self.current = self
            .learner
            .best(self.zeros, ones, Some(&self.word))?
            .unwrap();
        Ok(self.current)
    }
}

impl Learner for FrequencyLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(FrequencySession {
            learner: self,
            word: BitString::new(),
            zeros: 0,
            current: self.family[0],
        }))
    }

    fn guess_by_counts(&self, zeros: u64, ones: u64) -> Result<Option<Index>> {
        self.best(zeros, ones, None)
    }

    fn describe(&self) -> String {
        format!("frequency({:?})", self.family)
    }
}

/// Least family real agreeing with every bit seen so far; the first member when none does.
pub struct ConsistentRealLearner {
    table: Arc<ProgramTable>,
    family: Vec<Index>,
}

impl ConsistentRealLearner {
    pub fn new(table: Arc<ProgramTable>, family: Vec<Index>) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::config("family", "empty family"));
        }
        for (i, &e) in family.iter().enumerate() {
            if !table.is_real(e)? {
                return Err(Error::config(
                    format!("family[{i}]"),
                    format!("entry {e} is not a real"),
                ));
            }
        }
        Ok(ConsistentRealLearner { table, family })
    }
}

struct Survivors<'a> {
    table: &'a ProgramTable,
    family: &'a [Index],
    alive: Vec<bool>,
    n: usize,
}

impl Survivors<'_> {
    fn first(&self) -> Index {
        self.family
            .iter()
            .zip(&self.alive)
            .find(|(_, a)| **a)
            .map_or(self.family[0], |(e, _)| *e)
    }
}

impl Session for Survivors<'_> {
    fn current(&self) -> Index {
        self.first()
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        let j = self.n;
        self.n += 1;
        for (k, &e) in self.family.iter().enumerate() {
            if self.alive[k] && self.table.eval_real(e, j, self.n as u64)? != Some(b) {
                self.alive[k] = false;
            }
        }
        Ok(self.first())
    }
}

impl Learner for ConsistentRealLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(Survivors {
            table: &self.table,
            family: &self.family,
            alive: vec![true; self.family.len()],
            n: 0,
        }))
    }

    fn describe(&self) -> String {
        format!("consistent_real({:?})", self.family)
    }
}

/// Least family measure giving the word positive mass; the first member when none does.
pub struct SupportLearner {
    table: Arc<ProgramTable>,
    family: Vec<Index>,
    exact: Vec<Option<MeasureObject>>,
}

impl SupportLearner {
    pub fn new(table: Arc<ProgramTable>, family: Vec<Index>) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::config("family", "empty family"));
        }
        let mut exact = Vec::new();
        for (i, &e) in family.iter().enumerate() {
            if !table.is_measure(e)? {
                return Err(Error::config(
                    format!("family[{i}]"),
                    format!("entry {e} is not a measure"),
                ));
            }
            exact.push(table.exact_measure(e)?);
        }
        Ok(SupportLearner {
            table,
            family,
            exact,
        })
    }
}

type BitIter<'a> = Box<dyn Iterator<Item = Option<bool>> + 'a>;

struct SupportSession<'a> {
    learner: &'a SupportLearner,
    alive: Vec<bool>,
    word: BitString,
    /// The `Z` bits of interleaving members, read in step with the word.
    z_bits: Vec<Option<BitIter<'a>>>,
}

impl SupportSession<'_> {
    fn first(&self) -> Index {
        let f = &self.learner.family;
        f.iter()
            .zip(&self.alive)
            .find(|(_, a)| **a)
            .map_or(f[0], |(e, _)| *e)
    }
}

impl Session for SupportSession<'_> {
    fn current(&self) -> Index {
        self.first()
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        let j = self.word.len();
        self.word.push(b);
        let s = self.word.len() as u64;
        for k in 0..self.alive.len() {
            if !self.alive[k] {
                continue;
            }
            self.alive[k] = match &self.learner.exact[k] {
                Some(MeasureObject::Interleave { .. }) => {
                    let zb = self.z_bits[k]
                        .as_mut()
                        .expect("interleave members carry bits");
                    j % 2 == 1 || zb.next().flatten() == Some(b)
                }
                Some(mu) => match mu.bernoulli_param() {
                    Some(q) => {
                        let forced = if b {
                            q == crate::rational::int(1)
                        } else {
                            q == crate::rational::int(0)
                        };
                        !forced
                    }
                    None => mu.neg_log2(&self.word).is_some(),
                },
                None => self
                    .learner
                    .table
                    .sup_neg_log2(self.learner.family[k], &self.word, s)?
                    .is_some(),
            };
        }
        Ok(self.first())
    }
}

impl Learner for SupportLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        let z_bits = self
            .exact
            .iter()
            .map(|m| match m {
                Some(MeasureObject::Interleave { z }) => Some(z.bits()),
                _ => None,
            })
            .collect();
        Ok(Box::new(SupportSession {
            learner: self,
            alive: vec![true; self.family.len()],
            word: BitString::new(),
            z_bits,
        }))
    }

    fn describe(&self) -> String {
        format!("support({:?})", self.family)
    }
}

/// Splits each level into bands of count classes by their mass under `B(q)`.
///
/// A word with `a` zeros gets the index of the first band whose cumulative bound exceeds
/// the mass of the classes with fewer zeros plus half its own.
pub struct BandLearner {
    q: f64,
    bands: Vec<(f64, Index)>,
    levels: Mutex<HashMap<u64, Arc<Vec<Index>>>>,
}

impl BandLearner {
    pub fn new(q: f64, bands: Vec<(f64, Index)>) -> Result<Self> {
        if !(0.0 < q && q < 1.0) {
            return Err(Error::config("q", format!("{q} is not in (0, 1)")));
        }
        if bands.is_empty() || bands.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::config(
                "bands",
                "bounds must be nonempty and nondecreasing",
            ));
        }
        Ok(BandLearner {
            q,
            bands,
            levels: Mutex::new(HashMap::new()),
        })
    }

    fn level(&self, n: u64) -> Arc<Vec<Index>> {
        if let Some(l) = self.levels.lock().get(&n) {
            return Arc::clone(l);
        }
        let (lq, lp) = (self.q.ln(), (1.0 - self.q).ln());
        let mut ln_binom = 0.0f64;
        let mut below = 0.0;
        let mut out = Vec::with_capacity(n as usize + 1);
        for a in 0..=n {
            if a > 0 {
                ln_binom += ((n - a + 1) as f64).ln() - (a as f64).ln();
            }
            let mass = (ln_binom + a as f64 * lq + (n - a) as f64 * lp).exp();
            let mid = below + mass / 2.0;
            below += mass;
            let band = self
                .bands
                .iter()
                .find(|b| mid < b.0)
                .unwrap_or(self.bands.last().unwrap());
            out.push(band.1);
        }
        let out = Arc::new(out);
        self.levels.lock().insert(n, Arc::clone(&out));
        out
    }
}

impl Learner for BandLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        PrefixSession::new(|w| Ok(self.level(w.len() as u64)[w.count_zeros()]))
            .map(|s| Box::new(s) as Box<dyn Session>)
    }

    fn guess_by_counts(&self, zeros: u64, ones: u64) -> Result<Option<Index>> {
        Ok(Some(self.level(zeros + ones)[zeros as usize]))
    }

    fn describe(&self) -> String {
        format!("bands({}, {:?})", self.q, self.bands)
    }
}
