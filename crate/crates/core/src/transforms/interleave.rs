//! Recovering a real `Z` from a learner for the measures `μ_Z`.

use std::sync::Arc;

use parking_lot::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{interleave, BitString};
use crate::error::Result;
use crate::learners::{Learner, LearnerEvent, Session};
use crate::programs::{Entry, Index, ProgramTable, RealProgram};
use crate::rational::{int, ratio};

/// Companion words `σ` queried per decoded bit once `2^m` exceeds this.
pub const DECODER_SAMPLES: usize = 32;

/// Outcome of one majority vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vote {
    Bit(bool),
    Stall,
}

/// The companion words of length `m`: all of `2^m` when small, otherwise seeded samples.
pub fn companions(m: usize, samples: usize) -> Vec<BitString> {
    if m < usize::BITS as usize && 1usize << m <= samples {
        return BitString::all_of_length(m).collect();
    }
    (0..samples as u64).map(|k| sample_word(k, m)).collect()
}

/// The first `m` bits of companion sequence `k`.
pub fn sample_word(k: u64, m: usize) -> BitString {
    let mut rng = ChaCha8Rng::seed_from_u64(k);
    (0..m).map(|_| rng.gen::<bool>()).collect()
}

/// Whether the stage-`s` knowledge of `μ_e` proves `μ_e(x j) > μ_e(x)/2`.
pub fn provable_conditional(
    table: &ProgramTable,
    e: Index,
    x: &BitString,
    j: bool,
    s: u64,
) -> Result<bool> {
    if !table.is_measure(e)? {
        return Ok(false);
    }
    let know = table.knowledge(e, s)?;
    let num = know.eval(&x.child(j))?;
    let den = know.eval(x)?;
    Ok(num.lo > &den.hi * ratio(1, 2) && num.lo > int(0))
}

/// Bit `m` of the real coded by `V`, given the first `m` bits in `partial`.
pub fn interleave_decoder(
    v: &dyn Learner,
    table: &ProgramTable,
    partial: &BitString,
    s: u64,
    samples: usize,
) -> Result<Vote> {
    let m = partial.len();
    let words = companions(m, samples);
    let mut votes = [0usize; 2];
    for sigma in &words {
        let x = interleave(partial, sigma)?;
        let e = v.guess(&x)?;
        for j in [false, true] {
            if provable_conditional(table, e, &x, j, s)? {
                votes[j as usize] += 1;
            }
        }
    }
    let n = words.len();
    Ok(match votes {
        [z, _] if 3 * z >= 2 * n => Vote::Bit(false),
        [_, o] if 3 * o >= 2 * n => Vote::Bit(true),
        _ => Vote::Stall,
    })
}

/// `g₀(ρ)`: the real starting with `ρ` and continued by majority votes over `V`.
///
/// Bit `m` reads `V` on words of length `2m` and is attempted from stage `2m + 2` on.
pub struct DecodedReal {
    v: Arc<dyn Learner>,
    samples: usize,
    decoded: Mutex<BitString>,
}

impl DecodedReal {
    pub fn new(v: Arc<dyn Learner>, prefix: BitString, samples: usize) -> Self {
        DecodedReal {
            v,
            samples,
            decoded: Mutex::new(prefix),
        }
    }
}

impl RealProgram for DecodedReal {
    fn bit(&self, table: &ProgramTable, j: usize, s: u64) -> Result<Option<bool>> {
        let mut decoded = self.decoded.lock();
        while decoded.len() <= j {
            let m = decoded.len();
            if s < 2 * m as u64 + 2 {
                return Ok(None);
            }
            match interleave_decoder(&*self.v, table, &decoded, s, self.samples)? {
                Vote::Bit(b) => decoded.push(b),
                Vote::Stall => return Ok(None),
            }
        }
        Ok(Some(decoded.bit(j)))
    }

    fn is_total(&self, _table: &ProgramTable) -> bool {
        false
    }

    fn describe(&self) -> String {
        format!("g0({})", self.v.describe())
    }
}

/// The index of `g₀(ρ)` for `V`, allocated once per `(V, ρ)`.
pub fn decoded_real(
    table: &ProgramTable,
    v: &Arc<dyn Learner>,
    prefix: &BitString,
    samples: usize,
) -> Index {
    table.alloc(format!("g0:{}:{}:{prefix}", v.describe(), samples), || {
        Entry::RealProgram(Arc::new(DecodedReal::new(
            Arc::clone(v),
            prefix.clone(),
            samples,
        )))
    })
}

/// Learner for reals outputting `g₀(Z↾n₀)` for the last `n₀` passing both stability checks.
pub struct InterleaveExLearner {
    table: Arc<ProgramTable>,
    v: Arc<dyn Learner>,
    samples: usize,
}

impl InterleaveExLearner {
    pub fn new(table: Arc<ProgramTable>, v: Arc<dyn Learner>) -> Self {
        InterleaveExLearner {
            table,
            v,
            samples: DECODER_SAMPLES,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(1);
        self
    }
}

struct Companion<'a> {
    session: Box<dyn Session + 'a>,
    rng: ChaCha8Rng,
    last: Index,
    changed: bool,
}

struct InterleaveSession<'a> {
    learner: &'a InterleaveExLearner,
    z: BitString,
    companions: Vec<Companion<'a>>,
    n0: usize,
    current: Index,
    events: Vec<LearnerEvent>,
}

impl InterleaveSession<'_> {
    fn restart(&mut self) {
        self.n0 = self.z.len();
        for c in &mut self.companions {
            c.changed = false;
        }
        self.current = decoded_real(
            &self.learner.table,
            &self.learner.v,
            &self.z,
            self.learner.samples,
        );
    }

    fn agrees_with_z(&self) -> Result<bool> {
        let n = self.z.len();
        for j in self.n0..n {
            match self.learner.table.eval_real(self.current, j, n as u64)? {
                Some(b) if b != self.z.bit(j) => return Ok(false),
                Some(_) => {}
                None => break,
            }
        }
        Ok(true)
    }
}

impl Session for InterleaveSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        self.z.push(b);
        for c in &mut self.companions {
            c.session.push(b)?;
            let e = c.session.push(c.rng.gen())?;
            if e != c.last {
                c.changed = true;
                c.last = e;
            }
        }
        let stable = self.companions.iter().filter(|c| !c.changed).count();
        let clause_i = 3 * stable >= 2 * self.companions.len();
        let clause_ii = clause_i && self.agrees_with_z()?;
        if !clause_ii {
            let n = self.z.len();
            let why = if clause_i {
                "real disagrees with Z"
            } else {
                "V guesses changed"
            };
            self.events.push(LearnerEvent {
                n,
                kind: "restart".into(),
                detail: format!("n0 {} -> {n}: {why}", self.n0),
            });
            self.restart();
        }
        Ok(self.current)
    }

    fn take_events(&mut self) -> Vec<LearnerEvent> {
        std::mem::take(&mut self.events)
    }
}

impl Learner for InterleaveExLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        let mut companions = Vec::with_capacity(self.samples);
        for k in 0..self.samples as u64 {
            let session = self.v.session()?;
            let last = session.current();
            companions.push(Companion {
                session,
                rng: ChaCha8Rng::seed_from_u64(k),
                last,
                changed: false,
            });
        }
        let mut s = InterleaveSession {
            learner: self,
            z: BitString::new(),
            companions,
            n0: 0,
            current: 0,
            events: Vec::new(),
        };
        s.restart();
        Ok(Box::new(s))
    }

    fn describe(&self) -> String {
        format!("interleave_ex({})", self.v.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{run_learner, ConstantLearner, FrequencyLearner};
    use crate::measures::MeasureObject;
    use crate::programs::EntrySpec;
    use crate::source::RealGen;

    fn reals() -> Vec<RealGen> {
        vec![
            RealGen::expansion(ratio(1, 3)),
            RealGen::zeros(),
            RealGen::periodic("10".parse().unwrap()),
        ]
    }

    fn mu_table() -> Arc<ProgramTable> {
        let mut specs: Vec<EntrySpec> = reals()
            .into_iter()
            .map(|z| EntrySpec::Measure {
                measure: MeasureObject::interleave(z).unwrap(),
                total: None,
            })
            .collect();
        specs.push(EntrySpec::Stub);
        Arc::new(ProgramTable::from_specs(specs).unwrap())
    }

    #[test]
    fn ideal_vote_on_zeros() {
        let t = mu_table();
        let v = ConstantLearner(1);
        let partial: BitString = "00".parse().unwrap();
        assert_eq!(
            interleave_decoder(&v, &t, &partial, 64, 32).unwrap(),
            Vote::Bit(false)
        );
    }

    #[test]
    fn stubs_stall() {
        let t = mu_table();
        let v = ConstantLearner(3);
        let partial: BitString = "01".parse().unwrap();
        assert_eq!(
            interleave_decoder(&v, &t, &partial, 64, 32).unwrap(),
            Vote::Stall
        );
    }

    #[test]
    fn split_vote_stalls() {
        struct Split;
        impl Learner for Split {
            fn session(&self) -> Result<Box<dyn Session + '_>> {
                unreachable!()
            }
            fn guess(&self, x: &BitString) -> Result<Index> {
                Ok(if x.bits().last() == Some(&true) { 1 } else { 2 })
            }
            fn describe(&self) -> String {
                "split".into()
            }
        }
        let t = mu_table();
        assert_eq!(
            interleave_decoder(&Split, &t, &"0".parse().unwrap(), 64, 32).unwrap(),
            Vote::Stall
        );
    }

    #[test]
    fn recovers_each_real() {
        let t = mu_table();
        let v: Arc<dyn Learner> =
            Arc::new(FrequencyLearner::new(t.clone(), vec![0, 1, 2]).unwrap());
        let l = InterleaveExLearner::new(t.clone(), v);
        for z in reals() {
            let traj = run_learner(&l, &z.prefix(40)).unwrap();
            let last = *traj.last().unwrap();
            assert!(traj[30..].iter().all(|&g| g == last));
            assert_eq!(t.real_prefix(last, 128).unwrap().prefix(32), z.prefix(32));
        }
    }

    #[test]
    fn churning_v_restarts() {
        let t = mu_table();
        let v: Arc<dyn Learner> =
            Arc::new(crate::learners::CyclingLearner::new(vec![0, 1, 2]).unwrap());
        let l = InterleaveExLearner::new(t, v);
        let mut s = l.session().unwrap();
        s.extend(&"0000".parse().unwrap()).unwrap();
        let events = s.take_events();
        assert_eq!(events.len(), 4);
        assert!(events.iter().all(|e| e.detail.ends_with("changed")));
    }
}
