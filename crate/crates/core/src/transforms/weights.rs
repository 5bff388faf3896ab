//! Learners for parameters built from a learner `V` for measures by weighing its guesses.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, ClosedClass};
use crate::error::Result;
use crate::learners::{Learner, LearnerEvent, Session};
use crate::measures::{MeasureObject, PreparedBall};
use crate::programs::{Index, ProgramTable};

use super::majority::{h_predicate_prepared, majority_measure, WeightedSet};
use super::ParamMap;

/// Largest level enumerated word by word when `V` cannot be grouped by counts.
pub const MAX_EXHAUSTIVE_LEVEL: usize = 16;
/// Weights are floored to multiples of `2^{-WEIGHT_BITS}` before forming weighted sets.
pub const WEIGHT_BITS: u32 = 40;

/// `wgt(e) = μ({τ ∈ 2^n : V(τ) = e})` for every `e` with positive weight, sorted by index.
///
/// `None` when the level is too large to enumerate.
pub fn level_weights(
    v: &dyn Learner,
    mu: &MeasureObject,
    n: usize,
    max_level: usize,
) -> Result<Option<Vec<(Index, f64)>>> {
    let mut acc: Vec<(Index, f64)> = Vec::new();
    let mut add = |e: Index, w: f64| {
        if w <= 0.0 {
            return;
        }
        match acc.iter_mut().find(|(i, _)| *i == e) {
            Some((_, t)) => *t += w,
            None => acc.push((e, w)),
        }
    };
    let grouped = match mu.bernoulli_param() {
        Some(q) if v.guess_by_counts(0, n as u64)?.is_some() => {
            let q = crate::rational::to_f64(&q);
            let (lq, lp) = (q.ln(), (1.0 - q).ln());
            let mut ln_binom = 0.0f64;
            let mut ok = true;
            for a in 0..=n {
                if a > 0 {
                    ln_binom += ((n - a + 1) as f64).ln() - (a as f64).ln();
                }
                let Some(e) = v.guess_by_counts(a as u64, (n - a) as u64)? else {
                    ok = false;
                    break;
                };
                let term = |k: usize, l: f64| if k == 0 { 0.0 } else { k as f64 * l };
                add(e, (ln_binom + term(a, lq) + term(n - a, lp)).exp());
            }
            ok
        }
        _ => false,
    };
    if !grouped {
        acc.clear();
        if n > max_level {
            return Ok(None);
        }
        for tau in BitString::all_of_length(n) {
            let w = mu.neg_log2(&tau).map_or(0.0, |l| (-l).exp2());
            let e = v.guess(&tau)?;
            match acc.iter_mut().find(|(i, _)| *i == e) {
                Some((_, t)) => *t += w,
                None if w > 0.0 => acc.push((e, w)),
                None => {}
            }
        }
    }
    acc.sort_by_key(|p| p.0);
    Ok(Some(acc))
}

/// What a weight learner outputs for its internal measure guess `e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    /// The real `Z ∈ D` with `f(Z) = μ_e`.
    Real(ClosedClass),
    /// `e` itself.
    Measure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Switch to the heaviest guess when it outweighs the current one three times over.
    Ex,
    /// As `Ex`, ignoring guesses the current ball excludes, and leaving an excluded guess.
    PartialEx,
    /// The majority measure of every guess with positive weight.
    Bc,
}

/// The measure-to-parameter constructions driven by level weights of `V`.
pub struct WeightLearner {
    table: Arc<ProgramTable>,
    v: Arc<dyn Learner>,
    map: ParamMap,
    rule: Rule,
    emit: Emit,
    max_level: usize,
}

impl WeightLearner {
    pub fn new(
        table: Arc<ProgramTable>,
        v: Arc<dyn Learner>,
        map: ParamMap,
        rule: Rule,
        emit: Emit,
    ) -> Self {
        WeightLearner {
            table,
            v,
            map,
            rule,
            emit,
            max_level: MAX_EXHAUSTIVE_LEVEL,
        }
    }

    pub fn ex(table: Arc<ProgramTable>, v: Arc<dyn Learner>, map: ParamMap, emit: Emit) -> Self {
        WeightLearner::new(table, v, map, Rule::Ex, emit)
    }

    pub fn partial_ex(
        table: Arc<ProgramTable>,
        v: Arc<dyn Learner>,
        map: ParamMap,
        emit: Emit,
    ) -> Self {
        WeightLearner::new(table, v, map, Rule::PartialEx, emit)
    }

    pub fn bc(table: Arc<ProgramTable>, v: Arc<dyn Learner>, map: ParamMap, emit: Emit) -> Self {
        WeightLearner::new(table, v, map, Rule::Bc, emit)
    }

    pub fn with_max_level(mut self, max_level: usize) -> Self {
        self.max_level = max_level;
        self
    }

    fn output(&self, e: Index) -> Result<Index> {
        match &self.emit {
            Emit::Measure => Ok(e),
            Emit::Real(class) => self.table.inverse_lift(self.map, class, e),
        }
    }
}

/// The 3× switching rule; returns the new guess.
pub fn three_times_rule(weights: &[(Index, f64)], current: Index) -> Index {
    let Some(best) = argmax(weights) else {
        return current;
    };
    let w_cur = weight_of(weights, current);
    if best.1 > 3.0 * w_cur {
        best.0
    } else {
        current
    }
}

/// Least index with the largest weight.
fn argmax(weights: &[(Index, f64)]) -> Option<(Index, f64)> {
    weights
        .iter()
        .copied()
        .fold(None, |best: Option<(Index, f64)>, (e, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((e, w)),
        })
}

fn weight_of(weights: &[(Index, f64)], e: Index) -> f64 {
    weights.iter().find(|p| p.0 == e).map_or(0.0, |p| p.1)
}

struct WeightSession<'a> {
    learner: &'a WeightLearner,
    word: BitString,
    /// Internal measure guess; 0 until the first switch.
    guess: Index,
    current: Index,
    events: Vec<LearnerEvent>,
}

impl WeightSession<'_> {
    fn event(&mut self, kind: &str, detail: String) {
        self.events.push(LearnerEvent {
            n: self.word.len(),
            kind: kind.into(),
            detail,
        });
    }

    fn level(&mut self, n: usize) -> Result<()> {
        let l = self.learner;
        let center = l.map.center(&self.word);
        let Some(weights) = level_weights(&*l.v, &center, n, l.max_level)? else {
            self.event("skip", format!("level {n} too large to enumerate"));
            return Ok(());
        };
        if let Some((_, top)) = argmax(&weights) {
            let tied: Vec<Index> = weights.iter().filter(|p| p.1 == top).map(|p| p.0).collect();
            if tied.len() > 1 {
                self.event("tie", format!("{tied:?}"));
            }
        }
        let next = match l.rule {
            Rule::Ex => three_times_rule(&weights, self.guess),
            Rule::PartialEx => {
                let ball = PreparedBall::new(&l.map.star(&self.word));
                let s = n as u64;
                let mut eligible = Vec::new();
                for &(e, w) in &weights {
                    if !h_predicate_prepared(&l.table, &ball, e, s)? {
                        eligible.push((e, w));
                    }
                }
                match argmax(&eligible) {
                    None => self.guess,
                    Some((best, w_best)) => {
                        let w_cur = weight_of(&weights, self.guess);
                        if w_best > 3.0 * w_cur {
                            best
                        } else if h_predicate_prepared(&l.table, &ball, self.guess, s)? {
                            self.event(
                                "clause_b",
                                format!("{} excluded, switching to {best}", self.guess),
                            );
                            best
                        } else {
                            self.guess
                        }
                    }
                }
            }
            Rule::Bc => {
                let total: f64 = weights.iter().map(|p| p.1).sum();
                let normalized: Vec<(Index, f64)> =
                    weights.iter().map(|&(e, w)| (e, w / total)).collect();
                let set = WeightedSet::from_f64(&normalized, WEIGHT_BITS)?;
                majority_measure(&l.table, &set)
            }
        };
        if next != self.guess || self.current == 0 && next != 0 {
            self.guess = next;
            self.current = l.output(next)?;
        }
        Ok(())
    }
}

impl Session for WeightSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        self.word.push(b);
        let len = self.word.len();
        if let Some(n) = self.learner.map.level_of(len) {
            if self.learner.map.modulus(n) == len {
                self.level(n)?;
            }
        }
        Ok(self.current)
    }

    fn take_events(&mut self) -> Vec<LearnerEvent> {
        std::mem::take(&mut self.events)
    }
}

impl Learner for WeightLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(WeightSession {
            learner: self,
            word: BitString::new(),
            guess: 0,
            current: 0,
            events: Vec::new(),
        }))
    }

    fn describe(&self) -> String {
        format!(
            "weights({:?}, {}, {})",
            self.rule,
            self.map,
            self.v.describe()
        )
    }
}
