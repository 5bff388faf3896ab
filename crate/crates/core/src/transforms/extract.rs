//! The parameter extractor `h` and the lift `V = g ∘ L ∘ h`.

use std::sync::Arc;

use parking_lot::Mutex;

use crate::bits::{BitString, ClosedClass};
use crate::error::{Error, Result};
use crate::learners::{Learner, Session};
use crate::measures::MeasureBall;
use crate::programs::{Index, ProgramTable};
use crate::randomness::{ComplexityEstimator, ComplexityProfile, Deficiency};
use crate::rational::to_f64;

use super::ParamMap;

/// Candidates deeper than this are not explored.
pub const DEPTH_CAP: usize = 64;
/// A level is only expanded when it stays within this many candidates.
pub const FRONTIER_CAP: usize = 256;

/// Searches `D` for a parameter `Z` whose image `f(Z)` the data look random for.
#[derive(Clone, Debug)]
pub struct Extractor {
    pub map: ParamMap,
    pub class: ClosedClass,
    pub est: ComplexityEstimator,
    pub depth_cap: usize,
    pub frontier_cap: usize,
}

impl Extractor {
    pub fn new(map: ParamMap, class: ClosedClass, est: ComplexityEstimator) -> Self {
        Extractor {
            map,
            class,
            est,
            depth_cap: DEPTH_CAP,
            frontier_cap: FRONTIER_CAP,
        }
    }

    pub fn start(&self) -> ExtractState<'_> {
        let mut state = ExtractState {
            ex: self,
            x: BitString::new(),
            zeros: vec![0],
            profile: self.est.profile(),
            c: 0,
            escalations: 0,
            depth: 0,
            nodes: Vec::new(),
            output: BitString::new(),
        };
        state.rebuild();
        state
    }

    /// `h(X↾budget)`.
    pub fn extract(&self, x: &BitString, budget: u64) -> BitString {
        let mut state = self.start();
        for b in x.iter().take(budget as usize) {
            state.push(b);
        }
        state.output
    }
}

/// `extract_parameter(f, D, X, E, budget)`.
pub fn extract_parameter(
    map: ParamMap,
    class: &ClosedClass,
    x: &BitString,
    est: &ComplexityEstimator,
    budget: u64,
) -> BitString {
    Extractor::new(map, class.clone(), est.clone()).extract(x, budget)
}

#[derive(Clone, Debug)]
enum Shape {
    Bernoulli { lo: f64, hi: f64, depth: u64 },
    Interleave(BitString),
    Other(MeasureBall),
}

#[derive(Clone, Debug)]
struct Node {
    tau: BitString,
    shape: Shape,
    worst: Deficiency,
}

/// Incremental run of the extractor along one stream.
pub struct ExtractState<'a> {
    ex: &'a Extractor,
    x: BitString,
    zeros: Vec<u32>,
    profile: ComplexityProfile,
    c: i64,
    escalations: u32,
    depth: usize,
    nodes: Vec<Node>,
    output: BitString,
}

impl ExtractState<'_> {
    pub fn output(&self) -> &BitString {
        &self.output
    }

    /// Current deficiency bound.
    pub fn threshold(&self) -> i64 {
        self.c
    }

    pub fn escalations(&self) -> u32 {
        self.escalations
    }

    pub fn survivors(&self) -> usize {
        self.nodes.len()
    }

    pub fn push(&mut self, b: bool) -> &BitString {
        self.x.push(b);
        self.profile.push(b);
        self.zeros.push(self.zeros.last().unwrap() + u32::from(!b));
        let n = self.x.len();
        let c = self.c;
        for node in &mut self.nodes {
            let d = value(
                &self.x,
                &self.zeros,
                &self.profile,
                &node.shape,
                n,
                n as u64,
            );
            node.worst = node.worst.max(d);
        }
        self.nodes.retain(|node| node.worst.at_most(c));
        if self.nodes.is_empty() || !self.deepen() {
            self.escalate();
        }
        self.refresh_output();
        &self.output
    }

    fn escalate(&mut self) {
        self.c += 1;
        self.escalations += 1;
        self.rebuild();
    }

    fn rebuild(&mut self) {
        loop {
            self.depth = 0;
            self.nodes = vec![self.node(BitString::new())];
            if !self.nodes[0].worst.at_most(self.c) {
                self.c += 1;
                self.escalations += 1;
                continue;
            }
            if self.deepen() {
                break;
            }
            self.c += 1;
            self.escalations += 1;
        }
        self.refresh_output();
    }

    /// Expands whole levels while allowed; false when a level came out empty.
    fn deepen(&mut self) -> bool {
        let n = self.x.len();
        let limit = self.ex.depth_cap.min(self.ex.map.informative_depth(n));
        while self.depth < limit && 2 * self.nodes.len() <= self.ex.frontier_cap {
            let mut next = Vec::new();
            let mut in_class = false;
            for node in &self.nodes {
                for b in [false, true] {
                    let tau = node.tau.child(b);
                    if !self.ex.class.alive(&tau, n as u64) {
                        continue;
                    }
                    in_class = true;
                    let child = self.node(tau);
                    if child.worst.at_most(self.c) {
                        next.push(child);
                    }
                }
            }
            if !in_class {
                break;
            }
            if next.is_empty() {
                self.nodes.clear();
                return false;
            }
            self.nodes = next;
            self.depth += 1;
        }
        true
    }

    fn node(&self, tau: BitString) -> Node {
        let shape = match self.ex.map.star(&tau) {
            MeasureBall::BernoulliParam { lo, hi, depth } => Shape::Bernoulli {
                lo: to_f64(&lo),
                hi: to_f64(&hi),
                depth,
            },
            MeasureBall::Interleave { z } => Shape::Interleave(z),
            other => Shape::Other(other),
        };
        let n = self.x.len();
        let worst = (0..=n)
            .map(|k| value(&self.x, &self.zeros, &self.profile, &shape, k, n as u64))
            .max()
            .unwrap();
        Node { tau, shape, worst }
    }

    fn refresh_output(&mut self) {
        if self.nodes.is_empty() {
            return;
        }
        let first = self.nodes[0].tau.clone();
        self.output = self.nodes[1..]
            .iter()
            .fold(first, |acc, node| acc.common_prefix(&node.tau));
    }
}

/// `d(f*(τ), X↾k)` with the complexity term taken at stage `s`.
fn value(
    x: &BitString,
    zeros: &[u32],
    profile: &ComplexityProfile,
    shape: &Shape,
    k: usize,
    s: u64,
) -> Deficiency {
    let negl = match shape {
        Shape::Bernoulli { lo, hi, depth } => {
            let cut = (k as u64).min(*depth) as usize;
            let z = zeros[cut] as u64;
            crate::rational::bernoulli_sup_neg_log2(*lo, *hi, z, cut as u64 - z)
        }
        Shape::Interleave(z) => {
            let cut = k.min(2 * z.len());
            let on = (0..cut).step_by(2).all(|i| x.bit(i) == z.bit(i / 2));
            on.then_some((cut / 2) as f64)
        }
        Shape::Other(ball) => ball.sup_neg_log2(&x.prefix(k)).ok().flatten(),
    };
    Deficiency::from_parts(negl, profile.get(k, s))
}

/// `V(σ) = g(L(h(σ)))`: lifts a learner for parameters to a learner for their images.
pub struct LiftedLearner {
    table: Arc<ProgramTable>,
    inner: Arc<dyn Learner>,
    extractor: Extractor,
    cache: Mutex<Vec<(BitString, Index)>>,
}

impl LiftedLearner {
    pub fn new(
        table: Arc<ProgramTable>,
        inner: Arc<dyn Learner>,
        map: ParamMap,
        class: ClosedClass,
        est: ComplexityEstimator,
    ) -> Self {
        LiftedLearner {
            table,
            inner,
            extractor: Extractor::new(map, class, est),
            cache: Mutex::new(Vec::new()),
        }
    }

    /// `g(L(τ))` for an extracted parameter prefix `τ`.
    pub fn lift_guess(&self, tau: &BitString) -> Result<Index> {
        if let Some(hit) = self.cache.lock().iter().find(|(t, _)| t == tau) {
            return Ok(hit.1);
        }
        let real = self.inner.guess(tau)?;
        let out = if self.table.is_real(real)? {
            self.table.param_lift(self.extractor.map, real)?
        } else {
            return Err(Error::WrongKind {
                index: real,
                expected: "real",
            });
        };
        let mut cache = self.cache.lock();
        if cache.len() >= 4096 {
            cache.clear();
        }
        cache.push((tau.clone(), out));
        Ok(out)
    }
}

struct LiftSession<'a> {
    learner: &'a LiftedLearner,
    state: ExtractState<'a>,
    current: Index,
}

impl Session for LiftSession<'_> {
    fn current(&self) -> Index {
        self.current
    }

    fn push(&mut self, b: bool) -> Result<Index> {
        let before = self.state.output().clone();
        self.state.push(b);
        if *self.state.output() != before {
            self.current = self.learner.lift_guess(self.state.output())?;
        }
        Ok(self.current)
    }
}

impl Learner for LiftedLearner {
    fn session(&self) -> Result<Box<dyn Session + '_>> {
        let state = self.extractor.start();
        let current = self.lift_guess(state.output())?;
        Ok(Box::new(LiftSession {
            learner: self,
            state,
            current,
        }))
    }

    fn describe(&self) -> String {
        format!("lift({}, {})", self.extractor.map, self.inner.describe())
    }
}
