//! Basic open balls of the measure space and their size.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rational::{
    bernoulli_mass_range, bernoulli_sup_neg_log2, neg_log2, pow2_neg, Rational, RationalInterval,
};

/// Three-valued membership verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

/// Longest string probed when testing membership in a parametric ball.
const PROBE_DEPTH: usize = 3;

/// A basic open set of measures.
///
/// Besides explicit constraint lists, two parametric shapes are kept symbolically:
/// `BernoulliParam` pins every string of length at most `depth` to the image of the
/// parameter interval `[lo, hi]` under the product formula, and `Interleave` pins every
/// string of length at most `2|z|` to its μ_Z value for any Z extending `z`.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureBall {
    Explicit(Vec<(BitString, RationalInterval)>),
    BernoulliParam {
        lo: Rational,
        hi: Rational,
        depth: u64,
    },
    Interleave {
        z: BitString,
    },
}

impl MeasureBall {
    pub fn unconstrained() -> Self {
        MeasureBall::Explicit(Vec::new())
    }

    /// Length of the longest constrained string.
    pub fn constrained_depth(&self) -> u64 {
        match self {
            MeasureBall::Explicit(c) => c.iter().map(|(s, _)| s.len() as u64).max().unwrap_or(0),
            MeasureBall::BernoulliParam { depth, .. } => *depth,
            MeasureBall::Interleave { z } => 2 * z.len() as u64,
        }
    }

    /// The constraint placed directly on `σ`, if any.
    pub fn direct(&self, sigma: &BitString) -> Option<RationalInterval> {
        match self {
            MeasureBall::Explicit(c) => c
                .iter()
                .filter(|(s, _)| s == sigma)
                .map(|(_, iv)| iv.clone())
                .reduce(|a, b| a.intersect(&b)),
            MeasureBall::BernoulliParam { lo, hi, depth } => {
                ((sigma.len() as u64) <= *depth).then(|| {
                    let (min, max) =
                        bernoulli_mass_range(lo, hi, sigma.count_zeros(), sigma.count_ones());
                    RationalInterval::closed(min, max)
                })
            }
            MeasureBall::Interleave { z } => (sigma.len() <= 2 * z.len())
                .then(|| RationalInterval::point(interleave_mass(z, sigma))),
        }
    }

    /// Range of `μ(σ)` over the ball, after propagating constraints through additivity.
    pub fn bounds(&self, sigma: &BitString) -> Result<RationalInterval> {
        match self {
            MeasureBall::Explicit(_) => {
                Propagation::new(self, std::iter::once(sigma))?.bounds(sigma)
            }
            _ => {
                let d = self.constrained_depth();
                if (sigma.len() as u64) <= d {
                    Ok(self.direct(sigma).unwrap())
                } else {
                    let top = self.direct(&sigma.prefix(d as usize)).unwrap();
                    Ok(RationalInterval::closed(Rational::zero(), top.hi))
                }
            }
        }
    }

    /// `-log2 sup{μ(σ) : μ in the ball}`; `None` when the supremum is 0.
    pub fn sup_neg_log2(&self, sigma: &BitString) -> Result<Option<f64>> {
        match self {
            MeasureBall::Explicit(_) => Ok(neg_log2(&self.bounds(sigma)?.hi)),
            MeasureBall::BernoulliParam { lo, hi, depth } => {
                let cut = sigma.prefix((sigma.len() as u64).min(*depth) as usize);
                Ok(bernoulli_sup_neg_log2(
                    to_f64(lo),
                    to_f64(hi),
                    cut.count_zeros() as u64,
                    cut.count_ones() as u64,
                ))
            }
            MeasureBall::Interleave { z } => {
                let cut = sigma.prefix(sigma.len().min(2 * z.len()));
                Ok(interleave_support(z, &cut).then_some((cut.len() / 2) as f64))
            }
        }
    }

    /// Strings whose constraints are compared in membership tests, and whether they cover every constraint.
    pub fn probes(&self) -> (Vec<BitString>, bool) {
        match self {
            MeasureBall::Explicit(c) => {
                let set: BTreeSet<BitString> = c.iter().map(|(s, _)| s.clone()).collect();
                (set.into_iter().collect(), true)
            }
            _ => {
                let d = self.constrained_depth();
                let n = (d as usize).min(PROBE_DEPTH);
                let mut out: Vec<BitString> = (1..=n).flat_map(BitString::all_of_length).collect();
                if let MeasureBall::Interleave { z } = self {
                    let mut path = BitString::new();
                    for b in z.iter() {
                        path.push(b);
                        path.push(false);
                        if path.len() > n {
                            out.push(path.clone());
                        }
                    }
                }
                (out, d as usize <= PROBE_DEPTH)
            }
        }
    }

    /// `|C|` bounded above, accurate to `2^{-depth}`.
    pub fn size(&self, depth: usize) -> Result<Rational> {
        let mut total = pow2_neg(depth as u64);
        match self {
            MeasureBall::Explicit(_) => {
                let prop = Propagation::new(self, std::iter::empty())?;
                for n in 1..=depth {
                    total += pow2_neg(n as u64) * prop.level_width(n);
                }
            }
            MeasureBall::BernoulliParam { lo, hi, depth: d } => {
                for n in 1..=depth {
                    let width = if (n as u64) <= *d {
                        (0..=n)
                            .map(|a| {
                                let (min, max) = bernoulli_mass_range(lo, hi, a, n - a);
                                max - min
                            })
                            .max()
                            .unwrap()
                    } else {
                        let m = *d as usize;
                        (0..=m)
                            .map(|a| bernoulli_mass_range(lo, hi, a, m - a).1)
                            .max()
                            .unwrap()
                    };
                    total += pow2_neg(n as u64) * width;
                }
            }
            MeasureBall::Interleave { z } => {
                for n in (2 * z.len() + 1)..=depth {
                    total += pow2_neg(n as u64) * pow2_neg(z.len() as u64);
                }
            }
        }
        Ok(total)
    }

    /// Explicit constraint list for the strings of length at most `depth`.
    pub fn to_explicit(&self, depth: usize) -> Vec<(BitString, RationalInterval)> {
        if let MeasureBall::Explicit(c) = self {
            return c.clone();
        }
        (1..=depth)
            .flat_map(BitString::all_of_length)
            .filter_map(|s| self.direct(&s).map(|iv| (s, iv)))
            .collect()
    }
}

/// `C ∋ μ` where `probe` gives μ's knowledge interval at each string.
/// The probe strings of a ball with their constraints, for repeated membership tests.
pub struct PreparedBall {
    probes: Vec<(BitString, RationalInterval)>,
    complete: bool,
}

impl PreparedBall {
    pub fn new(ball: &MeasureBall) -> Self {
        let (strings, complete) = ball.probes();
        let by_counts = matches!(ball, MeasureBall::BernoulliParam { .. });
        let mut memo: HashMap<(usize, usize), Option<RationalInterval>> = HashMap::new();
        let probes = strings
            .into_iter()
            .filter_map(|s| {
                let direct = if by_counts {
                    memo.entry((s.count_zeros(), s.count_ones()))
                        .or_insert_with(|| ball.direct(&s))
                        .clone()
                } else {
                    ball.direct(&s)
                };
                direct.map(|c| (s, c))
            })
            .collect();
        PreparedBall { probes, complete }
    }

    /// Same verdict as [`ball_contains`] on the ball this was built from.
    pub fn contains(
        &self,
        mut probe: impl FnMut(&BitString) -> Result<RationalInterval>,
    ) -> Result<Tri> {
        let mut all_inside = self.complete;
        for (s, constraint) in &self.probes {
            let known = probe(s)?;
            if constraint.disjoint(&known) {
                return Ok(Tri::No);
            }
            if !constraint.contains_interval(&known) {
                all_inside = false;
            }
        }
        Ok(if all_inside { Tri::Yes } else { Tri::Unknown })
    }
}

pub fn ball_contains(
    ball: &MeasureBall,
    mut probe: impl FnMut(&BitString) -> Result<RationalInterval>,
) -> Result<Tri> {
    let (strings, complete) = ball.probes();
    let mut all_inside = complete;
    let by_counts = matches!(ball, MeasureBall::BernoulliParam { .. });
    let mut memo: HashMap<(usize, usize), Option<RationalInterval>> = HashMap::new();
    for s in &strings {
        let direct = if by_counts {
            memo.entry((s.count_zeros(), s.count_ones()))
                .or_insert_with(|| ball.direct(s))
                .clone()
        } else {
            ball.direct(s)
        };
        let Some(constraint) = direct else {
            continue;
        };
        let known = probe(s)?;
        if constraint.disjoint(&known) {
            return Ok(Tri::No);
        }
        if !constraint.contains_interval(&known) {
            all_inside = false;
        }
    }
    Ok(if all_inside { Tri::Yes } else { Tri::Unknown })
}

fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(0.0)
}

fn interleave_support(z: &BitString, sigma: &BitString) -> bool {
    (0..sigma.len())
        .step_by(2)
        .all(|i| z.get(i / 2).is_none_or(|b| b == sigma.bit(i)))
}

fn interleave_mass(z: &BitString, sigma: &BitString) -> Rational {
    if interleave_support(z, sigma) {
        pow2_neg((sigma.len() / 2) as u64)
    } else {
        Rational::zero()
    }
}

/// Interval propagation for explicit balls on the prefix/sibling closure of the constrained strings.
struct Propagation {
    nodes: BTreeMap<BitString, (Rational, Rational)>,
}

impl Propagation {
    fn new<'a>(ball: &MeasureBall, extra: impl Iterator<Item = &'a BitString>) -> Result<Self> {
        let MeasureBall::Explicit(constraints) = ball else {
            unreachable!("propagation runs on explicit balls");
        };
        let mut nodes: BTreeMap<BitString, (Rational, Rational)> = BTreeMap::new();
        let unit = || (Rational::zero(), Rational::one());
        let add_path = |nodes: &mut BTreeMap<BitString, (Rational, Rational)>, t: &BitString| {
            nodes.entry(BitString::new()).or_insert_with(unit);
            for n in 1..=t.len() {
                let p = t.prefix(n);
                let mut sib = p.clone();
                let last = sib.pop().unwrap();
                sib.push(!last);
                nodes.entry(p).or_insert_with(unit);
                nodes.entry(sib).or_insert_with(unit);
            }
        };
        for (s, _) in constraints {
            add_path(&mut nodes, s);
        }
        for s in extra {
            add_path(&mut nodes, s);
        }
        nodes.insert(BitString::new(), (Rational::one(), Rational::one()));
        for (s, iv) in constraints {
            let e = nodes.get_mut(s).unwrap();
            if iv.lo > e.0 {
                e.0 = iv.lo.clone();
            }
            if iv.hi < e.1 {
                e.1 = iv.hi.clone();
            }
        }
        let mut prop = Propagation { nodes };
        prop.settle()?;
        Ok(prop)
    }

    fn settle(&mut self) -> Result<()> {
        let parents: Vec<BitString> = self
            .nodes
            .keys()
            .filter(|s| self.nodes.contains_key(&s.child(false)))
            .cloned()
            .collect();
        for _ in 0..64 {
            let mut changed = false;
            for p in &parents {
                let (c0, c1) = (p.child(false), p.child(true));
                let (plo, phi) = self.nodes[p].clone();
                let (lo0, hi0) = self.nodes[&c0].clone();
                let (lo1, hi1) = self.nodes[&c1].clone();
                let new_p = (plo.clone().max(&lo0 + &lo1), phi.clone().min(&hi0 + &hi1));
                let new_0 = (
                    lo0.clone().max(&new_p.0 - &hi1),
                    hi0.clone().min(&new_p.1 - &lo1),
                );
                let new_1 = (
                    lo1.clone().max(&new_p.0 - &new_0.1),
                    hi1.clone().min(&new_p.1 - &new_0.0),
                );
                for (key, old, new) in [
                    (p, (plo, phi), new_p),
                    (&c0, (lo0, hi0), new_0),
                    (&c1, (lo1, hi1), new_1),
                ] {
                    if new.0 > new.1 {
                        return Err(Error::InconsistentBall(format!("no mass fits at {key}")));
                    }
                    if new != old {
                        changed = true;
                        self.nodes.insert(key.clone(), new);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(())
    }

    fn bounds(&self, sigma: &BitString) -> Result<RationalInterval> {
        if let Some((lo, hi)) = self.nodes.get(sigma) {
            return Ok(RationalInterval::closed(lo.clone(), hi.clone()));
        }
        let mut p = sigma.clone();
        while !self.nodes.contains_key(&p) {
            p.pop();
        }
        Ok(RationalInterval::closed(
            Rational::zero(),
            self.nodes[&p].1.clone(),
        ))
    }

    /// `max_{σ ∈ 2^n}` of the width of `bounds(σ)`.
    fn level_width(&self, n: usize) -> Rational {
        let mut best = Rational::zero();
        for (s, (lo, hi)) in &self.nodes {
            if s.len() == n {
                best = best.max(hi - lo);
            } else if s.len() < n && !self.nodes.contains_key(&s.child(false)) {
                best = best.max(hi.clone());
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureObject;
    use crate::rational::{int, ratio};

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn probe_of(mu: &MeasureObject) -> impl FnMut(&BitString) -> Result<RationalInterval> + '_ {
        move |s| mu.eval(s, 0)
    }

    #[test]
    fn empty_ball_has_size_one() {
        assert_eq!(MeasureBall::unconstrained().size(8).unwrap(), int(1));
    }

    #[test]
    fn pinned_root_child() {
        let c = MeasureBall::Explicit(vec![(b("0"), RationalInterval::point(ratio(1, 2)))]);
        let size = c.size(1).unwrap();
        assert_eq!(size, ratio(1, 2));
        assert_eq!(
            c.bounds(&b("1")).unwrap(),
            RationalInterval::point(ratio(1, 2))
        );
        assert_eq!(
            c.bounds(&b("01")).unwrap(),
            RationalInterval::closed(int(0), ratio(1, 2))
        );
    }

    #[test]
    fn constraints_never_increase_size() {
        let loose = MeasureBall::Explicit(vec![(
            b("0"),
            RationalInterval::open(ratio(1, 4), ratio(3, 4)),
        )]);
        let tight = MeasureBall::Explicit(vec![
            (b("0"), RationalInterval::open(ratio(1, 4), ratio(3, 4))),
            (b("00"), RationalInterval::open(ratio(1, 8), ratio(1, 4))),
        ]);
        for d in 1..6 {
            assert!(tight.size(d).unwrap() <= loose.size(d).unwrap());
            assert!(loose.size(d).unwrap() <= MeasureBall::unconstrained().size(d).unwrap());
        }
    }

    #[test]
    fn inconsistent_balls_are_rejected() {
        let c = MeasureBall::Explicit(vec![
            (b("0"), RationalInterval::open(ratio(0, 1), ratio(1, 8))),
            (b("1"), RationalInterval::open(ratio(0, 1), ratio(1, 8))),
        ]);
        assert!(matches!(c.size(2), Err(Error::InconsistentBall(_))));
    }

    #[test]
    fn membership_examples() {
        let u = MeasureObject::uniform();
        let inside = MeasureBall::Explicit(vec![(
            b("0"),
            RationalInterval::open(ratio(1, 4), ratio(3, 4)),
        )]);
        assert_eq!(ball_contains(&inside, probe_of(&u)).unwrap(), Tri::Yes);
        let outside =
            MeasureBall::Explicit(vec![(b("0"), RationalInterval::right_closed(ratio(3, 4)))]);
        assert_eq!(ball_contains(&outside, probe_of(&u)).unwrap(), Tri::No);
        let vague = |_: &BitString| Ok(RationalInterval::open(int(0), int(1)));
        assert_eq!(ball_contains(&inside, vague).unwrap(), Tri::Unknown);
    }

    #[test]
    fn bernoulli_ball_bounds() {
        let c = MeasureBall::BernoulliParam {
            lo: ratio(1, 4),
            hi: ratio(1, 2),
            depth: 15,
        };
        assert_eq!(
            c.direct(&b("0")).unwrap(),
            RationalInterval::closed(ratio(1, 4), ratio(1, 2))
        );
        assert_eq!(
            c.direct(&b("01")).unwrap(),
            RationalInterval::closed(ratio(3, 16), ratio(1, 4))
        );
        let third = MeasureObject::bernoulli(ratio(1, 3));
        assert_eq!(ball_contains(&c, probe_of(&third)).unwrap(), Tri::Unknown);
        let far = MeasureObject::bernoulli(ratio(2, 3));
        assert_eq!(ball_contains(&c, probe_of(&far)).unwrap(), Tri::No);
        let shallow = MeasureBall::BernoulliParam {
            lo: ratio(1, 4),
            hi: ratio(1, 2),
            depth: 2,
        };
        assert_eq!(ball_contains(&shallow, probe_of(&third)).unwrap(), Tri::Yes);
        let sup = c.sup_neg_log2(&b("0")).unwrap().unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interleave_ball() {
        let c = MeasureBall::Interleave { z: b("01") };
        assert_eq!(
            c.bounds(&b("0011")).unwrap(),
            RationalInterval::point(ratio(1, 4))
        );
        assert_eq!(c.bounds(&b("1")).unwrap(), RationalInterval::point(int(0)));
        assert_eq!(c.sup_neg_log2(&b("1")).unwrap(), None);
        assert_eq!(c.sup_neg_log2(&b("001101")).unwrap(), Some(2.0));
        assert_eq!(c.size(10).unwrap(), {
            let mut t = pow2_neg(10);
            for n in 5..=10 {
                t += pow2_neg(n) * ratio(1, 4);
            }
            t
        });
        let mu = MeasureObject::interleave(crate::source::RealGen::periodic(b("01"))).unwrap();
        assert_eq!(ball_contains(&c, probe_of(&mu)).unwrap(), Tri::Unknown);
        let other = MeasureObject::interleave(crate::source::RealGen::zeros()).unwrap();
        assert_eq!(ball_contains(&c, probe_of(&other)).unwrap(), Tri::No);
    }

    #[test]
    fn explicit_propagation_brute_force() {
        // Grid search over depth-2 measures agrees with the propagated bound on μ(00).
        let c = MeasureBall::Explicit(vec![
            (b("0"), RationalInterval::closed(ratio(1, 4), ratio(1, 2))),
            (b("01"), RationalInterval::closed(ratio(1, 8), ratio(1, 4))),
        ]);
        let bound = c.bounds(&b("00")).unwrap();
        let mut best_hi = int(0);
        let mut best_lo = int(1);
        for i in 0..=16 {
            for j in 0..=16 {
                let m0 = ratio(i, 16);
                let m01 = ratio(j, 16);
                if m0 >= ratio(1, 4)
                    && m0 <= ratio(1, 2)
                    && m01 >= ratio(1, 8)
                    && m01 <= ratio(1, 4)
                    && m01 <= m0
                {
                    let m00 = &m0 - &m01;
                    best_hi = best_hi.max(m00.clone());
                    best_lo = best_lo.min(m00);
                }
            }
        }
        assert_eq!(bound, RationalInterval::closed(best_lo, best_hi));
    }

    #[test]
    fn to_explicit_agrees_with_direct() {
        let c = MeasureBall::BernoulliParam {
            lo: ratio(1, 4),
            hi: ratio(1, 2),
            depth: 2,
        };
        let e = c.to_explicit(5);
        assert_eq!(e.len(), 6);
        assert!(e.iter().all(|(s, iv)| c.direct(s).as_ref() == Some(iv)));
    }
}
