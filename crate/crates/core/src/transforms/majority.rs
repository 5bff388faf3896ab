//! Weighted sets of measure indices and their majority measures.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measures::{MeasureBall, PreparedBall, Tri};
use crate::programs::{Entry, Index, MeasureProgram, ProgramTable};
use crate::rational::{format_rational, ratio, serde_rational, Rational, RationalInterval};

/// Finitely many indices with dyadic weights summing to at most 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedSet {
    members: Vec<Member>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Member {
    index: Index,
    #[serde(with = "serde_rational")]
    weight: Rational,
}

fn is_dyadic(r: &Rational) -> bool {
    let d = r.denom();
    (d - num_bigint::BigInt::one()) & d == num_bigint::BigInt::zero()
}

impl WeightedSet {
    pub fn new(members: Vec<(Index, Rational)>) -> Result<Self> {
        let mut total = Rational::zero();
        let mut out: Vec<Member> = Vec::new();
        for (index, weight) in members {
            if weight < Rational::zero() || !is_dyadic(&weight) {
                return Err(Error::InvalidWeightedSet(format!(
                    "weight {} of {index} is not a nonnegative dyadic",
                    format_rational(&weight)
                )));
            }
            total += &weight;
            match out.iter_mut().find(|m| m.index == index) {
                Some(m) => m.weight += weight,
                None => out.push(Member { index, weight }),
            }
        }
        if total > Rational::one() {
            return Err(Error::InvalidWeightedSet(format!(
                "weights sum to {}",
                format_rational(&total)
            )));
        }
        out.sort_by_key(|m| m.index);
        Ok(WeightedSet { members: out })
    }

    /// Rounds each weight down to a multiple of `2^{-bits}`, dropping zeros.
    pub fn from_f64(weights: &[(Index, f64)], bits: u32) -> Result<Self> {
        let scale = (1u64 << bits) as f64;
        let members = weights
            .iter()
            .map(|&(e, w)| (e, (w * scale).floor().max(0.0) as i64))
            .filter(|&(_, k)| k > 0)
            .map(|(e, k)| (e, ratio(k, 1i64 << bits)))
            .collect();
        WeightedSet::new(members)
    }

    pub fn members(&self) -> impl Iterator<Item = (Index, &Rational)> {
        self.members.iter().map(|m| (m.index, &m.weight))
    }

    pub fn total(&self) -> Rational {
        self.members.iter().map(|m| &m.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn key(&self) -> String {
        self.members
            .iter()
            .map(|m| format!("{}:{}", m.index, format_rational(&m.weight)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

type TupleCache = Mutex<HashMap<(BitString, u64), Arc<Vec<RationalInterval>>>>;

/// The measure enumerating exactly the tuples carried by more than half the weight.
pub struct MajorityProgram {
    set: WeightedSet,
    cache: TupleCache,
}

const CACHE_LIMIT: usize = 1 << 16;

impl MajorityProgram {
    pub fn new(set: WeightedSet) -> Self {
        MajorityProgram {
            set,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn majority_tuples(
        &self,
        table: &ProgramTable,
        sigma: &BitString,
        s: u64,
    ) -> Result<Arc<Vec<RationalInterval>>> {
        let key = (sigma.clone(), s);
        if let Some(v) = self.cache.lock().get(&key) {
            return Ok(Arc::clone(v));
        }
        let half = ratio(1, 2);
        let v: Arc<Vec<RationalInterval>> = Arc::new(
            self.tuple_weights(table, sigma, s)?
                .into_iter()
                .filter(|(_, w)| *w > half)
                .map(|(iv, _)| iv)
                .collect(),
        );
        let mut cache = self.cache.lock();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&v));
        Ok(v)
    }

    /// Every tuple some member enumerates for `σ` by stage `s`, with the weight carrying it.
    pub fn tuple_weights(
        &self,
        table: &ProgramTable,
        sigma: &BitString,
        s: u64,
    ) -> Result<Vec<(RationalInterval, Rational)>> {
        let mut out: Vec<(RationalInterval, Rational)> = Vec::new();
        for (e, w) in self.set.members() {
            let mut seen: Vec<RationalInterval> = Vec::new();
            for iv in table.tuples(e, sigma, s)? {
                if seen.contains(&iv) {
                    continue;
                }
                match out.iter_mut().find(|(t, _)| *t == iv) {
                    Some((_, acc)) => *acc += w,
                    None => out.push((iv.clone(), w.clone())),
                }
                seen.push(iv);
            }
        }
        Ok(out)
    }
}

impl MeasureProgram for MajorityProgram {
    fn eval(&self, table: &ProgramTable, sigma: &BitString, s: u64) -> Result<RationalInterval> {
        Ok(self
            .majority_tuples(table, sigma, s)?
            .iter()
            .fold(RationalInterval::unit(), |acc, iv| acc.intersect(iv)))
    }

    fn tuples(
        &self,
        table: &ProgramTable,
        sigma: &BitString,
        s: u64,
    ) -> Result<Vec<RationalInterval>> {
        Ok(self.majority_tuples(table, sigma, s)?.to_vec())
    }

    fn is_total(&self, table: &ProgramTable) -> bool {
        let total: Rational = self
            .set
            .members()
            .filter(|(e, _)| table.is_total(*e).unwrap_or(false))
            .map(|(_, w)| w.clone())
            .sum();
        total > ratio(1, 2)
    }

    fn describe(&self) -> String {
        format!("majority({})", self.set.key())
    }
}

/// The majority measure of `set`, allocated once per set.
pub fn majority_measure(table: &ProgramTable, set: &WeightedSet) -> Index {
    table.alloc(format!("majority:{}", set.key()), || {
        Entry::MeasureProgram(Arc::new(MajorityProgram::new(set.clone())))
    })
}

/// `H(C, e)[s]`: true once the stage-`s` knowledge of `μ_e` provably lies outside `C`.
pub fn h_predicate(table: &ProgramTable, ball: &MeasureBall, e: Index, s: u64) -> Result<bool> {
    h_predicate_prepared(table, &PreparedBall::new(ball), e, s)
}

/// [`h_predicate`] against a ball whose constraints are already computed.
pub fn h_predicate_prepared(
    table: &ProgramTable,
    ball: &PreparedBall,
    e: Index,
    s: u64,
) -> Result<bool> {
    if !table.is_measure(e)? {
        return Ok(false);
    }
    let know = table.knowledge(e, s)?;
    if know.count_symmetric() {
        let mut memo: HashMap<(usize, usize), RationalInterval> = HashMap::new();
        return Ok(ball.contains(|sigma| {
            let key = (sigma.count_zeros(), sigma.count_ones());
            if let Some(v) = memo.get(&key) {
                return Ok(v.clone());
            }
            let v = know.eval(sigma)?;
            memo.insert(key, v.clone());
            Ok(v)
        })? == Tri::No);
    }
    Ok(ball.contains(|sigma| know.eval(sigma))? == Tri::No)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{MeasureObject, Tuple};
    use crate::programs::EntrySpec;
    use crate::rational::int;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn enumerated(tuples: Vec<(&str, i64, i64)>) -> EntrySpec {
        EntrySpec::Measure {
            measure: MeasureObject::enumerated(
                tuples
                    .into_iter()
                    .map(|(s, lo, hi)| {
                        Tuple::new(b(s), RationalInterval::open(ratio(lo, 8), ratio(hi, 8)), 0)
                    })
                    .collect(),
            ),
            total: None,
        }
    }

    fn table() -> ProgramTable {
        ProgramTable::from_specs(vec![
            enumerated(vec![("0", 1, 5), ("1", 3, 7)]),
            enumerated(vec![("0", 1, 5), ("1", 2, 6)]),
        ])
        .unwrap()
    }

    #[test]
    fn weighted_set_validation() {
        assert!(WeightedSet::new(vec![(0, ratio(3, 4)), (1, ratio(1, 2))]).is_err());
        assert!(WeightedSet::new(vec![(0, ratio(1, 3))]).is_err());
        assert!(WeightedSet::new(vec![(0, ratio(-1, 2))]).is_err());
        let w = WeightedSet::new(vec![(0, ratio(1, 4)), (0, ratio(1, 4))]).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.total(), ratio(1, 2));
        let f = WeightedSet::from_f64(&[(3, 0.7), (4, 0.3), (5, 0.0)], 40).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.total() <= int(1));
    }

    #[test]
    fn majority_examples() {
        let t = table();
        let only_first = RationalInterval::open(ratio(3, 8), ratio(7, 8));
        let shared = RationalInterval::open(ratio(1, 8), ratio(5, 8));
        let heavy = majority_measure(
            &t,
            &WeightedSet::new(vec![(0, ratio(5, 8)), (1, ratio(1, 4))]).unwrap(),
        );
        assert!(t.tuples(heavy, &b("1"), 5).unwrap().contains(&only_first));
        let even = majority_measure(
            &t,
            &WeightedSet::new(vec![(0, ratio(3, 8)), (1, ratio(3, 8))]).unwrap(),
        );
        assert!(t.tuples(even, &b("0"), 5).unwrap().contains(&shared));
        assert!(!t.tuples(even, &b("1"), 5).unwrap().contains(&only_first));
        assert_eq!(
            heavy,
            majority_measure(
                &t,
                &WeightedSet::new(vec![(1, ratio(1, 4)), (0, ratio(5, 8))]).unwrap()
            )
        );
    }

    #[test]
    fn h_predicate_examples() {
        let t = ProgramTable::from_specs(vec![
            EntrySpec::Measure {
                measure: MeasureObject::uniform(),
                total: None,
            },
            EntrySpec::Stub,
        ])
        .unwrap();
        let upper = RationalInterval {
            lo: ratio(3, 4),
            hi: int(1),
            lo_open: true,
            hi_open: false,
        };
        let ball = MeasureBall::Explicit(vec![(b("0"), upper)]);
        assert!(h_predicate(&t, &ball, 0, 100).unwrap());
        assert!(!h_predicate(&t, &ball, 1, 100).unwrap());
        let wide = MeasureBall::Explicit(vec![(b("0"), RationalInterval::closed(int(0), int(1)))]);
        for s in [0, 5, 50] {
            assert!(!h_predicate(&t, &wide, 0, s).unwrap());
        }
    }
}
