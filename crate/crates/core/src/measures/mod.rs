//! Exact and enumerated measures on Cantor space, the metric on measures, and seeded sampling.

mod ball;

pub use ball::{ball_contains, MeasureBall, PreparedBall, Tri};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rational::{
    bernoulli_mass, format_rational, int, log2, parse_rational, pow2_neg, ratio, serde_rational,
    Rational, RationalInterval,
};
use crate::source::RealGen;

/// Name and version of the sampling generator, recorded in reports.
pub const SAMPLER_ID: &str = "chacha8-v1";

/// One enumerated constraint: `μ(sigma) ∈ interval` from `stage` on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tuple {
    pub sigma: BitString,
    pub interval: RationalInterval,
    pub stage: u64,
}

impl Tuple {
    pub fn new(sigma: BitString, interval: RationalInterval, stage: u64) -> Self {
        Tuple {
            sigma,
            interval,
            stage,
        }
    }
}

/// Reads `[σ, lo, hi, stage]`; `lo = 0` means `[0, hi)`, `hi = 1` means `(lo, 1]`,
/// `lo = hi` a point, anything else the open interval.
fn interval_from_endpoints(lo: Rational, hi: Rational) -> RationalInterval {
    let zero = Rational::zero();
    let one = Rational::one();
    if lo == hi || (lo == zero && hi == one) {
        RationalInterval::closed(lo, hi)
    } else if lo == zero {
        RationalInterval::left_closed(hi)
    } else if hi == one {
        RationalInterval::right_closed(lo)
    } else {
        RationalInterval::open(lo, hi)
    }
}

impl Serialize for Tuple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (
            self.sigma.to_string(),
            format_rational(&self.interval.lo),
            format_rational(&self.interval.hi),
            self.stage,
        )
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tuple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (sigma, lo, hi, stage) = <(BitString, String, String, u64)>::deserialize(d)?;
        let lo = parse_rational(&lo).map_err(serde::de::Error::custom)?;
        let hi = parse_rational(&hi).map_err(serde::de::Error::custom)?;
        Ok(Tuple::new(sigma, interval_from_endpoints(lo, hi), stage))
    }
}

/// A measure on 2^ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureObject {
    Uniform,
    /// Each bit is 0 with probability `q`, independently.
    Bernoulli {
        #[serde(with = "serde_rational")]
        q: Rational,
    },
    /// μ_Z: bit `Z(k)` forced at position `2k`, fair coin at odd positions.
    Interleave {
        z: RealGen,
    },
    /// Tuples are kept sorted by string.
    Enumerated {
        #[serde(deserialize_with = "sorted_tuples")]
        tuples: Vec<Tuple>,
    },
}

fn sorted_tuples<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<Tuple>, D::Error> {
    let mut tuples = Vec::<Tuple>::deserialize(d)?;
    tuples.sort_by(|a, b| a.sigma.cmp(&b.sigma));
    Ok(tuples)
}

impl MeasureObject {
    pub fn uniform() -> Self {
        MeasureObject::Uniform
    }

    pub fn bernoulli(q: Rational) -> Self {
        debug_assert!(!q.is_negative() && q <= Rational::one());
        MeasureObject::Bernoulli { q }
    }

    pub fn interleave(z: RealGen) -> Result<Self> {
        if !z.is_total() {
            return Err(Error::MalformedMeasure(
                "interleave measure needs a total real".into(),
            ));
        }
        Ok(MeasureObject::Interleave { z })
    }

    pub fn enumerated(mut tuples: Vec<Tuple>) -> Self {
        tuples.sort_by(|a, b| a.sigma.cmp(&b.sigma));
        MeasureObject::Enumerated { tuples }
    }

    /// Rejects parameters outside [0, 1] and partial interleave reals.
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureObject::Bernoulli { q } if q.is_negative() || *q > Rational::one() => {
                Err(Error::MalformedMeasure(format!(
                    "bernoulli parameter {} outside [0, 1]",
                    format_rational(q)
                )))
            }
            MeasureObject::Interleave { z } if !z.is_total() => Err(Error::MalformedMeasure(
                "interleave measure needs a total real".into(),
            )),
            MeasureObject::Enumerated { tuples } => {
                for t in tuples {
                    if t.interval.is_empty()
                        || t.interval.lo.is_negative()
                        || t.interval.hi > Rational::one()
                    {
                        return Err(Error::MalformedMeasure(format!(
                            "bad tuple interval {}",
                            t.interval
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, MeasureObject::Enumerated { .. })
    }

    /// The parameter of a Bernoulli-type measure.
    pub fn bernoulli_param(&self) -> Option<Rational> {
        match self {
            MeasureObject::Uniform => Some(ratio(1, 2)),
            MeasureObject::Bernoulli { q } => Some(q.clone()),
            _ => None,
        }
    }

    /// `μ(σ)` for exact measures.
    pub fn mass(&self, sigma: &BitString) -> Option<Rational> {
        match self {
            MeasureObject::Uniform => Some(pow2_neg(sigma.len() as u64)),
            MeasureObject::Bernoulli { q } => {
                Some(bernoulli_mass(q, sigma.count_zeros(), sigma.count_ones()))
            }
            MeasureObject::Interleave { z } => Some(if on_interleave_support(z, sigma) {
                pow2_neg((sigma.len() / 2) as u64)
            } else {
                Rational::zero()
            }),
            MeasureObject::Enumerated { .. } => None,
        }
    }

    /// `-log2 μ(σ)` for exact measures, `None` on mass zero.
    pub fn neg_log2(&self, sigma: &BitString) -> Option<f64> {
        match self {
            MeasureObject::Uniform => Some(sigma.len() as f64),
            MeasureObject::Bernoulli { q } => {
                let (a, b) = (sigma.count_zeros(), sigma.count_ones());
                bernoulli_neg_log2(q, a as u64, b as u64)
            }
            MeasureObject::Interleave { z } => {
                on_interleave_support(z, sigma).then_some((sigma.len() / 2) as f64)
            }
            MeasureObject::Enumerated { .. } => None,
        }
    }

    /// Stage-`s` knowledge interval for `μ(σ)`.
    pub fn eval(&self, sigma: &BitString, s: u64) -> Result<RationalInterval> {
        if let Some(v) = self.mass(sigma) {
            return Ok(RationalInterval::point(v));
        }
        let mut acc = RationalInterval::unit();
        for iv in self.tuples_for(sigma, s) {
            acc = acc.intersect(iv);
        }
        if acc.is_empty() {
            return Err(Error::MalformedMeasure(format!(
                "empty intersection for {sigma} at stage {s}"
            )));
        }
        Ok(acc)
    }

    /// Intervals enumerated for `σ` by stage `s`.
    pub fn tuples_for<'a>(
        &'a self,
        sigma: &'a BitString,
        s: u64,
    ) -> impl Iterator<Item = &'a RationalInterval> + 'a {
        let tuples: &[Tuple] = match self {
            MeasureObject::Enumerated { tuples } => tuples,
            _ => &[],
        };
        let start = tuples.partition_point(|t| t.sigma < *sigma);
        tuples[start..]
            .iter()
            .take_while(move |t| t.sigma == *sigma)
            .filter(move |t| t.stage <= s)
            .map(|t| &t.interval)
    }

    /// Opt-in check that every enumerated interval meets the sum of its children's intervals.
    pub fn check_additive_consistency(&self, depth: usize, s: u64) -> Result<()> {
        for n in 0..depth {
            for sigma in BitString::all_of_length(n) {
                let parent = if sigma.is_empty() {
                    RationalInterval::point(Rational::one())
                } else {
                    self.eval(&sigma, s)?
                };
                let c0 = self.eval(&sigma.child(false), s)?;
                let c1 = self.eval(&sigma.child(true), s)?;
                let sum = RationalInterval::closed(&c0.lo + &c1.lo, &c0.hi + &c1.hi);
                if parent.closure().disjoint(&sum) {
                    return Err(Error::MalformedMeasure(format!(
                        "{sigma}: {parent} misses {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `μ(σb) / μ(σ)`.
    pub fn conditional(&self, sigma: &BitString, b: bool) -> Result<Rational> {
        let parent = self
            .mass(sigma)
            .ok_or_else(|| Error::MalformedMeasure("conditional needs an exact measure".into()))?;
        if parent.is_zero() {
            return Err(Error::UndefinedConditional(sigma.clone()));
        }
        let child = self.mass(&sigma.child(b)).expect("exact");
        Ok(child / parent)
    }

    /// A deterministic stream of `n` bits drawn from the measure with the given seed.
    pub fn sample(&self, seed: u64, n: usize) -> Result<BitString> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = BitString::with_capacity(n);
        let two64 = BigInt::one() << 64usize;
        let threshold = |p0: &Rational| -> u128 {
            let t = p0 * Rational::from_integer(two64.clone());
            t.ceil().to_integer().to_u128().unwrap_or(0)
        };
        match self {
            MeasureObject::Uniform | MeasureObject::Bernoulli { .. } => {
                let t = threshold(&self.bernoulli_param().unwrap());
                for _ in 0..n {
                    out.push((rng.next_u64() as u128) >= t);
                }
            }
            MeasureObject::Interleave { z } => {
                let mut zb = z.bits();
                for i in 0..n {
                    let r = rng.next_u64();
                    if i % 2 == 0 {
                        out.push(zb.next().flatten().expect("total real"));
                    } else {
                        out.push(r >> 63 == 1);
                    }
                }
            }
            MeasureObject::Enumerated { .. } => {
                return Err(Error::MalformedMeasure(
                    "sampling needs an exact measure".into(),
                ));
            }
        }
        Ok(out)
    }
}

fn on_interleave_support(z: &RealGen, sigma: &BitString) -> bool {
    sigma
        .iter()
        .step_by(2)
        .zip(z.bits())
        .all(|(b, zb)| zb == Some(b))
}

/// `-log2 (q^a (1-q)^b)`, `None` when the mass is zero.
pub fn bernoulli_neg_log2(q: &Rational, a: u64, b: u64) -> Option<f64> {
    let one = Rational::one();
    let mut v = 0.0;
    if a > 0 {
        if q.is_zero() {
            return None;
        }
        v -= a as f64 * log2(q);
    }
    if b > 0 {
        if *q == one {
            return None;
        }
        v -= b as f64 * log2(&(&one - q));
    }
    Some(v)
}

/// `d(μ, ν)` truncated at `depth`: `(Σ_{n ≤ depth} 2^{-n} max_σ |μ(σ) - ν(σ)|, 2^{-depth})`.
pub fn measure_distance(
    mu: &MeasureObject,
    nu: &MeasureObject,
    depth: usize,
) -> Result<(Rational, Rational)> {
    if !mu.is_exact() || !nu.is_exact() {
        return Err(Error::MalformedMeasure(
            "distance needs exact measures".into(),
        ));
    }
    let mut partial = Rational::zero();
    for n in 1..=depth {
        partial += pow2_neg(n as u64) * level_difference(mu, nu, n);
    }
    Ok((partial, pow2_neg(depth as u64)))
}

/// `max_{σ ∈ 2^n} |μ(σ) - ν(σ)|`.
pub fn level_difference(mu: &MeasureObject, nu: &MeasureObject, n: usize) -> Rational {
    if let (Some(p), Some(q)) = (mu.bernoulli_param(), nu.bernoulli_param()) {
        return (0..=n)
            .map(|a| (bernoulli_mass(&p, a, n - a) - bernoulli_mass(&q, a, n - a)).abs())
            .max()
            .unwrap_or_else(Rational::zero);
    }
    BitString::all_of_length(n)
        .map(|s| (mu.mass(&s).unwrap() - nu.mass(&s).unwrap()).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// `Σ_{σ ∈ 2^n} |μ(σ) - ν(σ)|` for exact measures.
pub fn level_sum(mu: &MeasureObject, nu: &MeasureObject, n: usize) -> Rational {
    if let (Some(p), Some(q)) = (mu.bernoulli_param(), nu.bernoulli_param()) {
        let mut binom = int(1);
        let mut total = Rational::zero();
        for a in 0..=n {
            total += &binom * (bernoulli_mass(&p, a, n - a) - bernoulli_mass(&q, a, n - a)).abs();
            binom = binom * int((n - a) as i64) / int(a as i64 + 1);
        }
        return total;
    }
    BitString::all_of_length(n)
        .map(|s| (mu.mass(&s).unwrap() - nu.mass(&s).unwrap()).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn constructors() -> Vec<MeasureObject> {
        let mut out = vec![MeasureObject::uniform()];
        for (p, q) in [
            (0, 1),
            (1, 1),
            (1, 3),
            (2, 3),
            (1, 2),
            (1, 4),
            (2, 5),
            (7, 17),
            (3, 5),
            (5, 9),
        ] {
            out.push(MeasureObject::bernoulli(ratio(p, q)));
        }
        for z in [
            RealGen::expansion(ratio(1, 3)),
            RealGen::zeros(),
            RealGen::periodic(b("10")),
            RealGen::hat(RealGen::expansion(ratio(1, 3))),
            RealGen::expansion(ratio(5, 7)),
        ] {
            out.push(MeasureObject::interleave(z).unwrap());
        }
        out
    }

    #[test]
    fn additivity_and_normalization() {
        for mu in constructors() {
            assert_eq!(mu.mass(&BitString::new()).unwrap(), int(1));
            for n in 0..=8 {
                for s in BitString::all_of_length(n) {
                    let sum = mu.mass(&s.child(false)).unwrap() + mu.mass(&s.child(true)).unwrap();
                    assert_eq!(mu.mass(&s).unwrap(), sum, "{mu:?} at {s}");
                }
            }
        }
    }

    #[test]
    fn constructor_examples() {
        let u = MeasureObject::uniform();
        assert_eq!(u.mass(&b("0110")).unwrap(), ratio(1, 16));
        assert_eq!(
            MeasureObject::bernoulli(ratio(1, 3))
                .mass(&b("00"))
                .unwrap(),
            ratio(1, 9)
        );
        assert_eq!(
            MeasureObject::bernoulli(int(1)).mass(&b("01")).unwrap(),
            int(0)
        );
        let z0 = MeasureObject::interleave(RealGen::zeros()).unwrap();
        assert_eq!(z0.mass(&b("0")).unwrap(), int(1));
        assert_eq!(z0.mass(&b("1")).unwrap(), int(0));
        assert_eq!(z0.mass(&b("00")).unwrap(), ratio(1, 2));
        assert_eq!(z0.mass(&b("01")).unwrap(), ratio(1, 2));
    }

    #[test]
    fn enumerated_eval() {
        let mu = MeasureObject::enumerated(vec![
            Tuple::new(b("0"), RationalInterval::open(ratio(1, 4), ratio(1, 2)), 1),
            Tuple::new(b("0"), RationalInterval::open(ratio(3, 8), ratio(5, 8)), 3),
        ]);
        assert_eq!(
            mu.eval(&b("0"), 3).unwrap(),
            RationalInterval::open(ratio(3, 8), ratio(1, 2))
        );
        assert_eq!(
            mu.eval(&b("0"), 2).unwrap(),
            RationalInterval::open(ratio(1, 4), ratio(1, 2))
        );
        assert_eq!(mu.eval(&b("11"), 3).unwrap(), RationalInterval::unit());
        assert_eq!(
            MeasureObject::uniform().eval(&b("01"), 0).unwrap(),
            RationalInterval::point(ratio(1, 4))
        );
        let bad = MeasureObject::enumerated(vec![
            Tuple::new(b("0"), RationalInterval::open(ratio(0, 1), ratio(1, 4)), 0),
            Tuple::new(b("0"), RationalInterval::open(ratio(1, 2), ratio(1, 1)), 0),
        ]);
        assert!(matches!(
            bad.eval(&b("0"), 0),
            Err(Error::MalformedMeasure(_))
        ));
    }

    #[test]
    fn additive_consistency_validator() {
        let ok = MeasureObject::enumerated(vec![
            Tuple::new(b("0"), RationalInterval::open(ratio(1, 4), ratio(3, 4)), 0),
            Tuple::new(b("1"), RationalInterval::open(ratio(1, 4), ratio(3, 4)), 0),
        ]);
        assert!(ok.check_additive_consistency(2, 0).is_ok());
        let bad = MeasureObject::enumerated(vec![
            Tuple::new(b("0"), RationalInterval::open(ratio(0, 1), ratio(1, 8)), 0),
            Tuple::new(b("1"), RationalInterval::open(ratio(0, 1), ratio(1, 8)), 0),
        ]);
        assert!(bad.check_additive_consistency(1, 0).is_err());
    }

    #[test]
    fn tuple_json_shapes() {
        let mu: MeasureObject = serde_json::from_str(
            r#"{"kind":"enumerated","tuples":[["0","1/4","1/2",3],["1","0","1/2",0],["1","1/2","1",0]]}"#,
        )
        .unwrap();
        let MeasureObject::Enumerated { tuples } = &mu else {
            panic!()
        };
        assert_eq!(
            tuples[0].interval,
            RationalInterval::open(ratio(1, 4), ratio(1, 2))
        );
        assert_eq!(
            tuples[1].interval,
            RationalInterval::left_closed(ratio(1, 2))
        );
        assert_eq!(
            tuples[2].interval,
            RationalInterval::right_closed(ratio(1, 2))
        );
        let back: MeasureObject =
            serde_json::from_str(&serde_json::to_string(&mu).unwrap()).unwrap();
        assert_eq!(back, mu);
        let q: MeasureObject = serde_json::from_str(r#"{"kind":"bernoulli","q":"1/3"}"#).unwrap();
        assert_eq!(q, MeasureObject::bernoulli(ratio(1, 3)));
    }

    #[test]
    fn distance_examples() {
        let half = MeasureObject::bernoulli(ratio(1, 2));
        let quarter = MeasureObject::bernoulli(ratio(1, 4));
        assert_eq!(
            measure_distance(&half, &half, 5).unwrap(),
            (int(0), ratio(1, 32))
        );
        assert_eq!(
            measure_distance(&half, &quarter, 2).unwrap(),
            (ratio(13, 64), ratio(1, 4))
        );
        let zeros = MeasureObject::bernoulli(int(1));
        let ones = MeasureObject::bernoulli(int(0));
        let (d, _) = measure_distance(&zeros, &ones, 6).unwrap();
        assert_eq!(d, int(1) - pow2_neg(6));
        let z0 = MeasureObject::interleave(RealGen::zeros()).unwrap();
        let z1 = MeasureObject::interleave(RealGen::periodic(b("1"))).unwrap();
        let (d, _) = measure_distance(&z0, &z1, 2).unwrap();
        assert_eq!(d, ratio(1, 2) + ratio(1, 4) * ratio(1, 2));
    }

    #[test]
    fn brute_force_matches_count_grouping() {
        let p = MeasureObject::bernoulli(ratio(1, 3));
        let q = MeasureObject::bernoulli(ratio(3, 5));
        let zp = MeasureObject::interleave(RealGen::zeros()).unwrap();
        for n in 1..=6 {
            let brute = BitString::all_of_length(n)
                .map(|s| (p.mass(&s).unwrap() - q.mass(&s).unwrap()).abs())
                .max()
                .unwrap();
            assert_eq!(level_difference(&p, &q, n), brute);
            let brute_sum: Rational = BitString::all_of_length(n)
                .map(|s| (p.mass(&s).unwrap() - q.mass(&s).unwrap()).abs())
                .sum();
            assert_eq!(level_sum(&p, &q, n), brute_sum);
            assert!(level_sum(&p, &zp, n) >= level_difference(&p, &zp, n));
        }
    }

    #[test]
    fn conditionals() {
        let third = MeasureObject::bernoulli(ratio(1, 3));
        assert_eq!(third.conditional(&b("0110"), false).unwrap(), ratio(1, 3));
        assert_eq!(
            MeasureObject::uniform().conditional(&b("1"), true).unwrap(),
            ratio(1, 2)
        );
        let z = MeasureObject::interleave(RealGen::expansion(ratio(1, 3))).unwrap();
        assert_eq!(z.conditional(&b("01"), true).unwrap(), int(1));
        assert_eq!(z.conditional(&b("0"), false).unwrap(), ratio(1, 2));
        assert!(matches!(
            z.conditional(&b("1"), false),
            Err(Error::UndefinedConditional(_))
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let half = MeasureObject::bernoulli(ratio(1, 2));
        let a = half.sample(7, 8).unwrap();
        assert_eq!(a, half.sample(7, 8).unwrap());
        assert_eq!(a, b("00111001"));
        assert_eq!(
            MeasureObject::bernoulli(int(1)).sample(3, 4).unwrap(),
            b("0000")
        );
        assert_eq!(
            MeasureObject::bernoulli(int(0)).sample(3, 4).unwrap(),
            b("1111")
        );
        let long = half.sample(7, 64).unwrap();
        assert_eq!(long.prefix(8), a);
    }

    #[test]
    fn interleave_samples_carry_z() {
        let zgen = RealGen::expansion(ratio(1, 3));
        let mu = MeasureObject::interleave(zgen.clone()).unwrap();
        for seed in 0..5 {
            let x = mu.sample(seed, 200).unwrap();
            let (z, _) = crate::bits::deinterleave(&x);
            assert_eq!(z, zgen.prefix(100));
            assert!(mu.mass(&x).unwrap() > int(0));
        }
    }

    #[test]
    fn law_of_large_numbers() {
        let q = ratio(1, 3);
        let mu = MeasureObject::bernoulli(q);
        let good = (0..100)
            .filter(|&seed| {
                let x = mu.sample(seed, 4096).unwrap();
                let f = x.count_zeros() as f64 / 4096.0;
                (f - 1.0 / 3.0).abs() <= 0.05
            })
            .count();
        assert!(good >= 95);
    }

    #[test]
    fn neg_log2_matches_mass() {
        for mu in constructors() {
            for s in BitString::all_of_length(5) {
                let m = mu.mass(&s).unwrap();
                match mu.neg_log2(&s) {
                    None => assert!(m.is_zero()),
                    Some(v) => assert!((v + log2(&m)).abs() < 1e-9),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn symmetry_and_triangle(p in 0u32..=64, q in 0u32..=64, r in 0u32..=64) {
            let m = |k: u32| MeasureObject::bernoulli(ratio(k as i64, 64));
            let (a, b, c) = (m(p), m(q), m(r));
            let (ab, tail) = measure_distance(&a, &b, 10).unwrap();
            let (ba, _) = measure_distance(&b, &a, 10).unwrap();
            prop_assert_eq!(&ab, &ba);
            let (bc, _) = measure_distance(&b, &c, 10).unwrap();
            let (ac, _) = measure_distance(&a, &c, 10).unwrap();
            prop_assert!(ac <= ab + bc + tail * int(3));
        }

        #[test]
        fn additivity_random_strings(bits in proptest::collection::vec(any::<bool>(), 0..12), k in 0i64..=20) {
            let s = BitString::from_bits(bits);
            let mu = MeasureObject::bernoulli(ratio(k, 20));
            prop_assert_eq!(
                mu.mass(&s).unwrap(),
                mu.mass(&s.child(false)).unwrap() + mu.mass(&s.child(true)).unwrap()
            );
        }
    }
}
