//! Infinite binary streams: computable real generators and bit sources.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measures::MeasureObject;
use crate::rational::{serde_rational, Rational};

/// Largest denominator for which eventual periodicity of an expansion is computed.
const PERIOD_SEARCH_LIMIT: u64 = 1 << 22;

/// A generator for the bits of a real in Cantor space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealGen {
    /// Binary expansion of a rational in [0, 1]; `1` is read as `0.111…`.
    Expansion {
        #[serde(with = "serde_rational")]
        value: Rational,
    },
    /// `prefix` followed by `cycle` repeated forever.
    Periodic {
        #[serde(default)]
        prefix: BitString,
        cycle: BitString,
    },
    /// Hat image of the inner real.
    Hat { inner: Box<RealGen> },
    /// The inner real cut off after `len` bits; undefined from there on.
    Truncated { inner: Box<RealGen>, len: usize },
}

impl RealGen {
    pub fn expansion(value: Rational) -> Self {
        RealGen::Expansion { value }
    }

    pub fn periodic(cycle: BitString) -> Self {
        RealGen::Periodic {
            prefix: BitString::new(),
            cycle,
        }
    }

    pub fn zeros() -> Self {
        RealGen::periodic(BitString::zeros(1))
    }

    pub fn hat(inner: RealGen) -> Self {
        RealGen::Hat {
            inner: Box::new(inner),
        }
    }

    /// Bit `j`, or `None` when the generator is undefined there.
    pub fn bit(&self, j: usize) -> Option<bool> {
        match self {
            RealGen::Expansion { value } => Some(expansion_bit(value, j)),
            RealGen::Periodic { prefix, cycle } => Some(if j < prefix.len() {
                prefix.bit(j)
            } else {
                cycle.bit((j - prefix.len()) % cycle.len())
            }),
            RealGen::Hat { inner } => {
                inner
                    .bit(j / 2)
                    .map(|b| if j.is_multiple_of(2) { b } else { !b })
            }
            RealGen::Truncated { inner, len } => {
                if j < *len {
                    inner.bit(j)
                } else {
                    None
                }
            }
        }
    }

    pub fn is_total(&self) -> bool {
        match self {
            RealGen::Expansion { .. } | RealGen::Periodic { .. } => true,
            RealGen::Hat { inner } => inner.is_total(),
            RealGen::Truncated { .. } => false,
        }
    }

    /// Bits `0, 1, …` in constant time each; `None` forever once undefined.
    pub fn bits(&self) -> Box<dyn Iterator<Item = Option<bool>> + '_> {
        match self {
            RealGen::Expansion { value } => {
                let (p, q) = expansion_parts(value);
                if p >= q {
                    return Box::new(std::iter::repeat(Some(true)));
                }
                let mut r = p as u128;
                let q = q as u128;
                Box::new(std::iter::from_fn(move || {
                    r *= 2;
                    let b = r >= q;
                    if b {
                        r -= q;
                    }
                    Some(Some(b))
                }))
            }
            RealGen::Periodic { prefix, cycle } => Box::new(
                prefix
                    .bits()
                    .iter()
                    .chain(cycle.bits().iter().cycle())
                    .map(|&b| Some(b)),
            ),
            RealGen::Hat { inner } => Box::new(inner.bits().flat_map(|b| [b, b.map(|v| !v)])),
            RealGen::Truncated { inner, len } => {
                Box::new(inner.bits().take(*len).chain(std::iter::repeat(None)))
            }
        }
    }

    /// The longest defined prefix up to `n` bits.
    pub fn prefix(&self, n: usize) -> BitString {
        self.bits().take(n).map_while(|b| b).collect()
    }

    /// `(preperiod, cycle)` when the stream is total and eventually periodic.
    pub fn eventually_periodic(&self) -> Option<(BitString, BitString)> {
        match self {
            RealGen::Expansion { value } => expansion_period(value),
            RealGen::Periodic { prefix, cycle } => Some((prefix.clone(), cycle.clone())),
            RealGen::Hat { inner } => {
                let (pre, cycle) = inner.eventually_periodic()?;
                Some((
                    crate::bits::hat_encode(&pre),
                    crate::bits::hat_encode(&cycle),
                ))
            }
            RealGen::Truncated { .. } => None,
        }
    }

    /// The real as an exact rational, when it is one.
    pub fn rational_value(&self) -> Option<Rational> {
        let (pre, cycle) = self.eventually_periodic()?;
        let as_int = |b: &BitString| {
            b.iter().fold(BigInt::zero(), |acc, bit| {
                (acc << 1usize) + BigInt::from(bit as u8)
            })
        };
        let period = (BigInt::one() << cycle.len()) - BigInt::one();
        let tail = Rational::new(as_int(&cycle), period);
        let v = (Rational::from_integer(as_int(&pre)) + tail)
            / Rational::from_integer(BigInt::one() << pre.len());
        Some(v)
    }
}

fn expansion_parts(value: &Rational) -> (u64, u64) {
    use num_traits::ToPrimitive;
    let p = value
        .numer()
        .to_u64()
        .expect("expansion numerator fits in u64");
    let q = value
        .denom()
        .to_u64()
        .expect("expansion denominator fits in u64");
    (p, q)
}

fn expansion_bit(value: &Rational, j: usize) -> bool {
    let (p, q) = expansion_parts(value);
    if p >= q {
        return true;
    }
    // r_j = 2^j p mod q; bit j is 1 iff 2 r_j >= q.
    let r = (modpow2(j as u64, q) as u128 * p as u128 % q as u128) as u64;
    2 * r as u128 >= q as u128
}

fn modpow2(mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut base = 2u128 % m;
    let mut acc = 1u128 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc as u64
}

fn expansion_period(value: &Rational) -> Option<(BitString, BitString)> {
    let (p, q) = expansion_parts(value);
    if p >= q {
        return Some((BitString::new(), BitString::from_bits(vec![true])));
    }
    if q > PERIOD_SEARCH_LIMIT {
        return None;
    }
    let mut seen: HashMap<u64, usize> = HashMap::new();
    let mut bits = Vec::new();
    let mut r = p;
    loop {
        if let Some(&start) = seen.get(&r) {
            let pre = BitString::from_bits(bits[..start].to_vec());
            let cycle = BitString::from_bits(bits[start..].to_vec());
            return Some((pre, cycle));
        }
        seen.insert(r, bits.len());
        let doubled = 2 * r;
        bits.push(doubled >= q);
        r = doubled % q;
    }
}

/// A deterministic infinite bit stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BitSource {
    Real { real: RealGen },
    Sampled { measure: MeasureObject, seed: u64 },
    Literal { bits: BitString },
}

impl BitSource {
    pub fn bit(&self, pos: usize) -> Result<bool> {
        match self {
            BitSource::Real { real } => real.bit(pos).ok_or(Error::SourceExhausted(pos)),
            BitSource::Sampled { measure, seed } => Ok(measure.sample(*seed, pos + 1)?.bit(pos)),
            BitSource::Literal { bits } => bits.get(pos).ok_or(Error::SourceExhausted(pos)),
        }
    }

    pub fn prefix(&self, n: usize) -> Result<BitString> {
        match self {
            BitSource::Sampled { measure, seed } => measure.sample(*seed, n),
            _ => (0..n).map(|i| self.bit(i)).collect(),
        }
    }
}
