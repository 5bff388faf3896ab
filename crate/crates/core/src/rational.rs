//! Exact rationals and rational intervals of [0, 1].

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// `2^{-k}`.
pub fn pow2_neg(k: u64) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::InvalidRational(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(p))
        }
    }
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `p/q` string form for serde fields.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// `log2` of a positive rational, accurate to f64 precision for arbitrarily large parts.
pub fn log2(r: &Rational) -> f64 {
    debug_assert!(r.is_positive());
    log2_int(r.numer()) - log2_int(r.denom())
}

fn log2_int(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift as usize;
    top.to_f64().unwrap().log2() + shift as f64
}

pub fn to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let v = 2f64.powf(log2(&r.abs()));
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// `-log2 r`, or `None` when `r = 0`.
pub fn neg_log2(r: &Rational) -> Option<f64> {
    if r.is_zero() {
        None
    } else {
        Some(-log2(r))
    }
}

pub fn pow(r: &Rational, k: usize) -> Rational {
    Rational::new_raw(
        num_traits::pow(r.numer().clone(), k),
        num_traits::pow(r.denom().clone(), k),
    )
}

/// Bernoulli mass `q^a (1-q)^b`.
pub fn bernoulli_mass(q: &Rational, zeros: usize, ones: usize) -> Rational {
    let (n, d) = (q.numer(), q.denom());
    let numer = num_traits::pow(n.clone(), zeros) * num_traits::pow(d - n, ones);
    let denom = num_traits::pow(d.clone(), zeros + ones);
    if numer.is_zero() {
        return Rational::zero();
    }
    Rational::new_raw(numer, denom)
}

/// Smallest and largest value of `q^a (1-q)^b` over `q ∈ [lo, hi]`.
pub fn bernoulli_mass_range(
    lo: &Rational,
    hi: &Rational,
    zeros: usize,
    ones: usize,
) -> (Rational, Rational) {
    let at_lo = bernoulli_mass(lo, zeros, ones);
    let at_hi = bernoulli_mass(hi, zeros, ones);
    let n = zeros + ones;
    let peak = if n == 0 {
        None
    } else {
        let mode = ratio(zeros as i64, n as i64);
        (mode > *lo && mode < *hi).then(|| bernoulli_mass(&mode, zeros, ones))
    };
    let min = at_lo.clone().min(at_hi.clone());
    let max = peak.unwrap_or_else(|| at_lo.max(at_hi));
    (min, max)
}

/// `-log2 sup_{q ∈ [lo, hi]} q^a (1-q)^b` in floating point.
pub fn bernoulli_sup_neg_log2(lo: f64, hi: f64, zeros: u64, ones: u64) -> Option<f64> {
    let n = zeros + ones;
    let q = if n == 0 {
        return Some(0.0);
    } else {
        (zeros as f64 / n as f64).clamp(lo, hi)
    };
    let mut v = 0.0;
    if zeros > 0 {
        if q <= 0.0 {
            return None;
        }
        v -= zeros as f64 * q.log2();
    }
    if ones > 0 {
        if q >= 1.0 {
            return None;
        }
        v -= ones as f64 * (1.0 - q).log2();
    }
    Some(v)
}

/// A nonempty interval of [0, 1] with rational endpoints; each end open or closed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalInterval {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl RationalInterval {
    pub fn closed(lo: Rational, hi: Rational) -> Self {
        RationalInterval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn open(lo: Rational, hi: Rational) -> Self {
        RationalInterval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn point(v: Rational) -> Self {
        RationalInterval::closed(v.clone(), v)
    }

    pub fn unit() -> Self {
        RationalInterval::closed(Rational::zero(), Rational::one())
    }

    /// `[0, q)`.
    pub fn left_closed(q: Rational) -> Self {
        RationalInterval {
            lo: Rational::zero(),
            hi: q,
            lo_open: false,
            hi_open: true,
        }
    }

    /// `(p, 1]`.
    pub fn right_closed(p: Rational) -> Self {
        RationalInterval {
            lo: p,
            hi: Rational::one(),
            lo_open: true,
            hi_open: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match cmp(&self.lo, &self.hi) {
            Ordering::Greater => true,
            Ordering::Equal => self.lo_open || self.hi_open,
            Ordering::Less => false,
        }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains_value(&self, v: &Rational) -> bool {
        let above = match cmp(v, &self.lo) {
            Ordering::Greater => true,
            Ordering::Equal => !self.lo_open,
            Ordering::Less => false,
        };
        let below = match cmp(v, &self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open,
            Ordering::Greater => false,
        };
        above && below
    }

    pub fn intersect(&self, other: &RationalInterval) -> RationalInterval {
        let (lo, lo_open) = match cmp(&self.lo, &other.lo) {
            Ordering::Greater => (self.lo.clone(), self.lo_open),
            Ordering::Less => (other.lo.clone(), other.lo_open),
            Ordering::Equal => (self.lo.clone(), self.lo_open || other.lo_open),
        };
        let (hi, hi_open) = match cmp(&self.hi, &other.hi) {
            Ordering::Less => (self.hi.clone(), self.hi_open),
            Ordering::Greater => (other.hi.clone(), other.hi_open),
            Ordering::Equal => (self.hi.clone(), self.hi_open || other.hi_open),
        };
        RationalInterval {
            lo,
            hi,
            lo_open,
            hi_open,
        }
    }

    pub fn disjoint(&self, other: &RationalInterval) -> bool {
        self.intersect(other).is_empty()
    }

    /// `other ⊆ self`.
    pub fn contains_interval(&self, other: &RationalInterval) -> bool {
        if other.is_empty() {
            return true;
        }
        let lo_ok = match cmp(&other.lo, &self.lo) {
            Ordering::Greater => true,
            Ordering::Equal => !self.lo_open || other.lo_open,
            Ordering::Less => false,
        };
        let hi_ok = match cmp(&other.hi, &self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open || other.hi_open,
            Ordering::Greater => false,
        };
        lo_ok && hi_ok
    }

    /// Closure `[lo, hi]`.
    pub fn closure(&self) -> RationalInterval {
        RationalInterval::closed(self.lo.clone(), self.hi.clone())
    }

    /// The canonical basic interval of precision `k` holding this interval, if one does.
    ///
    /// Centers are `j / 2^k` with `j` the rounded midpoint; the interval is
    /// `((j-1)/2^k, (j+1)/2^k)` clipped to `[0, q)` or `(p, 1]` at the ends of [0, 1].
    /// Every point rounding to the same `j` gets the same tuple, which keeps
    /// stage-wise enumerations monotone as knowledge narrows.
    pub fn canonical_basic(&self, k: u32) -> Option<RationalInterval> {
        let j = rounded(&self.lo, k);
        if rounded(&self.hi, k) != j {
            return None;
        }
        self.basic_around(j, k)
    }

    /// `canonical_basic(k)` for every `k` in `1..=top`, skipping the ones that do not exist.
    pub fn canonical_basics(&self, top: u32) -> Vec<RationalInterval> {
        let (lo, hi) = (
            floor_scaled(&self.lo, top + 1),
            floor_scaled(&self.hi, top + 1),
        );
        (1..=top)
            .filter_map(|k| {
                let shift = (top - k) as usize;
                let j = ((&lo >> shift) + 1) >> 1usize;
                let jh = ((&hi >> shift) + 1) >> 1usize;
                if j == jh {
                    self.basic_around(j, k)
                } else {
                    None
                }
            })
            .collect()
    }

    fn basic_around(&self, j: BigInt, k: u32) -> Option<RationalInterval> {
        let top = BigInt::one() << k as usize;
        let lo = Rational::new(&j - BigInt::one(), top.clone());
        let hi = Rational::new(&j + BigInt::one(), top.clone());
        let basic = if j.sign() != Sign::Plus {
            RationalInterval::left_closed(hi)
        } else if j >= top {
            RationalInterval::right_closed(lo)
        } else {
            RationalInterval::open(lo, hi)
        };
        basic.contains_interval(self).then_some(basic)
    }
}

/// Rational comparison by cross-multiplication; cheaper than `Ord` for large denominators.
pub fn cmp(a: &Rational, b: &Rational) -> Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

/// `⌊v·2^bits⌋`.
fn floor_scaled(v: &Rational, bits: u32) -> BigInt {
    (v.numer() << bits as usize).div_floor(v.denom())
}

/// `⌊v·2^k + 1/2⌋`.
fn rounded(v: &Rational, k: u32) -> BigInt {
    (floor_scaled(v, k + 1) + 1) >> 1usize
}

impl fmt::Display for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { "(" } else { "[" },
            format_rational(&self.lo),
            format_rational(&self.hi),
            if self.hi_open { ")" } else { "]" }
        )
    }
}

impl fmt::Debug for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
