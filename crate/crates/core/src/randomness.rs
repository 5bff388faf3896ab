//! Compressor-backed upper bounds on prefix complexity and the deficiency surrogate.

use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measures::MeasureBall;
use crate::programs::{Index, ProgramTable};

/// Longest period tried by the repeating-pattern codec.
pub const MAX_PERIOD: usize = 32;

/// Length of the Elias gamma code of `n ≥ 1`.
pub fn gamma_len(n: u64) -> u64 {
    debug_assert!(n >= 1);
    2 * (63 - n.leading_zeros() as u64) + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    /// The word itself after a gamma-coded length and a flag bit.
    Literal,
    /// First bit, then gamma-coded run lengths.
    RunLength,
    /// A period of at most 32 bits repeated to the stated length.
    Repeating,
    /// DEFLATE over the whole bytes, raw tail bits.
    Deflate,
}

impl Codec {
    pub fn id(self) -> &'static str {
        match self {
            Codec::Literal => "literal-v1",
            Codec::RunLength => "run-length-v1",
            Codec::Repeating => "repeating-v1",
            Codec::Deflate => "deflate-v1",
        }
    }

    pub fn parse(name: &str) -> Option<Codec> {
        match name {
            "literal" | "literal-v1" => Some(Codec::Literal),
            "run_length" | "run-length" | "run-length-v1" => Some(Codec::RunLength),
            "repeating" | "repeating-v1" => Some(Codec::Repeating),
            "deflate" | "deflate-v1" => Some(Codec::Deflate),
            _ => None,
        }
    }

    /// Code length in bits.
    pub fn encode_len(self, sigma: &BitString) -> u64 {
        let n = sigma.len() as u64;
        match self {
            Codec::Literal => n + gamma_len(n + 1) + 1,
            Codec::RunLength => {
                let mut runs = Vec::new();
                let mut i = 0;
                while i < sigma.len() {
                    let mut j = i;
                    while j < sigma.len() && sigma.bit(j) == sigma.bit(i) {
                        j += 1;
                    }
                    runs.push((j - i) as u64);
                    i = j;
                }
                1 + gamma_len(runs.len() as u64 + 1)
                    + runs.iter().map(|&r| gamma_len(r)).sum::<u64>()
            }
            Codec::Repeating => {
                let p = (1..=MAX_PERIOD.min(sigma.len().max(1)))
                    .find(|&p| (p..sigma.len()).all(|i| sigma.bit(i) == sigma.bit(i - p)))
                    .unwrap_or(sigma.len().max(1));
                gamma_len(p as u64) + p as u64 + gamma_len(n + 1)
            }
            Codec::Deflate => {
                let whole = sigma.len() / 8 * 8;
                8 * deflate_bytes(&sigma.prefix(whole).to_bytes())
                    + (n - whole as u64)
                    + gamma_len(n + 1)
            }
        }
    }
}

fn deflate_bytes(bytes: &[u8]) -> u64 {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() + 16), Compression::default());
    enc.write_all(bytes).expect("in-memory write");
    enc.finish().expect("in-memory write").len() as u64
}

/// Complexity upper bound `K̂(σ)[s]`: the best of the first `min(s, #codecs)` codecs,
/// each charged the gamma length of its position as an id penalty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityEstimator {
    pub codecs: Vec<Codec>,
}

impl Default for ComplexityEstimator {
    fn default() -> Self {
        ComplexityEstimator {
            codecs: vec![
                Codec::Literal,
                Codec::RunLength,
                Codec::Repeating,
                Codec::Deflate,
            ],
        }
    }
}

impl ComplexityEstimator {
    /// The literal codec must come first so every estimate is bounded by `|σ| + header`.
    pub fn new(codecs: Vec<Codec>) -> Result<Self> {
        if codecs.first() != Some(&Codec::Literal) {
            return Err(Error::config(
                "codecs",
                "the literal codec must be listed first",
            ));
        }
        Ok(ComplexityEstimator { codecs })
    }

    pub fn from_names(names: &[String]) -> Result<Self> {
        let codecs = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                Codec::parse(n).ok_or_else(|| {
                    Error::config(format!("codecs[{i}]"), format!("unknown codec {n:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ComplexityEstimator::new(codecs)
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.codecs.iter().map(|c| c.id()).collect()
    }

    pub fn penalty(position: usize) -> u64 {
        gamma_len(position as u64 + 1)
    }

    pub fn complexity_upper(&self, sigma: &BitString, s: u64) -> u64 {
        let k = (s.max(1) as usize).min(self.codecs.len());
        self.codecs[..k]
            .iter()
            .enumerate()
            .map(|(i, c)| c.encode_len(sigma) + Self::penalty(i))
            .min()
            .unwrap()
    }

    /// Incremental estimates for every prefix of a growing word.
    pub fn profile(&self) -> ComplexityProfile {
        ComplexityProfile::new(self.clone())
    }
}

/// `K̂` of every prefix of a word fed bit by bit.
///
/// Entry `n` holds, for each `k`, the best estimate among the first `k` codecs for the
/// length-`n` prefix, so `get(n, s)` equals `complexity_upper(X↾n, s)`.
#[derive(Clone, Debug)]
pub struct ComplexityProfile {
    estimator: ComplexityEstimator,
    word: BitString,
    best: Vec<Vec<u64>>,
    runs: Vec<u64>,
    periodic: Vec<bool>,
    deflate_whole: u64,
}

impl ComplexityProfile {
    fn new(estimator: ComplexityEstimator) -> Self {
        let mut p = ComplexityProfile {
            estimator,
            word: BitString::new(),
            best: Vec::new(),
            runs: Vec::new(),
            periodic: vec![true; MAX_PERIOD + 1],
            deflate_whole: deflate_bytes(&[]),
        };
        p.record();
        p
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn word(&self) -> &BitString {
        &self.word
    }

    pub fn push(&mut self, b: bool) {
        let n = self.word.len();
        match self.word.get(n.wrapping_sub(1)) {
            Some(last) if n > 0 && last == b => *self.runs.last_mut().unwrap() += 1,
            _ => self.runs.push(1),
        }
        for p in 1..=MAX_PERIOD {
            if n >= p && self.periodic[p] && self.word.bit(n - p) != b {
                self.periodic[p] = false;
            }
        }
        self.word.push(b);
        if self.word.len().is_multiple_of(8) && self.estimator.codecs.contains(&Codec::Deflate) {
            self.deflate_whole = deflate_bytes(&self.word.to_bytes());
        }
        self.record();
    }

    pub fn extend(&mut self, bits: &BitString) {
        for b in bits.iter() {
            self.push(b);
        }
    }

    fn codec_len(&self, c: Codec) -> u64 {
        let n = self.word.len() as u64;
        match c {
            Codec::Literal => n + gamma_len(n + 1) + 1,
            Codec::RunLength => {
                1 + gamma_len(self.runs.len() as u64 + 1)
                    + self.runs.iter().map(|&r| gamma_len(r)).sum::<u64>()
            }
            Codec::Repeating => {
                let p = (1..=MAX_PERIOD.min(self.word.len().max(1)))
                    .find(|&p| self.periodic[p])
                    .unwrap_or(self.word.len().max(1));
                gamma_len(p as u64) + p as u64 + gamma_len(n + 1)
            }
            Codec::Deflate => 8 * self.deflate_whole + n % 8 + gamma_len(n + 1),
        }
    }

    fn record(&mut self) {
        let mut acc = u64::MAX;
        let mut row = Vec::with_capacity(self.estimator.codecs.len());
        for (i, &c) in self.estimator.codecs.iter().enumerate() {
            acc = acc.min(self.codec_len(c) + ComplexityEstimator::penalty(i));
            row.push(acc);
        }
        self.best.push(row);
    }

    /// `K̂(X↾n)[s]`.
    pub fn get(&self, n: usize, s: u64) -> u64 {
        let row = &self.best[n];
        row[(s.max(1) as usize).min(row.len()) - 1]
    }
}

/// Randomness deficiency, with `+∞` for prefixes of measure zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deficiency {
    Finite(i64),
    Infinite,
}

impl Deficiency {
    /// `⌈neg_log2⌉ - k`, where `neg_log2 = None` stands for `-log2 0`.
    ///
    /// The ceiling is taken in floating point with a `1e-9` allowance, so exact
    /// powers of two are not pushed up by rounding noise.
    pub fn from_parts(neg_log2: Option<f64>, k: u64) -> Deficiency {
        match neg_log2 {
            None => Deficiency::Infinite,
            Some(v) => Deficiency::Finite((v - 1e-9).ceil() as i64 - k as i64),
        }
    }

    pub fn at_most(self, c: i64) -> bool {
        self <= Deficiency::Finite(c)
    }
}

/// `d_e(σ)[s] = ⌈-log2 sup μ_e(σ)[s]⌉ - K̂(σ)[s]`.
pub fn deficiency(
    table: &ProgramTable,
    est: &ComplexityEstimator,
    e: Index,
    sigma: &BitString,
    s: u64,
) -> Result<Deficiency> {
    let negl = table.sup_neg_log2(e, sigma, s)?;
    Ok(Deficiency::from_parts(negl, est.complexity_upper(sigma, s)))
}

/// Deficiency of `σ` against the best measure in a ball.
pub fn deficiency_ball(
    ball: &MeasureBall,
    est: &ComplexityEstimator,
    sigma: &BitString,
    s: u64,
) -> Result<Deficiency> {
    let negl = ball.sup_neg_log2(sigma)?;
    Ok(Deficiency::from_parts(negl, est.complexity_upper(sigma, s)))
}

/// Running maximum of `d_e(X↾n)[s]` over all prefixes `X↾n` of `x`.
pub fn max_deficiency(
    table: &ProgramTable,
    profile: &ComplexityProfile,
    e: Index,
    s: u64,
) -> Result<Deficiency> {
    let negl = table.neg_log2_profile(e, profile.word(), s)?;
    Ok(negl
        .iter()
        .enumerate()
        .map(|(n, v)| Deficiency::from_parts(*v, profile.get(n, s)))
        .max()
        .unwrap())
}

/// True iff every prefix of `X` has stage-`|X|` deficiency at most `c`; `c = None` is `+∞`.
pub fn random_verdict(
    table: &ProgramTable,
    est: &ComplexityEstimator,
    e: Index,
    x: &BitString,
    c: Option<i64>,
) -> Result<bool> {
    let Some(c) = c else {
        return Ok(true);
    };
    let mut profile = est.profile();
    profile.extend(x);
    random_verdict_with(table, &profile, e, c)
}

/// [`random_verdict`] reusing a precomputed complexity profile of `X`.
pub fn random_verdict_with(
    table: &ProgramTable,
    profile: &ComplexityProfile,
    e: Index,
    c: i64,
) -> Result<bool> {
    Ok(max_deficiency(table, profile, e, profile.len() as u64)?.at_most(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_lengths() {
        assert_eq!(gamma_len(1), 1);
        assert_eq!(gamma_len(2), 3);
        assert_eq!(gamma_len(3), 3);
        assert_eq!(gamma_len(4), 5);
        assert_eq!(gamma_len(1000), 19);
    }

    #[test]
    fn long_zero_run_is_cheap() {
        let est = ComplexityEstimator::default();
        let z = BitString::zeros(1000);
        assert_eq!(est.complexity_upper(&z, 100), 24);
        assert_eq!(est.complexity_upper(&z, 1), 1000 + 19 + 1 + 1);
    }

    #[test]
    fn literal_bound() {
        let est = ComplexityEstimator::default();
        for n in 0..40 {
            let s = crate::measures::MeasureObject::uniform()
                .sample(n as u64, n)
                .unwrap();
            let header = gamma_len(n as u64 + 1) + 1;
            for stage in 1..6 {
                assert!(est.complexity_upper(&s, stage) <= n as u64 + header + 1);
            }
        }
    }

    #[test]
    fn profile_matches_direct_estimates() {
        let est = ComplexityEstimator::default();
        let x = crate::measures::MeasureObject::bernoulli(crate::rational::ratio(1, 5))
            .sample(3, 300)
            .unwrap();
        let mut prof = est.profile();
        prof.extend(&x);
        for n in [0, 1, 7, 8, 9, 64, 100, 255, 300] {
            for s in 1..=5 {
                assert_eq!(
                    prof.get(n, s),
                    est.complexity_upper(&x.prefix(n), s),
                    "n={n} s={s}"
                );
            }
        }
    }

    #[test]
    fn literal_must_come_first() {
        assert!(ComplexityEstimator::new(vec![Codec::Deflate]).is_err());
        let names = vec!["literal".to_string(), "zstd".to_string()];
        match ComplexityEstimator::from_names(&names) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "codecs[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deficiency_order() {
        assert!(Deficiency::Finite(i64::MAX) < Deficiency::Infinite);
        assert_eq!(Deficiency::from_parts(Some(3.0), 5), Deficiency::Finite(-2));
        assert_eq!(Deficiency::from_parts(Some(3.2), 5), Deficiency::Finite(-1));
        assert_eq!(Deficiency::from_parts(None, 5), Deficiency::Infinite);
    }

    #[test]
    fn ball_deficiency_examples() {
        let est = ComplexityEstimator::default();
        let sigma: BitString = "0110".parse().unwrap();
        let k = est.complexity_upper(&sigma, 10) as i64;
        let free = MeasureBall::unconstrained();
        assert_eq!(
            deficiency_ball(&free, &est, &sigma, 10).unwrap(),
            Deficiency::Finite(-k)
        );
        let sigma2: BitString = "01".parse().unwrap();
        let k2 = est.complexity_upper(&sigma2, 10) as i64;
        let uniform = MeasureBall::Explicit(
            (1..=2)
                .flat_map(BitString::all_of_length)
                .map(|s| {
                    let v = crate::rational::pow2_neg(s.len() as u64);
                    (s, crate::rational::RationalInterval::point(v))
                })
                .collect(),
        );
        assert_eq!(
            deficiency_ball(&uniform, &est, &sigma2, 10).unwrap(),
            Deficiency::Finite(2 - k2)
        );
    }

    proptest! {
        #[test]
        fn antitone_in_stage(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let est = ComplexityEstimator::default();
            let s = BitString::from_bits(bits);
            for stage in 1..6 {
                prop_assert!(est.complexity_upper(&s, stage + 1) <= est.complexity_upper(&s, stage));
            }
        }
    }
}
