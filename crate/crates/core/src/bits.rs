//! Finite binary words, the join `Z ⊕ Y`, the hat substitution `0 → 01, 1 → 10`,
//! and effectively closed classes given by stage-wise forbidden prefixes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite word over {0, 1}.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn with_capacity(n: usize) -> Self {
        BitString(Vec::with_capacity(n))
    }

    /// `0^n`.
    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    /// The `len`-bit binary word of `value`, most significant bit first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        BitString((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    /// All words of length `n` in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n < 64, "cannot enumerate 2^{n} words");
        (0..1u64 << n).map(move |v| BitString::from_u64(v, n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn pop(&mut self) -> Option<bool> {
        self.0.pop()
    }

    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn child(&self, b: bool) -> BitString {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(b);
        BitString(v)
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    /// `self ⪯ other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn common_prefix(&self, other: &BitString) -> BitString {
        let n = self
            .0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count();
        self.prefix(n)
    }

    pub fn count_zeros(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Bits packed MSB-first into bytes; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, b)| acc | ((*b as u8) << (7 - i)))
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ε" {
            return Ok(BitString::new());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().collect())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let s: String = self.0.iter().map(|b| if *b { '1' } else { '0' }).collect();
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `Z ⊕ Y`: Z-bits at even positions, Y-bits at odd positions.
pub fn interleave(z: &BitString, y: &BitString) -> Result<BitString> {
    if z.len() != y.len() && z.len() != y.len() + 1 {
        return Err(Error::LengthMismatch {
            z: z.len(),
            y: y.len(),
        });
    }
    let mut out = BitString::with_capacity(z.len() + y.len());
    for i in 0..z.len() {
        out.push(z.bit(i));
        if let Some(b) = y.get(i) {
            out.push(b);
        }
    }
    Ok(out)
}

/// Inverse of [`interleave`]; odd-length words give the Z half one extra bit.
pub fn deinterleave(x: &BitString) -> (BitString, BitString) {
    let z = x.iter().step_by(2).collect();
    let y = x.iter().skip(1).step_by(2).collect();
    (z, y)
}

pub fn hat_encode(sigma: &BitString) -> BitString {
    let mut out = BitString::with_capacity(2 * sigma.len());
    for b in sigma.iter() {
        out.push(b);
        out.push(!b);
    }
    out
}

/// Parses complete two-bit blocks; a trailing single bit is ignored.
pub fn hat_decode(tau: &BitString) -> Result<BitString> {
    let mut out = BitString::with_capacity(tau.len() / 2);
    for (i, block) in tau.bits().chunks_exact(2).enumerate() {
        if block[0] == block[1] {
            return Err(Error::NotHatPrefix {
                block: if block[0] { "11".into() } else { "00".into() },
                position: 2 * i,
            });
        }
        out.push(block[0]);
    }
    Ok(out)
}

/// An effectively closed class presented by forbidden prefixes that appear over stages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedClass {
    /// 2^ω, nothing forbidden.
    Full,
    /// hat(2^ω): every aligned block `00` or `11` is forbidden from stage 0.
    HatImage,
    /// Explicit forbidden prefixes, each enumerated at its stage.
    Explicit { forbid: Vec<(BitString, u64)> },
}

impl ClosedClass {
    /// True iff no prefix of `tau` has been forbidden by stage `s`.
    pub fn alive(&self, tau: &BitString, s: u64) -> bool {
        match self {
            ClosedClass::Full => true,
            ClosedClass::HatImage => tau.bits().chunks_exact(2).all(|b| b[0] != b[1]),
            ClosedClass::Explicit { forbid } => !forbid
                .iter()
                .any(|(f, stage)| *stage <= s && f.is_prefix_of(tau)),
        }
    }

    /// The forbidden set enumerated by stage `s`, for explicit classes.
    pub fn forbidden_at(&self, s: u64) -> Option<Vec<BitString>> {
        match self {
            ClosedClass::Explicit { forbid } => Some(
                forbid
                    .iter()
                    .filter(|(_, stage)| *stage <= s)
                    .map(|(f, _)| f.clone())
                    .collect(),
            ),
            _ => None,
        }
    }
}
