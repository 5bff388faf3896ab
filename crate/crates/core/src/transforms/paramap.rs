//! Parametrizations `f: 2^ω → M` given by their ball maps `f*`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::measures::{MeasureBall, MeasureObject};
use crate::programs::{Entry, Index, ProgramTable};
use crate::rational::{pow2_neg, Rational};
use crate::source::RealGen;

/// The two parametrizations used by the equivalence constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMap {
    /// `f_b(X) = B(0.X)`: the Bernoulli measure whose parameter has binary expansion `X`.
    #[serde(alias = "bernoulli")]
    BernoulliHat,
    /// `f(Z) = μ_Z`.
    Interleave,
}

impl fmt::Display for ParamMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamMap::BernoulliHat => "bernoulli_hat",
            ParamMap::Interleave => "interleave",
        })
    }
}

/// `0.τ` as an exact dyadic rational, built in linear time.
pub fn dyadic_value(tau: &BitString) -> Rational {
    if tau.is_empty() {
        return Rational::zero();
    }
    let bytes = tau.to_bytes();
    let pad = bytes.len() * 8 - tau.len();
    let numer = BigUint::from_bytes_be(&bytes) >> pad;
    let numer = BigInt::from(numer);
    if numer.is_zero() {
        return Rational::zero();
    }
    let mut shift = tau.len();
    let tz = numer.trailing_zeros().unwrap_or(0) as usize;
    let tz = tz.min(shift);
    let numer = numer >> tz;
    shift -= tz;
    Rational::new_raw(numer, BigInt::one() << shift)
}

impl ParamMap {
    pub fn parse(name: &str) -> Option<ParamMap> {
        match name {
            "bernoulli_hat" | "bernoulli" => Some(ParamMap::BernoulliHat),
            "interleave" => Some(ParamMap::Interleave),
            _ => None,
        }
    }

    /// Constraint depth of `f*(τ)` for the Bernoulli map: `4^{|τ|} - 1`.
    pub fn star_depth(len: usize) -> u64 {
        if len >= 32 {
            u64::MAX
        } else {
            (1u64 << (2 * len)) - 1
        }
    }

    /// `f*(τ)`.
    pub fn star(&self, tau: &BitString) -> MeasureBall {
        match self {
            ParamMap::BernoulliHat => {
                let lo = dyadic_value(tau);
                let hi = &lo + pow2_neg(tau.len() as u64);
                MeasureBall::BernoulliParam {
                    lo,
                    hi,
                    depth: Self::star_depth(tau.len()),
                }
            }
            ParamMap::Interleave => MeasureBall::Interleave { z: tau.clone() },
        }
    }

    /// Prefix length after which `|f*(σ)| ≤ 2^{-3n}`.
    ///
    /// For the Bernoulli map each level-`k` width is at most `k·2^{-|σ|}`, so the
    /// size is below `2^{1-|σ|} + 2^{-depth}` and `|σ| = 3n + 2` suffices. For the
    /// interleave map the size of `f*(σ)` is exactly `2^{-3|σ|}`.
    pub fn modulus(&self, n: usize) -> usize {
        match self {
            ParamMap::BernoulliHat => 3 * n + 2,
            ParamMap::Interleave => n,
        }
    }

    /// Largest `n` with `modulus(n) ≤ len`.
    pub fn level_of(&self, len: usize) -> Option<usize> {
        match self {
            ParamMap::BernoulliHat => (len >= 2).then(|| (len - 2) / 3),
            ParamMap::Interleave => Some(len),
        }
    }

    /// A total measure inside `f*(τ)`: `B(0.τ + 2^{-|τ|-1})` or `μ_{τ0^ω}`.
    pub fn center(&self, tau: &BitString) -> MeasureObject {
        match self {
            ParamMap::BernoulliHat => {
                let q = dyadic_value(tau) + pow2_neg(tau.len() as u64 + 1);
                MeasureObject::bernoulli(q)
            }
            ParamMap::Interleave => MeasureObject::Interleave {
                z: RealGen::Periodic {
                    prefix: tau.clone(),
                    cycle: BitString::zeros(1),
                },
            },
        }
    }

    /// Table index of `center(τ)`, allocated once per `τ`.
    pub fn center_index(&self, table: &ProgramTable, tau: &BitString) -> Index {
        table.alloc(format!("center:{self}:{tau}"), || {
            Entry::measure(self.center(tau))
        })
    }

    /// Deepest candidate length whose ball can still be informative about a word of length `n`.
    pub fn informative_depth(&self, n: usize) -> usize {
        match self {
            ParamMap::BernoulliHat => n,
            ParamMap::Interleave => n.div_ceil(2),
        }
    }
}
