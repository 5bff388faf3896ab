//! A finite registry standing in for the effective enumerations of partial computable
//! measures and reals: stage-bounded evaluation, padding, lifts between reals and
//! measures, and simulated totality oracles.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::{BitString, ClosedClass};
use crate::error::{Error, Result};
use crate::measures::{ball_contains, MeasureBall, MeasureObject, Tri};
use crate::rational::{log2, neg_log2, pow2_neg, to_f64, Rational, RationalInterval};
use crate::source::RealGen;
use crate::transforms::paramap::{dyadic_value, ParamMap};

pub type Index = u64;

/// First index of entries allocated after the manifest was loaded.
pub const DYNAMIC_BASE: Index = 1 << 48;
/// Finest precision `2^{-k}` of the canonical tuples an entry enumerates.
pub const TUPLE_PRECISION: u32 = 48;
/// Stage used by default when comparing hypotheses.
pub const DEFAULT_EQUALITY_STAGE: u64 = 64;
const INVERSE_FRONTIER_CAP: usize = 256;
const DEFINEDNESS_CAP: u64 = 10;

/// A partial measure computed by code outside the table (majority measures).
pub trait MeasureProgram: Send + Sync {
    fn eval(&self, table: &ProgramTable, sigma: &BitString, s: u64) -> Result<RationalInterval>;

    /// Basic intervals enumerated for `σ` by stage `s`.
    fn tuples(
        &self,
        table: &ProgramTable,
        sigma: &BitString,
        s: u64,
    ) -> Result<Vec<RationalInterval>> {
        Ok(canonical_tuples(&self.eval(table, sigma, s)?, s))
    }

    fn is_total(&self, table: &ProgramTable) -> bool;

    fn describe(&self) -> String;
}

/// A partial real computed by code outside the table (majority-vote decoders).
pub trait RealProgram: Send + Sync {
    fn bit(&self, table: &ProgramTable, j: usize, s: u64) -> Result<Option<bool>>;

    fn is_total(&self, table: &ProgramTable) -> bool;

    fn describe(&self) -> String;
}

/// The canonical tuples of precision `1..=min(s, 48)` holding `known`.
pub fn canonical_tuples(known: &RationalInterval, s: u64) -> Vec<RationalInterval> {
    let top = s.min(TUPLE_PRECISION as u64) as u32;
    known.canonical_basics(top)
}

pub enum Entry {
    Measure {
        measure: MeasureObject,
        total: bool,
    },
    Real {
        real: RealGen,
        cache: Mutex<BitString>,
    },
    /// Diverges everywhere: no measure information, no real bits.
    Stub,
    Alias(Index),
    BernoulliLift(Index),
    ParamLift {
        map: ParamMap,
        real: Index,
    },
    InverseLift {
        map: ParamMap,
        class: ClosedClass,
        measure: Index,
        cache: Mutex<HashMap<u64, BitString>>,
    },
    MeasureProgram(Arc<dyn MeasureProgram>),
    RealProgram(Arc<dyn RealProgram>),
}

impl Entry {
    pub fn measure(measure: MeasureObject) -> Entry {
        let total = measure.is_exact();
        Entry::Measure { measure, total }
    }

    pub fn real(real: RealGen) -> Entry {
        Entry::Real {
            real,
            cache: Mutex::new(BitString::new()),
        }
    }

    fn is_measure_like(&self) -> bool {
        matches!(
            self,
            Entry::Measure { .. }
                | Entry::Stub
                | Entry::BernoulliLift(_)
                | Entry::ParamLift { .. }
                | Entry::MeasureProgram(_)
        )
    }

    fn is_real_like(&self) -> bool {
        matches!(
            self,
            Entry::Real { .. } | Entry::Stub | Entry::InverseLift { .. } | Entry::RealProgram(_)
        )
    }
}

impl fmt::Debug for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Measure { measure, .. } => write!(f, "measure({measure:?})"),
            Entry::Real { real, .. } => write!(f, "real({real:?})"),
            Entry::Stub => write!(f, "stub"),
            Entry::Alias(i) => write!(f, "alias({i})"),
            Entry::BernoulliLift(r) => write!(f, "bernoulli_lift({r})"),
            Entry::ParamLift { map, real } => write!(f, "param_lift({map}, {real})"),
            Entry::InverseLift { map, measure, .. } => write!(f, "inverse_lift({map}, {measure})"),
            Entry::MeasureProgram(p) => f.write_str(&p.describe()),
            Entry::RealProgram(p) => f.write_str(&p.describe()),
        }
    }
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntrySpec {
    Measure {
        measure: MeasureObject,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<bool>,
    },
    Real {
        real: RealGen,
    },
    Stub,
    Alias {
        of: Index,
    },
    BernoulliLift {
        real: Index,
    },
    ParamLift {
        map: ParamMap,
        real: Index,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipPattern {
    #[default]
    Invert,
    Alternate,
}

/// Below `horizon` the oracle for `entry` answers per `pattern` instead of the truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSchedule {
    pub entry: Index,
    pub horizon: u64,
    #[serde(default)]
    pub pattern: FlipPattern,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<EntrySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flip_schedules: Vec<FlipSchedule>,
}

impl Manifest {
    pub fn new(entries: Vec<EntrySpec>) -> Self {
        Manifest {
            entries,
            flip_schedules: Vec::new(),
        }
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Cantor pairing `π(a, b)`, strictly increasing in `b`.
pub fn pair(a: u64, b: u64) -> u64 {
    (a + b) * (a + b + 1) / 2 + b
}

pub fn unpair(z: u64) -> (u64, u64) {
    let mut w = (((8.0 * z as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let b = z - w * (w + 1) / 2;
    (w - b, b)
}

pub struct ProgramTable {
    base: Arc<Vec<Arc<Entry>>>,
    manifest: Arc<Manifest>,
    hash: String,
    schedules: Vec<FlipSchedule>,
    dynamic: RwLock<Vec<Arc<Entry>>>,
    keys: Mutex<HashMap<String, Index>>,
}

impl fmt::Debug for ProgramTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProgramTable")
            .field("base", &self.base.len())
            .field("dynamic", &self.dynamic.read().len())
            .field("hash", &self.hash)
            .finish()
    }
}

impl ProgramTable {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let n = manifest.entries.len() as u64;
        let mut base = Vec::with_capacity(manifest.entries.len());
        for (i, spec) in manifest.entries.iter().enumerate() {
            let at = |msg: String| Error::config(format!("entries[{i}]"), msg);
            let check = |j: Index| {
                if j < n {
                    Ok(j)
                } else {
                    Err(at(format!("reference {j} outside the table")))
                }
            };
            let entry = match spec {
                EntrySpec::Measure { measure, total } => {
                    measure.validate().map_err(|e| at(e.to_string()))?;
                    Entry::Measure {
                        measure: measure.clone(),
                        total: total.unwrap_or(measure.is_exact()),
                    }
                }
                EntrySpec::Real { real } => Entry::real(real.clone()),
                EntrySpec::Stub => Entry::Stub,
                EntrySpec::Alias { of } => Entry::Alias(check(*of)?),
                EntrySpec::BernoulliLift { real } => Entry::BernoulliLift(check(*real)?),
                EntrySpec::ParamLift { map, real } => Entry::ParamLift {
                    map: *map,
                    real: check(*real)?,
                },
            };
            base.push(Arc::new(entry));
        }
        for s in &manifest.flip_schedules {
            if s.entry >= n {
                return Err(Error::config(
                    "flip_schedules",
                    format!("entry {} outside the table", s.entry),
                ));
            }
        }
        let table = ProgramTable {
            base: Arc::new(base),
            manifest: Arc::new(manifest.clone()),
            hash: manifest.hash(),
            schedules: manifest.flip_schedules.clone(),
            dynamic: RwLock::new(Vec::new()),
            keys: Mutex::new(HashMap::new()),
        };
        for i in 0..n {
            table.resolve(i)?;
            let entry = &table.base[i as usize];
            let (what, target, want_real) = match &**entry {
                Entry::BernoulliLift(r) | Entry::ParamLift { real: r, .. } => ("lift", *r, true),
                _ => continue,
            };
            let (_, t) = table.resolve(target)?;
            if want_real && !t.is_real_like() {
                return Err(Error::config(
                    format!("entries[{i}]"),
                    format!("{what} of non-real entry {target}"),
                ));
            }
        }
        Ok(table)
    }

    pub fn from_specs(entries: Vec<EntrySpec>) -> Result<Self> {
        ProgramTable::from_manifest(&Manifest::new(entries))
    }

    /// A table sharing the manifest entries with fresh dynamic allocations.
    pub fn fork(&self) -> ProgramTable {
        ProgramTable {
            base: Arc::clone(&self.base),
            manifest: Arc::clone(&self.manifest),
            hash: self.hash.clone(),
            schedules: self.schedules.clone(),
            dynamic: RwLock::new(Vec::new()),
            keys: Mutex::new(HashMap::new()),
        }
    }

    /// Replaces the totality-oracle flip schedules.
    pub fn with_schedules(mut self, schedules: Vec<FlipSchedule>) -> Self {
        self.schedules = schedules;
        self
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn manifest_hash(&self) -> &str {
        &self.hash
    }

    pub fn base_len(&self) -> u64 {
        self.base.len() as u64
    }

    pub fn dynamic_len(&self) -> u64 {
        self.dynamic.read().len() as u64
    }

    /// True iff `e` names an entry (base, padding alias, or allocated).
    pub fn contains(&self, e: Index) -> bool {
        self.raw(e).is_ok()
    }

    fn slot(&self, root: Index) -> u64 {
        if root < DYNAMIC_BASE {
            root
        } else {
            self.base_len() + (root - DYNAMIC_BASE)
        }
    }

    fn root_of_slot(&self, slot: u64) -> Index {
        if slot < self.base_len() {
            slot
        } else {
            DYNAMIC_BASE + (slot - self.base_len())
        }
    }

    /// `(i, j)` when `e = pad(i, j)`.
    pub fn unpad(&self, e: Index) -> Option<(Index, u64)> {
        let n = self.base_len();
        if e < n || e >= DYNAMIC_BASE {
            return None;
        }
        let (slot, j) = unpair(e - n);
        Some((self.root_of_slot(slot), j))
    }

    /// `p(i, j)`: a fresh name for entry `i`, strictly increasing in `j`.
    pub fn pad(&self, i: Index, j: u64) -> Result<Index> {
        let root = match self.unpad(i) {
            Some((r, _)) => r,
            None => i,
        };
        self.raw(root)?;
        let e = self.base_len() + pair(self.slot(root), j);
        if e >= DYNAMIC_BASE {
            return Err(Error::UnknownIndex(e));
        }
        Ok(e)
    }

    fn raw(&self, e: Index) -> Result<Arc<Entry>> {
        let n = self.base_len();
        if e < n {
            return Ok(Arc::clone(&self.base[e as usize]));
        }
        if e >= DYNAMIC_BASE {
            return self
                .dynamic
                .read()
                .get((e - DYNAMIC_BASE) as usize)
                .cloned()
                .ok_or(Error::UnknownIndex(e));
        }
        let (root, _) = self.unpad(e).unwrap();
        if root >= n && root < DYNAMIC_BASE {
            return Err(Error::UnknownIndex(e));
        }
        self.raw(root).map(|_| Arc::new(Entry::Alias(root)))
    }

    /// Follows padding and alias entries to the entry that does the work.
    pub fn resolve(&self, e: Index) -> Result<(Index, Arc<Entry>)> {
        let mut cur = e;
        for _ in 0..=self.base_len() + self.dynamic_len() + 1 {
            let entry = self.raw(cur)?;
            match &*entry {
                Entry::Alias(next) => cur = *next,
                _ => return Ok((cur, entry)),
            }
        }
        Err(Error::AliasCycle(e))
    }

    /// Allocates the entry built by `make` under `key`, or returns the index already holding it.
    pub fn alloc(&self, key: String, make: impl FnOnce() -> Entry) -> Index {
        if let Some(&e) = self.keys.lock().get(&key) {
            return e;
        }
        let entry = Arc::new(make());
        let mut keys = self.keys.lock();
        if let Some(&e) = keys.get(&key) {
            return e;
        }
        let mut dynamic = self.dynamic.write();
        let e = DYNAMIC_BASE + dynamic.len() as u64;
        dynamic.push(entry);
        keys.insert(key, e);
        e
    }

    pub fn describe(&self, e: Index) -> Result<String> {
        if let Some((root, j)) = self.unpad(e) {
            return Ok(format!("pad({root}, {j})"));
        }
        Ok(format!("{:?}", self.raw(e)?))
    }

    pub fn is_measure(&self, e: Index) -> Result<bool> {
        Ok(self.resolve(e)?.1.is_measure_like())
    }

    pub fn is_real(&self, e: Index) -> Result<bool> {
        Ok(self.resolve(e)?.1.is_real_like())
    }

    /// Ground-truth totality flag.
    pub fn is_total(&self, e: Index) -> Result<bool> {
        let (_, entry) = self.resolve(e)?;
        Ok(match &*entry {
            Entry::Measure { total, .. } => *total,
            Entry::Real { real, .. } => real.is_total(),
            Entry::Stub => false,
            Entry::Alias(_) => unreachable!(),
            Entry::BernoulliLift(r) | Entry::ParamLift { real: r, .. } => self.is_total(*r)?,
            Entry::InverseLift { measure, .. } => self.is_total(*measure)?,
            Entry::MeasureProgram(p) => p.is_total(self),
            Entry::RealProgram(p) => p.is_total(self),
        })
    }

    /// Limit approximation to totality: the truth, except below a configured flip horizon.
    pub fn totality_oracle(&self, e: Index, s: u64) -> Result<bool> {
        let truth = self.is_total(e)?;
        let sched = self
            .schedules
            .iter()
            .find(|f| f.entry == e && s < f.horizon);
        Ok(match sched.map(|f| f.pattern) {
            None => truth,
            Some(FlipPattern::Invert) => !truth,
            Some(FlipPattern::Alternate) => truth ^ s.is_multiple_of(2),
        })
    }

    /// Largest horizon among the flip schedules.
    pub fn flip_horizon(&self) -> u64 {
        self.schedules.iter().map(|f| f.horizon).max().unwrap_or(0)
    }

    // ---- reals ----

    /// Bit `j` of real entry `e` as known at stage `s`.
    pub fn eval_real(&self, e: Index, j: usize, s: u64) -> Result<Option<bool>> {
        let (root, entry) = self.resolve(e)?;
        match &*entry {
            Entry::Real { real, cache } => {
                if j as u64 >= s {
                    return Ok(None);
                }
                Ok(cached_bits(real, cache, j + 1).get(j))
            }
            Entry::Stub => Ok(None),
            Entry::InverseLift { .. } => Ok(self.real_prefix(root, s)?.get(j)),
            Entry::RealProgram(p) => p.bit(self, j, s),
            _ => Err(Error::WrongKind {
                index: e,
                expected: "real",
            }),
        }
    }

    /// The bits of real entry `e` defined at stage `s`, up to the first undefined position.
    pub fn real_prefix(&self, e: Index, s: u64) -> Result<BitString> {
        let (_, entry) = self.resolve(e)?;
        match &*entry {
            Entry::Real { real, cache } => Ok(cached_bits(real, cache, s as usize)),
            Entry::Stub => Ok(BitString::new()),
            Entry::InverseLift {
                map,
                class,
                measure,
                cache,
            } => {
                if let Some(hit) = cache.lock().get(&s) {
                    return Ok(hit.clone());
                }
                let out = self.inverse_survivors(*map, class, *measure, s)?;
                cache.lock().insert(s, out.clone());
                Ok(out)
            }
            Entry::RealProgram(p) => {
                let mut out = BitString::new();
                while (out.len() as u64) < s {
                    match p.bit(self, out.len(), s)? {
                        Some(b) => out.push(b),
                        None => break,
                    }
                }
                Ok(out)
            }
            _ => Err(Error::WrongKind {
                index: e,
                expected: "real",
            }),
        }
    }

    fn inverse_survivors(
        &self,
        map: ParamMap,
        class: &ClosedClass,
        measure: Index,
        s: u64,
    ) -> Result<BitString> {
        let know = self.knowledge(measure, s)?;
        let mut frontier = vec![BitString::new()];
        for _ in 0..s {
            let mut next = Vec::new();
            for tau in &frontier {
                for b in [false, true] {
                    let child = tau.child(b);
                    if !class.alive(&child, s) {
                        continue;
                    }
                    if ball_contains(&map.star(&child), |sigma| know.eval(sigma))? != Tri::No {
                        next.push(child);
                    }
                }
            }
            if next.is_empty() || next.len() > INVERSE_FRONTIER_CAP {
                break;
            }
            frontier = next;
        }
        Ok(common_prefix(&frontier))
    }

    // ---- measures ----

    /// What is known about measure entry `e` at stage `s`.
    pub fn knowledge(&self, e: Index, s: u64) -> Result<Knowledge<'_>> {
        let (_, entry) = self.resolve(e)?;
        let view = match &*entry {
            Entry::Measure { measure, .. } if measure.is_exact() => {
                View::Exact(MeasureRef(Arc::clone(&entry)))
            }
            Entry::Measure { .. } => View::Enumerated(MeasureRef(Arc::clone(&entry))),
            Entry::Stub => View::Ball(MeasureBall::unconstrained()),
            Entry::BernoulliLift(r) => {
                let tau = self.real_prefix(*r, s)?;
                let lo = dyadic_value(&tau);
                let hi = &lo + pow2_neg(tau.len() as u64);
                View::Ball(MeasureBall::BernoulliParam {
                    lo,
                    hi,
                    depth: u64::MAX,
                })
            }
            Entry::ParamLift { map, real } => View::Ball(map.star(&self.real_prefix(*real, s)?)),
            Entry::MeasureProgram(p) => View::Program(Arc::clone(p)),
            _ => {
                return Err(Error::WrongKind {
                    index: e,
                    expected: "measure",
                })
            }
        };
        Ok(Knowledge {
            table: self,
            stage: s,
            view,
        })
    }

    pub fn eval_measure(&self, e: Index, sigma: &BitString, s: u64) -> Result<RationalInterval> {
        self.knowledge(e, s)?.eval(sigma)
    }

    pub fn sup_neg_log2(&self, e: Index, sigma: &BitString, s: u64) -> Result<Option<f64>> {
        self.knowledge(e, s)?.sup_neg_log2(sigma)
    }

    /// `-log2 sup μ_e(X↾n)[s]` for `n = 0..=|X|`.
    pub fn neg_log2_profile(&self, e: Index, x: &BitString, s: u64) -> Result<Vec<Option<f64>>> {
        self.knowledge(e, s)?.profile(x)
    }

    /// `sup_neg_log2` at stage `s` of a string with the given counts, when `e` is count-symmetric.
    ///
    /// Lifted Bernoulli entries are read from the first 64 parameter bits in floating point.
    pub fn sup_neg_log2_counts(
        &self,
        e: Index,
        zeros: u64,
        ones: u64,
        s: u64,
    ) -> Result<Option<Option<f64>>> {
        let (root, entry) = self.resolve(e)?;
        let (real, star) = match &*entry {
            Entry::BernoulliLift(r) => (*r, false),
            Entry::ParamLift {
                map: ParamMap::BernoulliHat,
                real,
            } => (*real, true),
            _ => return Ok(self.knowledge(root, s)?.sup_neg_log2_counts(zeros, ones)),
        };
        let (head, len) = self.real_head(real, s)?;
        if star && ParamMap::star_depth(len) < zeros + ones {
            return Ok(None);
        }
        let lo = head
            .iter()
            .enumerate()
            .filter(|(_, b)| *b)
            .map(|(i, _)| 2f64.powi(-(i as i32) - 1))
            .sum::<f64>();
        let hi = lo + 2f64.powi(-(len.min(1100) as i32));
        Ok(Some(crate::rational::bernoulli_sup_neg_log2(
            lo, hi, zeros, ones,
        )))
    }

    /// The first 64 defined bits of real `e` at stage `s` and the defined length.
    fn real_head(&self, e: Index, s: u64) -> Result<(BitString, usize)> {
        let (root, entry) = self.resolve(e)?;
        if let Entry::Real { real, cache } = &*entry {
            let mut known = cache.lock();
            while (known.len() as u64) < s {
                match real.bit(known.len()) {
                    Some(b) => known.push(b),
                    None => break,
                }
            }
            let len = known.len().min(s as usize);
            return Ok((known.prefix(len.min(64)), len));
        }
        let full = self.real_prefix(root, s)?;
        Ok((full.prefix(full.len().min(64)), full.len()))
    }

    pub fn tuples(&self, e: Index, sigma: &BitString, s: u64) -> Result<Vec<RationalInterval>> {
        self.knowledge(e, s)?.tuples(sigma)
    }

    /// The exact measure denoted by `e`, when the table can name it.
    pub fn exact_measure(&self, e: Index) -> Result<Option<MeasureObject>> {
        let (_, entry) = self.resolve(e)?;
        let real_gen = |r: Index| -> Result<Option<RealGen>> {
            Ok(match &*self.resolve(r)?.1 {
                Entry::Real { real, .. } if real.is_total() => Some(real.clone()),
                _ => None,
            })
        };
        Ok(match &*entry {
            Entry::Measure { measure, .. } if measure.is_exact() => Some(measure.clone()),
            Entry::BernoulliLift(r)
            | Entry::ParamLift {
                map: ParamMap::BernoulliHat,
                real: r,
            } => real_gen(*r)?
                .and_then(|g| g.rational_value())
                .map(MeasureObject::bernoulli),
            Entry::ParamLift {
                map: ParamMap::Interleave,
                real,
            } => real_gen(*real)?.map(|z| MeasureObject::Interleave { z }),
            _ => None,
        })
    }

    /// Three-valued semantic equality of two measure entries up to `depth` at stage `s`.
    pub fn measures_equal(&self, e1: Index, e2: Index, depth: usize, s: u64) -> Result<Tri> {
        let (k1, k2) = (self.knowledge(e1, s)?, self.knowledge(e2, s)?);
        let strings = if k1.count_symmetric() && k2.count_symmetric() {
            count_representatives(depth)
        } else {
            (0..=depth).flat_map(BitString::all_of_length).collect()
        };
        let width_cap = pow2_neg(depth as u64 + 2);
        let mid_cap = pow2_neg(depth as u64 + 1);
        let mut tight = true;
        for sigma in &strings {
            let (a, b) = (k1.eval(sigma)?, k2.eval(sigma)?);
            if a.disjoint(&b) {
                return Ok(Tri::No);
            }
            if tight {
                let gap = a.midpoint() - b.midpoint();
                let gap = if gap < Rational::zero() { -gap } else { gap };
                tight = a.width() <= width_cap && b.width() <= width_cap && gap <= mid_cap;
            }
        }
        Ok(if tight { Tri::Yes } else { Tri::Unknown })
    }

    /// `ℓ_e[s]`: the largest `m ≤ s` such that every string of length at most `m` is known to width `2^{-m}`.
    pub fn definedness_length(&self, e: Index, s: u64) -> Result<u64> {
        let (root, entry) = self.resolve(e)?;
        match &*entry {
            Entry::Measure { measure, .. } if measure.is_exact() => return Ok(s),
            Entry::Stub => return Ok(0),
            Entry::Real { .. } | Entry::InverseLift { .. } | Entry::RealProgram(_) => {
                return Ok(self.real_prefix(root, s)?.len() as u64)
            }
            _ => {}
        }
        let know = self.knowledge(root, s)?;
        let mut best = 0;
        for m in 1..=s.min(DEFINEDNESS_CAP) {
            let cap = pow2_neg(m);
            let strings = if know.count_symmetric() {
                count_representatives(m as usize)
            } else {
                (0..=m as usize)
                    .flat_map(BitString::all_of_length)
                    .collect()
            };
            let mut ok = true;
            for sigma in &strings {
                if know.eval(sigma)?.width() > cap {
                    ok = false;
                    break;
                }
            }
            if ok {
                best = m;
            }
        }
        Ok(best)
    }

    // ---- lifts ----

    /// `g(e)`: the Bernoulli measure whose parameter is the real `φ_e`.
    pub fn bernoulli_lift(&self, real: Index) -> Result<Index> {
        self.require_real(real)?;
        Ok(self.alloc(format!("bernoulli_lift:{real}"), || {
            Entry::BernoulliLift(real)
        }))
    }

    /// `g(e)` for a parametrization: the measure `f(φ_e)`.
    pub fn param_lift(&self, map: ParamMap, real: Index) -> Result<Index> {
        self.require_real(real)?;
        Ok(
            self.alloc(format!("param_lift:{map}:{real}"), || Entry::ParamLift {
                map,
                real,
            }),
        )
    }

    /// The real `Z ∈ D` with `f(Z) = μ_e`, read off the surviving candidates.
    pub fn inverse_lift(
        &self,
        map: ParamMap,
        class: &ClosedClass,
        measure: Index,
    ) -> Result<Index> {
        if !self.is_measure(measure)? {
            return Err(Error::WrongKind {
                index: measure,
                expected: "measure",
            });
        }
        let key = format!(
            "inverse_lift:{map}:{}:{measure}",
            serde_json::to_string(class).unwrap()
        );
        Ok(self.alloc(key, || Entry::InverseLift {
            map,
            class: class.clone(),
            measure,
            cache: Mutex::new(HashMap::new()),
        }))
    }

    fn require_real(&self, e: Index) -> Result<()> {
        if self.is_real(e)? {
            Ok(())
        } else {
            Err(Error::WrongKind {
                index: e,
                expected: "real",
            })
        }
    }
}

fn cached_bits(real: &RealGen, cache: &Mutex<BitString>, n: usize) -> BitString {
    let mut known = cache.lock();
    while known.len() < n {
        match real.bit(known.len()) {
            Some(b) => known.push(b),
            None => break,
        }
    }
    known.prefix(n.min(known.len()))
}

fn common_prefix(words: &[BitString]) -> BitString {
    let mut it = words.iter();
    let Some(first) = it.next() else {
        return BitString::new();
    };
    it.fold(first.clone(), |acc, w| acc.common_prefix(w))
}

/// `0^a 1^b` for every `a + b ≤ depth`.
fn count_representatives(depth: usize) -> Vec<BitString> {
    let mut out = Vec::new();
    for n in 0..=depth {
        for a in 0..=n {
            let mut s = BitString::zeros(a);
            for _ in a..n {
                s.push(true);
            }
            out.push(s);
        }
    }
    out
}

/// Stage-`s` information about one measure entry.
pub struct Knowledge<'a> {
    table: &'a ProgramTable,
    stage: u64,
    view: View,
}

/// The measure of an `Entry::Measure`, shared with the table.
struct MeasureRef(Arc<Entry>);

impl std::ops::Deref for MeasureRef {
    type Target = MeasureObject;

    fn deref(&self) -> &MeasureObject {
        match &*self.0 {
            Entry::Measure { measure, .. } => measure,
            _ => unreachable!("measure views hold measure entries"),
        }
    }
}

enum View {
    /// Exact values for strings no longer than the stage.
    Exact(MeasureRef),
    Enumerated(MeasureRef),
    Ball(MeasureBall),
    Program(Arc<dyn MeasureProgram>),
}

impl Knowledge<'_> {
    pub fn stage(&self) -> u64 {
        self.stage
    }

    /// The ball of measures consistent with this knowledge, when it is one.
    pub fn ball(&self) -> Option<&MeasureBall> {
        match &self.view {
            View::Ball(b) => Some(b),
            _ => None,
        }
    }

    pub fn eval(&self, sigma: &BitString) -> Result<RationalInterval> {
        match &self.view {
            View::Exact(mu) => Ok(if sigma.len() as u64 <= self.stage {
                RationalInterval::point(mu.mass(sigma).unwrap())
            } else {
                RationalInterval::unit()
            }),
            View::Enumerated(mu) => mu.eval(sigma, self.stage),
            View::Ball(b) => b.bounds(sigma),
            View::Program(p) => p.eval(self.table, sigma, self.stage),
        }
    }

    pub fn sup_neg_log2(&self, sigma: &BitString) -> Result<Option<f64>> {
        match &self.view {
            View::Exact(mu) => Ok(if sigma.len() as u64 <= self.stage {
                mu.neg_log2(sigma)
            } else {
                Some(0.0)
            }),
            View::Ball(b) => b.sup_neg_log2(sigma),
            _ => Ok(neg_log2(&self.eval(sigma)?.hi)),
        }
    }

    /// `sup_neg_log2` of any string of length `zeros + ones` with those counts, for count-symmetric knowledge.
    pub fn sup_neg_log2_counts(&self, zeros: u64, ones: u64) -> Option<Option<f64>> {
        let len = zeros + ones;
        match &self.view {
            View::Exact(mu) => {
                let q = mu.bernoulli_param()?;
                Some(if len > self.stage {
                    Some(0.0)
                } else {
                    crate::measures::bernoulli_neg_log2(&q, zeros, ones)
                })
            }
            View::Ball(MeasureBall::BernoulliParam { lo, hi, depth }) if len <= *depth => Some(
                crate::rational::bernoulli_sup_neg_log2(to_f64(lo), to_f64(hi), zeros, ones),
            ),
            View::Ball(MeasureBall::Explicit(c)) if c.is_empty() => Some(Some(0.0)),
            _ => None,
        }
    }

    /// `sup_neg_log2` of every prefix of `x`, in one pass where the shape allows.
    pub fn profile(&self, x: &BitString) -> Result<Vec<Option<f64>>> {
        let n = x.len();
        let mut out = Vec::with_capacity(n + 1);
        match &self.view {
            View::Exact(mu) if mu.bernoulli_param().is_some() => {
                let q = mu.bernoulli_param().unwrap();
                let l0 = (!q.is_zero()).then(|| -log2(&q));
                let l1 = (q != Rational::one()).then(|| -log2(&(Rational::one() - &q)));
                let mut acc = Some(0.0);
                out.push(acc);
                for (i, b) in x.iter().enumerate() {
                    let step = if b { l1 } else { l0 };
                    acc = acc.and_then(|a| step.map(|v| a + v));
                    out.push(if (i + 1) as u64 <= self.stage {
                        acc
                    } else {
                        Some(0.0)
                    });
                }
            }
            View::Exact(mu) if matches!(**mu, MeasureObject::Interleave { .. }) => {
                let MeasureObject::Interleave { z } = &**mu else {
                    unreachable!()
                };
                let mut support = true;
                let mut zb = z.bits();
                out.push(Some(0.0));
                for (i, b) in x.iter().enumerate() {
                    if i % 2 == 0 && zb.next().flatten() != Some(b) {
                        support = false;
                    }
                    let len = i + 1;
                    out.push(if len as u64 > self.stage {
                        Some(0.0)
                    } else {
                        support.then_some((len / 2) as f64)
                    });
                }
            }
            View::Ball(MeasureBall::BernoulliParam { lo, hi, depth }) => {
                let (lo, hi) = (to_f64(lo), to_f64(hi));
                let (mut a, mut c) = (0u64, 0u64);
                out.push(Some(0.0));
                for (i, b) in x.iter().enumerate() {
                    if (i as u64) < *depth {
                        if b {
                            c += 1;
                        } else {
                            a += 1;
                        }
                    }
                    out.push(crate::rational::bernoulli_sup_neg_log2(lo, hi, a, c));
                }
            }
            View::Ball(MeasureBall::Interleave { z }) => {
                let mut support = true;
                out.push(Some(0.0));
                for (i, b) in x.iter().enumerate() {
                    let len = (i + 1).min(2 * z.len());
                    if i < 2 * z.len() && i % 2 == 0 && z.bit(i / 2) != b {
                        support = false;
                    }
                    out.push(support.then_some((len / 2) as f64));
                }
            }
            _ => {
                let mut prefix = BitString::with_capacity(n);
                out.push(self.sup_neg_log2(&prefix)?);
                for b in x.iter() {
                    prefix.push(b);
                    out.push(self.sup_neg_log2(&prefix)?);
                }
            }
        }
        Ok(out)
    }

    /// Basic intervals enumerated for `σ` so far.
    pub fn tuples(&self, sigma: &BitString) -> Result<Vec<RationalInterval>> {
        match &self.view {
            View::Enumerated(mu) => Ok(mu.tuples_for(sigma, self.stage).cloned().collect()),
            View::Program(p) => p.tuples(self.table, sigma, self.stage),
            _ => Ok(canonical_tuples(&self.eval(sigma)?, self.stage)),
        }
    }

    /// True when the value at `σ` depends only on the counts of zeros and ones.
    pub fn count_symmetric(&self) -> bool {
        match &self.view {
            View::Exact(mu) => mu.bernoulli_param().is_some(),
            View::Ball(MeasureBall::BernoulliParam { .. }) => true,
            View::Ball(MeasureBall::Explicit(c)) => c.is_empty(),
            _ => false,
        }
    }
}
