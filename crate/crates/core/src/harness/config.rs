//! Experiment configuration files and learner trees.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::ClosedClass;
use crate::error::{Error, Result};
use crate::learners::{
    BandLearner, ConsistentRealLearner, ConstantLearner, CostOracleLearner, CyclingLearner,
    FrequencyLearner, Learner, LiftKind, Notion, SupportLearner, UniversalPartialLearner,
};
use crate::programs::{Index, Manifest, ProgramTable};
use crate::randomness::ComplexityEstimator;
use crate::transforms::{Emit, InterleaveExLearner, LiftedLearner, ParamMap, WeightLearner};

/// A learner and the transformations applied to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Constant {
        index: Index,
    },
    Cycle {
        indices: Vec<Index>,
    },
    /// Cycles through `pad(of, 0..copies)`.
    PadCycle {
        of: Index,
        copies: u64,
    },
    Frequency {
        family: Vec<Index>,
    },
    ConsistentReal {
        family: Vec<Index>,
    },
    Support {
        family: Vec<Index>,
    },
    Bands {
        q: f64,
        bands: Vec<(f64, Index)>,
    },
    CostOracle {
        #[serde(default)]
        lift: LiftSpec,
    },
    Universal,
    LiftReal {
        inner: Box<LearnerSpec>,
        map: ParamMap,
        class: ClosedClass,
    },
    ExWeight {
        inner: Box<LearnerSpec>,
        map: ParamMap,
        emit: Emit,
    },
    PartialexWeight {
        inner: Box<LearnerSpec>,
        map: ParamMap,
        emit: Emit,
    },
    BcMajority {
        inner: Box<LearnerSpec>,
        map: ParamMap,
        emit: Emit,
    },
    InterleaveEx {
        inner: Box<LearnerSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftSpec {
    #[default]
    Bernoulli,
    Interleave,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Config { path: p, message } => Error::config(format!("{path}.{p}"), message),
        other => Error::config(path, other.to_string()),
    }
}

fn check(table: &ProgramTable, path: &str, indices: &[Index]) -> Result<()> {
    for (i, &e) in indices.iter().enumerate() {
        if !table.contains(e) {
            return Err(Error::config(
                format!("{path}[{i}]"),
                format!("unknown index {e}"),
            ));
        }
    }
    Ok(())
}

impl LearnerSpec {
    /// Builds the learner over `table`; errors name the offending key below `path`.
    pub fn build(
        &self,
        table: &Arc<ProgramTable>,
        est: &ComplexityEstimator,
        path: &str,
    ) -> Result<Arc<dyn Learner>> {
        let t = Arc::clone(table);
        let inner = |spec: &LearnerSpec| spec.build(table, est, &format!("{path}.inner"));
        Ok(match self {
            LearnerSpec::Constant { index } => {
                check(table, &format!("{path}.index"), &[*index])?;
                Arc::new(ConstantLearner(*index))
            }
            LearnerSpec::Cycle { indices } => {
                check(table, &format!("{path}.indices"), indices)?;
                Arc::new(CyclingLearner::new(indices.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::PadCycle { of, copies } => {
                let pads = (0..*copies)
                    .map(|j| table.pad(*of, j))
                    .collect::<Result<Vec<_>>>();
                let pads = pads.map_err(|e| at(&format!("{path}.of"), e))?;
                Arc::new(CyclingLearner::new(pads).map_err(|e| at(&format!("{path}.copies"), e))?)
            }
            LearnerSpec::Frequency { family } => {
                check(table, &format!("{path}.family"), family)?;
                Arc::new(FrequencyLearner::new(t, family.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::ConsistentReal { family } => {
                check(table, &format!("{path}.family"), family)?;
                Arc::new(ConsistentRealLearner::new(t, family.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::Support { family } => {
                check(table, &format!("{path}.family"), family)?;
                Arc::new(SupportLearner::new(t, family.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::Bands { q, bands } => {
                let indices: Vec<Index> = bands.iter().map(|b| b.1).collect();
                check(table, &format!("{path}.bands"), &indices)?;
                Arc::new(BandLearner::new(*q, bands.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::CostOracle { lift } => {
                let kind = match lift {
                    LiftSpec::Bernoulli => LiftKind::Bernoulli,
                    LiftSpec::Interleave => LiftKind::Param(ParamMap::Interleave),
                };
                Arc::new(CostOracleLearner::new(t, kind).map_err(|e| at(path, e))?)
            }
            LearnerSpec::Universal => {
                Arc::new(UniversalPartialLearner::new(t, est.clone()).map_err(|e| at(path, e))?)
            }
            LearnerSpec::LiftReal {
                inner: i,
                map,
                class,
            } => Arc::new(LiftedLearner::new(
                t,
                inner(i)?,
                *map,
                class.clone(),
                est.clone(),
            )),
            LearnerSpec::ExWeight {
                inner: i,
                map,
                emit,
            } => Arc::new(WeightLearner::ex(t, inner(i)?, *map, emit.clone())),
            LearnerSpec::PartialexWeight {
                inner: i,
                map,
                emit,
            } => Arc::new(WeightLearner::partial_ex(t, inner(i)?, *map, emit.clone())),
            LearnerSpec::BcMajority {
                inner: i,
                map,
                emit,
            } => Arc::new(WeightLearner::bc(t, inner(i)?, *map, emit.clone())),
            LearnerSpec::InterleaveEx { inner: i, samples } => {
                let l = InterleaveExLearner::new(t, inner(i)?);
                Arc::new(match samples {
                    Some(k) => l.with_samples(*k),
                    None => l,
                })
            }
        })
    }
}

/// The table an experiment runs on: inline, or a manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifestRef {
    Path { path: PathBuf },
    Inline(Manifest),
}

impl ManifestRef {
    /// Relative paths are taken from `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Manifest> {
        match self {
            ManifestRef::Inline(m) => Ok(m.clone()),
            ManifestRef::Path { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::Io {
                    path: full.display().to_string(),
                    message: e.to_string(),
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config("manifest", format!("{}: {e}", full.display())))
            }
        }
    }
}

/// Seeds as an explicit list or a half-open range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { from, to } => (*from..*to).collect(),
        }
    }
}

/// Where the evaluated streams come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Samples of a measure truth, prefixes of a real truth.
    #[default]
    Auto,
    Sampled,
    Prefix,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_codecs() -> Vec<String> {
    ComplexityEstimator::default()
        .ids()
        .into_iter()
        .map(String::from)
        .collect()
}

fn default_threshold() -> i64 {
    48
}

fn default_stage() -> u64 {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub manifest: ManifestRef,
    #[serde(default = "default_codecs")]
    pub codecs: Vec<String>,
    pub learner: LearnerSpec,
    pub notion: Notion,
    /// One evaluation per truth.
    pub truths: Vec<Index>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<Vec<Index>>,
    #[serde(default)]
    pub stream: StreamKind,
    pub seeds: Seeds,
    pub horizon: usize,
    pub depth: usize,
    #[serde(default = "default_threshold")]
    pub threshold: i64,
    #[serde(default = "default_stage")]
    pub stage: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    /// Least success fraction every truth must reach.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_threshold: Option<f64>,
    #[serde(default)]
    pub output: Outputs,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn estimator(&self) -> Result<ComplexityEstimator> {
        ComplexityEstimator::from_names(&self.codecs)
    }

    /// Checks everything that can be checked without running: codecs, indices, the learner tree.
    pub fn validate(&self, table: &Arc<ProgramTable>) -> Result<()> {
        let est = self.estimator()?;
        if self.seeds.to_vec().is_empty() {
            return Err(Error::config("seeds", "no seeds"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "horizon must be at least 1"));
        }
        if self.truths.is_empty() {
            return Err(Error::config("truths", "no truths"));
        }
        check(table, "truths", &self.truths)?;
        if let Some(class) = &self.class {
            check(table, "class", class)?;
        }
        if let Some(t) = self.success_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(
                    "success_threshold",
                    format!("{t} is not in [0, 1]"),
                ));
            }
        }
        self.learner.build(table, &est, "learner")?;
        Ok(())
    }
}

/// Reads a config file holding one experiment or a list of them.
pub fn load_suite(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v).map_err(|e| Error::config(format!("[{i}]"), e.to_string()))
        })
        .collect()
}
