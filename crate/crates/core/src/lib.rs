//! Learning computable probability measures on Cantor space from random data.

pub mod bits;
pub mod error;
pub mod harness;
pub mod learners;
pub mod measures;
pub mod programs;
pub mod randomness;
pub mod rational;
pub mod source;
pub mod transforms;

pub use bits::{deinterleave, hat_decode, hat_encode, interleave, BitString, ClosedClass};
pub use error::{Error, Result};
pub use measures::{ball_contains, measure_distance, MeasureBall, MeasureObject, Tri};
pub use programs::{Entry, EntrySpec, Index, Manifest, ProgramTable};
pub use randomness::{ComplexityEstimator, Deficiency};
pub use rational::{Rational, RationalInterval};
pub use source::{BitSource, RealGen};
pub use transforms::ParamMap;
