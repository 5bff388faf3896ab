//! Transformations between learners for reals and learners for measures.

pub mod extract;
pub mod interleave;
pub mod majority;
pub mod paramap;
pub mod weights;

pub use extract::{extract_parameter, Extractor, LiftedLearner};
pub use interleave::{decoded_real, interleave_decoder, DecodedReal, InterleaveExLearner, Vote};
pub use majority::{
    h_predicate, h_predicate_prepared, majority_measure, MajorityProgram, WeightedSet,
};
pub use paramap::{dyadic_value, ParamMap};
pub use weights::{level_weights, three_times_rule, Emit, Rule, WeightLearner};
