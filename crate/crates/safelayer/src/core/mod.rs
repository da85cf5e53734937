//! Shared domain types, dataset I/O, and seeded randomness.

mod dataset;
mod domain;
mod rng;

pub use dataset::{load_internal_test_set, save_internal_test_set, InternalTestRecord, InternalTestSet};
pub use domain::{CandidateSet, ConstraintSpec, OutputSpace, StateSpace, UserParams};
pub use rng::{seeded_rng, split_rng, SplitRng};
