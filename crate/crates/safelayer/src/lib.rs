//! Chance-constrained action selection over finite candidate sets, with
//! conservative posterior estimation from internal test data and
//! virtual-gradient training of the safety classifier.
//!
//! The pipeline, end to end:
//!
//! 1. A *safety classifier* maps measurements to logits over a finite output
//!    space ([`classifier`]).
//! 2. Labeled *internal test data* grounds the classifier's likelihoods.
//!    Counting how test records classify under worst-case logit shifts of
//!    size ξ yields a [`conservative::NormalTable`], from which an upper
//!    bound on the posterior probability of each environment state follows
//!    ([`conservative::posterior_upper`]).
//! 3. The [`optimizer`] selects, among a finite candidate set, the
//!    objective-optimal action whose violated posterior mass stays below the
//!    user threshold for every chance constraint, falling back to a default
//!    action when none qualifies.
//! 4. Training runs through a continuous surrogate of the decision loss
//!    ([`approxloss`]) whose virtual gradients reach both the real inputs and
//!    the internal test data.
//!
//! Two built-in applications exercise the full loop: a hazard-navigation
//! grid simulator ([`navsim`]) and a production-planning example
//! ([`prodplan`]). [`scaling`] sweeps internal-test-data quantity and fits
//! the resulting safety/performance power law.
//!
//! Numeric kernels are generic over the scalar type via [`scalar::Real`];
//! the simulators and the CLI use the [`Scalar`] alias below.

pub mod approxloss;
pub mod classifier;
pub mod conservative;
pub mod core;
pub mod navsim;
pub mod optimizer;
pub mod prodplan;
pub mod report;
pub mod scalar;
pub mod scaling;

mod error;

pub use error::{Error, Result};

/// Default scalar for the simulators, experiments, and CLI.
pub type Scalar = f64;

/// Internal test set at the default scalar.
pub type InternalTestSet = core::InternalTestSet<Scalar>;
/// Conservative count table at the default scalar.
pub type NormalTable = conservative::NormalTable<Scalar>;
/// Posterior pair (plain + upper bound) at the default scalar.
pub type PosteriorTable = conservative::PosteriorTable<Scalar>;
/// Safety classification network at the default scalar.
pub type Mlp = classifier::Mlp<Scalar>;
