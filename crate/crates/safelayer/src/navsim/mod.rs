//! Desk-scale hazard-navigation environment: a grid world with noisy hazard
//! sensing wraps the full pipeline end to end, from internal-test-data
//! collection through classifier training, bias correction, and safety
//! evaluation.

mod collect;
mod eval;
mod experiment;
mod policy;
mod synthetic;
mod train;
mod world;

pub use collect::{collect_internal_test, CollectedData};
pub use eval::{run_bare, run_eval, EpisodeMetrics, EvalConfig, TableScorer};
pub use experiment::{run_navsim_experiment, NavsimConfig, NavsimRow};
pub use policy::GreedyPolicy;
pub use synthetic::{run_exact_posterior_eval, SyntheticConfig, SyntheticMetrics};
pub use train::{train_classifier, TrainConfig};
pub use world::{GridWorld, MoveAction, WorldGen, SAFE, UNSAFE};
