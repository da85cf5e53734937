//! End-to-end navigation experiment: collect internal test data, train the
//! classifier with tailored gradients, retarget it to each threshold by bias
//! correction, and evaluate the safety/performance frontier.

use crate::classifier::bias_correct;
use crate::navsim::collect::collect_internal_test;
use crate::navsim::eval::{run_bare, run_eval, EpisodeMetrics, EvalConfig, TableScorer};
use crate::navsim::policy::GreedyPolicy;
use crate::navsim::train::{train_classifier, TrainConfig};
use crate::navsim::world::{WorldGen, UNSAFE};
use crate::{Result, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavsimConfig {
    pub world: WorldGen,
    pub train: TrainConfig,
    /// Internal test records for training.
    pub n_train: usize,
    /// Fresh internal test records for the evaluation-time posterior table.
    pub n_val: usize,
    pub thresholds: Vec<Scalar>,
    /// Conservativeness radius at evaluation time.
    pub xi_eval: Scalar,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Non-default decision quota per threshold (0 = just run the episodes).
    pub min_chance_decisions: u64,
    /// Bias-correction search step in logit units.
    pub bias_unit_step: Scalar,
    pub policy_explore: Scalar,
}

impl Default for NavsimConfig {
    fn default() -> Self {
        NavsimConfig {
            world: WorldGen::default(),
            train: TrainConfig::default(),
            n_train: 4096,
            n_val: 20_000,
            thresholds: vec![0.1, 0.01, 0.001],
            xi_eval: 0.05,
            episodes: 100,
            steps_per_episode: 200,
            min_chance_decisions: 0,
            bias_unit_step: 0.01,
            policy_explore: 0.1,
        }
    }
}

/// One frontier point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavsimRow {
    pub r_t: Scalar,
    pub metrics: EpisodeMetrics,
    pub violation_rate: Scalar,
    /// Safe-class posterior achieved by the bias correction.
    pub corrected_posterior: Scalar,
    pub bias_bracketed: bool,
}

/// Runs the full experiment and returns one row per threshold plus the bare
/// policy's metrics for reference.
pub fn run_navsim_experiment(
    cfg: &NavsimConfig,
    seed: u64,
) -> Result<(Vec<NavsimRow>, EpisodeMetrics)> {
    let policy = GreedyPolicy {
        explore: cfg.policy_explore,
    };
    let train_data = collect_internal_test(&cfg.world, &policy, cfg.n_train, seed ^ 0x11)?;
    let mlp = train_classifier(&cfg.world, &policy, &train_data.set, &cfg.train, seed ^ 0x22)?;
    // Fresh records for the inference-time table keep the posterior estimate
    // independent of the training trajectory; the ξ margin then covers
    // measurement-distribution drift rather than reuse of training data.
    let val_data = collect_internal_test(&cfg.world, &policy, cfg.n_val, seed ^ 0x33)?;

    let mut rows = Vec::with_capacity(cfg.thresholds.len());
    for (i, &r_t) in cfg.thresholds.iter().enumerate() {
        let correction = bias_correct(
            &mlp,
            &val_data.set,
            cfg.xi_eval,
            &cfg.train.priors,
            UNSAFE,
            r_t,
            cfg.bias_unit_step,
            4000,
        )?;
        let scorer = TableScorer::new(
            &mlp,
            Some(&correction.bias),
            &val_data.set,
            cfg.xi_eval,
            &cfg.train.priors,
        )?;
        let eval_cfg = EvalConfig {
            r_t,
            xi: cfg.xi_eval,
            priors: cfg.train.priors,
            episodes: cfg.episodes,
            steps_per_episode: cfg.steps_per_episode,
            min_chance_decisions: cfg.min_chance_decisions,
        };
        let metrics = run_eval(&cfg.world, &policy, &scorer, &eval_cfg, seed ^ (0x100 + i as u64))?;
        rows.push(NavsimRow {
            r_t,
            violation_rate: metrics.violation_rate(),
            metrics,
            corrected_posterior: correction.posterior,
            bias_bracketed: correction.bracketed,
        });
    }
    let bare = run_bare(
        &cfg.world,
        &policy,
        cfg.episodes,
        cfg.steps_per_episode,
        seed ^ 0x44,
    );
    Ok((rows, bare))
}
