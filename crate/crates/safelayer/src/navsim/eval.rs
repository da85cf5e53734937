//! Episode evaluation: the policy proposes moves, the safety layer filters
//! them, metrics accumulate.

use crate::classifier::{apply_bias, BiasVector, Mlp};
use crate::conservative::{build_normal_table, posterior_upper, PosteriorMatrix};
use crate::core::{split_rng, CandidateSet, ConstraintSpec, InternalTestSet, UserParams};
use crate::navsim::policy::GreedyPolicy;
use crate::navsim::world::{GridWorld, MoveAction, WorldGen, UNSAFE};
use crate::optimizer::select_action_with;
use crate::{Result, Scalar};
use serde::{Deserialize, Serialize};

/// Streams per episode: worlds, policy, sensor, environment.
const STREAMS: u64 = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub r_t: Scalar,
    pub xi: Scalar,
    pub priors: [Scalar; 2],
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Keep running extra episodes (up to 100x) until this many non-default
    /// decisions accumulated; 0 disables.
    pub min_chance_decisions: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            r_t: 0.1,
            xi: 0.05,
            priors: [0.5, 0.5],
            episodes: 50,
            steps_per_episode: 200,
            min_chance_decisions: 0,
        }
    }
}

/// Accumulated evaluation metrics.
///
/// Violations count ground-truth-unsafe chosen actions among non-default
/// decisions; default-action steps are excluded from both numerator and
/// denominator. Collisions are reported both ways since the exclusion rule
/// for default steps is a judgment call: `collisions` excludes them,
/// `collisions_with_default` does not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub reward: Scalar,
    pub collisions: u64,
    pub collisions_with_default: u64,
    pub decisions: u64,
    pub default_used: u64,
    pub violations: u64,
}

impl EpisodeMetrics {
    pub fn chance_evaluated(&self) -> u64 {
        self.decisions - self.default_used
    }

    pub fn violation_rate(&self) -> Scalar {
        if self.chance_evaluated() == 0 {
            0.0
        } else {
            self.violations as Scalar / self.chance_evaluated() as Scalar
        }
    }

    fn merge(&mut self, other: &EpisodeMetrics) {
        self.reward += other.reward;
        self.collisions += other.collisions;
        self.collisions_with_default += other.collisions_with_default;
        self.decisions += other.decisions;
        self.default_used += other.default_used;
        self.violations += other.violations;
    }
}

/// Classifier wrapper holding the posterior table, built once per
/// evaluation: the internal test set is fixed and the network is
/// deterministic, so the table never changes mid-run.
pub struct TableScorer<'a> {
    mlp: &'a Mlp<Scalar>,
    bias: Option<&'a BiasVector<Scalar>>,
    upper: PosteriorMatrix<Scalar>,
}

impl<'a> TableScorer<'a> {
    pub fn new(
        mlp: &'a Mlp<Scalar>,
        bias: Option<&'a BiasVector<Scalar>>,
        test_set: &InternalTestSet<Scalar>,
        xi: Scalar,
        priors: &[Scalar],
    ) -> Result<Self> {
        let logits: Vec<Vec<Scalar>> = test_set
            .records()
            .iter()
            .map(|r| {
                let mut l = mlp.forward(&r.measurement)?;
                if let Some(b) = bias {
                    apply_bias(&mut l, b);
                }
                Ok(l)
            })
            .collect::<Result<_>>()?;
        let table = build_normal_table(test_set, &logits, mlp.output_dim(), xi)?;
        let upper = posterior_upper(&table, priors)?;
        Ok(TableScorer { mlp, bias, upper })
    }

    /// Classifies one candidate input and returns (class, posterior column
    /// over states for that class).
    pub fn classify(&self, input: &[Scalar]) -> Result<(usize, Vec<Scalar>)> {
        let mut logits = self.mlp.forward(input)?;
        if let Some(b) = self.bias {
            apply_bias(&mut logits, b);
        }
        let mut class = 0;
        for (j, &v) in logits.iter().enumerate() {
            if v > logits[class] {
                class = j;
            }
        }
        Ok((class, self.upper[class].clone()))
    }
}

struct NavCandidate {
    action: MoveAction,
    is_default: bool,
}

/// Runs the full framework for `cfg.episodes` episodes (more if a
/// chance-decision quota is set) and accumulates metrics.
pub fn run_eval(
    gen: &WorldGen,
    policy: &GreedyPolicy,
    scorer: &TableScorer<'_>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EpisodeMetrics> {
    let mut total = EpisodeMetrics::default();
    let cap = cfg.episodes.saturating_mul(100).max(cfg.episodes);
    let mut episode = 0usize;
    while episode < cfg.episodes
        || (cfg.min_chance_decisions > 0
            && total.chance_evaluated() < cfg.min_chance_decisions
            && episode < cap)
    {
        let m = run_episode(gen, policy, scorer, cfg, seed, episode as u64)?;
        total.merge(&m);
        episode += 1;
    }
    Ok(total)
}

fn run_episode(
    gen: &WorldGen,
    policy: &GreedyPolicy,
    scorer: &TableScorer<'_>,
    cfg: &EvalConfig,
    seed: u64,
    episode: u64,
) -> Result<EpisodeMetrics> {
    let mut world_rng = split_rng(seed, episode * STREAMS);
    let mut policy_rng = split_rng(seed, episode * STREAMS + 1);
    let mut sensor_rng = split_rng(seed, episode * STREAMS + 2);
    let mut env_rng = split_rng(seed, episode * STREAMS + 3);
    let mut world = gen.sample(&mut world_rng);
    let mut metrics = EpisodeMetrics::default();
    let params = UserParams {
        thresholds: vec![cfg.r_t],
        priors: cfg.priors.to_vec(),
        big_m: 100.0,
        beta: vec![3.0],
        lambda: 0.005,
        xi: cfg.xi,
        rho: 1e-3,
    };
    let mut constraints: ConstraintSpec<NavCandidate, Scalar> = ConstraintSpec::new();
    // the safety constraint is violated exactly in the unsafe state
    constraints.push_chance(|_c, k| if k == UNSAFE { -1.0 } else { 1.0 });
    for _ in 0..cfg.steps_per_episode {
        let ranked = policy.ranked_actions(&world, &mut policy_rng);
        let measurement = world.measurement(&mut sensor_rng);
        let columns: Vec<Vec<Scalar>> = ranked
            .iter()
            .map(|&a| {
                let input = GridWorld::classifier_input(&measurement, a);
                Ok(scorer.classify(&input)?.1)
            })
            .collect::<Result<_>>()?;
        let candidates = CandidateSet::new(
            ranked
                .iter()
                .map(|&action| NavCandidate {
                    action,
                    is_default: false,
                })
                .collect(),
            NavCandidate {
                action: MoveAction::Stay,
                is_default: true,
            },
        )?;
        let decision = select_action_with(
            &candidates,
            |c| if c.is_default { 1.0 } else { 0.0 },
            &constraints,
            |i| columns[i].clone(),
            &params,
        )?;
        metrics.decisions += 1;
        let chosen = decision.chosen(&candidates).action;
        if decision.used_default {
            metrics.default_used += 1;
        } else if world.label_action(chosen) == UNSAFE {
            metrics.violations += 1;
        }
        let (reward, collided) = world.step(chosen, &mut env_rng);
        metrics.reward += reward;
        if collided {
            metrics.collisions_with_default += 1;
            if !decision.used_default {
                metrics.collisions += 1;
            }
        }
    }
    debug_assert_eq!(metrics.collisions_with_default >= metrics.collisions, true);
    Ok(metrics)
}

/// The bare policy with no safety layer, consuming the same random streams
/// as [`run_eval`] minus the sensor draws.
pub fn run_bare(
    gen: &WorldGen,
    policy: &GreedyPolicy,
    episodes: usize,
    steps_per_episode: usize,
    seed: u64,
) -> EpisodeMetrics {
    let mut total = EpisodeMetrics::default();
    for episode in 0..episodes as u64 {
        let mut world_rng = split_rng(seed, episode * STREAMS);
        let mut policy_rng = split_rng(seed, episode * STREAMS + 1);
        let mut env_rng = split_rng(seed, episode * STREAMS + 3);
        let mut world = gen.sample(&mut world_rng);
        for _ in 0..steps_per_episode {
            let ranked = policy.ranked_actions(&world, &mut policy_rng);
            total.decisions += 1;
            let unsafe_pick = world.label_action(ranked[0]) == UNSAFE;
            if unsafe_pick {
                total.violations += 1;
            }
            let (reward, collided) = world.step(ranked[0], &mut env_rng);
            total.reward += reward;
            if collided {
                total.collisions += 1;
                total.collisions_with_default += 1;
            }
        }
    }
    total
}
