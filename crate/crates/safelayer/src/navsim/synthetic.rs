//! Exact-posterior harness: a synthetic decision stream in which the
//! posterior column handed to the optimizer *is* the true conditional
//! distribution, so the chance-constraint guarantee can be checked against
//! ground truth with no estimation error in the way.
//!
//! Each decision draws candidates whose unsafety probability is observed
//! exactly (risk `p ~ U(0,1)`, true label `~ Bernoulli(p)`); the posterior
//! column for a candidate is `(1-p, p)` by construction.

use crate::core::{split_rng, CandidateSet, ConstraintSpec, UserParams};
use crate::navsim::world::UNSAFE;
use crate::optimizer::select_action_with;
use crate::{Result, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub candidates_per_decision: usize,
    pub r_t: Scalar,
    /// Stop once this many non-default decisions have accumulated.
    pub min_chance_decisions: u64,
    /// Hard cap on total decisions.
    pub max_decisions: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            candidates_per_decision: 12,
            r_t: 0.1,
            min_chance_decisions: 100_000,
            max_decisions: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SyntheticMetrics {
    pub decisions: u64,
    pub default_used: u64,
    pub violations: u64,
}

impl SyntheticMetrics {
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

    /// Three-sigma binomial band around the threshold.
    pub fn bound(&self, r_t: Scalar) -> Scalar {
        let n = self.chance_evaluated().max(1) as Scalar;
        r_t + 3.0 * (r_t * (1.0 - r_t) / n).sqrt()
    }
}

struct RiskCandidate {
    risk: Scalar,
    truly_unsafe: bool,
}

/// Runs the synthetic stream through the regular selection path and counts
/// ground-truth violations among non-default decisions.
pub fn run_exact_posterior_eval(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticMetrics> {
    let mut risk_rng = split_rng(seed, 0);
    let mut label_rng = split_rng(seed, 1);
    let mut metrics = SyntheticMetrics::default();
    let params = UserParams {
        thresholds: vec![cfg.r_t],
        priors: vec![0.5, 0.5],
        big_m: 100.0,
        beta: vec![3.0],
        lambda: 0.005,
        xi: 0.0,
        rho: 1e-3,
    };
    let mut constraints: ConstraintSpec<RiskCandidate, Scalar> = ConstraintSpec::new();
    constraints.push_chance(|_c, k| if k == UNSAFE { -1.0 } else { 1.0 });
    while metrics.chance_evaluated() < cfg.min_chance_decisions
        && metrics.decisions < cfg.max_decisions
    {
        let actions: Vec<RiskCandidate> = (0..cfg.candidates_per_decision)
            .map(|_| {
                let risk: Scalar = risk_rng.gen();
                RiskCandidate {
                    risk,
                    truly_unsafe: label_rng.gen::<Scalar>() < risk,
                }
            })
            .collect();
        let candidates = CandidateSet::new(
            actions,
            RiskCandidate {
                risk: 0.0,
                truly_unsafe: false,
            },
        )?;
        let decision = select_action_with(
            &candidates,
            |_| 0.0,
            &constraints,
            |i| {
                let p = candidates.actions[i].risk;
                vec![1.0 - p, p]
            },
            &params,
        )?;
        metrics.decisions += 1;
        if decision.used_default {
            metrics.default_used += 1;
        } else if decision.chosen(&candidates).truly_unsafe {
            metrics.violations += 1;
        }
    }
    Ok(metrics)
}
