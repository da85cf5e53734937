//! Planning rules: the framework's posterior-gated plan and the two
//! baselines.

use crate::prodplan::demand::{LOW_DEMAND, N_PRODUCTS};
use crate::prodplan::instance::PlanningInstance;
use crate::{Result, Scalar};
use serde::{Deserialize, Serialize};

/// A production decision: quantities plus which products were halted by the
/// chance constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductionDecision {
    pub u: Vec<Scalar>,
    pub stopped: Vec<bool>,
}

/// Plans production for the given demand estimates under a stop mask
/// produced by the posterior gate.
pub fn plan_production(
    instance: &PlanningInstance,
    estimates: &[Scalar],
    stop_mask: &[bool],
) -> Result<ProductionDecision> {
    let sol = instance.plan(estimates, stop_mask)?;
    Ok(ProductionDecision {
        u: sol.u,
        stopped: stop_mask.to_vec(),
    })
}

/// Mean-variance baseline: halt product i when the history mean minus
/// `coeff` standard deviations falls below the low-demand level, otherwise
/// plan with the mean as the estimate.
pub fn mean_var_plan(
    instance: &PlanningInstance,
    histories: &[&[Scalar]],
    coeff: Scalar,
) -> Result<ProductionDecision> {
    let mut estimates = vec![0.0; N_PRODUCTS];
    let mut stopped = vec![false; N_PRODUCTS];
    for i in 0..N_PRODUCTS {
        let h = histories[i];
        let n = h.len() as Scalar;
        let mean = h.iter().sum::<Scalar>() / n;
        let var = h.iter().map(|&v| (v - mean) * (v - mean)).sum::<Scalar>() / n;
        let sd = var.sqrt();
        estimates[i] = mean;
        stopped[i] = mean - coeff * sd < LOW_DEMAND;
    }
    let sol = instance.plan(&estimates, &stopped)?;
    Ok(ProductionDecision { u: sol.u, stopped })
}

/// Two-stage baseline: estimate first, then halt exactly when the estimate
/// is below the low-demand level.
pub fn twostage_plan(
    instance: &PlanningInstance,
    estimates: &[Scalar],
) -> Result<ProductionDecision> {
    let stopped: Vec<bool> = estimates.iter().map(|&o| o < LOW_DEMAND).collect();
    let sol = instance.plan(estimates, &stopped)?;
    Ok(ProductionDecision { u: sol.u, stopped })
}
