//! One production-planning problem: prices, sensitivities, material
//! consumption, limits, and the demand history feeding the predictors.

use crate::core::{split_rng, SplitRng};
use crate::prodplan::demand::{gen_demand, LOW_DEMAND, N_PRODUCTS};
use crate::prodplan::qp::{plan_quantities, revenue_of, QpSolution};
use crate::{Result, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Demand steps each predictor sees.
pub const LAG_WINDOW: usize = 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub prices: Vec<Scalar>,
    pub sensitivities: Vec<Scalar>,
    /// Material consumption rates A (rows are materials).
    pub consumption: Vec<Vec<Scalar>>,
    pub limits: Vec<Scalar>,
    /// Per-product demand series (ground truth).
    pub demand: Vec<Vec<Scalar>>,
}

impl PlanningInstance {
    /// Seeded instance over `steps` demand values.
    pub fn generate(seed: u64, steps: usize) -> Result<Self> {
        let mut rng: SplitRng = split_rng(seed, 1000);
        let prices: Vec<Scalar> = (0..N_PRODUCTS).map(|_| rng.gen_range(3.0..6.0)).collect();
        let sensitivities: Vec<Scalar> =
            (0..N_PRODUCTS).map(|_| rng.gen_range(0.3..1.0)).collect();
        let consumption: Vec<Vec<Scalar>> = (0..N_PRODUCTS)
            .map(|_| (0..N_PRODUCTS).map(|_| rng.gen_range(0.0..0.4)).collect())
            .collect();
        let limits: Vec<Scalar> = (0..N_PRODUCTS).map(|_| rng.gen_range(14.0..30.0)).collect();
        let demand = gen_demand(seed, steps)?;
        Ok(PlanningInstance {
            prices,
            sensitivities,
            consumption,
            limits,
            demand,
        })
    }

    /// Robust material rows G = A + I: with u ≥ 0 the worst-case term |u|
    /// collapses onto the diagonal.
    pub fn robust_rows(&self) -> Vec<Vec<Scalar>> {
        self.consumption
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, &a)| if r == c { a + 1.0 } else { a })
                    .collect()
            })
            .collect()
    }

    /// Exact plan for the given demand estimates and stop mask.
    pub fn plan(&self, estimates: &[Scalar], stopped: &[bool]) -> Result<QpSolution<Scalar>> {
        plan_quantities(
            &self.prices,
            &self.sensitivities,
            &self.robust_rows(),
            &self.limits,
            estimates,
            stopped,
        )
    }

    /// Realized revenue of `u` under the true demand at step `t`.
    pub fn realized_revenue(&self, u: &[Scalar], t: usize) -> Scalar {
        let demand: Vec<Scalar> = (0..self.prices.len()).map(|i| self.demand[i][t]).collect();
        revenue_of(&self.prices, &self.sensitivities, &demand, u)
    }

    /// Lag window ending just before step `t`, per product.
    pub fn window(&self, product: usize, t: usize) -> &[Scalar] {
        &self.demand[product][t - LAG_WINDOW..t]
    }

    /// True low-demand label at step `t`.
    pub fn is_low(&self, product: usize, t: usize) -> bool {
        self.demand[product][t] < LOW_DEMAND
    }

    pub fn steps(&self) -> usize {
        self.demand[0].len()
    }
}
