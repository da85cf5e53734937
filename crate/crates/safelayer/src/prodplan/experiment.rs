//! Multi-seed production-planning sweep: the framework against the
//! mean-variance and two-stage baselines on matched synthetic demand.

use crate::classifier::{bias_correct_logits, BiasVector};
use crate::conservative::{build_normal_table, posterior_upper};
use crate::prodplan::demand::N_PRODUCTS;
use crate::prodplan::instance::{PlanningInstance, LAG_WINDOW};
use crate::prodplan::methods::{mean_var_plan, plan_production, twostage_plan};
use crate::prodplan::predictor::{
    internal_test_windows, train_framework_predictor, train_twostage_predictor, PredictorConfig,
    ProductTestSet,
};
use crate::{Result, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProdplanConfig {
    pub seeds: usize,
    /// Window targets per segment: training, internal test (training),
    /// internal test (validation), validation.
    pub segment: usize,
    pub predictor: PredictorConfig,
    /// Framework threshold sweep.
    pub thresholds: Vec<Scalar>,
    /// Mean-variance standard-deviation coefficients.
    pub meanvar_coeffs: Vec<Scalar>,
    /// Two-stage overestimation penalties (each retrains the regressor).
    pub twostage_coeffs: Vec<Scalar>,
    pub twostage_epochs: usize,
    pub twostage_lr: Scalar,
    pub bias_unit_step: Scalar,
    /// Evaluation-time conservativeness radius.
    pub xi_eval: Scalar,
}

impl Default for ProdplanConfig {
    fn default() -> Self {
        ProdplanConfig {
            seeds: 100,
            segment: 300,
            predictor: PredictorConfig::default(),
            thresholds: vec![1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            meanvar_coeffs: vec![10.0, 1.0, 0.0, -0.3, -0.6, -0.9, -1.2, -1.5, -1.8, -2.1],
            twostage_coeffs: vec![0.0, 1.0, 3.0, 10.0, 30.0, 100.0],
            twostage_epochs: 40,
            twostage_lr: 0.05,
            bias_unit_step: 0.02,
            xi_eval: 0.05,
        }
    }
}

/// One sweep point of one method on one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Threshold or coefficient.
    pub param: Scalar,
    pub revenue: Scalar,
    /// Product-steps with low demand and positive production.
    pub violations: u64,
    /// Product-steps whose chance constraint was evaluated and allowed
    /// production (framework only; equals `total` for baselines).
    pub evaluated: u64,
    /// All product-steps in the validation segment.
    pub total: u64,
}

impl SweepPoint {
    /// Violation share over all product-steps (the frontier x-axis).
    pub fn violation_percent(&self) -> Scalar {
        self.violations as Scalar / self.total.max(1) as Scalar
    }

    /// Violation share among allowed decisions (the guarantee metric).
    pub fn violation_rate_evaluated(&self) -> Scalar {
        if self.evaluated == 0 {
            0.0
        } else {
            self.violations as Scalar / self.evaluated as Scalar
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProdplanSeedResult {
    pub seed: u64,
    pub framework: Vec<SweepPoint>,
    pub mean_var: Vec<SweepPoint>,
    pub twostage: Vec<SweepPoint>,
}

/// Runs the full comparison for one seed.
pub fn run_prodplan_seed(cfg: &ProdplanConfig, seed: u64) -> Result<ProdplanSeedResult> {
    let seg = cfg.segment;
    let total_steps = LAG_WINDOW + 4 * seg;
    let instance = PlanningInstance::generate(seed, total_steps)?;
    let train = LAG_WINDOW..LAG_WINDOW + seg;
    let it_train = LAG_WINDOW + seg..LAG_WINDOW + 2 * seg;
    let it_val = LAG_WINDOW + 2 * seg..LAG_WINDOW + 3 * seg;
    let val = LAG_WINDOW + 3 * seg..LAG_WINDOW + 4 * seg;

    // framework: train with its own internal test segment, validate with a
    // fresh one
    let it_train_sets: Vec<ProductTestSet> = (0..N_PRODUCTS)
        .map(|p| internal_test_windows(&instance, p, it_train.clone()))
        .collect::<Result<_>>()?;
    let predictor =
        train_framework_predictor(&instance, train.clone(), &it_train_sets, &cfg.predictor, seed)?;
    let it_val_sets: Vec<ProductTestSet> = (0..N_PRODUCTS)
        .map(|p| internal_test_windows(&instance, p, it_val.clone()))
        .collect::<Result<_>>()?;
    // cached classification logits on the validation test windows
    let val_logits: Vec<Vec<Vec<Scalar>>> = (0..N_PRODUCTS)
        .map(|p| {
            it_val_sets[p]
                .set
                .records()
                .iter()
                .map(|r| {
                    let (_, l) = predictor.predict(p, &r.measurement)?;
                    Ok(l.to_vec())
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut framework = Vec::with_capacity(cfg.thresholds.len());
    for &r_t in &cfg.thresholds {
        // per-product bias and biased posterior table
        let mut biases: Vec<BiasVector<Scalar>> = Vec::with_capacity(N_PRODUCTS);
        let mut posteriors = Vec::with_capacity(N_PRODUCTS);
        for p in 0..N_PRODUCTS {
            let correction = bias_correct_logits(
                &val_logits[p],
                &it_val_sets[p].set,
                cfg.xi_eval,
                &cfg.predictor.priors,
                1,
                r_t,
                cfg.bias_unit_step,
                4000,
            )?;
            let shifted: Vec<Vec<Scalar>> = val_logits[p]
                .iter()
                .map(|l| {
                    l.iter()
                        .zip(&correction.bias.v)
                        .map(|(&a, &b)| a + b)
                        .collect()
                })
                .collect();
            let table =
                build_normal_table(&it_val_sets[p].set, &shifted, 2, cfg.xi_eval)?;
            posteriors.push(posterior_upper(&table, &cfg.predictor.priors)?);
            biases.push(correction.bias);
        }
        let mut point = SweepPoint {
            param: r_t,
            revenue: 0.0,
            violations: 0,
            evaluated: 0,
            total: 0,
        };
        for t in val.clone() {
            let mut estimates = vec![0.0; N_PRODUCTS];
            let mut mask = vec![false; N_PRODUCTS];
            for p in 0..N_PRODUCTS {
                let (o, l) = predictor.predict(p, instance.window(p, t))?;
                estimates[p] = o;
                let biased = [l[0] + biases[p].v[0], l[1] + biases[p].v[1]];
                let class = usize::from(biased[1] > biased[0]);
                // produce only when the conservative posterior of low demand
                // stays below the threshold
                mask[p] = posteriors[p][class][1] > r_t;
            }
            let decision = plan_production(&instance, &estimates, &mask)?;
            point.revenue += instance.realized_revenue(&decision.u, t);
            for p in 0..N_PRODUCTS {
                point.total += 1;
                if !mask[p] {
                    point.evaluated += 1;
                    if instance.is_low(p, t) && decision.u[p] > 0.0 {
                        point.violations += 1;
                    }
                }
            }
        }
        framework.push(point);
    }

    // mean-variance baseline
    let mut mean_var = Vec::with_capacity(cfg.meanvar_coeffs.len());
    for &coeff in &cfg.meanvar_coeffs {
        let mut point = SweepPoint {
            param: coeff,
            revenue: 0.0,
            violations: 0,
            evaluated: 0,
            total: 0,
        };
        for t in val.clone() {
            let histories: Vec<&[Scalar]> =
                (0..N_PRODUCTS).map(|p| instance.window(p, t)).collect();
            let decision = mean_var_plan(&instance, &histories, coeff)?;
            point.revenue += instance.realized_revenue(&decision.u, t);
            for p in 0..N_PRODUCTS {
                point.total += 1;
                if !decision.stopped[p] {
                    point.evaluated += 1;
                    if instance.is_low(p, t) && decision.u[p] > 0.0 {
                        point.violations += 1;
                    }
                }
            }
        }
        mean_var.push(point);
    }

    // two-stage baseline, retrained per coefficient
    let mut twostage = Vec::with_capacity(cfg.twostage_coeffs.len());
    for &coeff in &cfg.twostage_coeffs {
        let nets = train_twostage_predictor(
            &instance,
            train.clone(),
            coeff,
            cfg.twostage_epochs,
            cfg.twostage_lr,
            seed,
        )?;
        let mut point = SweepPoint {
            param: coeff,
            revenue: 0.0,
            violations: 0,
            evaluated: 0,
            total: 0,
        };
        for t in val.clone() {
            let estimates: Vec<Scalar> = (0..N_PRODUCTS)
                .map(|p| {
                    let raw = nets[p].forward(&crate::prodplan::predictor::net_input(
                        instance.window(p, t),
                    ))?[0];
                    Ok(crate::prodplan::predictor::denorm_estimate(raw))
                })
                .collect::<Result<_>>()?;
            let decision = twostage_plan(&instance, &estimates)?;
            point.revenue += instance.realized_revenue(&decision.u, t);
            for p in 0..N_PRODUCTS {
                point.total += 1;
                if !decision.stopped[p] {
                    point.evaluated += 1;
                    if instance.is_low(p, t) && decision.u[p] > 0.0 {
                        point.violations += 1;
                    }
                }
            }
        }
        twostage.push(point);
    }

    Ok(ProdplanSeedResult {
        seed,
        framework,
        mean_var,
        twostage,
    })
}

/// Runs all seeds sequentially (each seed is independent and deterministic).
pub fn run_prodplan(cfg: &ProdplanConfig, base_seed: u64) -> Result<Vec<ProdplanSeedResult>> {
    (0..cfg.seeds as u64)
        .map(|s| run_prodplan_seed(cfg, base_seed.wrapping_add(s)))
        .collect()
}

/// Mean revenue and pooled violation share per sweep point, across seeds.
pub fn aggregate(points: &[Vec<SweepPoint>]) -> Vec<(Scalar, Scalar, Scalar, Scalar)> {
    if points.is_empty() {
        return Vec::new();
    }
    let n_points = points[0].len();
    (0..n_points)
        .map(|i| {
            let param = points[0][i].param;
            let mean_rev = points.iter().map(|s| s[i].revenue).sum::<Scalar>()
                / points.len() as Scalar;
            let viol: u64 = points.iter().map(|s| s[i].violations).sum();
            let total: u64 = points.iter().map(|s| s[i].total).sum();
            let evaluated: u64 = points.iter().map(|s| s[i].evaluated).sum();
            (
                param,
                mean_rev,
                viol as Scalar / total.max(1) as Scalar,
                viol as Scalar / evaluated.max(1) as Scalar,
            )
        })
        .collect()
}
