//! Demand predictors: the framework's joint estimate-and-classify network
//! trained through the decision loss, and the two-stage baseline regressor.
//!
//! Each product gets its own lag-window network. The framework net has three
//! outputs: the demand estimate and two logits classifying whether demand
//! will fall below the low level. Estimate gradients come from the exact
//! two-minimizer formula, classification gradients from the softmax virtual
//! derivative of the decision loss, and internal-test-record gradients from
//! the table perturbations, all flowing through one manual backward pass.

use crate::approxloss::{internal_test_gradient, vpd_discrete};
use crate::classifier::{Mlp, TrainSample};
use crate::conservative::{build_normal_table, posterior_upper, NormalTable};
use crate::core::{split_rng, InternalTestRecord, InternalTestSet};
use crate::prodplan::demand::N_PRODUCTS;
use crate::prodplan::instance::{PlanningInstance, LAG_WINDOW};
use crate::{Result, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: Scalar,
    /// Squared-logit regularization (sum form) on the classification head.
    pub logit_reg: Scalar,
    /// Barrier weight on the safe-class posterior.
    pub beta: Scalar,
    pub lambda: Scalar,
    /// Training threshold inside the barrier.
    pub r_t_train: Scalar,
    /// Regression-term coefficient in the loss gradient.
    pub regression_coef: Scalar,
    /// Conservativeness radius, scheduled linearly from zero.
    pub xi_target: Scalar,
    /// Weight of the internal-test gradient group (full-set mean scale).
    pub test_grad_weight: Scalar,
    pub priors: [Scalar; 2],
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            hidden: vec![32, 32],
            epochs: 30,
            lr: 0.02,
            logit_reg: 0.02,
            beta: 1000.0,
            lambda: 0.005,
            r_t_train: 0.001,
            regression_coef: 1e-4,
            xi_target: 0.05,
            test_grad_weight: 1.0,
            priors: [0.5, 0.5],
        }
    }
}

/// Demand lags scaled to roughly [-1, 1] before entering a network.
pub fn net_input(window: &[Scalar]) -> Vec<Scalar> {
    window.iter().map(|&v| (v - 5.0) / 5.0).collect()
}

/// Estimate head output mapped back to demand units.
pub fn denorm_estimate(raw: Scalar) -> Scalar {
    raw * 5.0 + 5.0
}

/// d(estimate)/d(raw head output).
const ESTIMATE_SCALE: Scalar = 5.0;

/// Framework predictor: one 3-output net per product.
#[derive(Debug, Clone)]
pub struct FrameworkPredictor {
    pub nets: Vec<Mlp<Scalar>>,
}

impl FrameworkPredictor {
    /// (estimate, class logits) for one raw product window.
    pub fn predict(&self, product: usize, window: &[Scalar]) -> Result<(Scalar, [Scalar; 2])> {
        let out = self.nets[product].forward(&net_input(window))?;
        Ok((denorm_estimate(out[0]), [out[1], out[2]]))
    }
}

/// Labeled internal-test windows for one product, stored network-ready.
pub struct ProductTestSet {
    pub set: InternalTestSet<Scalar>,
}

/// Collects internal-test windows from `range` (window targets).
pub fn internal_test_windows(
    instance: &PlanningInstance,
    product: usize,
    range: std::ops::Range<usize>,
) -> Result<ProductTestSet> {
    let records: Vec<InternalTestRecord<Scalar>> = range
        .map(|t| InternalTestRecord {
            measurement: net_input(instance.window(product, t)),
            label: usize::from(instance.is_low(product, t)),
        })
        .collect();
    Ok(ProductTestSet {
        set: InternalTestSet::new(records, 2)?,
    })
}

/// Per-product conservative table from the current net.
fn product_table(
    net: &Mlp<Scalar>,
    test: &ProductTestSet,
    xi: Scalar,
) -> Result<(NormalTable<Scalar>, Vec<Vec<Scalar>>)> {
    let logits: Vec<Vec<Scalar>> = test
        .set
        .records()
        .iter()
        .map(|r| {
            let out = net.forward(&r.measurement)?;
            Ok(vec![out[1], out[2]])
        })
        .collect::<Result<_>>()?;
    let table = build_normal_table(&test.set, &logits, 2, xi)?;
    Ok((table, logits))
}

/// Barrier on the designated safe class (class 0): the posterior of low
/// demand given a produce decision must not exceed the threshold.
fn barrier_loss(
    table: &NormalTable<Scalar>,
    priors: &[Scalar],
    beta: Scalar,
    r_t: Scalar,
) -> Scalar {
    match posterior_upper(table, priors) {
        Ok(u) => beta * (u[0][1] / r_t).max(1.0).ln(),
        Err(_) => beta * (1.0 / r_t).ln(),
    }
}

/// Trains the framework predictor on `train_range` targets with internal
/// test windows from `it_range`.
pub fn train_framework_predictor(
    instance: &PlanningInstance,
    train_range: std::ops::Range<usize>,
    it_sets: &[ProductTestSet],
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<FrameworkPredictor> {
    let mut dims = vec![LAG_WINDOW];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(3);
    let mut nets: Vec<Mlp<Scalar>> = (0..N_PRODUCTS)
        .map(|p| Mlp::new(&dims, &mut split_rng(seed, p as u64)))
        .collect::<Result<_>>()?;
    let targets: Vec<usize> = train_range.collect();
    let lambda = cfg.lambda;

    for epoch in 0..cfg.epochs {
        let xi_now = cfg.xi_target * epoch as Scalar / cfg.epochs.max(1) as Scalar;
        // tables and cached internal-test logits, one per product
        let mut tables = Vec::with_capacity(N_PRODUCTS);
        let mut it_logits = Vec::with_capacity(N_PRODUCTS);
        for p in 0..N_PRODUCTS {
            let (t, l) = product_table(&nets[p], &it_sets[p], xi_now)?;
            tables.push(t);
            it_logits.push(l);
        }
        // forward all training windows
        let mut estimates = vec![vec![0.0; targets.len()]; N_PRODUCTS];
        let mut logits = vec![vec![[0.0; 2]; targets.len()]; N_PRODUCTS];
        for p in 0..N_PRODUCTS {
            for (w, &t) in targets.iter().enumerate() {
                let out = nets[p].forward(&net_input(instance.window(p, t)))?;
                estimates[p][w] = denorm_estimate(out[0]);
                logits[p][w] = [out[1], out[2]];
            }
        }
        // per-window decision losses and gradients
        let mut out_grads = vec![vec![[0.0; 3]; targets.len()]; N_PRODUCTS];
        for (w, &t) in targets.iter().enumerate() {
            let o: Vec<Scalar> = (0..N_PRODUCTS).map(|p| estimates[p][w]).collect();
            let s: Vec<Scalar> = (0..N_PRODUCTS).map(|p| instance.demand[p][t]).collect();
            // training-time mask: produce when classified into the safe
            // class; the barrier drives that class's posterior down to the
            // threshold
            let mask: Vec<bool> = (0..N_PRODUCTS)
                .map(|p| logits[p][w][1] > logits[p][w][0])
                .collect();
            let merged: Vec<Scalar> = o
                .iter()
                .zip(&s)
                .map(|(&oi, &si)| (oi + lambda * si) / (1.0 + lambda))
                .collect();
            let u_star = instance.plan(&o, &mask)?;
            let u_tilde = instance.plan(&merged, &mask)?;
            for p in 0..N_PRODUCTS {
                // estimate head: exact two-minimizer gradient plus the
                // regression pull toward realized demand
                out_grads[p][w][0] = (-(instance.sensitivities[p] / lambda)
                    * (u_tilde.u[p] - u_star.u[p])
                    + cfg.regression_coef * (o[p] - s[p]))
                    * ESTIMATE_SCALE;
            }
            // classification heads: decision loss under each forced class
            for p in 0..N_PRODUCTS {
                let mut losses = [0.0; 2];
                for class in 0..2 {
                    let mut m = mask.clone();
                    m[p] = class == 1;
                    let us = instance.plan(&o, &m)?;
                    let ut = instance.plan(&merged, &m)?;
                    // value of (P* − Q*)/λ with the revenue parts only; the
                    // barrier is class-independent here and drops out of the
                    // softmax derivative
                    let p_val = -lambda * instance.realized_revenue(&ut.u, t)
                        - crate::prodplan::qp::revenue_of(
                            &instance.prices,
                            &instance.sensitivities,
                            &o,
                            &ut.u,
                        );
                    let q_val = -crate::prodplan::qp::revenue_of(
                        &instance.prices,
                        &instance.sensitivities,
                        &o,
                        &us.u,
                    );
                    losses[class] = (p_val - q_val) / lambda;
                }
                let g = vpd_discrete(&losses, &logits[p][w], 1.0);
                out_grads[p][w][1] = g[0];
                out_grads[p][w][2] = g[1];
            }
        }
        // one batch per product: window gradients, logit regularization,
        // internal-test gradients; everything mean-scaled over the windows
        // so the step size does not grow with the segment length
        let mean_scale = 1.0 / targets.len() as Scalar;
        for p in 0..N_PRODUCTS {
            let mut inputs: Vec<Vec<Scalar>> = Vec::new();
            let mut grads: Vec<Vec<Scalar>> = Vec::new();
            for (w, &t) in targets.iter().enumerate() {
                let mut g = out_grads[p][w].to_vec();
                g[1] += cfg.logit_reg * 2.0 * logits[p][w][0];
                g[2] += cfg.logit_reg * 2.0 * logits[p][w][1];
                g.iter_mut().for_each(|v| *v *= mean_scale);
                inputs.push(net_input(instance.window(p, t)));
                grads.push(g);
            }
            let n_t = it_sets[p].set.len();
            for (k, record) in it_sets[p].set.records().iter().enumerate() {
                let g = internal_test_gradient(
                    record.label,
                    &it_logits[p][k],
                    &tables[p],
                    1.0,
                    |t| barrier_loss(t, &cfg.priors, cfg.beta, cfg.r_t_train),
                )?;
                // full-set pass: undo the 1/n_t so each record carries its
                // own gradient, then weight the group
                let scale = cfg.test_grad_weight * n_t as Scalar * mean_scale;
                inputs.push(record.measurement.to_vec());
                grads.push(vec![0.0, g[0] * scale, g[1] * scale]);
            }
            let batch: Vec<TrainSample<Scalar>> = inputs
                .iter()
                .zip(grads)
                .map(|(input, logit_grad)| TrainSample { input, logit_grad })
                .collect();
            nets[p].train_step(&batch, cfg.lr, 0.0, 1e6)?;
        }
    }
    Ok(FrameworkPredictor { nets })
}

/// Two-stage regressor: per-product net trained on the asymmetric squared
/// loss that penalizes overestimation by (1 + coeff).
pub fn train_twostage_predictor(
    instance: &PlanningInstance,
    train_range: std::ops::Range<usize>,
    coeff: Scalar,
    epochs: usize,
    lr: Scalar,
    seed: u64,
) -> Result<Vec<Mlp<Scalar>>> {
    let dims = [LAG_WINDOW, 24, 1];
    let mut nets: Vec<Mlp<Scalar>> = (0..N_PRODUCTS)
        .map(|p| Mlp::new(&dims, &mut split_rng(seed, 100 + p as u64)))
        .collect::<Result<_>>()?;
    let targets: Vec<usize> = train_range.collect();
    for _ in 0..epochs {
        for (p, net) in nets.iter_mut().enumerate() {
            let mut inputs: Vec<Vec<Scalar>> = Vec::new();
            let mut grads: Vec<Vec<Scalar>> = Vec::new();
            for &t in &targets {
                let window = net_input(instance.window(p, t));
                let o = denorm_estimate(net.forward(&window)?[0]);
                let s = instance.demand[p][t];
                let factor = if o < s { 1.0 } else { 1.0 + coeff };
                inputs.push(window);
                grads.push(vec![(o - s) * factor * ESTIMATE_SCALE]);
            }
            let batch: Vec<TrainSample<Scalar>> = inputs
                .iter()
                .zip(grads)
                .map(|(input, logit_grad)| TrainSample { input, logit_grad })
                .collect();
            // mean-scale the batch so the step size is epoch-count stable
            let scale = 1.0 / targets.len() as Scalar;
            let batch: Vec<TrainSample<Scalar>> = batch
                .into_iter()
                .map(|s| TrainSample {
                    input: s.input,
                    logit_grad: s.logit_grad.iter().map(|g| g * scale).collect(),
                })
                .collect();
            net.train_step(&batch, lr, 0.0, 1e6)?;
        }
    }
    Ok(nets)
}
