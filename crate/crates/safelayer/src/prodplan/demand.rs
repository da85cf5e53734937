//! Synthetic demand series: a seasonal sinusoid with autoregressive noise,
//! normalized to [0, 10], tuned so low-demand periods (below 3) cover a
//! meaningful but minor share of time.

use crate::core::{split_rng, SplitRng};
use crate::{Error, Result, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const N_PRODUCTS: usize = 4;
/// Demand below this level makes production unsafe.
pub const LOW_DEMAND: Scalar = 3.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandConfig {
    pub amp_min: Scalar,
    pub amp_max: Scalar,
    pub period_min: usize,
    pub period_max: usize,
    pub noise_rho: Scalar,
    pub noise_sigma: Scalar,
    /// Acceptance band for the below-threshold fraction.
    pub low_fraction: (Scalar, Scalar),
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            amp_min: 2.4,
            amp_max: 3.4,
            period_min: 20,
            period_max: 28,
            noise_rho: 0.8,
            noise_sigma: 0.5,
            low_fraction: (0.1, 0.4),
        }
    }
}

/// Generates `steps` demand values for each product. Parameter draws that
/// land outside the low-demand band are redrawn, so the band holds by
/// construction.
pub fn gen_demand(seed: u64, steps: usize) -> Result<Vec<Vec<Scalar>>> {
    gen_demand_with(&DemandConfig::default(), seed, steps)
}

pub fn gen_demand_with(
    cfg: &DemandConfig,
    seed: u64,
    steps: usize,
) -> Result<Vec<Vec<Scalar>>> {
    if steps < 48 {
        return Err(Error::validation("need at least 48 demand steps"));
    }
    let mut series = Vec::with_capacity(N_PRODUCTS);
    for product in 0..N_PRODUCTS {
        let mut rng = split_rng(seed, product as u64);
        let mut attempt = 0;
        let s = loop {
            let candidate = one_series(cfg, &mut rng, steps);
            let low = candidate.iter().filter(|&&v| v < LOW_DEMAND).count() as Scalar
                / steps as Scalar;
            if low >= cfg.low_fraction.0 && low <= cfg.low_fraction.1 {
                break candidate;
            }
            attempt += 1;
            if attempt > 200 {
                return Err(Error::validation(
                    "demand config cannot hit the low-demand band",
                ));
            }
        };
        series.push(s);
    }
    Ok(series)
}

fn one_series(cfg: &DemandConfig, rng: &mut SplitRng, steps: usize) -> Vec<Scalar> {
    let amp = rng.gen_range(cfg.amp_min..=cfg.amp_max);
    let period = rng.gen_range(cfg.period_min..=cfg.period_max) as Scalar;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut ar = 0.0;
    (0..steps)
        .map(|t| {
            let noise: Scalar = rng.gen_range(-1.0..1.0) * cfg.noise_sigma;
            ar = cfg.noise_rho * ar + noise;
            let v = 5.0 + amp * (std::f64::consts::TAU * t as Scalar / period + phase).sin() + ar;
            v.clamp(0.0, 10.0)
        })
        .collect()
}
