//! Threshold retargeting by a constant logit offset.
//!
//! A trained classifier supports only the posterior values its table happens
//! to produce. Adding a constant bias to the safe class's logit re-shuffles
//! which internal test records classify as safe, moving the safe-class
//! posterior toward the requested threshold without touching the weights.

use crate::classifier::Mlp;
use crate::conservative::{build_normal_table, posterior_upper};
use crate::core::InternalTestSet;
use crate::scalar::Real;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Constant offset added to the final-layer logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVector<R> {
    pub v: Vec<R>,
}

/// Outcome of a bias search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasCorrection<R> {
    pub bias: BiasVector<R>,
    /// Class whose logit the search adjusted (the safe class).
    pub safe_class: usize,
    /// Posterior of the unsafe state given the safe class, after correction.
    pub posterior: R,
    /// r_t minus the achieved posterior (non-negative when bracketed).
    pub gap: R,
    /// Size of the posterior jump at the bracket boundary; the gap never
    /// exceeds it when `bracketed` is true.
    pub jump: R,
    /// False when the search saturated without crossing the threshold; the
    /// bias is then the best value found.
    pub bracketed: bool,
}

/// Finds the bias on the safe class's logit that brings the conservative
/// posterior `p^ξ(unsafe | safe class)` as close to `r_t` as achievable from
/// below.
///
/// The safe class is fixed up front as the class minimizing that posterior at
/// zero bias. The search marches in `unit_step` increments until the
/// threshold is bracketed, then bisects; counts are integers, so the
/// posterior is a step function and the result lands one jump below `r_t`.
#[allow(clippy::too_many_arguments)]
pub fn bias_correct<R: Real>(
    mlp: &Mlp<R>,
    test_set: &InternalTestSet<R>,
    xi: R,
    priors: &[R],
    unsafe_state: usize,
    r_t: R,
    unit_step: R,
    max_iters: usize,
) -> Result<BiasCorrection<R>> {
    let base_logits: Vec<Vec<R>> = test_set
        .records()
        .iter()
        .map(|r| mlp.forward(&r.measurement))
        .collect::<Result<_>>()?;
    bias_correct_logits(
        &base_logits,
        test_set,
        xi,
        priors,
        unsafe_state,
        r_t,
        unit_step,
        max_iters,
    )
}

/// [`bias_correct`] over precomputed classification logits, for models whose
/// raw outputs carry extra heads.
#[allow(clippy::too_many_arguments)]
pub fn bias_correct_logits<R: Real>(
    base_logits: &[Vec<R>],
    test_set: &InternalTestSet<R>,
    xi: R,
    priors: &[R],
    unsafe_state: usize,
    r_t: R,
    unit_step: R,
    max_iters: usize,
) -> Result<BiasCorrection<R>> {
    let n_outputs = base_logits
        .first()
        .map(Vec::len)
        .ok_or_else(|| crate::Error::validation("no logits"))?;

    let posterior_at = |class: usize, v: R| -> Result<(R, u32)> {
        let shifted: Vec<Vec<R>> = base_logits
            .iter()
            .map(|phi| {
                let mut s = phi.clone();
                s[class] = s[class] + v;
                s
            })
            .collect();
        let table = build_normal_table(test_set, &shifted, n_outputs, xi)?;
        let members = (0..table.n_states()).map(|i| table.plus[i][class]).sum();
        let upper = posterior_upper(&table, priors)?;
        Ok((upper[class][unsafe_state], members))
    };

    // Safe class: the one with the lowest unsafe posterior at zero bias.
    let mut safe_class = 0;
    let mut q0 = R::infinity();
    for j in 0..n_outputs {
        let (q, _) = posterior_at(j, R::zero())?;
        if q < q0 {
            q0 = q;
            safe_class = j;
        }
    }

    if q0 == r_t {
        return Ok(BiasCorrection {
            bias: BiasVector {
                v: vec![R::zero(); n_outputs],
            },
            safe_class,
            posterior: q0,
            gap: R::zero(),
            jump: R::zero(),
            bracketed: true,
        });
    }

    // March in unit steps toward the threshold. Raising the safe logit pulls
    // more records into the class (posterior drifts toward the prior mix);
    // lowering it strands only the most confident records. Counts are
    // integers, so q is a step function of v.
    let direction = if q0 < r_t { R::one() } else { -R::one() };
    let mut bracket = None;
    // Best probe with q <= r_t (largest v = least conservative) and best
    // overall fallback (smallest q).
    let mut best_valid: Option<(R, R)> = if q0 <= r_t { Some((R::zero(), q0)) } else { None };
    let mut best_any = (R::zero(), q0);
    {
        let mut prev_v = R::zero();
        let mut prev_q = q0;
        for step in 1..=max_iters {
            let v = direction * unit_step * R::of_usize(step);
            let (q, members) = posterior_at(safe_class, v)?;
            if q < best_any.1 {
                best_any = (v, q);
            }
            if q <= r_t {
                best_valid = Some((v, q));
            }
            let crossed_up = prev_q <= r_t && q > r_t;
            let crossed_down = prev_q > r_t && q <= r_t;
            if crossed_up {
                bracket = Some((prev_v, prev_q, v, q));
                break;
            }
            if crossed_down {
                bracket = Some((v, q, prev_v, prev_q));
                break;
            }
            if members == 0 && direction < R::zero() {
                // The class emptied without reaching the threshold; further
                // marching cannot help.
                break;
            }
            prev_v = v;
            prev_q = q;
        }
    }
    if bracket.is_none() {
        // Saturated: no crossing within the budget. Report the best valid
        // bias found, or the lowest-posterior probe when nothing reached
        // the threshold.
        let (v, q) = best_valid.unwrap_or(best_any);
        return Ok(BiasCorrection {
            bias: bias_vec(n_outputs, safe_class, v),
            safe_class,
            posterior: q,
            gap: r_t - q,
            jump: R::zero(),
            bracketed: false,
        });
    }

    // Bisect the bracket down to a sliver of the unit step; the valid side
    // converges to the last achievable posterior below the threshold.
    let (mut vlo, mut qlo, mut vhi, mut qhi) = bracket.unwrap();
    let tol = unit_step * R::of(1e-3);
    for _ in 0..60 {
        if (vhi - vlo).abs() <= tol {
            break;
        }
        let mid = (vlo + vhi) / R::of(2.0);
        let (q, _) = posterior_at(safe_class, mid)?;
        if q <= r_t {
            vlo = mid;
            qlo = q;
        } else {
            vhi = mid;
            qhi = q;
        }
    }
    Ok(BiasCorrection {
        bias: bias_vec(n_outputs, safe_class, vlo),
        safe_class,
        posterior: qlo,
        gap: r_t - qlo,
        jump: qhi - qlo,
        bracketed: true,
    })
}

fn bias_vec<R: Real>(n: usize, class: usize, v: R) -> BiasVector<R> {
    let mut vec = vec![R::zero(); n];
    vec[class] = v;
    BiasVector { v: vec }
}

/// Applies a bias vector to logits.
pub fn apply_bias<R: Real>(logits: &mut [R], bias: &BiasVector<R>) {
    for (l, b) in logits.iter_mut().zip(&bias.v) {
        *l += *b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{seeded_rng, InternalTestRecord, InternalTestSet};
    use rand::Rng;

    /// Two-class scenario with graded logit margins: safe records score
    /// negative, unsafe positive, with overlap controlled by noise.
    fn graded_scenario(seed: u64, n: usize) -> (Mlp<f64>, InternalTestSet<f64>) {
        let mut rng = seeded_rng(seed);
        // classifier: logits = (w0·x, w1·x) with x scalar
        let mlp = Mlp::from_parts(vec![(vec![-1.0, 1.0], vec![0.0, 0.0])], &[1, 2]).unwrap();
        let records = (0..n)
            .map(|_| {
                let label = usize::from(rng.gen::<f64>() < 0.5);
                let center = if label == 1 { 0.8 } else { -0.8 };
                let x = center + rng.gen_range(-1.2..1.2);
                InternalTestRecord {
                    measurement: vec![x],
                    label,
                }
            })
            .collect();
        (mlp, InternalTestSet::new(records, 2).unwrap())
    }

    fn recompute_posterior(
        mlp: &Mlp<f64>,
        set: &InternalTestSet<f64>,
        xi: f64,
        bias: &BiasVector<f64>,
        class: usize,
    ) -> f64 {
        let logits: Vec<Vec<f64>> = set
            .records()
            .iter()
            .map(|r| {
                let mut l = mlp.forward(&r.measurement).unwrap();
                apply_bias(&mut l, bias);
                l
            })
            .collect();
        let table = build_normal_table(set, &logits, 2, xi).unwrap();
        posterior_upper(&table, &[0.5, 0.5]).unwrap()[class][1]
    }

    #[test]
    fn already_on_threshold_returns_zero_bias() {
        let (mlp, set) = graded_scenario(1, 200);
        // measure the current posterior and ask for exactly it
        let zero = BiasVector { v: vec![0.0, 0.0] };
        let q0 = recompute_posterior(&mlp, &set, 0.0, &zero, 0);
        let out = bias_correct(&mlp, &set, 0.0, &[0.5, 0.5], 1, q0, 0.01, 500).unwrap();
        assert_eq!(out.bias.v, vec![0.0, 0.0]);
        assert_eq!(out.posterior, q0);
    }

    #[test]
    fn vacuous_threshold_saturates_toward_no_rejection() {
        let (mlp, set) = graded_scenario(2, 200);
        let out = bias_correct(&mlp, &set, 0.0, &[0.5, 0.5], 1, 1.0, 0.05, 200).unwrap();
        // posterior can never exceed 1, so the search saturates with q <= 1
        assert!(out.posterior <= 1.0);
        assert!(!out.bracketed || out.posterior <= 1.0);
    }

    /// After correction the recomputed posterior sits below r_t, within one
    /// posterior jump.
    #[test]
    fn correction_lands_below_threshold_within_one_jump() {
        for seed in 0..10 {
            let (mlp, set) = graded_scenario(100 + seed, 400);
            let r_t = 0.2;
            let out = bias_correct(&mlp, &set, 0.05, &[0.5, 0.5], 1, r_t, 0.02, 2000).unwrap();
            let q = recompute_posterior(&mlp, &set, 0.05, &out.bias, out.safe_class);
            assert!(
                (q - out.posterior).abs() < 1e-12,
                "reported {} vs recomputed {q}",
                out.posterior
            );
            if out.bracketed {
                assert!(q <= r_t, "posterior {q} above threshold");
                assert!(
                    out.gap <= out.jump + 1e-12,
                    "gap {} exceeds jump {}",
                    out.gap,
                    out.jump
                );
            }
        }
    }

    #[test]
    fn deterministic_given_same_inputs() {
        let (mlp, set) = graded_scenario(7, 300);
        let a = bias_correct(&mlp, &set, 0.02, &[0.5, 0.5], 1, 0.1, 0.01, 1000).unwrap();
        let b = bias_correct(&mlp, &set, 0.02, &[0.5, 0.5], 1, 0.1, 0.01, 1000).unwrap();
        assert_eq!(a.bias, b.bias);
        assert_eq!(a.posterior, b.posterior);
    }
}
