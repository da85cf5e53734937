//! ξ-shifted count tables and the posteriors built from them.

use crate::core::InternalTestSet;
use crate::scalar::Real;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Logit-shift radii are inflated by sqrt(2): for a two-way argmax the margin
/// of a Euclidean ξ-ball moves by at most sqrt(2)·ξ, so the per-class shift
/// rule with the inflated radius covers the ball.
pub const XI_INFLATION: f64 = std::f64::consts::SQRT_2;

/// Returns 1 iff class `j` can win the argmax after its logit is raised by
/// `xi` (ties count as a win).
pub fn indicator_plus<R: Real>(logits: &[R], j: usize, xi: R) -> Result<u32> {
    check_class(logits, j)?;
    let best = max_logit(logits);
    Ok(u32::from(logits[j] + xi >= best))
}

/// Returns 1 iff class `j` still wins strictly after its logit is lowered by
/// `xi` (a tie after the shift loses).
pub fn indicator_minus<R: Real>(logits: &[R], j: usize, xi: R) -> Result<u32> {
    check_class(logits, j)?;
    let best_other = logits
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .map(|(_, &v)| v)
        .fold(R::neg_infinity(), R::max);
    Ok(u32::from(logits[j] - xi > best_other))
}

fn check_class<R: Real>(logits: &[R], j: usize) -> Result<()> {
    if j >= logits.len() {
        return Err(Error::Dimension {
            expected: logits.len(),
            got: j,
            context: "class index into logits",
        });
    }
    for &v in logits {
        if !v.is_finite() {
            return Err(Error::validation("non-finite logit"));
        }
    }
    Ok(())
}

fn max_logit<R: Real>(logits: &[R]) -> R {
    logits.iter().copied().fold(R::neg_infinity(), R::max)
}

fn argmax<R: Real>(logits: &[R]) -> usize {
    let mut best = 0;
    for (m, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = m;
        }
    }
    best
}

/// Per-(state, class) conservative counts with per-state totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalTable<R> {
    /// Records whose ξ-ball can reach class j, per state i.
    pub plus: Vec<Vec<u32>>,
    /// Records whose ξ-ball lies entirely in class j, per state i.
    pub minus: Vec<Vec<u32>>,
    /// Records per state.
    pub totals: Vec<u32>,
    /// User radius before inflation.
    pub xi: R,
    /// Effective shift applied to logits.
    pub xi_eff: R,
}

impl<R: Real> NormalTable<R> {
    pub fn n_states(&self) -> usize {
        self.totals.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.plus.first().map_or(0, Vec::len)
    }

    pub fn n_records(&self) -> u32 {
        self.totals.iter().sum()
    }

    /// Empirical likelihood bracket `[minus/total, plus/total]` for (i, j).
    pub fn likelihood_bounds(&self, i: usize, j: usize) -> (R, R) {
        let t = R::of_usize(self.totals[i] as usize);
        if self.totals[i] == 0 {
            return (R::zero(), R::zero());
        }
        (
            R::of_usize(self.minus[i][j] as usize) / t,
            R::of_usize(self.plus[i][j] as usize) / t,
        )
    }
}

/// Counts each record's label against every class it can (or must) take
/// within the ξ-ball. `logits[k]` belongs to `test_set.records()[k]`.
///
/// At ξ = 0 both counts collapse to the deterministic argmax (exact logit
/// ties classify to the lowest index so that plus = minus holds).
pub fn build_normal_table<R: Real>(
    test_set: &InternalTestSet<R>,
    logits: &[Vec<R>],
    n_outputs: usize,
    xi: R,
) -> Result<NormalTable<R>> {
    if logits.len() != test_set.len() {
        return Err(Error::Dimension {
            expected: test_set.len(),
            got: logits.len(),
            context: "one logit vector per record",
        });
    }
    if xi < R::zero() {
        return Err(Error::validation("xi must be non-negative"));
    }
    let n_states = test_set.n_states();
    let xi_eff = xi * R::of(XI_INFLATION);
    let mut plus = vec![vec![0u32; n_outputs]; n_states];
    let mut minus = vec![vec![0u32; n_outputs]; n_states];
    let mut totals = vec![0u32; n_states];
    for (rec, phi) in test_set.records().iter().zip(logits) {
        if phi.len() != n_outputs {
            return Err(Error::Dimension {
                expected: n_outputs,
                got: phi.len(),
                context: "logit vector length",
            });
        }
        totals[rec.label] += 1;
        if xi_eff == R::zero() {
            let j = argmax(phi);
            plus[rec.label][j] += 1;
            minus[rec.label][j] += 1;
        } else {
            for j in 0..n_outputs {
                plus[rec.label][j] += indicator_plus(phi, j, xi_eff)?;
                minus[rec.label][j] += indicator_minus(phi, j, xi_eff)?;
            }
        }
    }
    Ok(NormalTable {
        plus,
        minus,
        totals,
        xi,
        xi_eff,
    })
}

/// Posterior matrix in output-major layout: `[output j][state i]`.
pub type PosteriorMatrix<R> = Vec<Vec<R>>;

/// Plain Bayes posterior from a ξ = 0 table.
///
/// A class no test record falls into carries no information; its column
/// falls back to the prior and is flagged in the second return value.
pub fn posterior_plain<R: Real>(
    table: &NormalTable<R>,
    priors: &[R],
) -> Result<(PosteriorMatrix<R>, Vec<bool>)> {
    if table.xi_eff != R::zero() {
        return Err(Error::validation("posterior_plain requires a xi = 0 table"));
    }
    check_priors(table, priors)?;
    let (n_states, n_outputs) = (table.n_states(), table.n_outputs());
    let mut out = vec![vec![R::zero(); n_states]; n_outputs];
    let mut fallback = vec![false; n_outputs];
    for j in 0..n_outputs {
        let mut denom = R::zero();
        for k in 0..n_states {
            denom += likelihood(table, k, j) * priors[k];
        }
        if denom == R::zero() {
            out[j].copy_from_slice(priors);
            fallback[j] = true;
        } else {
            for i in 0..n_states {
                out[j][i] = likelihood(table, i, j) * priors[i] / denom;
            }
        }
    }
    Ok((out, fallback))
}

/// Upper bound on the posterior: optimistic (+ξ) likelihood in the numerator,
/// pessimistic (−ξ) in the denominator, clamped to [0, 1]. A vanishing
/// denominator is maximally conservative and yields 1.
pub fn posterior_upper<R: Real>(
    table: &NormalTable<R>,
    priors: &[R],
) -> Result<PosteriorMatrix<R>> {
    check_priors(table, priors)?;
    let (n_states, n_outputs) = (table.n_states(), table.n_outputs());
    let mut out = vec![vec![R::zero(); n_states]; n_outputs];
    for j in 0..n_outputs {
        let mut denom = R::zero();
        for k in 0..n_states {
            let t = R::of_usize(table.totals[k] as usize);
            denom += R::of_usize(table.minus[k][j] as usize) / t * priors[k];
        }
        for i in 0..n_states {
            if denom == R::zero() {
                out[j][i] = R::one();
            } else {
                let t = R::of_usize(table.totals[i] as usize);
                let num = R::of_usize(table.plus[i][j] as usize) / t * priors[i];
                out[j][i] = (num / denom).min(R::one()).max(R::zero());
            }
        }
    }
    Ok(out)
}

fn likelihood<R: Real>(table: &NormalTable<R>, i: usize, j: usize) -> R {
    R::of_usize(table.plus[i][j] as usize) / R::of_usize(table.totals[i] as usize)
}

fn check_priors<R: Real>(table: &NormalTable<R>, priors: &[R]) -> Result<()> {
    if priors.len() != table.n_states() {
        return Err(Error::Dimension {
            expected: table.n_states(),
            got: priors.len(),
            context: "prior vector length",
        });
    }
    for (i, &p) in priors.iter().enumerate() {
        if p > R::zero() && table.totals[i] == 0 {
            return Err(Error::validation(format!(
                "prior mass on state {i} with zero internal test records"
            )));
        }
    }
    Ok(())
}

/// Plain and upper-bound posteriors built from the same records, priors, and
/// logits. `upper[j][i] >= plain[j][i]` entrywise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorTable<R> {
    pub upper: PosteriorMatrix<R>,
    pub plain: PosteriorMatrix<R>,
    /// Classes whose plain column fell back to the prior.
    pub uninformative: Vec<bool>,
}

impl<R: Real> PosteriorTable<R> {
    pub fn from_records(
        test_set: &InternalTestSet<R>,
        logits: &[Vec<R>],
        n_outputs: usize,
        xi: R,
        priors: &[R],
    ) -> Result<Self> {
        let table_xi = build_normal_table(test_set, logits, n_outputs, xi)?;
        let table_zero = build_normal_table(test_set, logits, n_outputs, R::zero())?;
        let upper = posterior_upper(&table_xi, priors)?;
        let (plain, uninformative) = posterior_plain(&table_zero, priors)?;
        Ok(PosteriorTable {
            upper,
            plain,
            uninformative,
        })
    }

    /// Posterior column (over states) for an observed output class.
    pub fn upper_column(&self, output: usize) -> &[R] {
        &self.upper[output]
    }

    /// Mean upper-bound posterior minus mean plain posterior over all
    /// entries; the price paid for conservativeness.
    pub fn conservativeness_gap(&self) -> R {
        let n = R::of_usize(self.upper.len() * self.upper[0].len());
        let up: R = self.upper.iter().flatten().copied().sum();
        let pl: R = self.plain.iter().flatten().copied().sum();
        (up - pl) / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{InternalTestRecord, InternalTestSet};
    use approx::assert_abs_diff_eq;

    fn set_with_labels(labels: &[usize], n_states: usize) -> InternalTestSet<f64> {
        let records = labels
            .iter()
            .map(|&label| InternalTestRecord {
                measurement: vec![label as f64],
                label,
            })
            .collect();
        InternalTestSet::new(records, n_states).unwrap()
    }

    /// Table with prescribed counts, bypassing record bookkeeping.
    fn raw_table(plus: Vec<Vec<u32>>, minus: Vec<Vec<u32>>, totals: Vec<u32>) -> NormalTable<f64> {
        NormalTable {
            plus,
            minus,
            totals,
            xi: 1.0,
            xi_eff: 1.0,
        }
    }

    #[test]
    fn indicator_plus_examples() {
        assert_eq!(indicator_plus(&[2.0, 0.5], 0, 0.0).unwrap(), 1);
        assert_eq!(indicator_plus(&[2.0, 0.5], 1, 1.0).unwrap(), 0); // 1.5 < 2.0
        assert_eq!(indicator_plus(&[2.0, 0.5], 1, 2.0).unwrap(), 1); // 2.5 > 2.0
        assert!(indicator_plus(&[2.0, 0.5], 2, 0.0).is_err());
    }

    #[test]
    fn indicator_minus_examples() {
        assert_eq!(indicator_minus(&[2.0, 0.5], 0, 1.0).unwrap(), 1); // 1.0 > 0.5
        assert_eq!(indicator_minus(&[2.0, 0.5], 0, 2.0).unwrap(), 0); // 0.0 < 0.5
        // xi = 0 at a unique argmax agrees with indicator_plus
        let logits = [0.3, -1.0, 2.4];
        for j in 0..3 {
            assert_eq!(
                indicator_minus(&logits, j, 0.0).unwrap(),
                indicator_plus(&logits, j, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn perfect_classifier_at_xi_zero() {
        let set = set_with_labels(&[0, 1], 2);
        let logits = vec![vec![3.0, 0.0], vec![0.0, 3.0]];
        let t = build_normal_table(&set, &logits, 2, 0.0).unwrap();
        assert_eq!(t.plus, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(t.minus, t.plus);
        assert_eq!(t.totals, vec![1, 1]);
    }

    #[test]
    fn huge_xi_flips_everything() {
        let set = set_with_labels(&[0, 1], 2);
        let logits = vec![vec![3.0, 0.0], vec![0.0, 3.0]];
        // xi_eff = sqrt(2) * xi >= 3 flips every argmax both ways
        let t = build_normal_table(&set, &logits, 2, 3.0 / XI_INFLATION + 1e-9).unwrap();
        assert_eq!(t.plus, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(t.minus, vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn counts_argmaxes_per_state() {
        let set = set_with_labels(&[0, 0, 0, 0], 2);
        let logits = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![2.0, 0.0],
        ];
        let t = build_normal_table(&set, &logits, 2, 0.0).unwrap();
        assert_eq!(t.plus[0], vec![3, 1]);
    }

    #[test]
    fn mismatched_logits_rejected() {
        let set = set_with_labels(&[0, 1], 2);
        assert!(build_normal_table(&set, &[vec![1.0, 0.0]], 2, 0.0).is_err());
        let bad = vec![vec![1.0, 0.0], vec![1.0]];
        assert!(build_normal_table(&set, &bad, 2, 0.0).is_err());
    }

    #[test]
    fn plain_posterior_perfect_separation() {
        let t = raw_table(
            vec![vec![10, 0], vec![0, 10]],
            vec![vec![10, 0], vec![0, 10]],
            vec![10, 10],
        );
        let t = NormalTable { xi: 0.0, xi_eff: 0.0, ..t };
        let (plain, flags) = posterior_plain(&t, &[0.5, 0.5]).unwrap();
        assert_eq!(plain[0][1], 0.0);
        assert_eq!(plain[0][0], 1.0);
        assert!(!flags[0] && !flags[1]);
    }

    #[test]
    fn plain_posterior_mixed_counts() {
        let t = raw_table(
            vec![vec![8, 2], vec![2, 8]],
            vec![vec![8, 2], vec![2, 8]],
            vec![10, 10],
        );
        let t = NormalTable { xi: 0.0, xi_eff: 0.0, ..t };
        let (plain, _) = posterior_plain(&t, &[0.5, 0.5]).unwrap();
        // (0.2·0.5) / (0.8·0.5 + 0.2·0.5)
        assert_abs_diff_eq!(plain[0][1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn plain_posterior_uninformative_likelihoods() {
        let t = raw_table(
            vec![vec![5, 5], vec![5, 5]],
            vec![vec![5, 5], vec![5, 5]],
            vec![10, 10],
        );
        let t = NormalTable { xi: 0.0, xi_eff: 0.0, ..t };
        let (plain, _) = posterior_plain(&t, &[0.3, 0.7]).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(plain[j][1], 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn upper_equals_plain_at_xi_zero() {
        let set = set_with_labels(&[0, 0, 1, 1, 0, 1], 2);
        let logits = vec![
            vec![1.0, 0.2],
            vec![0.4, 0.6],
            vec![-0.5, 0.5],
            vec![2.0, 1.0],
            vec![0.9, 0.1],
            vec![0.0, 0.3],
        ];
        let t = build_normal_table(&set, &logits, 2, 0.0).unwrap();
        let (plain, _) = posterior_plain(&t, &[0.5, 0.5]).unwrap();
        let upper = posterior_upper(&t, &[0.5, 0.5]).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                assert_abs_diff_eq!(plain[j][i], upper[j][i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn upper_vacuous_information_clamps_to_one() {
        let t = raw_table(
            vec![vec![10, 10], vec![10, 10]],
            vec![vec![0, 0], vec![0, 0]],
            vec![10, 10],
        );
        let upper = posterior_upper(&t, &[0.5, 0.5]).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                assert_eq!(upper[j][i], 1.0);
            }
        }
    }

    #[test]
    fn upper_arithmetic_example() {
        let t = raw_table(
            vec![vec![10, 1], vec![2, 10]],
            vec![vec![8, 0], vec![1, 9]],
            vec![10, 10],
        );
        let upper = posterior_upper(&t, &[0.5, 0.5]).unwrap();
        // (0.2·0.5) / ((0.8 + 0.1)·0.5) = 2/9
        assert_abs_diff_eq!(upper[0][1], 2.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn prior_mass_on_empty_state_rejected() {
        let t = raw_table(vec![vec![5, 5], vec![0, 0]], vec![vec![5, 5], vec![0, 0]], vec![10, 0]);
        assert!(posterior_upper(&t, &[0.5, 0.5]).is_err());
        assert!(posterior_upper(&t, &[1.0, 0.0]).is_ok());
    }
}
