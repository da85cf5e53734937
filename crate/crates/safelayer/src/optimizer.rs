//! Chance-constrained action selection over a finite candidate set.
//!
//! A candidate is feasible when every deterministic constraint holds and,
//! for every chance constraint, the posterior mass of the states that would
//! violate it stays below the user threshold. The big-M maximin replacement
//! is the same test written as a single scalar constraint; both are provided
//! and agree exactly.

use crate::core::{CandidateSet, ConstraintSpec, UserParams};
use crate::scalar::Real;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exhaustive enumeration of neglect vectors is capped here.
const MAX_BIG_M_STATES: usize = 20;

/// Per-candidate feasibility record kept for audit replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateTrace<R> {
    pub index: usize,
    /// Violated posterior mass per chance constraint (None for deterministic).
    pub violated_mass: Vec<Option<R>>,
    pub feasible: bool,
    pub objective: R,
}

/// Outcome of one selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decision<R> {
    /// Index into the candidate set, or None when the default was used.
    pub chosen_index: Option<usize>,
    pub used_default: bool,
    pub objective: R,
    /// Big-M constant in force for this problem.
    pub big_m: R,
    pub trace: Vec<CandidateTrace<R>>,
}

impl<R> Decision<R> {
    /// The selected action.
    pub fn chosen<'a, A>(&self, candidates: &'a CandidateSet<A>) -> &'a A {
        match self.chosen_index {
            Some(i) => &candidates.actions[i],
            None => &candidates.default_action,
        }
    }
}

/// Posterior mass of the states under which constraint `i` is violated.
pub fn violated_mass<A, R: Real>(
    action: &A,
    constraint: usize,
    posterior_column: &[R],
    constraints: &ConstraintSpec<A, R>,
) -> R {
    let mut mass = R::zero();
    for (k, &p) in posterior_column.iter().enumerate() {
        if constraints.eval(constraint, action, k) < R::zero() {
            mass += p;
        }
    }
    mass
}

/// Big-M constant for a problem: ten times one plus the largest constraint
/// magnitude over all candidates and states, which always dominates any
/// violated value. The default action is exempt from constraint evaluation
/// and does not enter the scan.
pub fn big_m_for<A, R: Real>(
    candidates: &CandidateSet<A>,
    constraints: &ConstraintSpec<A, R>,
    n_states: usize,
) -> R {
    let mut worst = R::zero();
    for u in &candidates.actions {
        for i in 0..constraints.len() {
            for k in 0..n_states {
                worst = worst.max(constraints.eval(i, u, k).abs());
            }
        }
    }
    R::of(10.0) * (R::one() + worst)
}

/// Maximin replacement of chance constraint `i`: the best worst-case margin
/// over all admissible neglect vectors q (states we may ignore, subject to
/// their posterior mass staying below the threshold).
///
/// Exact by enumeration of all 2^N_e vectors; refuses more than 20 states.
pub fn bar_c_big_m<A, R: Real>(
    action: &A,
    constraint: usize,
    posterior_column: &[R],
    threshold: R,
    big_m: R,
    constraints: &ConstraintSpec<A, R>,
) -> Result<R> {
    let n = posterior_column.len();
    if n > MAX_BIG_M_STATES {
        return Err(Error::Refused(format!(
            "big-M enumeration infeasible for {n} > {MAX_BIG_M_STATES} states"
        )));
    }
    let values: Vec<R> = (0..n)
        .map(|k| constraints.eval(constraint, action, k))
        .collect();
    let mut best = R::neg_infinity();
    for q in 0u32..(1u32 << n) {
        let mut mass = R::zero();
        for k in 0..n {
            if q & (1 << k) != 0 {
                mass += posterior_column[k];
            }
        }
        if mass > threshold {
            continue;
        }
        let mut worst = R::infinity();
        for k in 0..n {
            let lifted = if q & (1 << k) != 0 {
                values[k] + big_m
            } else {
                values[k]
            };
            worst = worst.min(lifted);
        }
        best = best.max(worst);
    }
    Ok(best)
}

/// Selects the objective-minimal candidate that passes every constraint, or
/// the default when none does. Ties break toward the lowest index so traces
/// replay deterministically.
///
/// `posterior_column` is the (upper-bound) posterior over states for the
/// observed classifier output; `params.thresholds` aligns with the
/// constraint list and is ignored for deterministic entries.
pub fn select_action<A, R: Real>(
    candidates: &CandidateSet<A>,
    objective: impl Fn(&A) -> R,
    constraints: &ConstraintSpec<A, R>,
    posterior_column: &[R],
    params: &UserParams<R>,
) -> Result<Decision<R>> {
    select_action_with(
        candidates,
        objective,
        constraints,
        |_| posterior_column.to_vec(),
        params,
    )
}

/// [`select_action`] with a per-candidate posterior column, for problems
/// where each candidate action carries its own classified observation (the
/// navigation simulator classifies every (measurement, action) pair).
pub fn select_action_with<A, R: Real>(
    candidates: &CandidateSet<A>,
    objective: impl Fn(&A) -> R,
    constraints: &ConstraintSpec<A, R>,
    posterior_for: impl Fn(usize) -> Vec<R>,
    params: &UserParams<R>,
) -> Result<Decision<R>> {
    if candidates.is_empty() {
        return Err(Error::validation("empty candidate set"));
    }
    if params.thresholds.len() != constraints.len() {
        return Err(Error::Dimension {
            expected: constraints.len(),
            got: params.thresholds.len(),
            context: "one threshold per constraint",
        });
    }
    let big_m = big_m_for(candidates, constraints, params.priors.len());
    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, R)> = None;
    for (index, action) in candidates.actions.iter().enumerate() {
        let posterior_column = posterior_for(index);
        let mut feasible = true;
        let mut masses = Vec::with_capacity(constraints.len());
        for i in 0..constraints.len() {
            if constraints.is_chance(i) {
                let mass = violated_mass(action, i, &posterior_column, constraints);
                feasible &= mass <= params.thresholds[i];
                masses.push(Some(mass));
            } else {
                feasible &= constraints.eval(i, action, 0) >= R::zero();
                masses.push(None);
            }
        }
        let objective_value = objective(action);
        if feasible && best.map_or(true, |(_, b)| objective_value < b) {
            best = Some((index, objective_value));
        }
        trace.push(CandidateTrace {
            index,
            violated_mass: masses,
            feasible,
            objective: objective_value,
        });
    }
    Ok(match best {
        Some((index, objective_value)) => Decision {
            chosen_index: Some(index),
            used_default: false,
            objective: objective_value,
            big_m,
            trace,
        },
        None => Decision {
            chosen_index: None,
            used_default: true,
            objective: objective(&candidates.default_action),
            big_m,
            trace,
        },
    })
}
