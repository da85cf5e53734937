//! Problem-description types shared by the optimizer, loss, and simulators.

use crate::scalar::Real;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute tolerance for probability equality checks.
pub const PROB_TOL: f64 = 1e-12;

/// Finite set of constraint-relevant environment states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("state space must be non-empty"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::validation(format!("duplicate state label {a:?}")));
            }
        }
        Ok(StateSpace { labels })
    }

    /// Two-state space used by the built-in applications.
    pub fn safe_unsafe() -> Self {
        StateSpace {
            labels: vec!["safe".into(), "unsafe".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Finite set of classifier outputs. Defaults to the state space itself;
/// the framework keeps them equal but the tables do not assume it.
pub type OutputSpace = StateSpace;

/// User-specified knobs of one decision problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserParams<R> {
    /// Per-chance-constraint probability thresholds, each in (0, 1].
    pub thresholds: Vec<R>,
    /// Prior probability of each environment state (a simplex).
    pub priors: Vec<R>,
    /// Big-M constant for the constraint replacement.
    pub big_m: R,
    /// Per-constraint penalty weights merging constraints into the objective.
    pub beta: Vec<R>,
    /// Loss-approximation sharpness.
    pub lambda: R,
    /// Conservativeness radius in logit space (before the sqrt(2) inflation).
    pub xi: R,
    /// Relative step for finite-difference virtual derivatives.
    pub rho: R,
}

impl<R: Real> UserParams<R> {
    pub fn validate(&self) -> Result<()> {
        for &t in &self.thresholds {
            if !(t > R::zero() && t <= R::one() + R::of(PROB_TOL)) {
                return Err(Error::validation(format!("threshold {t} outside (0, 1]")));
            }
        }
        let mut sum = R::zero();
        for &p in &self.priors {
            if p < R::zero() {
                return Err(Error::validation(format!("negative prior {p}")));
            }
            sum += p;
        }
        if (sum - R::one()).abs() > R::of(PROB_TOL) {
            return Err(Error::validation(format!("priors sum to {sum}, not 1")));
        }
        if self.big_m <= R::zero() {
            return Err(Error::validation("big_m must be positive"));
        }
        for &b in &self.beta {
            if b <= R::zero() {
                return Err(Error::validation("beta must be positive componentwise"));
            }
        }
        if self.lambda <= R::zero() {
            return Err(Error::validation("lambda must be positive"));
        }
        if self.xi < R::zero() {
            return Err(Error::validation("xi must be non-negative"));
        }
        if self.rho <= R::zero() {
            return Err(Error::validation("rho must be positive"));
        }
        Ok(())
    }
}

/// Finite action set with a distinguished always-feasible default.
///
/// The default is a fallback outside the regular candidates: it bypasses the
/// chance constraints by construction and is returned only when every
/// candidate fails them.
#[derive(Debug, Clone)]
pub struct CandidateSet<A> {
    pub actions: Vec<A>,
    pub default_action: A,
}

impl<A> CandidateSet<A> {
    pub fn new(actions: Vec<A>, default_action: A) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::validation("empty candidate set"));
        }
        Ok(CandidateSet {
            actions,
            default_action,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Constraint evaluators `c_i(u; state_k)`.
///
/// Deterministic constraints ignore the state argument and must hold
/// outright; chance constraints are enforced through the posterior mass of
/// their violated states.
pub struct ConstraintSpec<'a, A, R> {
    evaluators: Vec<Box<dyn Fn(&A, usize) -> R + Send + Sync + 'a>>,
    chance_flags: Vec<bool>,
}

impl<'a, A, R: Real> ConstraintSpec<'a, A, R> {
    pub fn new() -> Self {
        ConstraintSpec {
            evaluators: Vec::new(),
            chance_flags: Vec::new(),
        }
    }

    pub fn push_deterministic(&mut self, f: impl Fn(&A) -> R + Send + Sync + 'a) -> &mut Self {
        self.evaluators.push(Box::new(move |u, _| f(u)));
        self.chance_flags.push(false);
        self
    }

    pub fn push_chance(&mut self, f: impl Fn(&A, usize) -> R + Send + Sync + 'a) -> &mut Self {
        self.evaluators.push(Box::new(f));
        self.chance_flags.push(true);
        self
    }

    pub fn len(&self) -> usize {
        self.evaluators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluators.is_empty()
    }

    pub fn is_chance(&self, i: usize) -> bool {
        self.chance_flags[i]
    }

    pub fn eval(&self, i: usize, action: &A, state: usize) -> R {
        (self.evaluators[i])(action, state)
    }
}

impl<'a, A, R: Real> Default for ConstraintSpec<'a, A, R> {
    fn default() -> Self {
        Self::new()
    }
}
