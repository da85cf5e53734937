//! Conservative likelihood tables and posterior bounds.
//!
//! Classifier logits for labeled internal test data are counted twice: once
//! with each class's logit shifted up by ξ (can the ξ-ball reach this class?)
//! and once shifted down (does the whole ξ-ball stay in this class?). The
//! resulting count pair brackets the true likelihood, so the Bayes posterior
//! built from the optimistic numerator and pessimistic denominator upper-bounds
//! the true posterior of every environment state.

mod table;
mod zeta;

pub use table::{
    build_normal_table, indicator_minus, indicator_plus, posterior_plain, posterior_upper,
    NormalTable, PosteriorMatrix, PosteriorTable, XI_INFLATION,
};
pub use zeta::{zeta_coverage_inf, zeta_informative_inf, zeta_report, BallMeasure, GridMeasure, ZetaReport};
