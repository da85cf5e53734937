//! Scaling-law experiment.
