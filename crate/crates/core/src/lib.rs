//! Mean score method for global sensitivity analysis of randomised trials
//! with outcomes that may be missing not at random.
//!
//! The pattern-mixture model `E[y | x, r] = h(β_Pᵀx_P + Δ(x)(1 - r))` is fitted
//! to complete cases, missing outcomes are replaced by their conditional
//! means under a user-chosen departure Δ, and the substantive model is solved
//! with a joint sandwich variance and an effective-sample-size small-sample
//! correction. Clustered data, a fast two-regression path for linear models,
//! a command-line sweep tool and a Monte Carlo laboratory are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cluster;
pub mod data;
pub mod delta;
pub mod demo;
pub mod error;
pub mod glm;
pub mod inference;
pub mod linalg;
pub mod meanscore;
pub mod numfmt;
pub mod robust;
pub mod sim;
pub mod tworeg;

pub use data::TrialDataset;
pub use delta::{ArmDeparture, Departure, DeltaSpec};
pub use error::{Error, Result};
pub use glm::{fit_glm, GlmFamily, GlmFit};
pub use inference::{confidence_interval, Df, IntervalEstimate};
pub use meanscore::{fit_mean_score, MeanScoreFit};
pub use tworeg::{fit_two_linreg, TwoRegFit};
