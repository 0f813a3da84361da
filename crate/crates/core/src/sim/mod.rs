//! Monte Carlo laboratory: four data-generating mechanisms, scenarios a-d,
//! large-sample calibration, comparator methods and a replicated study
//! reporting bias, empirical and model standard errors, and coverage.
//!
//! The scenario sample size is the total number of individuals per data set
//! before deletion, called `n` here (not the observed count).

pub mod calibrate;
pub mod dgm;
pub mod methods;
pub mod study;

pub use calibrate::{calibrate, calibrate_intercept, calibrate_cross_model, estimand_truth, Calibration};
pub use dgm::{analysis_dataset, generate, Dgm, DgmSpec, Scenario, SimDraw};
pub use methods::{run_mi, run_sm_ipw, Method};
pub use study::{run_study, MethodSummary, ScenarioReport, SimulationReport, StudyConfig};
