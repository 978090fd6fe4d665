//! Statistical matching (data fusion) toolkit.
//!
//! Joins two independently observed survey files through their common
//! variables. Three fusion engines are provided:
//!
//! - **Random Hot Deck** (`matchers::rhd_match`): uniform random donor
//!   assignment within strata built from categorised common variables,
//!   with a donor-pressure threshold and a two-round fallback scheme.
//! - **Predictive Mean Matching** (`matchers::pmm_match`): nearest
//!   neighbour on regression-predicted means of the donor-specific
//!   variables, distances weighted by the inverse residual covariance.
//! - **Gower nearest neighbour** (`matchers::gower_match`): mixed-scale
//!   covariate distance without categorisation.
//!
//! The `simulation` module wraps the engines in a Monte Carlo harness
//! that repeatedly samples recipient/donor files from a surrogate
//! population, fuses them, and summarises bias and MSE of correlation
//! estimates against the population truth and a conditional-independence
//! benchmark. `synth` generates calibrated Gaussian-copula surrogate
//! populations when no real population file is available.
//!
//! See the `examples/` directory for one runnable program per
//! capability, and the `fusekit` binary for batch use.

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod matchers;
pub mod recode;
pub mod regression;
pub mod simulation;
pub mod synth;

pub use data::{Column, DataTable, FusionSchema, ScaleLevel, StackedFrame, VariableRole};
pub use error::{Error, Result};
pub use matchers::{MatchAssignment, MatchMethod, PmmConfig, RhdConfig};
pub use simulation::{McConfig, McResult, Scenario};
