//! Statistical-field model of a business-cycle economy.
//!
//! Many consumer/producer agents carry a state (consumption C, capital K,
//! technology A). Their paths are weighted by Gaussian statistical weights
//! built from an Euler-type consumption rule, the capital accumulation
//! equation and a technology term with a pairwise capital–technology
//! interaction. Collective behaviour is captured by the saddle points of an
//! associated field action.
//!
//! Modules:
//! - [`params`]: model parameters and their `key = value` configuration.
//! - [`model`]: states, paths and log statistical weights.
//! - [`phase`]: saddle-point phases, averages, existence and stability.
//! - [`green`]: transition densities, average paths and equilibria.
//! - [`corrections`]: first-order interaction corrections.
//! - [`mc`]: Monte Carlo path sampling and comparison with the densities.
//! - [`io`]: JSON formatting and parameter scans.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

pub mod corrections;
pub mod error;
pub mod green;
pub mod io;
pub mod mc;
pub mod model;
pub mod params;
pub mod phase;

pub use error::{Error, Result};
pub use model::{AgentPath, AgentState, ProductionMode};
pub use params::ModelParams;
pub use phase::{Phase, PhaseSolution};
