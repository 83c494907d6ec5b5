//! Supervision-channel laboratory.
//!
//! Builds information-reducing supervision channels, computes the excess-risk
//! floors they induce, trains small learners under human-only and hybrid
//! supervision, and runs seed-aggregated sweeps over synthetic tasks or
//! externally scored preference pairs.

pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod learners;
pub mod probcore;
pub mod supervision;
pub mod theorems;

pub use error::{HbiError, Result};
