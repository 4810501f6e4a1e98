//! Augmented-Lagrangian differential dynamic programming on matrix Lie
//! groups, with an SE(3) rigid-body model, configuration and velocity
//! constraints, and a Monte-Carlo disturbance harness.

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod liegroup;
pub mod registry;
pub mod solver;

pub use error::{Error, Result};
