//! Robust leader-follower mean-field teams with linear dynamics, quadratic
//! costs and soft-constrained adversarial disturbances.
//!
//! The pipeline is: load a [`model::ModelSpec`], run the backward recursions
//! in [`synthesis`], turn the gains into policies with [`strategy`], then
//! simulate with [`sim`] and check optimality with [`oracle`].

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod report;
pub mod sim;
pub mod strategy;
pub mod synthesis;

pub use error::{Error, Result};
