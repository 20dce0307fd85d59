//! Learned active learning: query-selection strategies that regress the
//! expected test-error reduction of labeling a candidate from features of
//! the current classifier and of the candidate, trained by Monte-Carlo
//! simulation of labeling on representative data.
//!
//! Module map:
//! - [`data`]: datasets, synthetic generators, CSV, splits, pool state
//! - [`forest`]: bagged CART forests and logistic regression
//! - [`state_features`]: the 7-dimensional learning-state vector
//! - [`strategies`]: random, uncertainty and learned selection rules
//! - [`lal_training`]: Monte-Carlo data collection and strategy building
//! - [`metrics`]: accuracy, 0/1 loss, IOU, dice, ROC AUC
//! - [`harness`]: the active-learning loop and experiment protocols

pub mod data;
pub mod error;
pub mod forest;
pub mod harness;
pub mod lal_training;
pub mod metrics;
pub mod seed;
pub mod state_features;
pub mod strategies;

pub use error::{Error, Result};
