//! Smoothed online convex optimization with noisy multi-step predictions.
//!
//! Receding-horizon inexact gradient (RHIG), its initialization oracles,
//! fixed-horizon baselines, a stochastic prediction-error model, closed-form
//! regret bounds, and the scenarios used to exercise them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algos;
pub mod bench;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod offline;
pub mod predict;
pub mod problem;
pub mod verify;

pub use error::{Error, Result};
