//! Prediction tables, the Gaussian error model, and δ(k) extraction.

mod model;
mod table;

pub use model::{ar1_scenario, StochasticPredictionModel};
pub use table::PredictionTable;
