//! Online algorithms: RHIG with its initialization oracles, and the
//! fixed-horizon baselines.

mod config;
mod horizon;
mod oracle;
mod rhig;
mod trace;

pub use config::{AlgoConfig, Lookahead, OgdStepsize, OracleFactory, OracleKind};
pub use horizon::{afhc_run, chc_run};
pub use oracle::{CausalView, HoldOracle, InitOracle, OgdOracle, OracleContext, PredictionRead};
pub use rhig::rhig_run;
pub use trace::{IterateRecord, RunTrace};
