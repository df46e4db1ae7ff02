//! SOCO instance types: decision spaces, parameterized costs, trajectories.

mod cost;
mod feasible;
mod trajectory;

pub use cost::{
    Arity, ConstantReport, ConstantSampler, CostConstants, CostFamily, CostSpec, LinearQuadratic, SecondDifference,
    SquaredDifference, StageCost, SwitchingCost, TrackingQuadratic,
};
pub use feasible::FeasibleSet;
pub use trajectory::{DecisionTrajectory, ParamTrajectory};

pub(crate) use cost::{dot, sq_dist};
