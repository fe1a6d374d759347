//! Simulation core for active STAR-RIS assisted symbiotic-radio NOMA networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod baseline;
pub mod config;
pub mod env;
pub mod error;
pub mod network;
pub mod nn;
pub mod problem;
pub mod rates;
pub mod report;
pub mod ris;
pub mod rng;
pub mod sweep;

pub use agents::{Algo, PolicyCheckpoint, TrainOptions, TrainOutcome, TrainingTrace};
pub use baseline::{grid_oracle, random_search, Axis, GridSpec};
pub use config::RunConfig;
pub use env::{ActionVector, EnvConfig, RateTargetMode, SrEnv, State, StepResult};
pub use error::{Error, Result};
pub use network::{ChannelRealization, Placement, SystemConfig};
pub use problem::{Constraint, ConstraintReport, RewardMode};
pub use rates::{DecisionVariables, RateReport};
pub use ris::{ActiveCapReading, RisCoefficients, RisMode, Side};
pub use sweep::{SweepConfig, SweepMethod, SweepVariable};
