//! Agent-based ridesharing market simulator.
//!
//! Drivers roam a road lattice looking for riders, either at random or by
//! moving away from the nearest visible driver. Riders wait at
//! intersections and give up after a limit. Every run is a deterministic
//! function of its configuration and seed.

pub mod agents;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod money;
pub mod movement;
pub mod scenario;

pub use agents::{DriverAgent, DriverId, RiderAgent, RiderId};
pub use config::{ConfigBuilder, ConfigError, GridSource, ScenarioSource, SimConfig};
pub use engine::{run, BankLedger, RunResult, SimError, Totals, World};
pub use experiment::{CompareReport, ExperimentPlan, Verdict};
pub use grid::{Heading, Position, RoadGrid};
pub use metrics::{MetricsFrame, SummaryStats, WelchResult};
pub use money::Cents;
pub use movement::{MovementPolicy, StepParams};
pub use scenario::ScenarioSchedule;
