//! Simulation of a price-maker grid battery bidding into a uniform-price
//! electricity market.
//!
//! Two bidding policies are provided: a price-taker receding-horizon planner
//! ([`mpc`]) and an online supervised actor-critic ([`agent`]) that uses the
//! planner as its supervisor, with a safety shield ([`battery`]) that
//! replaces infeasible bids. [`env`] runs either policy against a merit-order
//! market ([`market`]) and collects revenue and safety metrics.

pub mod agent;
pub mod battery;
pub mod cli;
pub mod config;
pub mod env;
pub mod market;
pub mod mpc;
pub mod neural;
pub mod report;

pub use agent::{AgentAction, MarketObservation, RiskSchedule, SacConfig, SupervisedActorCritic};
pub use battery::{BatteryParams, BatteryState};
pub use config::ExperimentConfig;
pub use env::{run_simulation, DemandSeries, Policy, RunMetrics, RunOutput, SimConfig};
pub use market::{clear_market, AgentId, ClearingOutcome, SupplyBid};
pub use mpc::{solve_horizon, HorizonPlan, PriceForecast};
pub use neural::Mlp;
