//! Market simulation loop.
//!
//! Each step: forecast prices, ask the supervisor for a bid, optionally let
//! the learning agent propose and blend, shield, clear the market with the
//! battery's generation bid in the supply stack (or its load bid on top of
//! demand), settle at the clearing price, advance the battery and, for the
//! learning policy, update actor and critic.

pub mod demand;
pub mod forecast;
pub mod metrics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, AgentAction, MarketObservation, Normalizer, SacConfig, SupervisedActorCritic};
use crate::battery::{BatteryError, BatteryParams, BatteryState};
use crate::market::{clear_market, effective_demand, AgentId, MarketError, SupplyBid};
use crate::mpc::{self, MpcError, PriceForecast};
use crate::neural::NeuralError;

pub use demand::{load_demand_csv, synth_demand, DataError, DemandSeries, SyntheticDemand};
pub use forecast::{forecast_prices, ForecastConfig, ForecastMode};
pub use metrics::{MetricsSummary, RunMetrics};

/// Market identity of the battery. Background agents are numbered from 1.
pub const BATTERY_ID: AgentId = AgentId(0);

const NOISE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A conventional generator offering a fixed block at a fixed marginal cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundAgent {
    pub agent: AgentId,
    pub marginal_cost: f64,
    pub capacity: f64,
}

impl BackgroundAgent {
    pub fn bid(&self) -> SupplyBid {
        SupplyBid::new(self.agent, self.marginal_cost, self.capacity)
    }
}

/// Ten 500 MWh blocks priced 10, 20, ..., 100 $/MWh.
pub fn default_stack() -> Vec<BackgroundAgent> {
    (1..=10)
        .map(|i| BackgroundAgent {
            agent: AgentId(i),
            marginal_cost: 10.0 * i as f64,
            capacity: 500.0,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// The battery stays out of the market.
    Idle,
    /// Price-taker planner bids alone.
    Mpc,
    /// Supervised actor-critic with the planner as supervisor.
    Sac,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Idle => "idle",
            Policy::Mpc => "mpc",
            Policy::Sac => "sac",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    pub grid_levels: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 48,
            grid_levels: 344,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationConfig {
    pub price_scale: f64,
    pub demand_scale: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            price_scale: 100.0,
            demand_scale: 5000.0,
        }
    }
}

/// Everything the loop needs besides demand, stack and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub battery: BatteryParams,
    /// Stored energy at the start of the run, MWh.
    pub initial_soe: f64,
    pub mpc: MpcConfig,
    pub forecast: ForecastConfig,
    pub normalization: NormalizationConfig,
    pub sac: SacConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            battery: BatteryParams::default(),
            initial_soe: 0.0,
            mpc: MpcConfig::default(),
            forecast: ForecastConfig::default(),
            normalization: NormalizationConfig::default(),
            sac: SacConfig::default(),
        }
    }
}

/// One market step as seen by the battery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub supervisor_weight: f64,
    pub supervisor_price: f64,
    pub supervisor_quantity: f64,
    pub proposed_price: f64,
    pub proposed_quantity: f64,
    pub executed_price: f64,
    pub executed_quantity: f64,
    pub intervened: bool,
    /// Signed energy the market dispatched: generation positive, load negative.
    pub cleared_quantity: f64,
    pub base_demand: f64,
    pub clearing_price: f64,
    pub revenue: f64,
    pub reward: f64,
    pub delta: f64,
    /// State of energy after the step.
    pub soe: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Vec<StepRecord>,
}

/// Outcome of clearing one step with the battery's executed bid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settlement {
    pub clearing_price: f64,
    pub generation: f64,
    pub load: f64,
}

impl Settlement {
    pub fn revenue(&self) -> f64 {
        self.clearing_price * self.generation - self.clearing_price * self.load
    }
}

/// Clears one step: a generation bid joins the supply stack, a load bid is
/// added to demand and always served in full.
pub fn settle(stack: &[BackgroundAgent], base_demand: f64, bid: &AgentAction) -> Result<Settlement, MarketError> {
    let mut bids: Vec<SupplyBid> = stack.iter().map(BackgroundAgent::bid).collect();
    let (p_g, p_l) = bid.split();
    if p_g > 0.0 {
        bids.push(SupplyBid::new(BATTERY_ID, bid.bid_price, p_g));
    }
    let outcome = clear_market(&bids, effective_demand(base_demand, p_l))?;
    Ok(Settlement {
        clearing_price: outcome.clearing_price,
        generation: outcome.dispatched(BATTERY_ID),
        load: p_l,
    })
}

fn stack_midpoint(stack: &[BackgroundAgent]) -> f64 {
    let lo = stack.iter().map(|a| a.marginal_cost).fold(f64::INFINITY, f64::min);
    let hi = stack.iter().map(|a| a.marginal_cost).fold(f64::NEG_INFINITY, f64::max);
    0.5 * (lo + hi)
}

fn validate(demand: &DemandSeries, stack: &[BackgroundAgent], config: &SimConfig) -> Result<(), SimError> {
    demand.validate()?;
    config.battery.validate()?;
    let bad = |m: String| Err(SimError::Config(m));
    if stack.is_empty() {
        return bad("background stack is empty".into());
    }
    if stack.iter().any(|a| a.agent == BATTERY_ID) {
        return bad(format!("{BATTERY_ID} is reserved for the battery"));
    }
    if config.mpc.horizon == 0 {
        return bad("mpc.horizon must be at least 1".into());
    }
    if config.mpc.grid_levels < 2 {
        return bad("mpc.grid_levels must be at least 2".into());
    }
    let n = &config.normalization;
    if !(n.price_scale > 0.0 && n.demand_scale > 0.0) {
        return bad("normalization scales must be positive".into());
    }
    let s = &config.sac;
    if !(0.0..=1.0).contains(&s.gamma) {
        return bad("sac.gamma must lie in [0, 1]".into());
    }
    if !(s.sigma_explore > 0.0 && s.sigma_policy > 0.0) {
        return bad("sac exploration and policy sigmas must be positive".into());
    }
    if !(s.alpha > 0.0 && s.beta1 > 0.0 && s.beta2 > 0.0) {
        return bad("sac step sizes must be positive".into());
    }
    if s.reward_scale.is_nan() || s.reward_scale <= 0.0 {
        return bad("sac.reward_scale must be positive".into());
    }
    Ok(())
}

struct Forecaster<'a> {
    mode: ForecastMode,
    stack: &'a [BackgroundAgent],
    demand: &'a [f64],
    steps_per_day: usize,
    horizon: usize,
    prior: f64,
}

impl Forecaster<'_> {
    fn forecast(&self, history: &[f64], t: usize) -> Result<PriceForecast, SimError> {
        match self.mode {
            ForecastMode::Persistence => {
                Ok(forecast_prices(history, t, self.steps_per_day, self.horizon, self.prior)?)
            }
            ForecastMode::PerfectForesight => {
                let mut prices = forecast::perfect_foresight(self.stack, self.demand, t, self.horizon)?;
                if prices.is_empty() {
                    prices.push(self.prior);
                }
                Ok(PriceForecast::new(prices)?)
            }
        }
    }
}

/// Runs `policy` over the whole demand series.
///
/// The run is a pure function of its arguments: the same inputs and seed
/// always give bit-identical output.
pub fn run_simulation(
    policy: Policy,
    demand: &DemandSeries,
    stack: &[BackgroundAgent],
    config: &SimConfig,
    seed: u64,
) -> Result<RunOutput, SimError> {
    validate(demand, stack, config)?;
    let params = config.battery;
    let steps_per_day = demand.steps_per_day;
    let prior = config.forecast.prior_price.unwrap_or_else(|| stack_midpoint(stack));
    let forecaster = Forecaster {
        mode: config.forecast.mode,
        stack,
        demand: &demand.demand,
        steps_per_day,
        horizon: config.mpc.horizon,
        prior,
    };
    let norm = Normalizer {
        price_scale: config.normalization.price_scale,
        demand_scale: config.normalization.demand_scale,
        energy_capacity: params.energy_capacity,
        steps_per_day,
        quantity_scale: params.max_rate(),
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let mut learner = match policy {
        Policy::Sac => Some(SupervisedActorCritic::new(config.sac.clone(), norm, &mut init_rng)?),
        _ => None,
    };

    let n = demand.len();
    let mut battery = BatteryState::new(params, config.initial_soe)?;
    let mut history: Vec<f64> = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    let mut post_shield_violations = 0;

    let observe = |t: usize, forecast: &PriceForecast, last_price: f64, soe: f64| MarketObservation {
        price_forecast_now: forecast.prices()[0],
        last_clearing_price: last_price,
        soe,
        time_of_day: t % steps_per_day,
        demand_forecast: demand.demand[t.min(n - 1)],
    };

    let mut forecast = forecaster.forecast(&history, 0)?;
    let mut obs = observe(0, &forecast, prior, battery.soe);
    for t in 0..n {
        let supervisor = match policy {
            Policy::Idle => AgentAction::new(forecast.prices()[0], 0.0),
            _ => mpc::supervisor_action(&obs, &params, &forecast, config.mpc.grid_levels)?,
        };
        let proposal = learner
            .as_mut()
            .map(|l| l.propose(&obs, &supervisor, t, &mut noise_rng));
        let proposed = proposal.map_or(supervisor, |p| p.blended);
        let violations = battery.violations(&proposed);
        let (executed, intervened) = battery.shield(proposed, supervisor)?;
        if !battery.is_safe_action(&executed) {
            post_shield_violations += 1;
        }

        let settlement = settle(stack, demand.demand[t], &executed)?;
        let revenue = settlement.revenue();
        battery = battery.step_soe(settlement.generation, settlement.load)?;
        history.push(settlement.clearing_price);

        let next_forecast = forecaster.forecast(&history, t + 1)?;
        let next_obs = observe(t + 1, &next_forecast, settlement.clearing_price, battery.soe);

        let (reward, delta) = match (learner.as_mut(), proposal.as_ref()) {
            (Some(l), Some(p)) => {
                let r = agent::reward(
                    l.config().reward_mode,
                    &executed,
                    &obs,
                    revenue,
                    &violations,
                    &l.config().penalty_weights,
                );
                (r, l.learn(&obs, &next_obs, p, r))
            }
            _ => (revenue, 0.0),
        };

        records.push(StepRecord {
            step: t,
            supervisor_weight: proposal.map_or(1.0, |p| p.supervisor_weight),
            supervisor_price: supervisor.bid_price,
            supervisor_quantity: supervisor.quantity,
            proposed_price: proposed.bid_price,
            proposed_quantity: proposed.quantity,
            executed_price: executed.bid_price,
            executed_quantity: executed.quantity,
            intervened,
            cleared_quantity: settlement.generation - settlement.load,
            base_demand: demand.demand[t],
            clearing_price: settlement.clearing_price,
            revenue,
            reward,
            delta,
            soe: battery.soe,
        });

        forecast = next_forecast;
        obs = next_obs;
    }

    Ok(RunOutput {
        metrics: RunMetrics::from_records(&records, steps_per_day, post_shield_violations),
        trace: records,
    })
}
