//! Supervised actor-critic bidding agent.
//!
//! Each market step the actor is first pulled toward the supervisor's bid,
//! then the executed bid is a blend of the supervisor's bid and the actor's
//! noisy proposal. After the market settles, the critic learns from the
//! temporal-difference error and the actor follows the Gaussian policy
//! score scaled by that error.
//!
//! Networks work in a normalized space. The five state components are
//! divided by fixed scales. Actions live in a unit box: the price axis maps
//! `[0, price_scale]` to `[-1, 1]` and the quantity axis maps
//! `[-quantity_scale, quantity_scale]` to `[-1, 1]`. The actor's mean is the
//! `tanh` of its raw output; exploration noise is added in physical units
//! ($/MWh, MWh).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::battery::ConstraintViolations;
use crate::neural::{Gradients, Mlp, NetworkConfig, NeuralError};

pub const STATE_DIM: usize = 5;
pub const ACTION_DIM: usize = 2;

/// What the agent sees before bidding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketObservation {
    /// Forecast clearing price for this step, $/MWh.
    pub price_forecast_now: f64,
    /// Clearing price realized in the previous step, $/MWh.
    pub last_clearing_price: f64,
    /// Stored energy, MWh.
    pub soe: f64,
    /// Step index within the day.
    pub time_of_day: usize,
    /// Expected demand for this step, MWh.
    pub demand_forecast: f64,
}

/// A bid: price in $/MWh and signed quantity in MWh, positive for generation
/// and negative for load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub bid_price: f64,
    pub quantity: f64,
}

impl AgentAction {
    pub fn new(bid_price: f64, quantity: f64) -> Self {
        Self {
            bid_price,
            quantity,
        }
    }

    /// `(p_g, p_l)` with at most one of them nonzero.
    pub fn split(&self) -> (f64, f64) {
        if self.quantity > 0.0 {
            (self.quantity, 0.0)
        } else if self.quantity < 0.0 {
            (0.0, -self.quantity)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn is_generation(&self) -> bool {
        self.quantity > 0.0
    }

    pub fn is_load(&self) -> bool {
        self.quantity < 0.0
    }
}

/// Weight given to the supervisor's bid over the course of a run.
///
/// Full supervision for `hold_steps`, then a linear descent to
/// `final_supervisor_weight` over `ramp_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSchedule {
    pub hold_steps: usize,
    pub ramp_steps: usize,
    pub final_supervisor_weight: f64,
}

impl Default for RiskSchedule {
    fn default() -> Self {
        Self {
            hold_steps: 400,
            ramp_steps: 2000,
            final_supervisor_weight: 0.5,
        }
    }
}

impl RiskSchedule {
    /// Supervisor weight pinned at 1 for the whole run.
    pub fn frozen() -> Self {
        Self {
            final_supervisor_weight: 1.0,
            ..Self::default()
        }
    }

    pub fn supervisor_weight(&self, step: usize) -> f64 {
        let last = self.final_supervisor_weight;
        if step < self.hold_steps {
            return 1.0;
        }
        let into_ramp = step - self.hold_steps;
        if into_ramp >= self.ramp_steps {
            return last;
        }
        let frac = into_ramp as f64 / self.ramp_steps as f64;
        1.0 - (1.0 - last) * frac
    }
}

/// Units in which `sigma_explore` is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationUnits {
    /// $/MWh on the price, MWh on the quantity.
    Physical,
    /// The actor's unit box: half the price scale, and the quantity scale.
    Normalized,
}

/// Revenue term of the reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Clearing price times the energy the market actually dispatched.
    Settlement,
    /// Forecast price times the executed bid quantity.
    Forecast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub sigma_explore: f64,
    pub exploration_units: ExplorationUnits,
    /// Policy standard deviation in the unit box, used for the score.
    pub sigma_policy: f64,
    /// Critic step size.
    pub alpha: f64,
    /// Supervision step size.
    pub beta1: f64,
    /// Policy-gradient step size.
    pub beta2: f64,
    /// Penalty per MWh for each constraint row, all `<= 0`.
    pub penalty_weights: [f64; ConstraintViolations::LEN],
    pub reward_mode: RewardMode,
    /// Rewards are divided by this before the temporal-difference update.
    pub reward_scale: f64,
    pub schedule: RiskSchedule,
    pub network: NetworkConfig,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            sigma_explore: 1.0,
            exploration_units: ExplorationUnits::Physical,
            sigma_policy: 1.0,
            alpha: 1e-4,
            beta1: 1e-4,
            beta2: 1e-4,
            penalty_weights: [-10.0; ConstraintViolations::LEN],
            reward_mode: RewardMode::Settlement,
            reward_scale: 1e4,
            schedule: RiskSchedule::default(),
            network: NetworkConfig::default(),
        }
    }
}

/// Fixed scales mapping physical quantities into the networks' ranges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub price_scale: f64,
    pub demand_scale: f64,
    pub energy_capacity: f64,
    pub steps_per_day: usize,
    pub quantity_scale: f64,
}

impl Normalizer {
    pub fn state(&self, obs: &MarketObservation) -> [f64; STATE_DIM] {
        [
            obs.price_forecast_now / self.price_scale,
            obs.last_clearing_price / self.price_scale,
            obs.soe / self.energy_capacity,
            obs.time_of_day as f64 / self.steps_per_day as f64,
            obs.demand_forecast / self.demand_scale,
        ]
    }

    pub fn to_unit(&self, action: &AgentAction) -> [f64; ACTION_DIM] {
        self.unit_of(action.bid_price, action.quantity)
    }

    /// Maps a unit-box point back to a bid. Prices are floored at zero.
    pub fn from_unit(&self, unit: [f64; ACTION_DIM]) -> AgentAction {
        AgentAction::new(
            ((unit[0] + 1.0) * 0.5 * self.price_scale).max(0.0),
            unit[1] * self.quantity_scale,
        )
    }

    /// Physical size of one normalized unit along each action axis.
    fn unit_extent(&self) -> [f64; ACTION_DIM] {
        [0.5 * self.price_scale, self.quantity_scale]
    }

    /// Unit-box coordinates of `action` without the price floor.
    fn unit_of(&self, price: f64, quantity: f64) -> [f64; ACTION_DIM] {
        [2.0 * price / self.price_scale - 1.0, quantity / self.quantity_scale]
    }
}

/// Convex combination of the actor's noisy proposal and the supervisor's
/// bid with supervisor weight `w`.
///
/// `noise` is in $/MWh and MWh. The blend is computed in physical units,
/// which is the same point as blending in the unit box because the
/// normalization is affine; this keeps `w = 1` bit-exact on the supervisor.
pub fn blend_action(actor: &AgentAction, noise: [f64; ACTION_DIM], supervisor: &AgentAction, w: f64) -> AgentAction {
    let price = (1.0 - w) * (actor.bid_price + noise[0]) + w * supervisor.bid_price;
    let quantity = (1.0 - w) * (actor.quantity + noise[1]) + w * supervisor.quantity;
    AgentAction::new(price.max(0.0), quantity)
}

pub fn td_error(reward: f64, value: f64, next_value: f64, gamma: f64) -> f64 {
    reward + gamma * next_value - value
}

/// Revenue plus weighted constraint violations. With the default
/// non-positive weights every violation lowers the reward.
pub fn reward(
    mode: RewardMode,
    executed: &AgentAction,
    observation: &MarketObservation,
    cleared_revenue: f64,
    violations: &ConstraintViolations,
    penalty_weights: &[f64; ConstraintViolations::LEN],
) -> f64 {
    let revenue = match mode {
        RewardMode::Settlement => cleared_revenue,
        RewardMode::Forecast => observation.price_forecast_now * executed.quantity,
    };
    let penalty: f64 = penalty_weights
        .iter()
        .zip(violations.as_array())
        .map(|(mu, y)| mu * y)
        .sum();
    revenue + penalty
}

/// Everything decided before the market clears, kept for the learning step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    /// Actor mean in the unit box, before the supervision step.
    pub actor_unit: [f64; ACTION_DIM],
    pub actor: AgentAction,
    /// Exploration noise in $/MWh and MWh.
    pub noise: [f64; ACTION_DIM],
    /// The actor's sampled action `a_A + a_E` in the unit box.
    pub actor_sample: [f64; ACTION_DIM],
    pub supervisor_weight: f64,
    pub blended: AgentAction,
}

pub struct SupervisedActorCritic {
    actor: Mlp,
    critic: Mlp,
    config: SacConfig,
    norm: Normalizer,
    noise: Normal<f64>,
}

impl SupervisedActorCritic {
    pub fn new<R: Rng + ?Sized>(config: SacConfig, norm: Normalizer, rng: &mut R) -> Result<Self, NeuralError> {
        let net = &config.network;
        let actor = Mlp::random(&net.layer_dims(STATE_DIM, ACTION_DIM), net.leak, rng)?;
        let critic = Mlp::random(&net.layer_dims(STATE_DIM, 1), net.leak, rng)?;
        Ok(Self::from_networks(actor, critic, config, norm))
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, config: SacConfig, norm: Normalizer) -> Self {
        let noise = Normal::new(0.0, config.sigma_explore).expect("sigma_explore validated positive");
        Self {
            actor,
            critic,
            config,
            norm,
            noise,
        }
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    fn actor_output(&self, obs: &MarketObservation) -> ([f64; STATE_DIM], [f64; ACTION_DIM]) {
        let state = self.norm.state(obs);
        let raw = self.actor.forward(&state).expect("actor input width is STATE_DIM");
        (state, [raw[0].tanh(), raw[1].tanh()])
    }

    /// Mean of the actor's policy in the unit box.
    pub fn actor_mean_unit(&self, obs: &MarketObservation) -> [f64; ACTION_DIM] {
        self.actor_output(obs).1
    }

    pub fn actor_mean(&self, obs: &MarketObservation) -> AgentAction {
        self.norm.from_unit(self.actor_mean_unit(obs))
    }

    pub fn value(&self, obs: &MarketObservation) -> f64 {
        self.critic
            .forward(&self.norm.state(obs))
            .expect("critic input width is STATE_DIM")[0]
    }

    /// Actor-parameter gradient of a scalar whose gradient with respect to
    /// the unit-box mean is `d_mean`.
    fn actor_gradient(&self, state: &[f64], mean: [f64; ACTION_DIM], d_mean: [f64; ACTION_DIM]) -> Gradients {
        let upstream = [d_mean[0] * (1.0 - mean[0] * mean[0]), d_mean[1] * (1.0 - mean[1] * mean[1])];
        self.actor.backward(state, &upstream).expect("actor widths are fixed").0
    }

    /// Supervision loss `0.5 * |a_A - a_S|^2` in the unit box and its
    /// gradient with respect to the actor parameters.
    pub fn supervision_loss(&self, obs: &MarketObservation, supervisor: &AgentAction) -> (f64, Gradients) {
        let (state, mean) = self.actor_output(obs);
        let target = self.norm.to_unit(supervisor);
        let diff = [mean[0] - target[0], mean[1] - target[1]];
        let loss = 0.5 * (diff[0] * diff[0] + diff[1] * diff[1]);
        (loss, self.actor_gradient(&state, mean, diff))
    }

    /// One descent step on the supervision loss; returns the loss before the step.
    pub fn supervise_actor(&mut self, obs: &MarketObservation, supervisor: &AgentAction) -> f64 {
        let (loss, grads) = self.supervision_loss(obs, supervisor);
        self.actor
            .adagrad_step(&grads.scaled(-1.0), self.config.beta1, self.config.network.adagrad_epsilon);
        loss
    }

    /// Gradient of `ln pi(sample | s)` for the Gaussian policy centred on the
    /// actor mean with standard deviation `sigma_policy`.
    pub fn log_policy_gradient(&self, obs: &MarketObservation, sample: [f64; ACTION_DIM]) -> Gradients {
        let (state, mean) = self.actor_output(obs);
        let var = self.config.sigma_policy * self.config.sigma_policy;
        let score = [(sample[0] - mean[0]) / var, (sample[1] - mean[1]) / var];
        self.actor_gradient(&state, mean, score)
    }

    /// Policy-gradient step `theta += beta2 * delta * grad ln pi`.
    pub fn actor_pg_update(&mut self, obs: &MarketObservation, sample: [f64; ACTION_DIM], delta: f64) {
        let grads = self.log_policy_gradient(obs, sample).scaled(delta);
        self.actor
            .adagrad_step(&grads, self.config.beta2, self.config.network.adagrad_epsilon);
    }

    pub fn value_gradient(&self, obs: &MarketObservation) -> Gradients {
        self.critic
            .backward(&self.norm.state(obs), &[1.0])
            .expect("critic widths are fixed")
            .0
    }

    /// Semi-gradient critic step: `omega += alpha * delta * grad V(s)`, the
    /// descent direction of `0.5 * delta^2` with `V(s')` held fixed.
    pub fn critic_update(&mut self, obs: &MarketObservation, delta: f64) {
        let grads = self.value_gradient(obs).scaled(delta);
        self.critic
            .adagrad_step(&grads, self.config.alpha, self.config.network.adagrad_epsilon);
    }

    /// Actor proposal, supervision step, exploration and blending.
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        obs: &MarketObservation,
        supervisor: &AgentAction,
        step: usize,
        rng: &mut R,
    ) -> Proposal {
        let actor_unit = self.actor_mean_unit(obs);
        let actor = self.norm.from_unit(actor_unit);
        self.supervise_actor(obs, supervisor);
        let scale = match self.config.exploration_units {
            ExplorationUnits::Physical => [1.0, 1.0],
            ExplorationUnits::Normalized => self.norm.unit_extent(),
        };
        let noise = [self.noise.sample(rng) * scale[0], self.noise.sample(rng) * scale[1]];
        let w = self.config.schedule.supervisor_weight(step);
        let blended = blend_action(&actor, noise, supervisor, w);
        let actor_sample = self
            .norm
            .unit_of(actor.bid_price + noise[0], actor.quantity + noise[1]);
        Proposal {
            actor_unit,
            actor,
            noise,
            actor_sample,
            supervisor_weight: w,
            blended,
        }
    }

    /// Temporal-difference error of a transition followed by the actor and
    /// critic updates. `reward` is in dollars; it is rescaled here.
    pub fn learn(
        &mut self,
        obs: &MarketObservation,
        next_obs: &MarketObservation,
        proposal: &Proposal,
        reward: f64,
    ) -> f64 {
        let r = reward / self.config.reward_scale;
        let delta = td_error(r, self.value(obs), self.value(next_obs), self.config.gamma);
        self.actor_pg_update(obs, proposal.actor_sample, delta);
        self.critic_update(obs, delta);
        delta
    }
}
