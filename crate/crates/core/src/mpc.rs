//! Price-taker receding-horizon planner used as the supervisor.
//!
//! The horizon problem maximizes forecast revenue subject to the storage
//! dynamics and limits. State of energy is discretized on a uniform grid of
//! `grid_levels` points spanning `[soe_floor, energy_capacity]`, shifted so
//! that the current state of energy is itself a grid point. Actions move the
//! state by whole grid steps, so the charge/discharge mode choice is carried
//! by the direction of the move.
//!
//! The backward recursion evaluates the charge and discharge windows with
//! monotone queues, which keeps each stage linear in the number of levels.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentAction, MarketObservation};
use crate::battery::BatteryParams;

/// Sequence budget for [`enumerate_oracle`].
pub const ORACLE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("initial state of energy {soe0} MWh outside [{floor}, {capacity}]")]
    InfeasibleStart { soe0: f64, floor: f64, capacity: f64 },
    #[error("grid needs at least 2 levels, got {0}")]
    InvalidGrid(usize),
    #[error("price forecast is empty")]
    EmptyForecast,
    #[error("forecast price {price} at step {step} is not a finite non-negative value")]
    InvalidForecast { step: usize, price: f64 },
    #[error("oracle would enumerate {levels}^{horizon} sequences, above the limit")]
    OracleTooLarge { levels: usize, horizon: usize },
}

/// Expected clearing prices over the planning horizon, $/MWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceForecast(Vec<f64>);

impl PriceForecast {
    pub fn new(prices: Vec<f64>) -> Result<Self, MpcError> {
        if prices.is_empty() {
            return Err(MpcError::EmptyForecast);
        }
        if let Some((step, &price)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(MpcError::InvalidForecast { step, price });
        }
        Ok(Self(prices))
    }

    pub fn prices(&self) -> &[f64] {
        &self.0
    }

    pub fn horizon(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Generation,
    Load,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub p_g: f64,
    pub p_l: f64,
    pub mode: Mode,
    /// State of energy at the end of the step.
    pub soe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonPlan {
    pub schedule: Vec<PlanStep>,
    pub objective: f64,
}

impl HorizonPlan {
    /// Signed first-step quantity, positive for generation.
    pub fn first_quantity(&self) -> f64 {
        self.schedule.first().map_or(0.0, |s| s.p_g - s.p_l)
    }
}

/// Forecast revenue of a schedule, summed in time order.
pub fn plan_objective(schedule: &[PlanStep], forecast: &PriceForecast) -> f64 {
    schedule
        .iter()
        .zip(forecast.prices())
        .fold(0.0, |acc, (s, price)| acc + price * (s.p_g - s.p_l))
}

/// State-of-energy grid anchored at the initial state.
#[derive(Clone, Copy, Debug)]
struct SoeGrid {
    soe0: f64,
    step: f64,
    start: usize,
    len: usize,
    max_up: usize,
    max_down: usize,
    eta_charge: f64,
    eta_discharge: f64,
}

impl SoeGrid {
    fn new(soe0: f64, params: &BatteryParams, grid_levels: usize) -> Result<Self, MpcError> {
        if grid_levels < 2 {
            return Err(MpcError::InvalidGrid(grid_levels));
        }
        let tol = params.tolerance();
        if !soe0.is_finite()
            || soe0 < params.soe_floor - tol
            || soe0 > params.energy_capacity + tol
        {
            return Err(MpcError::InfeasibleStart {
                soe0,
                floor: params.soe_floor,
                capacity: params.energy_capacity,
            });
        }
        let step = (params.energy_capacity - params.soe_floor) / (grid_levels - 1) as f64;
        let below = (((soe0 - params.soe_floor) + tol) / step).floor().max(0.0) as usize;
        let above = (((params.energy_capacity - soe0) + tol) / step).floor().max(0.0) as usize;

        let moves = |limit: f64, eta: f64| {
            let mut m = ((limit * eta + tol) / step).floor().max(0.0) as usize;
            while m > 0 && m as f64 * step / eta > limit + tol {
                m -= 1;
            }
            m
        };
        Ok(Self {
            soe0,
            step,
            start: below,
            len: below + above + 1,
            max_up: moves(params.max_charge, params.eta_charge),
            max_down: moves(params.max_discharge, params.eta_discharge),
            eta_charge: params.eta_charge,
            eta_discharge: params.eta_discharge,
        })
    }

    fn level(&self, k: usize) -> f64 {
        self.soe0 + (k as f64 - self.start as f64) * self.step
    }

    /// Energy exchanged with the market when moving from level `from` to `to`.
    fn transition(&self, from: usize, to: usize) -> (f64, f64) {
        if to > from {
            (0.0, (to - from) as f64 * self.step / self.eta_charge)
        } else if to < from {
            ((from - to) as f64 * self.step / self.eta_discharge, 0.0)
        } else {
            (0.0, 0.0)
        }
    }

    fn plan_from_path(&self, path: &[usize], forecast: &PriceForecast) -> HorizonPlan {
        let mut from = self.start;
        let schedule: Vec<PlanStep> = path
            .iter()
            .map(|&to| {
                let (p_g, p_l) = self.transition(from, to);
                from = to;
                PlanStep {
                    p_g,
                    p_l,
                    mode: if p_l > 0.0 { Mode::Load } else { Mode::Generation },
                    soe: self.level(to),
                }
            })
            .collect();
        let objective = plan_objective(&schedule, forecast);
        HorizonPlan {
            schedule,
            objective,
        }
    }
}

/// Revenue-maximal schedule over the grid by backward dynamic programming.
///
/// Ties prefer idling, then the smallest traded quantity, then charging.
pub fn solve_horizon(
    soe0: f64,
    forecast: &PriceForecast,
    params: &BatteryParams,
    grid_levels: usize,
) -> Result<HorizonPlan, MpcError> {
    let grid = SoeGrid::new(soe0, params, grid_levels)?;
    let n = grid.len;
    let horizon = forecast.horizon();

    let mut value_next = vec![0.0_f64; n];
    let mut value = vec![0.0_f64; n];
    let mut traded = vec![0.0_f64; n];
    let mut choice = vec![0_u32; horizon * n];
    let mut window: VecDeque<(usize, f64)> = VecDeque::with_capacity(n);

    for t in (0..horizon).rev() {
        let price = forecast.prices()[t];
        let choice_t = &mut choice[t * n..(t + 1) * n];
        for k in 0..n {
            value[k] = value_next[k];
            traded[k] = 0.0;
            choice_t[k] = k as u32;
        }

        // Charge: move up to `max_up` levels, paying price per MWh drawn.
        let cost_up = price * grid.step / grid.eta_charge;
        window.clear();
        for k in (0..n).rev() {
            let j = k + 1;
            if j < n {
                let g = value_next[j] - cost_up * j as f64;
                while window.back().is_some_and(|&(_, gb)| gb <= g) {
                    window.pop_back();
                }
                window.push_back((j, g));
            }
            while window.front().is_some_and(|&(jf, _)| jf > k + grid.max_up) {
                window.pop_front();
            }
            if let Some(&(j, g)) = window.front() {
                let candidate = g + cost_up * k as f64;
                let quantity = (j - k) as f64 * grid.step / grid.eta_charge;
                if candidate > value[k] || (candidate == value[k] && quantity < traded[k]) {
                    value[k] = candidate;
                    traded[k] = quantity;
                    choice_t[k] = j as u32;
                }
            }
        }

        // Discharge: move down up to `max_down` levels, earning price per MWh.
        let gain_down = price * grid.step / grid.eta_discharge;
        window.clear();
        for k in 0..n {
            if k >= 1 {
                let j = k - 1;
                let g = value_next[j] - gain_down * j as f64;
                while window.back().is_some_and(|&(_, gb)| gb <= g) {
                    window.pop_back();
                }
                window.push_back((j, g));
            }
            while window
                .front()
                .is_some_and(|&(jf, _)| jf + grid.max_down < k)
            {
                window.pop_front();
            }
            if let Some(&(j, g)) = window.front() {
                let candidate = g + gain_down * k as f64;
                let quantity = (k - j) as f64 * grid.step / grid.eta_discharge;
                let better = candidate > value[k]
                    || (candidate == value[k] && traded[k] > 0.0 && quantity < traded[k]);
                if better {
                    value[k] = candidate;
                    traded[k] = quantity;
                    choice_t[k] = j as u32;
                }
            }
        }
        std::mem::swap(&mut value, &mut value_next);
    }

    let mut path = Vec::with_capacity(horizon);
    let mut k = grid.start;
    for t in 0..horizon {
        k = choice[t * n + k] as usize;
        path.push(k);
    }
    Ok(grid.plan_from_path(&path, forecast))
}

/// Exhaustive search over every grid-feasible action sequence.
///
/// Only practical for tiny instances; it exists to cross-check
/// [`solve_horizon`].
pub fn enumerate_oracle(
    soe0: f64,
    forecast: &PriceForecast,
    params: &BatteryParams,
    grid_levels: usize,
) -> Result<HorizonPlan, MpcError> {
    let grid = SoeGrid::new(soe0, params, grid_levels)?;
    let horizon = forecast.horizon();
    if (grid_levels as f64).powi(horizon as i32) > ORACLE_LIMIT {
        return Err(MpcError::OracleTooLarge {
            levels: grid_levels,
            horizon,
        });
    }

    struct Search<'a> {
        grid: &'a SoeGrid,
        prices: &'a [f64],
        path: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, t: usize, k: usize, revenue: f64) {
            if t == self.prices.len() {
                if self.best.as_ref().is_none_or(|(b, _)| revenue > *b) {
                    self.best = Some((revenue, self.path.clone()));
                }
                return;
            }
            let g = self.grid;
            let lo = k.saturating_sub(g.max_down);
            let hi = (k + g.max_up).min(g.len - 1);
            let mut nexts: Vec<usize> = (lo..=hi).collect();
            nexts.sort_by_key(|&j| (j.abs_diff(k), j < k));
            for j in nexts {
                let (p_g, p_l) = g.transition(k, j);
                self.path.push(j);
                self.visit(t + 1, j, revenue + self.prices[t] * (p_g - p_l));
                self.path.pop();
            }
        }
    }

    let mut search = Search {
        grid: &grid,
        prices: forecast.prices(),
        path: Vec::with_capacity(horizon),
        best: None,
    };
    search.visit(0, grid.start, 0.0);
    let (_, path) = search.best.expect("idle sequence is always feasible");
    Ok(grid.plan_from_path(&path, forecast))
}

/// First-step bid of the horizon plan, priced at the forecast clearing price.
pub fn supervisor_action(
    observation: &MarketObservation,
    params: &BatteryParams,
    forecast: &PriceForecast,
    grid_levels: usize,
) -> Result<AgentAction, MpcError> {
    let plan = solve_horizon(observation.soe, forecast, params, grid_levels)?;
    Ok(AgentAction::new(forecast.prices()[0], plan.first_quantity()))
}
