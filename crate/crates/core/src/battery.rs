//! Storage plant dynamics, physical limits and the action shield.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentAction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("invalid battery parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("state of energy {soe} MWh outside [{floor}, {capacity}]")]
    OutOfBounds { soe: f64, floor: f64, capacity: f64 },
    #[error("infeasible transition from {soe} MWh with p_g={p_g}, p_l={p_l}")]
    InfeasibleTransition { soe: f64, p_g: f64, p_l: f64 },
    #[error("supervisor action (price {price}, quantity {quantity}) is unsafe at soe {soe} MWh")]
    UnsafeSupervisor { price: f64, quantity: f64, soe: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryParams {
    /// Upper bound on stored energy, MWh.
    pub energy_capacity: f64,
    /// Lower bound on stored energy, MWh.
    pub soe_floor: f64,
    /// Largest load bid per step, MWh.
    pub max_charge: f64,
    /// Largest generation bid per step, MWh.
    pub max_discharge: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            energy_capacity: 1029.0,
            soe_floor: 0.0,
            max_charge: 300.0,
            max_discharge: 300.0,
            eta_charge: 1.0,
            eta_discharge: 1.0,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |field, reason: &str| {
            Err(BatteryError::InvalidParams {
                field,
                reason: reason.to_string(),
            })
        };
        let all = [
            ("energy_capacity", self.energy_capacity),
            ("soe_floor", self.soe_floor),
            ("max_charge", self.max_charge),
            ("max_discharge", self.max_discharge),
            ("eta_charge", self.eta_charge),
            ("eta_discharge", self.eta_discharge),
        ];
        for (field, value) in all {
            if !value.is_finite() {
                return bad(field, "must be finite");
            }
        }
        if self.soe_floor < 0.0 {
            return bad("soe_floor", "must be non-negative");
        }
        if self.soe_floor >= self.energy_capacity {
            return bad("soe_floor", "must be below energy_capacity");
        }
        if self.max_charge <= 0.0 {
            return bad("max_charge", "must be positive");
        }
        if self.max_discharge <= 0.0 {
            return bad("max_discharge", "must be positive");
        }
        for (field, eta) in [
            ("eta_charge", self.eta_charge),
            ("eta_discharge", self.eta_discharge),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(field, "must lie in (0, 1]");
            }
        }
        Ok(())
    }

    /// Slack allowed on bound checks to absorb floating-point rounding.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.energy_capacity.abs().max(1.0)
    }

    /// Largest bid magnitude in either direction; the scale of the quantity axis.
    pub fn max_rate(&self) -> f64 {
        self.max_charge.max(self.max_discharge)
    }
}

/// Magnitudes by which an action breaches each physical limit, all `>= 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolations {
    pub over_discharge_rate: f64,
    pub over_charge_rate: f64,
    pub above_capacity: f64,
    pub below_floor: f64,
}

impl ConstraintViolations {
    pub const LEN: usize = 4;

    pub fn as_array(&self) -> [f64; Self::LEN] {
        [
            self.over_discharge_rate,
            self.over_charge_rate,
            self.above_capacity,
            self.below_floor,
        ]
    }

    pub fn any(&self) -> bool {
        self.as_array().iter().any(|&v| v > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soe: f64,
    pub params: BatteryParams,
}

impl BatteryState {
    pub fn new(params: BatteryParams, soe: f64) -> Result<Self, BatteryError> {
        params.validate()?;
        if !soe.is_finite() || soe < params.soe_floor || soe > params.energy_capacity {
            return Err(BatteryError::OutOfBounds {
                soe,
                floor: params.soe_floor,
                capacity: params.energy_capacity,
            });
        }
        Ok(Self { soe, params })
    }

    fn next_soe(&self, p_g: f64, p_l: f64) -> f64 {
        self.soe - self.params.eta_discharge * p_g + self.params.eta_charge * p_l
    }

    /// Applies one step of generation `p_g` or load `p_l`.
    pub fn step_soe(&self, p_g: f64, p_l: f64) -> Result<BatteryState, BatteryError> {
        if !self.is_safe(p_g, p_l) {
            return Err(BatteryError::InfeasibleTransition {
                soe: self.soe,
                p_g,
                p_l,
            });
        }
        let soe = self
            .next_soe(p_g, p_l)
            .clamp(self.params.soe_floor, self.params.energy_capacity);
        Ok(BatteryState {
            soe,
            params: self.params,
        })
    }

    pub fn is_safe(&self, p_g: f64, p_l: f64) -> bool {
        if !(p_g.is_finite() && p_l.is_finite()) || p_g < 0.0 || p_l < 0.0 {
            return false;
        }
        if p_g > 0.0 && p_l > 0.0 {
            return false;
        }
        let tol = self.params.tolerance();
        if p_l > self.params.max_charge + tol || p_g > self.params.max_discharge + tol {
            return false;
        }
        let next = self.next_soe(p_g, p_l);
        next >= self.params.soe_floor - tol && next <= self.params.energy_capacity + tol
    }

    pub fn is_safe_action(&self, action: &AgentAction) -> bool {
        if !action.bid_price.is_finite() || action.bid_price < 0.0 {
            return false;
        }
        let (p_g, p_l) = action.split();
        self.is_safe(p_g, p_l)
    }

    /// Measures how far `action` would push the plant past each limit.
    pub fn violations(&self, action: &AgentAction) -> ConstraintViolations {
        let (p_g, p_l) = action.split();
        let next = self.next_soe(p_g, p_l);
        let p = &self.params;
        let tol = p.tolerance();
        let excess = |v: f64| if v > tol { v } else { 0.0 };
        ConstraintViolations {
            over_discharge_rate: excess(p_g - p.max_discharge),
            over_charge_rate: excess(p_l - p.max_charge),
            above_capacity: excess(next - p.energy_capacity),
            below_floor: excess(p.soe_floor - next),
        }
    }

    /// Passes `proposed` through if it is safe, otherwise substitutes the
    /// supervisor's action. The flag reports whether a substitution happened.
    pub fn shield(
        &self,
        proposed: AgentAction,
        supervisor: AgentAction,
    ) -> Result<(AgentAction, bool), BatteryError> {
        if self.is_safe_action(&proposed) {
            return Ok((proposed, false));
        }
        if !self.is_safe_action(&supervisor) {
            return Err(BatteryError::UnsafeSupervisor {
                price: supervisor.bid_price,
                quantity: supervisor.quantity,
                soe: self.soe,
            });
        }
        Ok((supervisor, true))
    }
}
