//! Uniform-price auction cleared by merit order against inelastic demand.
//!
//! Bids are sorted by price and filled until demand is met. The last
//! (marginal) price level sets the clearing price paid to every dispatched
//! seller. Bids that share the marginal price split the residual demand in
//! proportion to their offered quantities, so the outcome never depends on
//! the order in which bids were submitted.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifies a market participant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent-{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid bid from {agent}: {reason}")]
    InvalidBid { agent: AgentId, reason: &'static str },
    #[error("invalid demand {0} MWh")]
    InvalidDemand(f64),
    #[error("duplicate bid from {0}")]
    DuplicateAgent(AgentId),
    #[error("insufficient supply: {supply} MWh offered against {demand} MWh demand")]
    InsufficientSupply { supply: f64, demand: f64 },
}

/// One seller's offer: up to `quantity` MWh at `price` $/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyBid {
    pub agent: AgentId,
    pub price: f64,
    pub quantity: f64,
}

impl SupplyBid {
    pub fn new(agent: AgentId, price: f64, quantity: f64) -> Self {
        Self {
            agent,
            price,
            quantity,
        }
    }

    fn validate(&self) -> Result<(), MarketError> {
        let invalid = |reason| MarketError::InvalidBid {
            agent: self.agent,
            reason,
        };
        if !self.price.is_finite() {
            return Err(invalid("price is not finite"));
        }
        if self.price < 0.0 {
            return Err(invalid("price is negative"));
        }
        if !self.quantity.is_finite() {
            return Err(invalid("quantity is not finite"));
        }
        if self.quantity < 0.0 {
            return Err(invalid("quantity is negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearingOutcome {
    pub clearing_price: f64,
    pub dispatch: BTreeMap<AgentId, f64>,
    pub served_demand: f64,
}

impl ClearingOutcome {
    /// Dispatched energy for `agent`, zero if it did not bid.
    pub fn dispatched(&self, agent: AgentId) -> f64 {
        self.dispatch.get(&agent).copied().unwrap_or(0.0)
    }

    /// Total paid to sellers. Every dispatched MWh earns the clearing price.
    pub fn total_payment(&self) -> f64 {
        self.clearing_price * self.served_demand
    }
}

/// Clears `bids` against `demand` by merit order.
///
/// Demand of zero clears at price zero with nothing dispatched.
pub fn clear_market(bids: &[SupplyBid], demand: f64) -> Result<ClearingOutcome, MarketError> {
    if !demand.is_finite() || demand < 0.0 {
        return Err(MarketError::InvalidDemand(demand));
    }
    let mut dispatch = BTreeMap::new();
    for bid in bids {
        bid.validate()?;
        if dispatch.insert(bid.agent, 0.0).is_some() {
            return Err(MarketError::DuplicateAgent(bid.agent));
        }
    }
    let supply: f64 = bids.iter().map(|b| b.quantity).sum();
    if supply < demand {
        return Err(MarketError::InsufficientSupply { supply, demand });
    }
    if demand == 0.0 {
        return Ok(ClearingOutcome {
            clearing_price: 0.0,
            dispatch,
            served_demand: 0.0,
        });
    }

    let mut order: Vec<&SupplyBid> = bids.iter().filter(|b| b.quantity > 0.0).collect();
    order.sort_by(|a, b| a.price.total_cmp(&b.price).then(a.agent.cmp(&b.agent)));

    let mut remaining = demand;
    let mut clearing_price = 0.0;
    let mut start = 0;
    while start < order.len() {
        let price = order[start].price;
        let end = start + order[start..].iter().take_while(|b| b.price == price).count();
        let level = &order[start..end];
        let level_quantity: f64 = level.iter().map(|b| b.quantity).sum();
        let last_level = end == order.len();

        clearing_price = price;
        if remaining <= level_quantity || last_level {
            // Marginal level: split what is left pro rata. On the last level
            // `remaining` can exceed `level_quantity` only by rounding.
            let target = remaining.min(level_quantity);
            for (bid, amount) in level.iter().zip(split_pro_rata(level, target)) {
                dispatch.insert(bid.agent, amount);
            }
            break;
        }
        for bid in level {
            dispatch.insert(bid.agent, bid.quantity);
        }
        remaining -= level_quantity;
        start = end;
    }

    let served_demand = dispatch.values().sum();
    Ok(ClearingOutcome {
        clearing_price,
        dispatch,
        served_demand,
    })
}

/// Shares of `target` proportional to each bid's quantity. The last share
/// absorbs rounding so that summing the shares in order gives `target`
/// exactly.
fn split_pro_rata(level: &[&SupplyBid], target: f64) -> Vec<f64> {
    let total: f64 = level.iter().map(|b| b.quantity).sum();
    let mut shares: Vec<f64> = level.iter().map(|b| b.quantity * target / total).collect();
    let Some((last, head)) = shares.split_last_mut() else {
        return shares;
    };
    let before: f64 = head.iter().sum();
    let mut rest = (target - before).max(0.0);
    for _ in 0..4 {
        let sum = before + rest;
        if sum == target {
            break;
        }
        rest = if sum < target { rest.next_up() } else { rest.next_down().max(0.0) };
    }
    *last = rest;
    shares
}

/// Demand seen by the market once the battery's load bid is added.
pub fn effective_demand(base_demand: f64, battery_load_bid: f64) -> f64 {
    base_demand + battery_load_bid
}

/// Value of the clearing objective: sum of bid price times dispatched energy.
///
/// Energy is totalled per price level before pricing, so equal-price shares
/// cost exactly what their sum costs.
pub fn dispatch_cost(bids: &[SupplyBid], outcome: &ClearingOutcome) -> f64 {
    let mut order: Vec<&SupplyBid> = bids.iter().collect();
    order.sort_by(|a, b| a.price.total_cmp(&b.price).then(a.agent.cmp(&b.agent)));
    order
        .chunk_by(|a, b| a.price == b.price)
        .map(|level| level[0].price * level.iter().map(|b| outcome.dispatched(b.agent)).sum::<f64>())
        .sum()
}
