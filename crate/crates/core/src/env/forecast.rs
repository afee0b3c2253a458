//! Clearing-price forecasts for the planner.

use serde::{Deserialize, Serialize};

use super::BackgroundAgent;
use crate::market::{clear_market, MarketError};
use crate::mpc::{MpcError, PriceForecast};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Same time of day, most recent day with a realized price.
    Persistence,
    /// Background merit-order price of the true demand, battery absent.
    PerfectForesight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub mode: ForecastMode,
    /// Price used where no history exists yet. Defaults to the midpoint of
    /// the background cost range.
    #[serde(default)]
    pub prior_price: Option<f64>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            mode: ForecastMode::Persistence,
            prior_price: None,
        }
    }
}

/// Persistence forecast for steps `t .. t + horizon` from realized prices
/// `history` (one entry per elapsed step).
pub fn forecast_prices(
    history: &[f64],
    t: usize,
    steps_per_day: usize,
    horizon: usize,
    prior: f64,
) -> Result<PriceForecast, MpcError> {
    let prices = (0..horizon)
        .map(|h| {
            let lag = (h / steps_per_day + 1) * steps_per_day;
            (t + h)
                .checked_sub(lag)
                .and_then(|i| history.get(i).copied())
                .unwrap_or(prior)
        })
        .collect();
    PriceForecast::new(prices)
}

/// Price the background stack alone would clear at for `demand`.
pub fn background_price(stack: &[BackgroundAgent], demand: f64) -> Result<f64, MarketError> {
    let bids: Vec<_> = stack.iter().map(BackgroundAgent::bid).collect();
    Ok(clear_market(&bids, demand)?.clearing_price)
}

/// Realized background prices for the next `horizon` steps, truncated at the
/// end of the series.
pub fn perfect_foresight(
    stack: &[BackgroundAgent],
    demand: &[f64],
    t: usize,
    horizon: usize,
) -> Result<Vec<f64>, MarketError> {
    let end = (t + horizon).min(demand.len());
    demand[t.min(end)..end]
        .iter()
        .map(|&d| background_price(stack, d))
        .collect()
}
