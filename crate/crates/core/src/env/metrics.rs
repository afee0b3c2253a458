use serde::{Deserialize, Serialize};

use super::StepRecord;

/// Headline figures of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub avg_revenue_per_day: f64,
    pub pct_bid_capacity_cleared: f64,
    pub pct_preshield_violations: f64,
    pub pct_generator_bids: f64,
    pub total_revenue: f64,
    pub steps: usize,
    pub days: f64,
    pub shield_interventions: usize,
    pub post_shield_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub summary: MetricsSummary,
    pub cumulative_revenue_series: Vec<f64>,
    pub clearing_price_series: Vec<f64>,
    pub soe_series: Vec<f64>,
    /// Executed signed bid quantity per step.
    pub bid_series: Vec<f64>,
    /// Dispatched signed quantity per step.
    pub cleared_series: Vec<f64>,
}

impl RunMetrics {
    pub fn from_records(records: &[StepRecord], steps_per_day: usize, post_shield_violations: usize) -> Self {
        let steps = records.len();
        let days = steps as f64 / steps_per_day as f64;

        let mut total = 0.0;
        let mut cumulative_revenue_series = Vec::with_capacity(steps);
        for r in records {
            total += r.revenue;
            cumulative_revenue_series.push(total);
        }

        let generation: Vec<&StepRecord> = records.iter().filter(|r| r.executed_quantity > 0.0).collect();
        let loads = records.iter().filter(|r| r.executed_quantity < 0.0).count();
        let pct_bid_capacity_cleared = if generation.is_empty() {
            0.0
        } else {
            let sum: f64 = generation
                .iter()
                .map(|r| (r.cleared_quantity / r.executed_quantity).clamp(0.0, 1.0))
                .sum();
            100.0 * sum / generation.len() as f64
        };
        let traded = generation.len() + loads;
        let pct_generator_bids = if traded == 0 {
            0.0
        } else {
            100.0 * generation.len() as f64 / traded as f64
        };
        let unsafe_steps = records.iter().filter(|r| r.intervened).count();
        let pct_preshield_violations = if steps == 0 {
            0.0
        } else {
            100.0 * unsafe_steps as f64 / steps as f64
        };

        RunMetrics {
            summary: MetricsSummary {
                avg_revenue_per_day: if days > 0.0 { total / days } else { 0.0 },
                pct_bid_capacity_cleared,
                pct_preshield_violations,
                pct_generator_bids,
                total_revenue: total,
                steps,
                days,
                shield_interventions: unsafe_steps,
                post_shield_violations,
            },
            cumulative_revenue_series,
            clearing_price_series: records.iter().map(|r| r.clearing_price).collect(),
            soe_series: records.iter().map(|r| r.soe).collect(),
            bid_series: records.iter().map(|r| r.executed_quantity).collect(),
            cleared_series: records.iter().map(|r| r.cleared_quantity).collect(),
        }
    }

    /// Average revenue per step over `range`, from the cumulative series.
    pub fn revenue_slope(&self, range: std::ops::Range<usize>) -> f64 {
        let c = &self.cumulative_revenue_series;
        if range.is_empty() || range.end > c.len() {
            return 0.0;
        }
        let before = if range.start == 0 { 0.0 } else { c[range.start - 1] };
        (c[range.end - 1] - before) / range.len() as f64
    }
}
