//! Output files: metrics JSON, per-step trace CSV, plot-ready series CSVs
//! and the policy comparison table.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::env::{MetricsSummary, Policy, RunOutput, StepRecord};

pub const TRACE_HEADER: [&str; 16] = [
    "step",
    "supervisor_weight",
    "supervisor_price",
    "supervisor_quantity",
    "proposed_price",
    "proposed_quantity",
    "executed_price",
    "executed_quantity",
    "intervened",
    "cleared_quantity",
    "base_demand",
    "clearing_price",
    "revenue",
    "reward",
    "delta",
    "soe",
];

#[derive(Serialize)]
struct RunReport<'a> {
    policy: &'static str,
    seed: u64,
    #[serde(flatten)]
    summary: &'a MetricsSummary,
}

fn csv_error(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_trace<W: Write>(records: &[StepRecord], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.supervisor_weight.to_string(),
            r.supervisor_price.to_string(),
            r.supervisor_quantity.to_string(),
            r.proposed_price.to_string(),
            r.proposed_quantity.to_string(),
            r.executed_price.to_string(),
            r.executed_quantity.to_string(),
            u8::from(r.intervened).to_string(),
            r.cleared_quantity.to_string(),
            r.base_demand.to_string(),
            r.clearing_price.to_string(),
            r.revenue.to_string(),
            r.reward.to_string(),
            r.delta.to_string(),
            r.soe.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}

fn write_series(path: &Path, column: &str, values: &[f64]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,{column}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()
}

pub fn metrics_json(policy: Policy, seed: u64, summary: &MetricsSummary) -> String {
    let report = RunReport {
        policy: policy.name(),
        seed,
        summary,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("metrics serialize");
    text.push('\n');
    text
}

/// Writes `metrics.json`, `trace.csv` and the series files into `dir`.
pub fn write_run(dir: &Path, policy: Policy, seed: u64, output: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let m = &output.metrics;
    fs::write(dir.join("metrics.json"), metrics_json(policy, seed, &m.summary))?;
    write_trace(&output.trace, BufWriter::new(File::create(dir.join("trace.csv"))?))?;
    write_series(&dir.join("cumulative_revenue.csv"), "cumulative_revenue", &m.cumulative_revenue_series)?;
    write_series(&dir.join("clearing_price.csv"), "clearing_price", &m.clearing_price_series)?;
    write_series(&dir.join("soe.csv"), "soe", &m.soe_series)?;

    let mut w = BufWriter::new(File::create(dir.join("bids.csv"))?);
    writeln!(w, "step,bid_quantity,cleared_quantity")?;
    for (i, (b, c)) in m.bid_series.iter().zip(&m.cleared_series).enumerate() {
        writeln!(w, "{i},{b},{c}")?;
    }
    w.flush()
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub mpc: MetricsSummary,
    pub sac: MetricsSummary,
    /// SAC revenue per day over MPC revenue per day; absent when the MPC
    /// revenue is not positive.
    pub revenue_ratio: Option<f64>,
}

impl SeedComparison {
    pub fn new(seed: u64, mpc: MetricsSummary, sac: MetricsSummary) -> Self {
        let revenue_ratio = (mpc.avg_revenue_per_day > 0.0).then(|| sac.avg_revenue_per_day / mpc.avg_revenue_per_day);
        Self {
            seed,
            mpc,
            sac,
            revenue_ratio,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub runs: Vec<SeedComparison>,
    pub median_revenue_ratio: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

impl Comparison {
    pub fn new(runs: Vec<SeedComparison>) -> Self {
        let mut ratios: Vec<f64> = runs.iter().filter_map(|r| r.revenue_ratio).collect();
        let median_revenue_ratio = median(&mut ratios);
        Self {
            runs,
            median_revenue_ratio,
        }
    }

    /// Side-by-side table of the first run plus the ratio line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.runs.first() else {
            return out;
        };
        type Row = (&'static str, fn(&MetricsSummary) -> f64, &'static str);
        let rows: [Row; 4] = [
            ("Average revenue per day", |m| m.avg_revenue_per_day, "$/day"),
            ("Average % of bid capacity cleared", |m| m.pct_bid_capacity_cleared, "%"),
            ("Violations before shield", |m| m.pct_preshield_violations, "%"),
            ("% of generator bids", |m| m.pct_generator_bids, "%"),
        ];
        out.push_str(&format!("seed {}\n", first.seed));
        out.push_str(&format!("{:<36} {:>14} {:>14}\n", "", "SAC", "MPC"));
        for (label, get, unit) in rows {
            out.push_str(&format!(
                "{:<36} {:>14} {:>14}\n",
                label,
                format!("{:.1} {unit}", get(&first.sac)),
                format!("{:.1} {unit}", get(&first.mpc)),
            ));
        }
        let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        for run in &self.runs {
            out.push_str(&format!("revenue ratio (seed {}): {}\n", run.seed, fmt(run.revenue_ratio)));
        }
        out.push_str(&format!("median revenue ratio: {}\n", fmt(self.median_revenue_ratio)));
        out
    }
}

pub fn write_comparison(dir: &Path, comparison: &Comparison) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(comparison).expect("comparison serializes");
    json.push('\n');
    fs::write(dir.join("compare.json"), json)?;
    fs::write(dir.join("compare.txt"), comparison.table())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
