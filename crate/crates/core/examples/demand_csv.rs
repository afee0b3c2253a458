//! Writes a synthetic demand series to CSV, reads it back and runs the MPC
//! policy on it.
//!
//!     cargo run --release --example demand_csv [path]

use std::path::PathBuf;

use bidsim::env::{default_stack, load_demand_csv, run_simulation, synth_demand, Policy, SimConfig, SyntheticDemand};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bidsim_demand.csv"));
    let spec = SyntheticDemand {
        days: 3,
        ..SyntheticDemand::default()
    };
    synth_demand(&spec, 1).save_csv(&path).expect("write csv");
    let demand = load_demand_csv(&path).expect("read csv");
    println!("{}: {} rows, {} steps per day", path.display(), demand.len(), demand.steps_per_day);

    let out = run_simulation(Policy::Mpc, &demand, &default_stack(), &SimConfig::default(), 1).expect("run");
    println!("mpc revenue over {} days: {:.0} $", demand.days(), out.metrics.summary.total_revenue);
}
