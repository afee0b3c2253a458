//! Compares the MPC price taker with the supervised actor-critic on the same
//! demand, over a shortened horizon.
//!
//!     cargo run --release --example compare_policies [days] [seeds]

use bidsim::cli::compare;
use bidsim::config::{DemandSource, ExperimentConfig};
use bidsim::env::SyntheticDemand;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let days = args.next().unwrap_or(30);
    let seeds = args.next().unwrap_or(2);
    let cfg = ExperimentConfig {
        demand: DemandSource::Synthetic(SyntheticDemand {
            days: days as usize,
            ..SyntheticDemand::default()
        }),
        ..ExperimentConfig::default()
    };
    let (comparison, _) = compare(&cfg, None, seeds).expect("simulation");
    print!("{}", comparison.table());
    for run in &comparison.runs {
        println!(
            "seed {}: mpc {:.0} $/day, sac {:.0} $/day",
            run.seed, run.mpc.avg_revenue_per_day, run.sac.avg_revenue_per_day
        );
    }
}
