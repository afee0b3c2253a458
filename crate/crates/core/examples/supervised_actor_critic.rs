//! Runs the supervised actor-critic for two weeks of synthetic demand and
//! shows the supervisor weight, revenue and shield activity per day.
//!
//!     cargo run --release --example supervised_actor_critic

use bidsim::env::{default_stack, run_simulation, synth_demand, Policy, SimConfig, SyntheticDemand};

fn main() {
    let spec = SyntheticDemand {
        days: 14,
        ..SyntheticDemand::default()
    };
    let demand = synth_demand(&spec, 3);
    let out = run_simulation(Policy::Sac, &demand, &default_stack(), &SimConfig::default(), 3).expect("run");

    for (day, steps) in out.trace.chunks(spec.steps_per_day).enumerate() {
        let revenue: f64 = steps.iter().map(|r| r.revenue).sum();
        let shielded = steps.iter().filter(|r| r.intervened).count();
        let w = steps.last().map_or(1.0, |r| r.supervisor_weight);
        println!("day {:2}: weight {w:.3}  revenue {revenue:9.0} $  shielded {shielded}", day + 1);
    }
    let s = &out.metrics.summary;
    println!(
        "average {:.0} $/day, {:.1}% of bid capacity cleared, {:.1}% violations before shield",
        s.avg_revenue_per_day, s.pct_bid_capacity_cleared, s.pct_preshield_violations
    );
}
