//! Prints the supervisor weight schedule and how it blends actor and
//! supervisor bids.
//!
//!     cargo run --example risk_schedule

use bidsim::agent::{blend_action, AgentAction, RiskSchedule};

fn main() {
    let schedule = RiskSchedule::default();
    let actor = AgentAction::new(70.0, 200.0);
    let supervisor = AgentAction::new(45.0, -100.0);
    for step in [0, 200, 400, 900, 1400, 1900, 2400, 5000] {
        let w = schedule.supervisor_weight(step);
        let b = blend_action(&actor, [0.0, 0.0], &supervisor, w);
        println!("step {step:5}: weight {w:.3}  bid {:6.2} $/MWh  {:7.2} MWh", b.bid_price, b.quantity);
    }
}
