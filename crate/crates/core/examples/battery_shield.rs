//! Steps a battery and lets the safety shield replace infeasible proposals.
//!
//!     cargo run --example battery_shield

use bidsim::agent::AgentAction;
use bidsim::battery::{BatteryParams, BatteryState};

fn main() {
    let params = BatteryParams {
        eta_charge: 0.9,
        eta_discharge: 0.95,
        ..BatteryParams::default()
    };
    let mut state = BatteryState::new(params, 100.0).expect("valid state");
    let fallback = AgentAction::new(40.0, 0.0);

    for q in [250.0, -300.0, -300.0, 500.0, 400.0, -1000.0] {
        let proposed = AgentAction::new(40.0, q);
        let v = state.violations(&proposed);
        let (executed, replaced) = state.shield(proposed, fallback).expect("idle is always safe");
        let (p_g, p_l) = executed.split();
        state = state.step_soe(p_g, p_l).expect("shielded actions are feasible");
        println!(
            "proposed {q:>7} MWh -> executed {:>7} (replaced: {replaced:<5})  violations {:?}  soe {:.2}",
            executed.quantity,
            v.as_array(),
            state.soe
        );
    }
}
