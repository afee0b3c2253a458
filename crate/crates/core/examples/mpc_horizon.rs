//! Plans a day of arbitrage against a two-peak price forecast, and checks the
//! planner against brute-force enumeration on a small instance.
//!
//!     cargo run --release --example mpc_horizon

use bidsim::battery::BatteryParams;
use bidsim::mpc::{enumerate_oracle, solve_horizon, PriceForecast};

fn main() {
    let params = BatteryParams::default();
    let prices: Vec<f64> = (0..48)
        .map(|t| {
            let h = t as f64 / 2.0;
            30.0 + 25.0 * (-((h - 8.0) / 2.0).powi(2)).exp() + 40.0 * (-((h - 19.0) / 2.0).powi(2)).exp()
        })
        .collect();
    let forecast = PriceForecast::new(prices.clone()).expect("valid forecast");
    let plan = solve_horizon(0.0, &forecast, &params, 344).expect("feasible start");
    println!("forecast revenue over the day: {:.0} $", plan.objective);
    for (t, (s, p)) in plan.schedule.iter().zip(&prices).enumerate() {
        if s.p_g > 0.0 || s.p_l > 0.0 {
            println!("{:02}:{:02}  price {p:5.1}  sell {:6.1}  buy {:6.1}  soe {:7.1}", t / 2, 30 * (t % 2), s.p_g, s.p_l, s.soe);
        }
    }

    let small = PriceForecast::new(vec![20.0, 60.0, 15.0, 70.0]).unwrap();
    let dp = solve_horizon(0.0, &small, &params, 8).unwrap();
    let oracle = enumerate_oracle(0.0, &small, &params, 8).unwrap();
    println!("4-step check: dp {} vs enumeration {}", dp.objective, oracle.objective);
}
