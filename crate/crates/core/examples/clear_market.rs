//! Clears a small merit-order market and shows how a battery bid moves the
//! price.
//!
//!     cargo run --example clear_market

use bidsim::market::{clear_market, dispatch_cost, AgentId, SupplyBid};

fn main() {
    let mut bids = vec![
        SupplyBid::new(AgentId(1), 10.0, 500.0),
        SupplyBid::new(AgentId(2), 30.0, 500.0),
        SupplyBid::new(AgentId(3), 50.0, 500.0),
        SupplyBid::new(AgentId(4), 70.0, 500.0),
    ];
    let demand = 1300.0;

    let out = clear_market(&bids, demand).expect("enough supply");
    println!("without battery: price {} $/MWh, cost {}", out.clearing_price, dispatch_cost(&bids, &out));

    // a 300 MWh offer at 20 $/MWh displaces the marginal block
    bids.push(SupplyBid::new(AgentId(0), 20.0, 300.0));
    let out = clear_market(&bids, demand).expect("enough supply");
    println!("with battery:    price {} $/MWh, cost {}", out.clearing_price, dispatch_cost(&bids, &out));
    let mut dispatch: Vec<_> = out.dispatch.iter().collect();
    dispatch.sort_by_key(|(id, _)| id.0);
    for (id, q) in dispatch {
        println!("  {id}: {q} MWh, paid {}", q * out.clearing_price);
    }
}
