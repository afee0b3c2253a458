//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance runner.

#![allow(dead_code)]

use bidsim::agent::{MarketObservation, Normalizer, SacConfig, SupervisedActorCritic, ACTION_DIM};
use bidsim::battery::BatteryParams;
use bidsim::market::{AgentId, ClearingOutcome, SupplyBid};
use bidsim::mpc::{HorizonPlan, PriceForecast};
use bidsim::neural::{Mlp, NetworkConfig};
use rand::Rng;

// ---------------------------------------------------------------- market

/// Random instance with integer prices and quantities, demand within supply.
pub fn random_market<R: Rng>(rng: &mut R) -> (Vec<SupplyBid>, f64) {
    let n = rng.random_range(1..=8);
    let bids: Vec<SupplyBid> = (0..n)
        .map(|i| {
            SupplyBid::new(
                AgentId(i as u32),
                rng.random_range(0..=12) as f64,
                rng.random_range(0..=20) as f64,
            )
        })
        .collect();
    let total: u32 = bids.iter().map(|b| b.quantity as u32).sum();
    let demand = rng.random_range(0..=total) as f64;
    (bids, demand)
}

/// Least cost of any integer dispatch `0 <= P_i <= q_i` with `sum P_i = demand`.
///
/// Exhaustive over the integer grid, organised as a table over partial sums
/// so it stays cheap for eight bids of twenty units.
pub fn brute_force_min_cost(bids: &[SupplyBid], demand: f64) -> Option<f64> {
    let d = demand as usize;
    let mut best: Vec<Option<f64>> = vec![None; d + 1];
    best[0] = Some(0.0);
    for bid in bids {
        let q = bid.quantity as usize;
        let mut next: Vec<Option<f64>> = vec![None; d + 1];
        for (s, cost) in best.iter().enumerate() {
            let Some(cost) = cost else { continue };
            for take in 0..=q.min(d - s) {
                let c = cost + bid.price * take as f64;
                let slot = &mut next[s + take];
                if slot.is_none_or(|old| c < old) {
                    *slot = Some(c);
                }
            }
        }
        best = next;
    }
    best[d]
}

/// Checks the four structural properties of a clearing outcome.
pub fn clearing_invariants(bids: &[SupplyBid], out: &ClearingOutcome) -> Result<(), String> {
    let tol = 1e-9;
    for b in bids {
        let p = out.dispatched(b.agent);
        if p < 0.0 || p > b.quantity + tol {
            return Err(format!("{:?} dispatched {p} outside [0, {}]", b.agent, b.quantity));
        }
        if p > tol && b.price > out.clearing_price {
            return Err(format!("{:?} dispatched above the clearing price", b.agent));
        }
        if p < b.quantity - tol && b.price < out.clearing_price {
            return Err(format!("{:?} left undispatched below the clearing price", b.agent));
        }
    }
    let sum: f64 = out.dispatch.values().sum();
    if sum != out.served_demand {
        return Err(format!("dispatch sums to {sum}, served demand {}", out.served_demand));
    }
    Ok(())
}

// ---------------------------------------------------------------- planner

pub struct MpcInstance {
    pub soe0: f64,
    pub forecast: PriceForecast,
    pub params: BatteryParams,
    pub levels: usize,
}

/// Random planning problem whose arithmetic is exact in binary floating
/// point: integer prices, power-of-two grid steps and efficiencies, start
/// on a grid point. Sized so the exhaustive oracle stays within budget.
pub fn random_exact_mpc<R: Rng>(rng: &mut R) -> MpcInstance {
    let levels = rng.random_range(2..=11);
    let max_h = (1..=6)
        .rev()
        .find(|&h| (levels as f64).powi(h) <= 1e6)
        .expect("a one-step horizon always fits");
    let horizon = rng.random_range(1..=max_h as usize);
    let step = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let etas = [1.0, 0.5, 0.25];
    let floor = rng.random_range(0..=3) as f64 * step;
    let params = BatteryParams {
        energy_capacity: floor + step * (levels - 1) as f64,
        soe_floor: floor,
        max_charge: step * rng.random_range(1..=4) as f64,
        max_discharge: step * rng.random_range(1..=4) as f64,
        eta_charge: etas[rng.random_range(0..3)],
        eta_discharge: etas[rng.random_range(0..3)],
    };
    let soe0 = floor + step * rng.random_range(0..levels) as f64;
    let prices = (0..horizon).map(|_| rng.random_range(0..=100) as f64).collect();
    MpcInstance {
        soe0,
        forecast: PriceForecast::new(prices).unwrap(),
        params,
        levels,
    }
}

/// No step both charges and discharges.
pub fn modes_exclusive(plan: &HorizonPlan) -> bool {
    plan.schedule.iter().all(|s| s.p_g * s.p_l == 0.0)
}

/// Replays a plan through the storage dynamics and checks every limit.
pub fn plan_feasible(plan: &HorizonPlan, soe0: f64, params: &BatteryParams) -> bool {
    let tol = params.tolerance();
    let mut soe = soe0;
    plan.schedule.iter().all(|s| {
        soe = soe - params.eta_discharge * s.p_g + params.eta_charge * s.p_l;
        s.p_g >= 0.0
            && s.p_l >= 0.0
            && s.p_g <= params.max_discharge + tol
            && s.p_l <= params.max_charge + tol
            && soe >= params.soe_floor - tol
            && soe <= params.energy_capacity + tol
            && (soe - s.soe).abs() <= tol
    })
}

// ---------------------------------------------------------------- gradients

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Relative error with a small absolute floor so that parameters whose
/// gradient is essentially zero do not amplify rounding noise.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` in every coordinate of `x`.
pub fn central_difference(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let hi = f(&probe);
            probe[i] = orig - FD_STEP;
            let lo = f(&probe);
            probe[i] = orig;
            (hi - lo) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest relative error between two gradient vectors.
pub fn worst_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Small random architecture so that full finite-difference sweeps are cheap.
pub fn random_small_net<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Mlp {
    let hidden = rng.random_range(1..=3);
    let mut dims = vec![inputs];
    dims.extend((0..hidden).map(|_| rng.random_range(2..=8)));
    dims.push(outputs);
    Mlp::random(&dims, 0.01, rng).unwrap()
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Worst relative error of `backward` against finite differences of
/// `upstream . forward(x)`, over parameters and inputs.
pub fn backward_error<R: Rng>(rng: &mut R) -> f64 {
    let inputs = rng.random_range(1..=6);
    let outputs = rng.random_range(1..=3);
    let net = random_small_net(rng, inputs, outputs);
    let x = random_vec(rng, inputs, 1.0);
    let up = random_vec(rng, outputs, 1.0);
    let objective = |n: &Mlp, x: &[f64]| -> f64 { n.forward(x).unwrap().iter().zip(&up).map(|(y, u)| y * u).sum() };

    let (grads, input_grad) = net.backward(&x, &up).unwrap();
    let mut probe = net.clone();
    let numeric = central_difference(&net.parameters(), |p| {
        probe.set_parameters(p).unwrap();
        objective(&probe, &x)
    });
    let numeric_input = central_difference(&x, |xi| objective(&net, xi));
    worst_rel_err(&grads.flat(), &numeric).max(worst_rel_err(&input_grad, &numeric_input))
}

pub fn normalizer() -> Normalizer {
    Normalizer {
        price_scale: 100.0,
        demand_scale: 5000.0,
        energy_capacity: 1029.0,
        steps_per_day: 48,
        quantity_scale: 300.0,
    }
}

pub fn random_observation<R: Rng>(rng: &mut R) -> MarketObservation {
    MarketObservation {
        price_forecast_now: rng.random_range(0.0..100.0),
        last_clearing_price: rng.random_range(0.0..100.0),
        soe: rng.random_range(0.0..1029.0),
        time_of_day: rng.random_range(0..48),
        demand_forecast: rng.random_range(1000.0..4000.0),
    }
}

/// Agent with small random networks and the given config otherwise.
pub fn random_small_agent<R: Rng>(rng: &mut R) -> SupervisedActorCritic {
    let config = SacConfig {
        network: NetworkConfig {
            hidden_layers: rng.random_range(1..=3),
            hidden_width: rng.random_range(3..=8),
            ..NetworkConfig::default()
        },
        ..SacConfig::default()
    };
    SupervisedActorCritic::new(config, normalizer(), rng).unwrap()
}

fn with_actor(agent: &SupervisedActorCritic, params: &[f64]) -> SupervisedActorCritic {
    let mut actor = agent.actor().clone();
    actor.set_parameters(params).unwrap();
    SupervisedActorCritic::from_networks(actor, agent.critic().clone(), agent.config().clone(), *agent.normalizer())
}

fn with_critic(agent: &SupervisedActorCritic, params: &[f64]) -> SupervisedActorCritic {
    let mut critic = agent.critic().clone();
    critic.set_parameters(params).unwrap();
    SupervisedActorCritic::from_networks(agent.actor().clone(), critic, agent.config().clone(), *agent.normalizer())
}

/// Supervision loss gradient against finite differences of the loss.
pub fn supervision_error<R: Rng>(rng: &mut R) -> f64 {
    let agent = random_small_agent(rng);
    let obs = random_observation(rng);
    let target = normalizer().from_unit([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
    let (_, grads) = agent.supervision_loss(&obs, &target);
    let numeric = central_difference(&agent.actor().parameters(), |p| {
        with_actor(&agent, p).supervision_loss(&obs, &target).0
    });
    worst_rel_err(&grads.flat(), &numeric)
}

/// Critic value gradient against finite differences of the value.
pub fn critic_error<R: Rng>(rng: &mut R) -> f64 {
    let agent = random_small_agent(rng);
    let obs = random_observation(rng);
    let grads = agent.value_gradient(&obs);
    let numeric = central_difference(&agent.critic().parameters(), |p| with_critic(&agent, p).value(&obs));
    worst_rel_err(&grads.flat(), &numeric)
}

/// Gaussian log-density of `sample` around the actor mean, up to a constant.
pub fn log_policy(agent: &SupervisedActorCritic, obs: &MarketObservation, sample: [f64; ACTION_DIM]) -> f64 {
    let mean = agent.actor_mean_unit(obs);
    let var = agent.config().sigma_policy.powi(2);
    -0.5 * ((sample[0] - mean[0]).powi(2) + (sample[1] - mean[1]).powi(2)) / var
}

/// Score-function gradient against finite differences of the log-density.
pub fn log_policy_error<R: Rng>(rng: &mut R) -> f64 {
    let agent = random_small_agent(rng);
    let obs = random_observation(rng);
    let sample = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
    let grads = agent.log_policy_gradient(&obs, sample);
    let numeric = central_difference(&agent.actor().parameters(), |p| {
        log_policy(&with_actor(&agent, p), &obs, sample)
    });
    worst_rel_err(&grads.flat(), &numeric)
}
