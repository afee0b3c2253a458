//! Fits a small leaky-ReLU network with Adagrad, checks one gradient against a
//! finite difference and round-trips a snapshot.
//!
//!     cargo run --example network_gradients

use bidsim::neural::Mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Mlp::random(&[2, 16, 16, 1], 0.01, &mut rng).expect("valid dims");
    let target = |x: &[f64]| (3.0 * x[0]).sin() * x[1];

    for epoch in 0..=2000 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let y = net.forward(&x).unwrap()[0];
        // ascent on -0.5 (y - t)^2
        let (g, _) = net.backward(&x, &[target(&x) - y]).unwrap();
        net.adagrad_step(&g, 0.05, 1e-8);
        if epoch % 500 == 0 {
            let mse: f64 = (0..200)
                .map(|i| {
                    let x = [i as f64 / 100.0 - 1.0, 0.5];
                    (net.forward(&x).unwrap()[0] - target(&x)).powi(2)
                })
                .sum::<f64>()
                / 200.0;
            println!("step {epoch:4}: mse {mse:.5}");
        }
    }

    let x = [0.3, -0.7];
    let (g, _) = net.backward(&x, &[1.0]).unwrap();
    let mut params = net.parameters();
    let h = 1e-5;
    let mut probe = net.clone();
    params[0] += h;
    probe.set_parameters(&params).unwrap();
    let up = probe.forward(&x).unwrap()[0];
    params[0] -= 2.0 * h;
    probe.set_parameters(&params).unwrap();
    let down = probe.forward(&x).unwrap()[0];
    println!("d y / d w0: analytic {:.8}, numeric {:.8}", g.flat()[0], (up - down) / (2.0 * h));

    let bytes = net.to_bytes();
    let back = Mlp::from_bytes(&bytes).unwrap();
    println!("snapshot: {} bytes, identical after reload: {}", bytes.len(), back == net);
}
