//! Dense feed-forward network with leaky-ReLU hidden layers, exact
//! reverse-mode gradients and Adagrad updates.
//!
//! Parameters are stored layer by layer, weights row-major
//! (`outputs x inputs`) followed by biases. Every flat view of parameters or
//! gradients in this module uses that order.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SNAPSHOT_MAGIC: &[u8; 8] = b"BIDSIMNN";

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("network needs at least an input and an output width, got {0:?}")]
    InvalidLayout(Vec<usize>),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Hyperparameters shared by the actor and critic networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub leak: f64,
    pub adagrad_epsilon: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 6,
            hidden_width: 64,
            leak: 0.01,
            adagrad_epsilon: 1e-8,
        }
    }
}

impl NetworkConfig {
    pub fn layer_dims(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut dims = vec![inputs];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        dims.push(outputs);
        dims
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    acc_weights: Vec<f64>,
    acc_biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            acc_weights: vec![0.0; inputs * outputs],
            acc_biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(
            |(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b,
        ));
    }
}

/// Gradients with the same layout as an [`Mlp`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|&g| g == 0.0))
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
struct Trace {
    /// Input to each layer; `activations[0]` is the network input.
    activations: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Dense>,
    leak: f64,
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(dims: &[usize], leak: f64) -> Result<Self, NeuralError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NeuralError::InvalidLayout(dims.to_vec()));
        }
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            leak,
        })
    }

    /// Weights and biases drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], leak: f64, rng: &mut R) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(dims, leak)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for p in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    pub fn output_len(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn accumulators(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.acc_weights.iter().chain(l.acc_biases.iter()).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        check_len(self.parameter_count(), flat.len())?;
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    fn set_accumulators(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        check_len(self.parameter_count(), flat.len())?;
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.acc_weights
                .iter_mut()
                .chain(l.acc_biases.iter_mut())
                .for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    fn activate(&self, x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            self.leak * x
        }
    }

    fn activate_slope(&self, x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else {
            self.leak
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        check_len(self.input_len(), input.len())?;
        let mut x = input.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&x, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = self.activate(*v));
            }
            std::mem::swap(&mut x, &mut z);
        }
        Ok(x)
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let mut activations = vec![input.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(activations.last().unwrap(), &mut z);
            if i < last {
                activations.push(z.iter().map(|&v| self.activate(v)).collect());
            }
            pre.push(z);
        }
        Trace { activations, pre }
    }

    /// Backpropagates `upstream` (gradient of some scalar with respect to the
    /// network output) and returns parameter gradients and the input gradient.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NeuralError> {
        check_len(self.input_len(), input.len())?;
        check_len(self.output_len(), upstream.len())?;
        let trace = self.trace(input);
        let last = self.layers.len() - 1;

        let mut layers = vec![(Vec::new(), Vec::new()); self.layers.len()];
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < last {
                for (d, &z) in delta.iter_mut().zip(&trace.pre[i]) {
                    *d *= self.activate_slope(z);
                }
            }
            let x = &trace.activations[i];
            let mut gw = Vec::with_capacity(layer.weights.len());
            for &d in &delta {
                gw.extend(x.iter().map(|&xi| d * xi));
            }
            let mut grad_input = vec![0.0; layer.inputs];
            for (row, &d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                for (g, &w) in grad_input.iter_mut().zip(row) {
                    *g += w * d;
                }
            }
            layers[i] = (gw, delta);
            delta = grad_input;
        }
        Ok((Gradients { layers }, delta))
    }

    /// One Adagrad step along `grads`: the accumulator gathers `g^2` and the
    /// parameter moves by `learning_rate * g / sqrt(acc + epsilon)`.
    ///
    /// The step follows the sign of `grads`; negate them to descend.
    pub fn adagrad_step(&mut self, grads: &Gradients, learning_rate: f64, epsilon: f64) {
        assert_eq!(grads.layers.len(), self.layers.len(), "gradient layout mismatch");
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            assert_eq!(gw.len(), layer.weights.len(), "gradient layout mismatch");
            assert_eq!(gb.len(), layer.biases.len(), "gradient layout mismatch");
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let accs = layer.acc_weights.iter_mut().chain(layer.acc_biases.iter_mut());
            for ((p, acc), &g) in params.zip(accs).zip(gw.iter().chain(gb.iter())) {
                if g == 0.0 {
                    continue;
                }
                *acc += g * g;
                *p += learning_rate * g / (*acc + epsilon).sqrt();
            }
        }
    }

    /// Serializes layer widths, leak, parameters and Adagrad accumulators as
    /// little-endian 64-bit values behind an 8-byte magic tag.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (4 + self.dims.len() + 2 * self.parameter_count()));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u64).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.leak.to_le_bytes());
        for v in self.parameters().into_iter().chain(self.accumulators()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        let bad = |m: &str| NeuralError::Snapshot(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(bad("missing magic tag"));
        }
        if !bytes.len().is_multiple_of(8) {
            return Err(bad("length is not a whole number of 64-bit words"));
        }
        let words: Vec<[u8; 8]> = bytes[8..]
            .chunks_exact(8)
            .map(|c| c.try_into().unwrap())
            .collect();
        let n_dims = u64::from_le_bytes(words[0]) as usize;
        if words.len() < 1 + n_dims + 1 {
            return Err(bad("truncated header"));
        }
        let dims: Vec<usize> = words[1..=n_dims]
            .iter()
            .map(|w| u64::from_le_bytes(*w) as usize)
            .collect();
        let leak = f64::from_le_bytes(words[1 + n_dims]);
        let mut net = Self::zeros(&dims, leak)?;
        let body: Vec<f64> = words[2 + n_dims..].iter().map(|w| f64::from_le_bytes(*w)).collect();
        let count = net.parameter_count();
        if body.len() != 2 * count {
            return Err(bad("body length does not match layer widths"));
        }
        net.set_parameters(&body[..count])?;
        net.set_accumulators(&body[count..])?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<(), NeuralError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NeuralError::DimensionMismatch { expected, actual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2], 0.01).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut net = Mlp::zeros(&[2, 2], 0.01).unwrap();
        net.set_parameters(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[3.5, -7.0]).unwrap(), vec![3.5, -7.0]);
    }

    #[test]
    fn hand_computed_two_layer_pass() {
        // hidden = leaky([[1, 2], [3, -1]] x + [0.5, 0]), out = [2, -1] hidden + 0.25
        let mut net = Mlp::zeros(&[2, 2, 1], 0.1).unwrap();
        net.set_parameters(&[1.0, 2.0, 3.0, -1.0, 0.5, 0.0, 2.0, -1.0, 0.25]).unwrap();
        // x = [1, -1]: pre = [1 - 2 + 0.5, 3 + 1] = [-0.5, 4]; hidden = [-0.05, 4]
        // out = -0.1 - 4 + 0.25 = -3.85
        let out = net.forward(&[1.0, -1.0]).unwrap();
        assert!((out[0] - (-3.85)).abs() < 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let net = Mlp::zeros(&[3, 2], 0.01).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(NeuralError::DimensionMismatch { expected: 3, actual: 1 })
        ));
        assert!(net.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(Mlp::zeros(&[3], 0.01).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(&[3, 5, 2], 0.01, &mut rng).unwrap();
        let (g, gi) = net.backward(&[0.3, -0.2, 0.9], &[0.0, 0.0]).unwrap();
        assert!(g.is_zero());
        assert!(gi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_linear_gradient() {
        let mut net = Mlp::zeros(&[1, 1], 0.01).unwrap();
        net.set_parameters(&[0.7, 0.1]).unwrap();
        let (g, gi) = net.backward(&[2.5], &[1.0]).unwrap();
        assert_eq!(g.flat(), vec![2.5, 1.0]);
        assert_eq!(gi, vec![0.7]);
    }

    #[test]
    fn adagrad_single_step() {
        let mut net = Mlp::zeros(&[1, 1], 0.01).unwrap();
        let (g, _) = net.backward(&[2.0], &[1.0]).unwrap();
        // weight gradient 2, bias gradient 1
        net.adagrad_step(&g, 0.1, 0.0);
        assert_eq!(net.accumulators(), vec![4.0, 1.0]);
        assert!((net.parameters()[0] - 0.1).abs() < 1e-15);

        let before = net.parameters()[0];
        net.adagrad_step(&g, 0.1, 0.0);
        let second = net.parameters()[0] - before;
        assert!(second.abs() < 0.1);
    }

    #[test]
    fn adagrad_ignores_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::random(&[2, 3, 1], 0.01, &mut rng).unwrap();
        let before = net.clone();
        let (g, _) = net.backward(&[1.0, 1.0], &[0.0]).unwrap();
        net.adagrad_step(&g, 0.1, 1e-8);
        assert_eq!(net, before);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Mlp::random(&[5, 4, 4, 2], 0.01, &mut rng).unwrap();
        let (g, _) = net.backward(&[0.1, 0.2, 0.3, 0.4, 0.5], &[1.0, -1.0]).unwrap();
        net.adagrad_step(&g, 0.01, 1e-8);
        let back = Mlp::from_bytes(&net.to_bytes()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_bytes(b"not a network").is_err());
        let mut truncated = net.to_bytes();
        truncated.truncate(truncated.len() - 8);
        assert!(Mlp::from_bytes(&truncated).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = Mlp::random(&[5, 8, 2], 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = Mlp::random(&[5, 8, 2], 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }
}
