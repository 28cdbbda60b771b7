//! Small dense networks with manual backpropagation, and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A trainable map from an input vector to one value per action. Parameters live
/// outside the approximator so online and target copies share one structure.
pub trait Approximator {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn n_params(&self) -> usize;
    fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64>;
    /// Adds `Jᵀ · dout` to `grad`, where `J` is the Jacobian of the outputs with
    /// respect to the parameters at `input`.
    fn backward(&self, params: &[f64], input: &[f64], dout: &[f64], grad: &mut [f64]);
}

/// Fully connected tanh network. With no hidden layers it is a linear map, which
/// over one-hot inputs is a lookup table.
///
/// Each layer stores its weights input-major (`w[i * out + o]`) followed by the
/// bias, so zero inputs can be skipped in both passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        Mlp { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Uniform weights in `±1/√fan_in`, zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        params
    }

    /// Activations of every layer, input first.
    fn activations(&self, params: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        let mut acts = vec![input.to_vec()];
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let x = &acts[l];
            let mut z = b.to_vec();
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let row = &w[i * n_out..(i + 1) * n_out];
                    for (zo, wo) in z.iter_mut().zip(row) {
                        *zo += wo * xi;
                    }
                }
            }
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }
}

impl Approximator for Mlp {
    fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        self.activations(params, input).pop().unwrap()
    }

    fn backward(&self, params: &[f64], input: &[f64], dout: &[f64], grad: &mut [f64]) {
        let acts = self.activations(params, input);
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = dout.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &acts[l];
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let g = &mut grad[off + i * n_out..off + (i + 1) * n_out];
                    for (go, d) in g.iter_mut().zip(&delta) {
                        *go += xi * d;
                    }
                }
            }
            for (gb, d) in grad[off + n_in * n_out..off + n_in * n_out + n_out].iter_mut().zip(&delta) {
                *gb += d;
            }
            if l == 0 {
                break;
            }
            let w = &params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (i, p) in prev.iter_mut().enumerate() {
                let row = &w[i * n_out..(i + 1) * n_out];
                let s: f64 = row.iter().zip(&delta).map(|(a, b)| a * b).sum();
                // Hidden activations are tanh outputs.
                *p = s * (1.0 - x[i] * x[i]);
            }
            delta = prev;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
        }
    }
}
