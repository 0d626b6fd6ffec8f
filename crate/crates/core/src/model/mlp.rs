//! Fully connected sigmoid network with softmax output and hand-written
//! backpropagation.
//!
//! Parameters are packed layer by layer: the `out × in` weight matrix in
//! row-major order followed by the `out` biases.

use crate::math::log_sum_exp;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpLayout {
    /// `[input, hidden..., classes]`
    widths: Vec<usize>,
}

/// Reusable activation buffers for one forward/backward pass.
#[derive(Clone, Debug)]
pub struct MlpScratch {
    /// Activations per layer; `acts[0]` is the input copy, the last entry holds
    /// the output logits.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpLayout {
    pub fn new(input: usize, hidden: &[usize], classes: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(classes);
        MlpLayout { widths }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn scratch(&self) -> MlpScratch {
        MlpScratch {
            acts: self.widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: vec![0.0; *self.widths.iter().max().unwrap()],
            delta_prev: vec![0.0; *self.widths.iter().max().unwrap()],
        }
    }

    /// Runs the forward pass, leaving logits in the last activation buffer.
    fn forward(&self, theta: &[f64], x: &[f64], s: &mut MlpScratch) {
        s.acts[0].copy_from_slice(x);
        let layers = self.widths.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &theta[offset..offset + n_out * n_in];
            let b = &theta[offset + n_out * n_in..offset + n_out * n_in + n_out];
            offset += n_out * n_in + n_out;
            let (before, after) = s.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z: f64 = b[j] + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out[j] = if l + 1 < layers { sigmoid(z) } else { z };
            }
        }
    }

    /// Softmax class probabilities.
    pub fn probabilities(&self, theta: &[f64], x: &[f64], s: &mut MlpScratch) -> Vec<f64> {
        self.forward(theta, x, s);
        let logits = s.acts.last().unwrap();
        let lse = log_sum_exp(logits);
        logits.iter().map(|z| (z - lse).exp()).collect()
    }

    /// Predicted class (argmax of the logits).
    pub fn predict(&self, theta: &[f64], x: &[f64], s: &mut MlpScratch) -> usize {
        self.forward(theta, x, s);
        let logits = s.acts.last().unwrap();
        let mut best = 0;
        for (k, z) in logits.iter().enumerate() {
            if *z > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Log softmax probability of `label`.
    pub fn log_lik(&self, theta: &[f64], x: &[f64], label: u32, s: &mut MlpScratch) -> f64 {
        self.forward(theta, x, s);
        let logits = s.acts.last().unwrap();
        logits[label as usize] - log_sum_exp(logits)
    }

    /// Adds the gradient of the label log-probability into `grad`; returns the
    /// log-probability.
    pub fn accumulate(
        &self,
        theta: &[f64],
        x: &[f64],
        label: u32,
        s: &mut MlpScratch,
        grad: &mut [f64],
    ) -> f64 {
        self.forward(theta, x, s);
        let layers = self.widths.len() - 1;
        let classes = self.classes();
        let lse = log_sum_exp(&s.acts[layers]);
        let value = s.acts[layers][label as usize] - lse;
        // d log p / d logits = onehot - softmax
        for k in 0..classes {
            let p = (s.acts[layers][k] - lse).exp();
            s.delta[k] = f64::from(u8::from(k == label as usize)) - p;
        }
        let mut end = theta.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let start = end - (n_out * n_in + n_out);
            let input = &s.acts[l];
            {
                let (gw, gb) = grad[start..end].split_at_mut(n_out * n_in);
                for j in 0..n_out {
                    let d = s.delta[j];
                    gb[j] += d;
                    for (g, a) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if l > 0 {
                let w = &theta[start..start + n_out * n_in];
                for i in 0..n_in {
                    let back: f64 = (0..n_out).map(|j| w[j * n_in + i] * s.delta[j]).sum();
                    let a = input[i];
                    s.delta_prev[i] = back * a * (1.0 - a);
                }
                std::mem::swap(&mut s.delta, &mut s.delta_prev);
            }
            end = start;
        }
        value
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
