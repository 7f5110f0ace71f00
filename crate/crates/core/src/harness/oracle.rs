//! Double-precision reference network.
//!
//! Same shape, same initial weights (before quantization) and same
//! no-bias structure as the fixed-point simulator, but with exact tanh,
//! softmax and cross-entropy. All fidelity tolerances are measured
//! against this.

use crate::network::{init_weights_real, NetworkConfig, NetworkState};
use crate::lut::LutKind;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleNet {
    activation: LutKind,
    /// `(d_in, d_out)` per layer.
    layers: Vec<(usize, usize)>,
    /// Row-major `d_out x d_in` per layer.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrace {
    pub input: Vec<f64>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Vec<f64>>,
    /// Post-activations of the hidden layers.
    pub post: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub yhat: Vec<f64>,
}

fn act(kind: LutKind, x: f64) -> f64 {
    kind.eval_f64(x)
}

fn act_deriv(kind: LutKind, x: f64) -> f64 {
    kind.derivative().map_or(1.0, |d| d.eval_f64(x))
}

fn matvec(w: &[f64], d_in: usize, x: &[f64]) -> Vec<f64> {
    w.chunks(d_in)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `e^{z_j} / sum_k e^{z_k}`, shifted by the max for stability.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl OracleNet {
    /// The unquantized initial weights `init_network` draws for `cfg`.
    pub fn from_seed(cfg: &NetworkConfig) -> Self {
        OracleNet {
            activation: cfg.activation,
            layers: cfg.layers(),
            weights: init_weights_real(cfg),
        }
    }

    /// Real values of a fixed-point state's weights.
    pub fn from_state(cfg: &NetworkConfig, state: &NetworkState) -> Self {
        OracleNet {
            activation: cfg.activation,
            layers: cfg.layers(),
            weights: state
                .weights
                .iter()
                .map(|w| w.data().iter().map(|v| v.to_f64()).collect())
                .collect(),
        }
    }

    pub fn from_weights(activation: LutKind, layers: Vec<(usize, usize)>, weights: Vec<Vec<f64>>) -> Self {
        assert_eq!(layers.len(), weights.len());
        for (&(i, o), w) in layers.iter().zip(&weights) {
            assert_eq!(w.len(), i * o);
        }
        OracleNet {
            activation,
            layers,
            weights,
        }
    }

    pub fn layers(&self) -> &[(usize, usize)] {
        &self.layers
    }

    pub fn trace(&self, x: &[f64]) -> OracleTrace {
        assert_eq!(x.len(), self.layers[0].0, "input dimension");
        let n = self.layers.len();
        let mut pre = Vec::with_capacity(n - 1);
        let mut post = Vec::with_capacity(n - 1);
        let mut cur = x.to_vec();
        for l in 0..n - 1 {
            let s = matvec(&self.weights[l], self.layers[l].0, &cur);
            cur = s.iter().map(|&v| act(self.activation, v)).collect();
            pre.push(s);
            post.push(cur.clone());
        }
        let z = matvec(&self.weights[n - 1], self.layers[n - 1].0, &cur);
        let yhat = softmax(&z);
        OracleTrace {
            input: x.to_vec(),
            pre,
            post,
            z,
            yhat,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).yhat
    }

    /// `-ln yhat[label]`.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        -self.forward(x)[label].ln()
    }

    /// Exact gradient of [`Self::loss`] for every weight, row-major per layer.
    pub fn backward(&self, x: &[f64], label: usize) -> Vec<Vec<f64>> {
        let t = self.trace(x);
        let n = self.layers.len();
        let mut delta: Vec<f64> = t.yhat.clone();
        delta[label] -= 1.0;
        let mut grads = vec![Vec::new(); n];
        for l in (0..n).rev() {
            let input = if l == 0 { &t.input } else { &t.post[l - 1] };
            let (d_in, d_out) = self.layers[l];
            let mut g = Vec::with_capacity(d_in * d_out);
            for d in &delta {
                g.extend(input.iter().map(|v| d * v));
            }
            grads[l] = g;
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..d_in)
                    .map(|j| {
                        let back: f64 = (0..d_out).map(|i| w[i * d_in + j] * delta[i]).sum();
                        back * act_deriv(self.activation, t.pre[l - 1][j])
                    })
                    .collect();
            }
        }
        grads
    }

    /// Central finite differences of the loss, step `h`.
    pub fn finite_diff(&self, x: &[f64], label: usize, h: f64) -> Vec<Vec<f64>> {
        let mut probe = self.clone();
        let mut out = Vec::with_capacity(self.weights.len());
        for l in 0..self.weights.len() {
            let mut g = Vec::with_capacity(self.weights[l].len());
            for k in 0..self.weights[l].len() {
                let w0 = self.weights[l][k];
                probe.weights[l][k] = w0 + h;
                let up = probe.loss(x, label);
                probe.weights[l][k] = w0 - h;
                let down = probe.loss(x, label);
                probe.weights[l][k] = w0;
                g.push((up - down) / (2.0 * h));
            }
            out.push(g);
        }
        out
    }

    /// One epoch of plain mini-batch gradient descent in dataset order;
    /// returns `(mean_loss, accuracy)` measured before each batch's update.
    pub fn train_epoch(&mut self, rows: &[(usize, Vec<f64>)], batch: usize, gamma: f64) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for chunk in rows.chunks(batch.max(1)) {
            let mut sum: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
            for (label, x) in chunk {
                let y = self.forward(x);
                loss -= y[*label].ln();
                correct += usize::from(argmax(&y) == *label);
                for (s, g) in sum.iter_mut().zip(self.backward(x, *label)) {
                    for (a, b) in s.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
            for (w, s) in self.weights.iter_mut().zip(&sum) {
                for (a, b) in w.iter_mut().zip(s) {
                    *a -= gamma * b;
                }
            }
        }
        let n = rows.len() as f64;
        (loss / n, correct as f64 / n)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn oracle_forward(net: &OracleNet, x: &[f64]) -> Vec<f64> {
    net.forward(x)
}

pub fn oracle_backward(net: &OracleNet, x: &[f64], label: usize) -> Vec<Vec<f64>> {
    net.backward(x, label)
}
