//! Forward and backward processes of the full network, composed from the
//! datapath units, plus the training epoch loop.
//!
//! Layer `l` holds a `d_{l+1} x d_l` weight matrix. Hidden layers apply the
//! configured activation LUT; the output layer feeds the hardware softmax.
//! There are no bias terms.

mod model;

pub use model::{load_model, save_model, ModelHeader};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datapath::{
    self, accumulate_update, accumulate_update_sum, activation_bank, hadamard, mac_bank_matvec,
    outer_product, softmax_unit, vec_sub, Cycles, GradientSum, MacBankConfig, SignalVector,
    WeightMatrix,
};
use crate::error::{Error, Result};
use crate::fxp::{self, FxpValue, QFormat};
use crate::harness::Dataset;
use crate::lut::{self, build_lut, LutKind, LutTable};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    /// Activation of every hidden layer.
    pub activation: LutKind,
    pub fmt: QFormat,
    pub bank_width: usize,
    pub softmax_limit: u64,
    /// Learning rate, in `fmt`.
    pub gamma: FxpValue,
    pub seed: u64,
    pub lut_size: usize,
}

impl NetworkConfig {
    /// Defaults for everything except the layer shape.
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        let fmt = QFormat::Q2_14;
        NetworkConfig {
            input_dim,
            hidden_dims,
            output_dim,
            activation: LutKind::Tanh,
            fmt,
            bank_width: datapath::DEFAULT_BANK_WIDTH,
            softmax_limit: lut::DEFAULT_SOFTMAX_LIMIT,
            gamma: FxpValue::from_raw(1 << (fmt.frac_bits() - 1), fmt),
            seed: 0,
            lut_size: lut::DEFAULT_LUT_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_dims.is_empty() {
            return bad("at least one hidden layer is required".into());
        }
        if self.dims().contains(&0) {
            return bad(format!("layer dims {:?} must all be >= 1", self.dims()));
        }
        if !self.activation.is_activation() {
            return bad(format!("`{}` is not an activation", self.activation));
        }
        if self.bank_width == 0 {
            return bad("bank width must be >= 1".into());
        }
        if self.softmax_limit == 0 {
            return bad("softmax limit must be >= 1".into());
        }
        if self.gamma.fmt() != self.fmt {
            return Err(Error::FormatMismatch(self.gamma.fmt(), self.fmt));
        }
        if self.gamma.raw() <= 0 {
            return bad(format!("gamma {} must be > 0", self.gamma));
        }
        if self.lut_size < 16 || !self.lut_size.is_power_of_two() {
            return bad(format!("LUT size {} must be a power of two >= 16", self.lut_size));
        }
        Ok(())
    }

    /// `[T, H1, H2, ..., K]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }

    /// `(d_in, d_out)` for every weight matrix.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        self.dims().windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn bank(&self) -> Result<MacBankConfig> {
        MacBankConfig::new(self.bank_width, self.fmt)
    }
}

/// The tables loaded into the LUT banks.
#[derive(Debug, Clone, PartialEq)]
pub struct LutSet {
    pub activation: LutTable,
    pub derivative: LutTable,
    pub exp: LutTable,
}

impl LutSet {
    pub fn build(cfg: &NetworkConfig) -> Result<Self> {
        let (lo, hi) = lut::ACTIVATION_RANGE;
        let deriv = cfg
            .activation
            .derivative()
            .ok_or_else(|| Error::InvalidConfig(format!("`{}` is not an activation", cfg.activation)))?;
        Ok(LutSet {
            activation: build_lut(cfg.activation, cfg.fmt, lo, hi, cfg.lut_size)?,
            derivative: build_lut(deriv, cfg.fmt, lo, hi, cfg.lut_size)?,
            exp: lut::softmax_exp_lut(cfg.fmt, cfg.lut_size)?,
        })
    }

    pub fn tables(&self) -> [&LutTable; 3] {
        [&self.activation, &self.derivative, &self.exp]
    }
}

/// Weight buffers and LUT contents.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub weights: Vec<WeightMatrix>,
    pub luts: LutSet,
}

impl NetworkState {
    /// Wrap existing weights, checking they chain through `cfg`'s shape.
    pub fn from_weights(cfg: &NetworkConfig, weights: Vec<WeightMatrix>) -> Result<Self> {
        cfg.validate()?;
        let layers = cfg.layers();
        if weights.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "{} weight matrices for {} layers",
                weights.len(),
                layers.len()
            )));
        }
        for (i, (w, &(d_in, d_out))) in weights.iter().zip(&layers).enumerate() {
            if w.rows() != d_out || w.cols() != d_in {
                return Err(Error::Dimension(format!(
                    "layer {i}: {}x{} matrix, expected {d_out}x{d_in}",
                    w.rows(),
                    w.cols()
                )));
            }
            if let Some(v) = w.data().iter().find(|v| v.fmt() != cfg.fmt) {
                return Err(Error::FormatMismatch(v.fmt(), cfg.fmt));
            }
        }
        Ok(NetworkState {
            weights,
            luts: LutSet::build(cfg)?,
        })
    }
}

/// Initial weights in double precision, before quantization.
///
/// Uniform in `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))` clamped to the
/// format range, drawn layer by layer in row-major order from a ChaCha8
/// stream seeded with `cfg.seed`. Each inner vector is row-major.
pub fn init_weights_real(cfg: &NetworkConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    cfg.layers()
        .into_iter()
        .map(|(d_in, d_out)| {
            let r = init_bound(cfg.fmt, d_in, d_out);
            (0..d_in * d_out).map(|_| rng.random_range(-r..=r)).collect()
        })
        .collect()
}

pub fn init_bound(fmt: QFormat, fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt().min(fmt.max_value())
}

pub fn init_network(cfg: &NetworkConfig) -> Result<NetworkState> {
    cfg.validate()?;
    let weights = init_weights_real(cfg)
        .into_iter()
        .zip(cfg.layers())
        .map(|(vals, (d_in, d_out))| {
            let data = vals
                .into_iter()
                .map(|v| fxp::quantize(v, cfg.fmt))
                .collect::<Result<Vec<_>>>()?;
            WeightMatrix::new(d_out, d_in, data)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkState::from_weights(cfg, weights)
}

/// Pre- and post-activation of one hidden layer (the S and M RAMs).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub s: SignalVector,
    pub m: SignalVector,
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: SignalVector,
    pub hidden: Vec<LayerTrace>,
    pub z: SignalVector,
    pub yhat: SignalVector,
    pub cycles: Cycles,
}

pub fn forward(state: &NetworkState, cfg: &NetworkConfig, x: &SignalVector) -> Result<ForwardTrace> {
    if x.dim() != cfg.input_dim {
        return Err(Error::Dimension(format!(
            "input has {} features, network expects {}",
            x.dim(),
            cfg.input_dim
        )));
    }
    let bank = cfg.bank()?;
    let (out_w, hidden_w) = state
        .weights
        .split_last()
        .ok_or_else(|| Error::InvalidConfig("network has no layers".into()))?;
    let mut cycles = 0;
    let mut hidden = Vec::with_capacity(hidden_w.len());
    let mut current = x.clone();
    for w in hidden_w {
        let (s, c1) = mac_bank_matvec(&bank, w, &current)?;
        let (m, c2) = activation_bank(&bank, &state.luts.activation, &s);
        cycles += c1 + c2;
        current = m.clone();
        hidden.push(LayerTrace { s, m });
    }
    let (z, c1) = mac_bank_matvec(&bank, out_w, &current)?;
    let (yhat, c2) = softmax_unit(&bank, &z, &state.luts.exp, cfg.softmax_limit)?;
    cycles += c1 + c2;
    Ok(ForwardTrace {
        input: x.clone(),
        hidden,
        z,
        yhat,
        cycles,
    })
}

/// One-hot target in `fmt`.
pub fn one_hot(label: usize, k: usize, fmt: QFormat) -> SignalVector {
    SignalVector::new(
        (0..k)
            .map(|i| {
                if i == label {
                    FxpValue::one(fmt)
                } else {
                    FxpValue::zero(fmt)
                }
            })
            .collect(),
    )
}

fn one_hot_label(y: &SignalVector) -> Result<usize> {
    let mut label = None;
    for (i, v) in y.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        if *v != FxpValue::one(v.fmt()) || label.is_some() {
            return Err(Error::NotOneHot);
        }
        label = Some(i);
    }
    label.ok_or(Error::NotOneHot)
}

/// `-ln(max(yhat[label], 2^-14))`, in double precision.
pub fn cross_entropy(yhat: &SignalVector, y: &SignalVector) -> Result<f64> {
    if yhat.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "prediction has {} classes, label has {}",
            yhat.dim(),
            y.dim()
        )));
    }
    let label = one_hot_label(y)?;
    Ok(-yhat[label].to_f64().max(CE_FLOOR).ln())
}

pub const CE_FLOOR: f64 = 1.0 / 16384.0;

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &SignalVector) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.raw() > v[best].raw() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// One per weight matrix, same shapes.
    pub weights: Vec<WeightMatrix>,
    pub cycles: Cycles,
}

/// Back-propagate `yhat - y` through the trace.
///
/// The output error needs no derivative LUT (softmax with cross-entropy).
/// Each hidden error is `(W^T delta) * f'(S)` with the transposed product
/// on the mult-add bank and `f'` from the derivative LUT.
pub fn backward(
    state: &NetworkState,
    cfg: &NetworkConfig,
    trace: &ForwardTrace,
    y: &SignalVector,
) -> Result<Gradients> {
    let n = state.weights.len();
    if trace.hidden.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "trace has {} hidden layers, network {}",
            trace.hidden.len(),
            n - 1
        )));
    }
    if y.dim() != trace.yhat.dim() {
        return Err(Error::Dimension(format!(
            "label has {} classes, prediction {}",
            y.dim(),
            trace.yhat.dim()
        )));
    }
    let bank = cfg.bank()?;
    let mut delta = vec_sub(&trace.yhat, y)?;
    let mut cycles = 0;
    let mut grads = Vec::with_capacity(n);
    for l in (0..n).rev() {
        let layer_in = if l == 0 { &trace.input } else { &trace.hidden[l - 1].m };
        let (g, c) = outer_product(&bank, &delta, layer_in)?;
        cycles += c;
        grads.push(g);
        if l > 0 {
            let (back, c1) = mac_bank_matvec(&bank, &state.weights[l].transpose(), &delta)?;
            let (deriv, c2) = activation_bank(&bank, &state.luts.derivative, &trace.hidden[l - 1].s);
            cycles += c1 + c2;
            delta = hadamard(&back, &deriv)?;
        }
    }
    grads.reverse();
    Ok(Gradients {
        weights: grads,
        cycles,
    })
}

fn check_grad_count(state: &NetworkState, n: usize) -> Result<()> {
    if n != state.weights.len() {
        return Err(Error::Dimension(format!(
            "{} gradients for {} weight matrices",
            n,
            state.weights.len()
        )));
    }
    Ok(())
}

/// Apply one gradient per weight matrix with `cfg.gamma`.
pub fn apply_gradients(
    state: &NetworkState,
    cfg: &NetworkConfig,
    gradients: &[WeightMatrix],
) -> Result<(NetworkState, Cycles)> {
    check_grad_count(state, gradients.len())?;
    let bank = cfg.bank()?;
    let mut cycles = 0;
    let mut weights = Vec::with_capacity(gradients.len());
    for (w, g) in state.weights.iter().zip(gradients) {
        let (w2, c) = accumulate_update(&bank, w, g, cfg.gamma)?;
        cycles += c;
        weights.push(w2);
    }
    Ok((
        NetworkState {
            weights,
            luts: state.luts.clone(),
        },
        cycles,
    ))
}

/// Batch form of [`apply_gradients`] over wide gradient sums.
pub fn apply_gradient_sums(
    state: &NetworkState,
    cfg: &NetworkConfig,
    sums: &[GradientSum],
) -> Result<(NetworkState, Cycles)> {
    check_grad_count(state, sums.len())?;
    let bank = cfg.bank()?;
    let mut cycles = 0;
    let mut weights = Vec::with_capacity(sums.len());
    for (w, g) in state.weights.iter().zip(sums) {
        let (w2, c) = accumulate_update_sum(&bank, w, g, cfg.gamma)?;
        cycles += c;
        weights.push(w2);
    }
    Ok((
        NetworkState {
            weights,
            luts: state.luts.clone(),
        },
        cycles,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub cycles: Cycles,
}

fn check_dataset(cfg: &NetworkConfig, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.feature_dim() != cfg.input_dim || data.num_classes() != cfg.output_dim {
        return Err(Error::Dimension(format!(
            "dataset is {} features / {} classes, network {} / {}",
            data.feature_dim(),
            data.num_classes(),
            cfg.input_dim,
            cfg.output_dim
        )));
    }
    Ok(())
}

/// One pass over `data` in order, in mini-batches of `batch`.
///
/// Per batch, every sample runs forward and backward against the same
/// weights; the gradients are summed and applied once. Loss and accuracy
/// come from those forward passes.
pub fn train_epoch(
    state: &NetworkState,
    cfg: &NetworkConfig,
    data: &Dataset,
    batch: usize,
) -> Result<(NetworkState, EpochStats)> {
    check_dataset(cfg, data)?;
    if batch == 0 || batch > data.len() {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch} outside 1..={}",
            data.len()
        )));
    }
    let mut state = state.clone();
    let mut cycles = 0;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch) {
        let mut sums: Vec<GradientSum> = state
            .weights
            .iter()
            .map(|w| GradientSum::zeros(w.rows(), w.cols(), cfg.fmt))
            .collect();
        for &i in chunk {
            let (x, label) = data.sample(i);
            let y = one_hot(label, cfg.output_dim, cfg.fmt);
            let trace = forward(&state, cfg, x)?;
            loss += cross_entropy(&trace.yhat, &y)?;
            correct += usize::from(argmax(&trace.yhat) == label);
            let g = backward(&state, cfg, &trace, &y)?;
            for (s, gw) in sums.iter_mut().zip(&g.weights) {
                s.add(gw)?;
            }
            cycles += trace.cycles + g.cycles;
        }
        let (next, c) = apply_gradient_sums(&state, cfg, &sums)?;
        state = next;
        cycles += c;
    }
    let n = data.len() as f64;
    Ok((
        state,
        EpochStats {
            mean_loss: loss / n,
            accuracy: correct as f64 / n,
            cycles,
        },
    ))
}

/// Forward-only loss and accuracy.
pub fn evaluate(state: &NetworkState, cfg: &NetworkConfig, data: &Dataset) -> Result<EpochStats> {
    check_dataset(cfg, data)?;
    let mut cycles = 0;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let (x, label) = data.sample(i);
        let trace = forward(state, cfg, x)?;
        loss += cross_entropy(&trace.yhat, &one_hot(label, cfg.output_dim, cfg.fmt))?;
        correct += usize::from(argmax(&trace.yhat) == label);
        cycles += trace.cycles;
    }
    let n = data.len() as f64;
    Ok(EpochStats {
        mean_loss: loss / n,
        accuracy: correct as f64 / n,
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q: QFormat = QFormat::Q2_14;

    fn q(x: f64) -> FxpValue {
        fxp::quantize(x, Q).unwrap()
    }

    fn cfg(t: usize, h: &[usize], k: usize) -> NetworkConfig {
        NetworkConfig::new(t, h.to_vec(), k)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, &[4], 2).validate().is_ok());
        assert!(cfg(2, &[], 2).validate().is_err());
        assert!(cfg(2, &[0], 2).validate().is_err());
        let mut c = cfg(2, &[4], 2);
        c.gamma = q(0.0);
        assert!(c.validate().is_err());
        c.gamma = q(0.5);
        c.activation = LutKind::Exp;
        assert!(c.validate().is_err());
        assert_eq!(cfg(3, &[4, 5], 2).layers(), vec![(3, 4), (4, 5), (5, 2)]);
        assert_eq!(cfg(3, &[4], 2).gamma.raw(), 8192);
    }

    #[test]
    fn init_is_deterministic_and_seeded() {
        let mut c = cfg(8, &[16], 4);
        c.seed = 11;
        let a = init_network(&c).unwrap();
        let b = init_network(&c).unwrap();
        assert_eq!(a, b);
        c.seed = 12;
        let d = init_network(&c).unwrap();
        assert_ne!(a.weights, d.weights);
    }

    #[test]
    fn init_within_bound() {
        let c = cfg(5, &[7, 3], 2);
        let s = init_network(&c).unwrap();
        for (w, (d_in, d_out)) in s.weights.iter().zip(c.layers()) {
            let r = (6.0 / (d_in + d_out) as f64).sqrt().min(Q.max_value());
            let lim = q(r).raw();
            assert!(w.data().iter().all(|v| v.raw().abs() <= lim));
        }
    }

    fn zero_state(c: &NetworkConfig) -> NetworkState {
        let w = c
            .layers()
            .into_iter()
            .map(|(i, o)| WeightMatrix::zeros(o, i, c.fmt))
            .collect();
        NetworkState::from_weights(c, w).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let c = cfg(3, &[5], 4);
        let s = zero_state(&c);
        let x = SignalVector::quantize(&[0.3, -1.0, 0.9], Q).unwrap();
        let t = forward(&s, &c, &x).unwrap();
        assert!(t.z.iter().all(|v| v.is_zero()));
        assert!(t.yhat.iter().all(|v| (v.raw() - 4096).abs() <= 4));
        let loss = cross_entropy(&t.yhat, &one_hot(1, 4, Q)).unwrap();
        assert!((loss - 4f64.ln()).abs() < 0.01);
    }

    #[test]
    fn zero_input_chain() {
        let c = cfg(2, &[2], 2);
        let w = vec![
            WeightMatrix::from_fn(2, 2, |r, k| if r == k { q(1.0) } else { q(0.0) }),
            WeightMatrix::from_fn(2, 2, |r, k| if r == k { q(1.0) } else { q(0.0) }),
        ];
        let s = NetworkState::from_weights(&c, w).unwrap();
        let t = forward(&s, &c, &SignalVector::zeros(2, Q)).unwrap();
        assert_eq!(t.yhat.to_f64(), vec![0.5, 0.5]);
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let c = cfg(3, &[4], 2);
        let s = init_network(&c).unwrap();
        assert!(matches!(
            forward(&s, &c, &SignalVector::zeros(2, Q)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn from_weights_checks_shapes() {
        let c = cfg(3, &[4], 2);
        let bad = vec![WeightMatrix::zeros(4, 3, Q), WeightMatrix::zeros(4, 2, Q)];
        assert!(NetworkState::from_weights(&c, bad).is_err());
        assert!(NetworkState::from_weights(&c, vec![WeightMatrix::zeros(4, 3, Q)]).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        let y = one_hot(2, 4, Q);
        let perfect = one_hot(2, 4, Q);
        assert!(cross_entropy(&perfect, &y).unwrap() <= -(1.0 - 4.0 / 16384.0f64).ln());
        let yhat = SignalVector::quantize(&[0.1, 0.2, 0.3, 0.4], Q).unwrap();
        let want = -(q(0.3).to_f64()).ln();
        assert_eq!(cross_entropy(&yhat, &y).unwrap(), want);
        let zero = SignalVector::zeros(4, Q);
        assert_eq!(cross_entropy(&zero, &y).unwrap(), -(CE_FLOOR.ln()));
        let not_one_hot = SignalVector::quantize(&[0.0, 1.0, 1.0, 0.0], Q).unwrap();
        assert!(matches!(cross_entropy(&yhat, &not_one_hot), Err(Error::NotOneHot)));
        let half = SignalVector::quantize(&[0.0, 0.5, 0.0, 0.0], Q).unwrap();
        assert!(matches!(cross_entropy(&yhat, &half), Err(Error::NotOneHot)));
        assert!(cross_entropy(&yhat, &one_hot(0, 3, Q)).is_err());
    }

    #[test]
    fn exact_prediction_gives_zero_gradients() {
        let c = cfg(3, &[4, 3], 2);
        let s = init_network(&c).unwrap();
        let x = SignalVector::quantize(&[0.5, -0.5, 0.25], Q).unwrap();
        let mut t = forward(&s, &c, &x).unwrap();
        let y = one_hot(1, 2, Q);
        t.yhat = y.clone();
        let g = backward(&s, &c, &t, &y).unwrap();
        assert!(g.weights.iter().all(|w| w.is_zero()));
        let (s2, _) = apply_gradients(&s, &c, &g.weights).unwrap();
        assert_eq!(s2, s);
    }

    #[test]
    fn output_gradient_is_outer_product_of_error() {
        let c = cfg(3, &[5], 4);
        let s = init_network(&c).unwrap();
        let x = SignalVector::quantize(&[0.9, -0.1, 0.4], Q).unwrap();
        let t = forward(&s, &c, &x).unwrap();
        let y = one_hot(3, 4, Q);
        let g = backward(&s, &c, &t, &y).unwrap();
        let m = &t.hidden[0].m;
        for i in 0..4 {
            let d = fxp::fxp_sub_sat(t.yhat[i], y[i]).unwrap();
            for j in 0..5 {
                assert_eq!(g.weights[1].get(i, j), fxp::fxp_mul(d, m[j]).unwrap());
            }
        }
        // delta = yhat - y stays inside [-1, 1]
        assert!(t.yhat.iter().all(|v| v.raw() >= 0 && v.raw() <= 16384));
    }

    #[test]
    fn apply_gradients_identity_cases() {
        let c = cfg(2, &[3], 2);
        let s = init_network(&c).unwrap();
        let zeros: Vec<_> = s
            .weights
            .iter()
            .map(|w| WeightMatrix::zeros(w.rows(), w.cols(), Q))
            .collect();
        assert_eq!(apply_gradients(&s, &c, &zeros).unwrap().0, s);

        let mut one = zeros.clone();
        one[1].set(1, 2, q(0.75));
        let (s2, _) = apply_gradients(&s, &c, &one).unwrap();
        let mut changed = 0;
        for (a, b) in s.weights.iter().zip(&s2.weights) {
            for (x, y) in a.data().iter().zip(b.data()) {
                if x != y {
                    changed += 1;
                }
            }
        }
        assert_eq!(changed, 1);
        let step = fxp::fxp_mul(fxp::negate(c.gamma), q(0.75)).unwrap();
        assert_eq!(
            s2.weights[1].get(1, 2),
            fxp::fxp_add_sat(s.weights[1].get(1, 2), step).unwrap()
        );
        assert!(apply_gradients(&s, &c, &zeros[..1]).is_err());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        let v = SignalVector::quantize(&[0.5, 0.5, 0.1], Q).unwrap();
        assert_eq!(argmax(&v), 0);
        let v = SignalVector::quantize(&[0.1, 0.5, 0.6], Q).unwrap();
        assert_eq!(argmax(&v), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn any_valid_config_chains(
            t in 1usize..10,
            hidden in proptest::collection::vec(1usize..10, 1..4),
            k in 1usize..8,
            b in 1usize..20,
            seed in any::<u64>(),
        ) {
            let mut c = cfg(t, &hidden, k);
            c.bank_width = b;
            c.seed = seed;
            c.lut_size = 64;
            let s = init_network(&c).unwrap();
            let x = SignalVector::quantize(&vec![0.5; t], Q).unwrap();
            let tr = forward(&s, &c, &x).unwrap();
            prop_assert_eq!(tr.hidden.len(), hidden.len());
            for (l, h) in tr.hidden.iter().zip(&hidden) {
                prop_assert_eq!(l.s.dim(), *h);
                prop_assert_eq!(l.m.dim(), *h);
            }
            prop_assert_eq!(tr.yhat.dim(), k);
            let g = backward(&s, &c, &tr, &one_hot(0, k, Q)).unwrap();
            for (gw, w) in g.weights.iter().zip(&s.weights) {
                prop_assert_eq!((gw.rows(), gw.cols()), (w.rows(), w.cols()));
            }
        }
    }
}
