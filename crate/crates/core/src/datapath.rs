//! Compute units of the accelerator: the mult-add bank, the activation
//! (LUT) bank, the softmax unit, the mult module and the accu module.
//!
//! Every unit returns the cycles it consumed under a simple model: `B`
//! parallel lanes, one operation per lane per cycle. Results never depend
//! on `B`.

use crate::error::{Error, Result};
use crate::fxp::{self, mul_raw, round_shift, FxpValue, QFormat};
use crate::lut::{self, LutTable};

pub const DEFAULT_BANK_WIDTH: usize = 16;

/// Cycle count.
pub type Cycles = u64;

/// Number of parallel MAC units and the datapath format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacBankConfig {
    bank_width: usize,
    fmt: QFormat,
}

impl MacBankConfig {
    pub fn new(bank_width: usize, fmt: QFormat) -> Result<Self> {
        if bank_width == 0 {
            return Err(Error::InvalidConfig("bank width must be >= 1".into()));
        }
        Ok(MacBankConfig { bank_width, fmt })
    }

    pub fn bank_width(&self) -> usize {
        self.bank_width
    }

    pub fn fmt(&self) -> QFormat {
        self.fmt
    }

    /// Passes needed to cover `n` independent items with `B` lanes.
    pub fn passes(&self, n: usize) -> Cycles {
        n.div_ceil(self.bank_width) as Cycles
    }
}

/// A vector of datapath samples (X, S, M, z or a delta).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignalVector(Vec<FxpValue>);

impl SignalVector {
    pub fn new(data: Vec<FxpValue>) -> Self {
        SignalVector(data)
    }

    pub fn zeros(dim: usize, fmt: QFormat) -> Self {
        SignalVector(vec![FxpValue::zero(fmt); dim])
    }

    pub fn quantize(values: &[f64], fmt: QFormat) -> Result<Self> {
        values
            .iter()
            .map(|&v| fxp::quantize(v, fmt))
            .collect::<Result<Vec<_>>>()
            .map(SignalVector)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[FxpValue] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.to_f64()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FxpValue> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<FxpValue> {
        self.0
    }
}

impl std::ops::Index<usize> for SignalVector {
    type Output = FxpValue;

    fn index(&self, i: usize) -> &FxpValue {
        &self.0[i]
    }
}

/// Row-major `rows x cols` matrix of samples.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<FxpValue>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<FxpValue>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(WeightMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize, fmt: QFormat) -> Self {
        WeightMatrix {
            rows,
            cols,
            data: vec![FxpValue::zero(fmt); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> FxpValue) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        WeightMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> FxpValue {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FxpValue) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FxpValue] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[FxpValue] {
        &self.data
    }

    pub fn transpose(&self) -> WeightMatrix {
        WeightMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    fn same_shape(&self, other: &WeightMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

fn check_fmt(cfg: &MacBankConfig, values: &[FxpValue]) -> Result<()> {
    match values.iter().find(|v| v.fmt() != cfg.fmt) {
        Some(v) => Err(Error::FormatMismatch(v.fmt(), cfg.fmt)),
        None => Ok(()),
    }
}

/// `y = W x` on the mult-add bank.
///
/// Unit `b` of pass `p` owns output row `p * B + b` and accumulates it over
/// ascending column index, one MAC per cycle, so a pass costs `T` cycles.
pub fn mac_bank_matvec(
    cfg: &MacBankConfig,
    w: &WeightMatrix,
    x: &SignalVector,
) -> Result<(SignalVector, Cycles)> {
    if w.cols != x.dim() {
        return Err(Error::Dimension(format!(
            "matvec: {}x{} matrix times length-{} vector",
            w.rows,
            w.cols,
            x.dim()
        )));
    }
    check_fmt(cfg, &w.data)?;
    check_fmt(cfg, x.as_slice())?;
    let fmt = cfg.fmt;
    let mut y = Vec::with_capacity(w.rows);
    for first in (0..w.rows).step_by(cfg.bank_width) {
        for r in first..(first + cfg.bank_width).min(w.rows) {
            y.push(FxpValue::from_raw(
                fxp::mac_dot_raw(w.row(r), x.as_slice(), fmt),
                fmt,
            ));
        }
    }
    let cycles = cfg.passes(w.rows) * w.cols as Cycles;
    Ok((SignalVector(y), cycles))
}

/// The activation (tanh) bank: `B` LUT read ports.
pub fn activation_bank(
    cfg: &MacBankConfig,
    table: &LutTable,
    s: &SignalVector,
) -> (SignalVector, Cycles) {
    let m = s.iter().map(|&v| table.eval(v)).collect();
    (SignalVector(m), cfg.passes(s.dim()))
}

/// Softmax stage: exp lookups over `B` ports, a serial `K`-cycle sum, then
/// `K` divisions over `B` lanes.
pub fn softmax_unit(
    cfg: &MacBankConfig,
    z: &SignalVector,
    exp_table: &LutTable,
    limit: u64,
) -> Result<(SignalVector, Cycles)> {
    let out = lut::softmax_hw(z.as_slice(), exp_table, limit)?;
    Ok((SignalVector(out), softmax_cycles(cfg, z.dim())))
}

pub(crate) fn softmax_cycles(cfg: &MacBankConfig, k: usize) -> Cycles {
    2 * cfg.passes(k) + k as Cycles
}

/// Elementwise product, used to gate a back-propagated error by the
/// activation derivative. Charged as part of the derivative LUT read.
pub fn hadamard(a: &SignalVector, b: &SignalVector) -> Result<SignalVector> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "hadamard: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| fxp::fxp_mul(x, y))
        .collect::<Result<Vec<_>>>()
        .map(SignalVector)
}

/// Saturating `a - b`.
pub fn vec_sub(a: &SignalVector, b: &SignalVector) -> Result<SignalVector> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("sub: {} vs {}", a.dim(), b.dim())));
    }
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| fxp::fxp_sub_sat(x, y))
        .collect::<Result<Vec<_>>>()
        .map(SignalVector)
}

/// Exterior product `G[i][j] = delta[i] * s2[j]` on the mult module.
pub fn outer_product(
    cfg: &MacBankConfig,
    delta: &SignalVector,
    s2: &SignalVector,
) -> Result<(WeightMatrix, Cycles)> {
    if delta.dim() == 0 || s2.dim() == 0 {
        return Err(Error::EmptyVector);
    }
    check_fmt(cfg, delta.as_slice())?;
    check_fmt(cfg, s2.as_slice())?;
    let fmt = cfg.fmt;
    let g = WeightMatrix::from_fn(delta.dim(), s2.dim(), |i, j| {
        FxpValue::from_raw(mul_raw(delta[i].raw(), s2[j].raw(), fmt), fmt)
    });
    let cycles = cfg.passes(delta.dim() * s2.dim());
    Ok((g, cycles))
}

/// Gradients of one weight matrix summed over a mini-batch.
///
/// Per-sample gradients are same-format values, so the sums are exact;
/// they are kept wide and rounded once, by the update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientSum {
    rows: usize,
    cols: usize,
    fmt: QFormat,
    sums: Vec<i64>,
}

impl GradientSum {
    pub fn zeros(rows: usize, cols: usize, fmt: QFormat) -> Self {
        GradientSum {
            rows,
            cols,
            fmt,
            sums: vec![0; rows * cols],
        }
    }

    pub fn add(&mut self, g: &WeightMatrix) -> Result<()> {
        if g.rows != self.rows || g.cols != self.cols {
            return Err(Error::Dimension(format!(
                "gradient {}x{} into {}x{} sum",
                g.rows, g.cols, self.rows, self.cols
            )));
        }
        for (s, v) in self.sums.iter_mut().zip(&g.data) {
            *s += v.raw();
        }
        Ok(())
    }

    pub fn sums(&self) -> &[i64] {
        &self.sums
    }

    pub fn is_zero(&self) -> bool {
        self.sums.iter().all(|&s| s == 0)
    }
}

fn update_raw(
    cfg: &MacBankConfig,
    w: &WeightMatrix,
    grads: &[i64],
    gamma: FxpValue,
) -> Result<(WeightMatrix, Cycles)> {
    if gamma.fmt() != cfg.fmt {
        return Err(Error::FormatMismatch(gamma.fmt(), cfg.fmt));
    }
    check_fmt(cfg, &w.data)?;
    let fmt = cfg.fmt;
    let step_scale = fxp::negate(gamma).raw() as i128;
    let data = w
        .data
        .iter()
        .zip(grads)
        .map(|(wv, &g)| {
            let step = fmt.saturate(round_shift(step_scale * g as i128, fmt.frac_bits()));
            FxpValue::from_raw(wv.raw() + step, fmt)
        })
        .collect();
    let cycles = cfg.passes(w.rows * w.cols);
    Ok((
        WeightMatrix {
            rows: w.rows,
            cols: w.cols,
            data,
        },
        cycles,
    ))
}

/// `W' = W + (-gamma) * G` on the accu module, saturating.
pub fn accumulate_update(
    cfg: &MacBankConfig,
    w: &WeightMatrix,
    g: &WeightMatrix,
    gamma: FxpValue,
) -> Result<(WeightMatrix, Cycles)> {
    w.same_shape(g)?;
    check_fmt(cfg, &g.data)?;
    let raws: Vec<i64> = g.data.iter().map(|v| v.raw()).collect();
    update_raw(cfg, w, &raws, gamma)
}

/// Batch form of [`accumulate_update`]: one rounding for the whole sum.
pub fn accumulate_update_sum(
    cfg: &MacBankConfig,
    w: &WeightMatrix,
    g: &GradientSum,
    gamma: FxpValue,
) -> Result<(WeightMatrix, Cycles)> {
    if w.rows != g.rows || w.cols != g.cols {
        return Err(Error::Dimension(format!(
            "update {}x{} with {}x{} gradient",
            w.rows, w.cols, g.rows, g.cols
        )));
    }
    update_raw(cfg, w, &g.sums, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fxp::quantize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const Q: QFormat = QFormat::Q2_14;

    fn bank(b: usize) -> MacBankConfig {
        MacBankConfig::new(b, Q).unwrap()
    }

    fn q(x: f64) -> FxpValue {
        quantize(x, Q).unwrap()
    }

    fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> WeightMatrix {
        WeightMatrix::from_fn(rows, cols, |_, _| {
            FxpValue::from_raw(rng.random_range(Q.min_raw()..=Q.max_raw()), Q)
        })
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> SignalVector {
        SignalVector::new(
            (0..n)
                .map(|_| FxpValue::from_raw(rng.random_range(Q.min_raw()..=Q.max_raw()), Q))
                .collect(),
        )
    }

    /// Exact reference in i128: sum of raw products, one rounding, saturate.
    fn oracle_matvec(w: &WeightMatrix, x: &SignalVector) -> Vec<i64> {
        (0..w.rows())
            .map(|r| {
                let s: i128 = (0..w.cols())
                    .map(|c| w.get(r, c).raw() as i128 * x[c].raw() as i128)
                    .sum();
                let mag = (s.abs() + (1 << 13)) >> 14;
                let v = if s < 0 { -mag } else { mag };
                v.clamp(-32768, 32767) as i64
            })
            .collect()
    }

    #[test]
    fn bank_width_must_be_positive() {
        assert!(MacBankConfig::new(0, Q).is_err());
    }

    #[test]
    fn identity_matvec() {
        let w = WeightMatrix::from_fn(4, 4, |r, c| if r == c { q(1.0) } else { q(0.0) });
        let x = SignalVector::quantize(&[0.25, -1.5, 1.999, -2.0], Q).unwrap();
        let (y, cycles) = mac_bank_matvec(&bank(2), &w, &x).unwrap();
        assert_eq!(y, x);
        assert_eq!(cycles, 8);
    }

    #[test]
    fn zero_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 5);
        let (y, _) = mac_bank_matvec(&bank(3), &WeightMatrix::zeros(7, 5, Q), &x).unwrap();
        assert_eq!(y, SignalVector::zeros(7, Q));
        let w = rand_matrix(&mut rng, 7, 5);
        let (y, _) = mac_bank_matvec(&bank(3), &w, &SignalVector::zeros(5, Q)).unwrap();
        assert_eq!(y, SignalVector::zeros(7, Q));
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let w = WeightMatrix::zeros(3, 4, Q);
        assert!(matches!(
            mac_bank_matvec(&bank(1), &w, &SignalVector::zeros(3, Q)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn random_8x5_invariant_in_bank_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        let w = rand_matrix(&mut rng, 8, 5);
        let x = rand_vec(&mut rng, 5);
        let want = oracle_matvec(&w, &x);
        for b in [1, 2, 8] {
            let (y, cycles) = mac_bank_matvec(&bank(b), &w, &x).unwrap();
            let got: Vec<i64> = y.iter().map(|v| v.raw()).collect();
            assert_eq!(got, want, "B={b}");
            assert_eq!(cycles, (8usize.div_ceil(b) * 5) as u64);
        }
    }

    #[test]
    fn random_matvec_matches_oracle_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..200 {
            let (h, t) = (rng.random_range(1..=64), rng.random_range(1..=64));
            let b = rng.random_range(1..=70);
            let w = rand_matrix(&mut rng, h, t);
            let x = rand_vec(&mut rng, t);
            let (y, cycles) = mac_bank_matvec(&bank(b), &w, &x).unwrap();
            assert_eq!(y.iter().map(|v| v.raw()).collect::<Vec<_>>(), oracle_matvec(&w, &x));
            assert_eq!(cycles, (h.div_ceil(b) * t) as u64);
        }
    }

    #[test]
    fn outer_product_examples() {
        let delta = SignalVector::quantize(&[1.0, 0.0], Q).unwrap();
        let s2 = SignalVector::quantize(&[0.5, -0.25, 1.5], Q).unwrap();
        let (g, cycles) = outer_product(&bank(4), &delta, &s2).unwrap();
        assert_eq!(g.row(0), s2.as_slice());
        assert!(g.row(1).iter().all(|v| v.is_zero()));
        assert_eq!(cycles, 2);

        let (g, _) = outer_product(&bank(4), &SignalVector::zeros(3, Q), &s2).unwrap();
        assert!(g.is_zero());
        assert!(outer_product(&bank(1), &SignalVector::zeros(0, Q), &s2).is_err());
    }

    #[test]
    fn outer_product_random_matches_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let d = rand_vec(&mut rng, 4);
        let s = rand_vec(&mut rng, 3);
        let (g, cycles) = outer_product(&bank(5), &d, &s).unwrap();
        assert_eq!(cycles, 3);
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), fxp::fxp_mul(d[i], s[j]).unwrap());
            }
        }
    }

    #[test]
    fn update_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = rand_matrix(&mut rng, 3, 3);
        let g = rand_matrix(&mut rng, 3, 3);
        let (w2, cycles) = accumulate_update(&bank(4), &w, &g, q(0.0)).unwrap();
        assert_eq!(w2, w);
        assert_eq!(cycles, 3);
        let (w2, _) = accumulate_update(&bank(4), &w, &WeightMatrix::zeros(3, 3, Q), q(0.5)).unwrap();
        assert_eq!(w2, w);

        let g = WeightMatrix::from_fn(3, 3, |r, c| if r == c { q(0.75 * (r as f64 + 1.0) / 2.0) } else { q(0.0) });
        let (w2, _) = accumulate_update(&bank(4), &WeightMatrix::zeros(3, 3, Q), &g, q(0.5)).unwrap();
        for i in 0..3 {
            let want = fxp::fxp_mul(fxp::negate(q(0.5)), g.get(i, i)).unwrap();
            assert_eq!(w2.get(i, i), want);
            assert_eq!(w2.get(i, i).to_f64(), -0.5 * g.get(i, i).to_f64());
        }
        assert!(accumulate_update(&bank(1), &w, &WeightMatrix::zeros(2, 3, Q), q(0.5)).is_err());
    }

    #[test]
    fn update_matches_reference_formula_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let w = rand_matrix(&mut rng, 5, 4);
            let g = rand_matrix(&mut rng, 5, 4);
            let gamma = FxpValue::from_raw(rng.random_range(0..=Q.max_raw()), Q);
            let (w2, _) = accumulate_update(&bank(3), &w, &g, gamma).unwrap();
            for (i, v) in w2.data().iter().enumerate() {
                let step = fxp::fxp_mul(fxp::negate(gamma), g.data()[i]).unwrap();
                assert_eq!(*v, fxp::fxp_add_sat(w.data()[i], step).unwrap());
            }
        }
    }

    #[test]
    fn single_sample_sum_equals_plain_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = rand_matrix(&mut rng, 4, 6);
        let g = rand_matrix(&mut rng, 4, 6);
        let mut sum = GradientSum::zeros(4, 6, Q);
        sum.add(&g).unwrap();
        let a = accumulate_update(&bank(2), &w, &g, q(0.3)).unwrap();
        let b = accumulate_update_sum(&bank(2), &w, &sum, q(0.3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_sum_rounds_once() {
        // four copies of one ulp scaled by 1/4: per-sample updates would each
        // round to zero, the summed update moves the weight by one ulp
        let g = WeightMatrix::new(1, 1, vec![FxpValue::from_raw(1, Q)]).unwrap();
        let mut sum = GradientSum::zeros(1, 1, Q);
        for _ in 0..4 {
            sum.add(&g).unwrap();
        }
        let w = WeightMatrix::zeros(1, 1, Q);
        let (w2, _) = accumulate_update_sum(&bank(1), &w, &sum, q(0.25)).unwrap();
        assert_eq!(w2.get(0, 0).raw(), -1);
        let (w3, _) = accumulate_update(&bank(1), &w, &g, q(0.25)).unwrap();
        assert_eq!(w3.get(0, 0).raw(), 0);
    }

    #[test]
    fn activation_and_softmax_cycles() {
        let t = lut::build_lut(lut::LutKind::Tanh, Q, -8.0, 8.0, 1024).unwrap();
        let s = SignalVector::quantize(&[0.0, 0.5, -0.5, 1.0, 2.0], Q).unwrap();
        let (m, cycles) = activation_bank(&bank(2), &t, &s);
        assert_eq!(cycles, 3);
        assert_eq!(m[0].raw(), 0);
        let exp = lut::softmax_exp_lut(Q, 1024).unwrap();
        let (_, cycles) = softmax_unit(&bank(2), &s, &exp, 1024).unwrap();
        assert_eq!(cycles, 3 + 5 + 3);
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = rand_matrix(&mut rng, 3, 7);
        let t = w.transpose();
        assert_eq!((t.rows(), t.cols()), (7, 3));
        assert_eq!(t.get(5, 2), w.get(2, 5));
        assert_eq!(t.transpose(), w);
    }
}
