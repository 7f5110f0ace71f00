//! Lookup-table activation functions and the sum-limited hardware softmax.
//!
//! A [`LutTable`] samples a reference function at `N` evenly spaced points
//! `x_min + i * (x_max - x_min) / N` and quantizes each sample. Evaluation
//! is a single nearest-index read; the index is computed entirely in
//! integer arithmetic and clamps to the table ends.

use std::fmt;
use std::str::FromStr;

use crate::codec::{put_raw, Reader};
use crate::error::{Error, Result};
use crate::fxp::{quantize, round_div, FxpValue, QFormat};

pub const DEFAULT_LUT_SIZE: usize = 1024;
/// Input range of the activation and derivative tables.
pub const ACTIVATION_RANGE: (f64, f64) = (-8.0, 8.0);
/// Width of the exp table's input window below zero.
pub const EXP_WINDOW: f64 = 8.0;
pub const DEFAULT_SOFTMAX_LIMIT: u64 = 1024;

const LUT_MAGIC: &[u8; 4] = b"LUT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LutKind {
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    TanhDeriv,
    SigmoidDeriv,
    ReluDeriv,
}

impl LutKind {
    pub const ALL: [LutKind; 7] = [
        LutKind::Tanh,
        LutKind::Sigmoid,
        LutKind::Relu,
        LutKind::Exp,
        LutKind::TanhDeriv,
        LutKind::SigmoidDeriv,
        LutKind::ReluDeriv,
    ];

    /// Double-precision reference function.
    pub fn eval_f64(self, x: f64) -> f64 {
        match self {
            LutKind::Tanh => x.tanh(),
            LutKind::Sigmoid => sigmoid(x),
            LutKind::Relu => x.max(0.0),
            LutKind::Exp => x.exp(),
            LutKind::TanhDeriv => 1.0 - x.tanh().powi(2),
            LutKind::SigmoidDeriv => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            LutKind::ReluDeriv => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            LutKind::Tanh | LutKind::Sigmoid | LutKind::Relu | LutKind::Exp | LutKind::ReluDeriv
        )
    }

    /// The derivative table used in the backward path, for activations.
    pub fn derivative(self) -> Option<LutKind> {
        match self {
            LutKind::Tanh => Some(LutKind::TanhDeriv),
            LutKind::Sigmoid => Some(LutKind::SigmoidDeriv),
            LutKind::Relu => Some(LutKind::ReluDeriv),
            _ => None,
        }
    }

    pub fn is_activation(self) -> bool {
        self.derivative().is_some()
    }

    pub fn code(self) -> u8 {
        match self {
            LutKind::Tanh => 0,
            LutKind::Sigmoid => 1,
            LutKind::Relu => 2,
            LutKind::Exp => 3,
            LutKind::TanhDeriv => 4,
            LutKind::SigmoidDeriv => 5,
            LutKind::ReluDeriv => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<LutKind> {
        LutKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            LutKind::Tanh => "tanh",
            LutKind::Sigmoid => "sigmoid",
            LutKind::Relu => "relu",
            LutKind::Exp => "exp",
            LutKind::TanhDeriv => "tanh_deriv",
            LutKind::SigmoidDeriv => "sigmoid_deriv",
            LutKind::ReluDeriv => "relu_deriv",
        }
    }
}

impl fmt::Display for LutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LutKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidLut(format!("unknown kind `{s}`")))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A quantized table for one function.
#[derive(Debug, Clone, PartialEq)]
pub struct LutTable {
    kind: LutKind,
    fmt: QFormat,
    x_min: f64,
    x_max: f64,
    entries: Vec<FxpValue>,
    // x_min and x_max - x_min in units of fmt's LSB
    origin_raw: i64,
    span_raw: i64,
}

/// Sample `kind` on `n` points of `[x_min, x_max)` and quantize each sample.
pub fn build_lut(kind: LutKind, fmt: QFormat, x_min: f64, x_max: f64, n: usize) -> Result<LutTable> {
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::InvalidLut(format!(
            "size {n} must be a power of two >= 16"
        )));
    }
    check_range(x_min, x_max)?;
    let step = (x_max - x_min) / n as f64;
    let entries = (0..n)
        .map(|i| quantize(kind.eval_f64(x_min + i as f64 * step), fmt))
        .collect::<Result<Vec<_>>>()?;
    LutTable::from_parts(kind, fmt, x_min, x_max, entries)
}

fn check_range(x_min: f64, x_max: f64) -> Result<()> {
    if !x_min.is_finite() || !x_max.is_finite() || x_min >= x_max {
        return Err(Error::InvalidLut(format!(
            "range [{x_min}, {x_max}] is empty or non-finite"
        )));
    }
    Ok(())
}

/// Exp table for [`softmax_hw`]: `n` samples ending exactly at `x = 0`.
///
/// The window `[-EXP_WINDOW + step, step)` has the usual `step = EXP_WINDOW / n`
/// spacing, but is shifted by one step so the maximum logit (which always
/// lands on 0 after the max-shift) reads e^0 = 1 from the last entry instead
/// of clamping onto e^-step.
pub fn softmax_exp_lut(fmt: QFormat, n: usize) -> Result<LutTable> {
    let step = EXP_WINDOW / n as f64;
    build_lut(LutKind::Exp, fmt, -EXP_WINDOW + step, step, n)
}

impl LutTable {
    /// Assemble a table from already-quantized entries (e.g. a loaded dump).
    pub fn from_parts(
        kind: LutKind,
        fmt: QFormat,
        x_min: f64,
        x_max: f64,
        entries: Vec<FxpValue>,
    ) -> Result<Self> {
        check_range(x_min, x_max)?;
        let n = entries.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidLut(format!("size {n} is not a power of two")));
        }
        if entries.iter().any(|e| e.fmt() != fmt) {
            return Err(Error::InvalidLut("entry format differs from table".into()));
        }
        let scale = (fmt.frac_bits() as f64).exp2();
        let origin_raw = (x_min * scale).round();
        let span_raw = ((x_max - x_min) * scale).round();
        if span_raw < 1.0 || origin_raw.abs() >= 2f64.powi(62) || span_raw >= 2f64.powi(62) {
            return Err(Error::InvalidLut(format!(
                "range [{x_min}, {x_max}] not resolvable in {fmt}"
            )));
        }
        Ok(LutTable {
            kind,
            fmt,
            x_min,
            x_max,
            entries,
            origin_raw: origin_raw as i64,
            span_raw: span_raw as i64,
        })
    }

    pub fn kind(&self) -> LutKind {
        self.kind
    }

    pub fn fmt(&self) -> QFormat {
        self.fmt
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FxpValue] {
        &self.entries
    }

    /// Sample spacing.
    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / self.len() as f64
    }

    /// Storage size in bits.
    pub fn bits(&self) -> u64 {
        self.len() as u64 * self.fmt.total_bits() as u64
    }

    /// Table index for an input given as a raw integer with `frac_bits`
    /// fractional bits. The input may be wider than any Q format.
    pub fn index_of(&self, raw: i64, frac_bits: u32) -> usize {
        let tf = self.fmt.frac_bits();
        // rescale to the table's LSB, exactly when widening
        let x = if frac_bits <= tf {
            (raw as i128) << (tf - frac_bits)
        } else {
            crate::fxp::round_shift(raw as i128, frac_bits - tf)
        };
        let n = self.len() as i128;
        let idx = round_div((x - self.origin_raw as i128) * n, self.span_raw as i128);
        idx.clamp(0, n - 1) as usize
    }

    pub fn eval(&self, x: FxpValue) -> FxpValue {
        self.entries[self.index_of(x.raw(), x.fmt().frac_bits())]
    }

    /// Lookup for a raw input in the table's own format, unsaturated.
    pub fn eval_raw(&self, raw: i64) -> FxpValue {
        self.entries[self.index_of(raw, self.fmt.frac_bits())]
    }

    /// Serialize in the `LUT1` dump format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let tb = self.fmt.total_bits();
        let mut out = Vec::with_capacity(24 + self.len() * 4);
        out.extend_from_slice(LUT_MAGIC);
        out.extend_from_slice(&[
            self.kind.code(),
            tb as u8,
            self.fmt.frac_bits() as u8,
            0,
        ]);
        out.extend_from_slice(&self.x_min.to_le_bytes());
        out.extend_from_slice(&self.x_max.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for e in &self.entries {
            put_raw(&mut out, e.raw(), tb);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "LUT1");
        if r.take(4)? != LUT_MAGIC {
            return Err(r.err("bad magic"));
        }
        let code = r.u8()?;
        let kind = LutKind::from_code(code).ok_or_else(|| r.err(format!("kind code {code}")))?;
        let fmt = QFormat::new(r.u8()? as u32, r.u8()? as u32)?;
        if r.u8()? != 0 {
            return Err(r.err("reserved byte is nonzero"));
        }
        let x_min = r.f64()?;
        let x_max = r.f64()?;
        let n = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            entries.push(FxpValue::from_raw(r.raw(fmt.total_bits())?, fmt));
        }
        r.finish()?;
        LutTable::from_parts(kind, fmt, x_min, x_max, entries)
    }
}

pub fn lut_eval(table: &LutTable, x: FxpValue) -> FxpValue {
    table.eval(x)
}

/// Largest `|lut_eval(x) - f(x)|` over a uniform sweep of the table range.
///
/// Sweep points are quantized first, so the reference is evaluated at the
/// exact input the table sees. At least `table.len()` points are taken.
pub fn lut_error_sweep(table: &LutTable, samples: usize) -> f64 {
    let samples = samples.max(table.len()).max(2);
    let span = table.x_max - table.x_min;
    let mut worst = 0.0f64;
    for k in 0..samples {
        let x = table.x_min + span * k as f64 / (samples - 1) as f64;
        let xq = quantize(x, table.fmt).expect("finite sweep point");
        let xr = xq.to_f64();
        if xr < table.x_min || xr > table.x_max {
            continue;
        }
        let err = (table.eval(xq).to_f64() - table.kind.eval_f64(xr)).abs();
        worst = worst.max(err);
    }
    worst
}

/// Hardware softmax with a max-shifted exp table and a clamped sum register.
///
/// `e_j = exp_table(z_j - max z)`, `S = min(sum e_j, limit)` in raw units,
/// `out_j = round(e_j / S)`. The subtraction is done at full integer width
/// so it never saturates.
pub fn softmax_hw(z: &[FxpValue], exp_table: &LutTable, limit: u64) -> Result<Vec<FxpValue>> {
    if z.is_empty() {
        return Err(Error::EmptyVector);
    }
    if exp_table.kind() != LutKind::Exp {
        return Err(Error::InvalidLut(format!(
            "softmax needs an exp table, got {}",
            exp_table.kind()
        )));
    }
    let fmt = exp_table.fmt();
    if let Some(bad) = z.iter().find(|v| v.fmt() != fmt) {
        return Err(Error::FormatMismatch(bad.fmt(), fmt));
    }
    let zmax = z.iter().map(|v| v.raw()).max().unwrap();
    let e: Vec<i64> = z.iter().map(|v| exp_table.eval_raw(v.raw() - zmax).raw()).collect();
    let cap = (limit.max(1) as i128) << fmt.frac_bits();
    let sum = e.iter().map(|&v| v as i128).sum::<i128>().min(cap).max(1);
    Ok(e
        .iter()
        .map(|&v| {
            let q = round_div((v as i128) << fmt.frac_bits(), sum);
            FxpValue::from_raw(fmt.saturate(q), fmt)
        })
        .collect())
}
