//! Signed fixed-point arithmetic.
//!
//! Every datapath signal is an [`FxpValue`]: a two's-complement integer of
//! `total_bits` width interpreted as `raw * 2^-frac_bits`. Multiplier outputs
//! and accumulator readouts round to nearest (ties away from zero) and every
//! result saturates to the format range. Nothing in here touches floating
//! point except [`quantize`] and [`FxpValue::to_f64`].

use std::fmt;

use crate::error::{Error, Result};

/// Accumulator width used by [`AccValue::zero`].
///
/// 48 bits is the width of a DSP48E2 accumulator; with 16-bit operands it
/// leaves 18 guard bits, so up to 2^18 full-scale products sum exactly.
pub const DEFAULT_ACC_BITS: u32 = 48;

/// A signed Q format: `total_bits` including sign, `frac_bits` of fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    /// Q2.14 in 16 bits, the default for weights and activations.
    pub const Q2_14: QFormat = QFormat {
        total_bits: 16,
        frac_bits: 14,
    };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&total_bits) || frac_bits >= total_bits {
            return Err(Error::InvalidFormat {
                total_bits,
                frac_bits,
            });
        }
        Ok(QFormat {
            total_bits,
            frac_bits,
        })
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Value of one least-significant bit.
    pub fn ulp(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.ulp()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.ulp()
    }

    /// Clamp a wide raw value into this format's range.
    #[inline]
    pub fn saturate(self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    fn check(self, other: QFormat) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::FormatMismatch(self, other))
        }
    }
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat::Q2_14
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.total_bits - self.frac_bits, self.frac_bits)
    }
}

/// Arithmetic right shift of `v` by `shift` bits, rounding to nearest with
/// ties away from zero.
#[inline]
pub fn round_shift(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        return v;
    }
    let half = 1i128 << (shift - 1);
    if v >= 0 {
        (v + half) >> shift
    } else {
        -((-v + half) >> shift)
    }
}

/// Integer division rounding to nearest, ties away from zero. `den > 0`.
#[inline]
pub fn round_div(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    if num >= 0 {
        (2 * num + den) / (2 * den)
    } else {
        -((-2 * num + den) / (2 * den))
    }
}

/// One fixed-point sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxpValue {
    raw: i32,
    fmt: QFormat,
}

impl FxpValue {
    /// Build from a raw integer, saturating it into the format.
    #[inline]
    pub fn from_raw(raw: i64, fmt: QFormat) -> Self {
        FxpValue {
            raw: fmt.saturate(raw as i128) as i32,
            fmt,
        }
    }

    pub fn zero(fmt: QFormat) -> Self {
        FxpValue { raw: 0, fmt }
    }

    /// 1.0, or the largest representable value if 1.0 does not fit.
    pub fn one(fmt: QFormat) -> Self {
        FxpValue::from_raw(1i64 << fmt.frac_bits, fmt)
    }

    #[inline]
    pub fn raw(self) -> i64 {
        self.raw as i64
    }

    #[inline]
    pub fn fmt(self) -> QFormat {
        self.fmt
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.fmt.ulp()
    }

    pub fn is_zero(self) -> bool {
        self.raw == 0
    }
}

/// Ordered by raw value within one format; values of different formats are
/// incomparable.
impl PartialOrd for FxpValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.fmt == other.fmt).then(|| self.raw.cmp(&other.raw))
    }
}

impl fmt::Display for FxpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Nearest representable value to `x`, ties away from zero, saturated.
pub fn quantize(x: f64, fmt: QFormat) -> Result<FxpValue> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let scaled = (x * (fmt.frac_bits as f64).exp2()).round();
    let raw = scaled.clamp(fmt.min_raw() as f64, fmt.max_raw() as f64) as i64;
    Ok(FxpValue::from_raw(raw, fmt))
}

/// Raw product of two same-format raws, rounded back into the format.
#[inline]
pub(crate) fn mul_raw(a: i64, b: i64, fmt: QFormat) -> i64 {
    fmt.saturate(round_shift(a as i128 * b as i128, fmt.frac_bits))
}

pub fn fxp_mul(a: FxpValue, b: FxpValue) -> Result<FxpValue> {
    a.fmt.check(b.fmt)?;
    Ok(FxpValue::from_raw(mul_raw(a.raw(), b.raw(), a.fmt), a.fmt))
}

pub fn fxp_add_sat(a: FxpValue, b: FxpValue) -> Result<FxpValue> {
    a.fmt.check(b.fmt)?;
    Ok(FxpValue::from_raw(a.raw() + b.raw(), a.fmt))
}

pub fn fxp_sub_sat(a: FxpValue, b: FxpValue) -> Result<FxpValue> {
    a.fmt.check(b.fmt)?;
    Ok(FxpValue::from_raw(a.raw() - b.raw(), a.fmt))
}

/// Saturating negation; the most negative value maps to the maximum.
pub fn negate(a: FxpValue) -> FxpValue {
    FxpValue::from_raw(-a.raw(), a.fmt)
}

/// The accumulator register of one MAC unit.
///
/// Holds unshifted products (2 * frac_bits fractional bits). Saturates at
/// `acc_bits`; the single rounding shift happens in [`acc_readout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccValue {
    raw: i64,
    fmt: QFormat,
    acc_bits: u32,
}

impl AccValue {
    pub fn zero(fmt: QFormat) -> Self {
        AccValue {
            raw: 0,
            fmt,
            acc_bits: DEFAULT_ACC_BITS,
        }
    }

    /// Accumulator of an explicit width, `2 * total_bits <= acc_bits <= 63`.
    pub fn with_width(fmt: QFormat, acc_bits: u32) -> Result<Self> {
        if acc_bits < 2 * fmt.total_bits || acc_bits > 63 {
            return Err(Error::InvalidFormat {
                total_bits: acc_bits,
                frac_bits: 2 * fmt.frac_bits,
            });
        }
        Ok(AccValue {
            raw: 0,
            fmt,
            acc_bits,
        })
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn fmt(self) -> QFormat {
        self.fmt
    }

    pub fn acc_bits(self) -> u32 {
        self.acc_bits
    }

    #[inline]
    fn add_raw(&mut self, product: i128) {
        let lim = 1i128 << (self.acc_bits - 1);
        self.raw = (self.raw as i128 + product).clamp(-lim, lim - 1) as i64;
    }
}

/// `acc + a * b` at accumulator width, saturating.
pub fn fxp_mac(acc: AccValue, a: FxpValue, b: FxpValue) -> Result<AccValue> {
    a.fmt.check(b.fmt)?;
    acc.fmt.check(a.fmt)?;
    let mut out = acc;
    out.add_raw(a.raw() as i128 * b.raw() as i128);
    Ok(out)
}

/// Shift an accumulator back into its operand format.
pub fn acc_readout(acc: AccValue) -> FxpValue {
    let fmt = acc.fmt;
    FxpValue::from_raw(
        fmt.saturate(round_shift(acc.raw as i128, fmt.frac_bits)),
        fmt,
    )
}

/// Dot product of two raw slices through one MAC unit, in ascending index
/// order. Callers guarantee equal lengths and a shared format.
#[inline]
pub(crate) fn mac_dot_raw(w: &[FxpValue], x: &[FxpValue], fmt: QFormat) -> i64 {
    let mut acc = AccValue::zero(fmt);
    for (a, b) in w.iter().zip(x) {
        acc.add_raw(a.raw() as i128 * b.raw() as i128);
    }
    acc_readout(acc).raw()
}
