//! `GNN1` model files.
//!
//! ```text
//! "GNN1" | u8 total_bits | u8 frac_bits | u8 activation | u8 0
//! u32 layer_count
//! layer_count x (u32 in_dim, u32 out_dim)
//! weights, layer order, row-major, one raw sample each
//! ```
//!
//! All integers little-endian; samples take `ceil(total_bits / 8)` bytes.

use crate::codec::{put_raw, Reader};
use crate::datapath::WeightMatrix;
use crate::error::Result;
use crate::fxp::{FxpValue, QFormat};
use crate::lut::LutKind;

use super::{NetworkConfig, NetworkState};

const MODEL_MAGIC: &[u8; 4] = b"GNN1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelHeader {
    pub fmt: QFormat,
    pub activation: LutKind,
    /// `(in_dim, out_dim)` per layer.
    pub layers: Vec<(usize, usize)>,
}

impl ModelHeader {
    /// A config with this model's shape, format and activation and default
    /// values for everything else.
    pub fn to_config(&self) -> NetworkConfig {
        let t = self.layers.first().map_or(0, |l| l.0);
        let k = self.layers.last().map_or(0, |l| l.1);
        let hidden = self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(|l| l.1)
            .collect();
        let mut cfg = NetworkConfig::new(t, hidden, k);
        cfg.fmt = self.fmt;
        cfg.activation = self.activation;
        cfg.gamma = FxpValue::from_raw(1 << self.fmt.frac_bits().saturating_sub(1), self.fmt);
        cfg
    }
}

pub fn save_model(cfg: &NetworkConfig, state: &NetworkState) -> Vec<u8> {
    let tb = cfg.fmt.total_bits();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&[tb as u8, cfg.fmt.frac_bits() as u8, cfg.activation.code(), 0]);
    out.extend_from_slice(&(state.weights.len() as u32).to_le_bytes());
    for w in &state.weights {
        out.extend_from_slice(&(w.cols() as u32).to_le_bytes());
        out.extend_from_slice(&(w.rows() as u32).to_le_bytes());
    }
    for w in &state.weights {
        for v in w.data() {
            put_raw(&mut out, v.raw(), tb);
        }
    }
    out
}

pub fn load_model(buf: &[u8]) -> Result<(ModelHeader, Vec<WeightMatrix>)> {
    let mut r = Reader::new(buf, "GNN1");
    if r.take(4)? != MODEL_MAGIC {
        return Err(r.err("bad magic"));
    }
    let fmt = QFormat::new(r.u8()? as u32, r.u8()? as u32)?;
    let code = r.u8()?;
    let activation = LutKind::from_code(code)
        .filter(|k| k.is_activation())
        .ok_or_else(|| r.err(format!("activation code {code}")))?;
    if r.u8()? != 0 {
        return Err(r.err("reserved byte is nonzero"));
    }
    let count = r.u32()? as usize;
    if count < 2 {
        return Err(r.err(format!("{count} layers; need at least 2")));
    }
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let d_in = r.u32()? as usize;
        let d_out = r.u32()? as usize;
        if d_in == 0 || d_out == 0 {
            return Err(r.err("zero layer dimension"));
        }
        if let Some(&(_, prev_out)) = layers.last() {
            if prev_out != d_in {
                return Err(r.err(format!("layer input {d_in} does not match previous output {prev_out}")));
            }
        }
        layers.push((d_in, d_out));
    }
    let mut weights = Vec::with_capacity(count);
    for &(d_in, d_out) in &layers {
        let mut data = Vec::with_capacity((d_in * d_out).min(1 << 24));
        for _ in 0..d_in * d_out {
            data.push(FxpValue::from_raw(r.raw(fmt.total_bits())?, fmt));
        }
        weights.push(WeightMatrix::new(d_out, d_in, data)?);
    }
    r.finish()?;
    Ok((
        ModelHeader {
            fmt,
            activation,
            layers,
        },
        weights,
    ))
}
