//! Fixtures shared by the criterion benches.

use gnn_core::datapath::{SignalVector, WeightMatrix};
use gnn_core::fxp::{FxpValue, QFormat};
use gnn_core::harness::Dataset;

/// Deterministic pseudo-random matrix with entries in [-1, 1).
pub fn matrix(rows: usize, cols: usize, fmt: QFormat) -> WeightMatrix {
    let mut s = 0x9e37_79b9u32;
    WeightMatrix::from_fn(rows, cols, |_, _| {
        s ^= s << 13;
        s ^= s >> 17;
        s ^= s << 5;
        FxpValue::from_raw((s as i32 >> (31 - fmt.frac_bits())) as i64, fmt)
    })
}

pub fn vector(dim: usize, fmt: QFormat) -> SignalVector {
    SignalVector::new(matrix(1, dim, fmt).data().to_vec())
}

pub fn xor(fmt: QFormat) -> Dataset {
    let rows = vec![
        (0, vec![0.0, 0.0]),
        (1, vec![0.0, 1.0]),
        (1, vec![1.0, 0.0]),
        (0, vec![1.0, 1.0]),
    ];
    Dataset::from_rows(&rows, 2, 2, fmt).expect("static fixture")
}
