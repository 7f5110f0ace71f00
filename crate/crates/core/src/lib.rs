//! Bit-exact, cycle-approximate simulator of a general feed-forward neural
//! network accelerator.
//!
//! The datapath runs entirely in saturating fixed point: a bank of `B`
//! multiply-accumulate units for matrix-vector products, lookup tables for
//! activations and their derivatives, a sum-limited softmax, a mult module
//! for exterior products and an accu module for weight updates. Every unit
//! reports the cycles it consumed; [`scheduler`] predicts the same counts in
//! closed form and estimates DSP and BRAM usage.
//!
//! ```
//! use gnn_core::{harness::Dataset, network::NetworkConfig, fxp::QFormat};
//!
//! let rows = vec![(0, vec![0.0, 0.0]), (1, vec![0.0, 1.0]), (1, vec![1.0, 0.0]), (0, vec![1.0, 1.0])];
//! let data = Dataset::from_rows(&rows, 2, 2, QFormat::Q2_14).unwrap();
//! let cfg = NetworkConfig::new(2, vec![4], 2);
//! let run = gnn_core::harness::train(&cfg, &data, 5, 4).unwrap();
//! assert_eq!(run.epochs.len(), 5);
//! ```

mod codec;
pub mod datapath;
pub mod error;
pub mod fxp;
pub mod harness;
pub mod lut;
pub mod network;
pub mod scheduler;

pub use datapath::{Cycles, MacBankConfig, SignalVector, WeightMatrix};
pub use error::{Error, Result};
pub use fxp::{AccValue, FxpValue, QFormat};
pub use harness::{Dataset, OracleNet, RunConfig};
pub use lut::{LutKind, LutTable};
pub use network::{ForwardTrace, NetworkConfig, NetworkState};
pub use scheduler::{CycleReport, ResourceReport};
