//! Run plumbing: datasets, run configs, the reference oracle and the
//! training driver that ties them to the simulator.

mod config;
mod dataset;
pub mod oracle;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{load_run_config, parse_run_config, RunConfig};
pub use dataset::{load_dataset_csv, parse_dataset_csv, Dataset};
pub use oracle::{oracle_backward, oracle_forward, OracleNet};

use crate::error::Result;
use crate::network::{
    init_network, train_epoch, EpochStats, ForwardTrace, NetworkConfig, NetworkState,
};

/// Stream offset so the shuffle order is independent of the weight draw.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

pub struct TrainOutcome {
    pub state: NetworkState,
    pub epochs: Vec<EpochStats>,
}

/// Train from the seeded initial state for `epochs` epochs.
///
/// The first epoch sees `data` in file order; between epochs the order is
/// reshuffled from a ChaCha8 stream derived from the config seed.
pub fn train(cfg: &NetworkConfig, data: &Dataset, epochs: usize, batch: usize) -> Result<TrainOutcome> {
    let mut state = init_network(cfg)?;
    let mut stats = Vec::with_capacity(epochs);
    for order in epoch_orders(cfg.seed, data.len(), epochs) {
        let (next, s) = train_epoch(&state, cfg, &data.reordered(&order), batch)?;
        state = next;
        stats.push(s);
    }
    Ok(TrainOutcome {
        state,
        epochs: stats,
    })
}

/// Sample order of each epoch as used by [`train`].
pub fn epoch_orders(seed: u64, samples: usize, epochs: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..samples).collect();
    let mut out = Vec::with_capacity(epochs);
    for e in 0..epochs {
        if e > 0 {
            order.shuffle(&mut rng);
        }
        out.push(order.clone());
    }
    out
}

/// `epoch,mean_loss,accuracy,cycles` with a header row; epochs count from 1.
pub fn metrics_csv(epochs: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,accuracy,cycles\n");
    for (i, s) in epochs.iter().enumerate() {
        writeln!(out, "{},{:.6},{:.6},{}", i + 1, s.mean_loss, s.accuracy, s.cycles).unwrap();
    }
    out
}

/// Labeled decimal dump of one forward trace.
pub fn trace_text(trace: &ForwardTrace) -> String {
    let mut out = String::new();
    let mut row = |name: String, v: &crate::datapath::SignalVector| {
        let vals: Vec<String> = v.iter().map(|x| x.to_f64().to_string()).collect();
        writeln!(out, "{name}\t{}", vals.join(",")).unwrap();
    };
    row("x".into(), &trace.input);
    for (i, l) in trace.hidden.iter().enumerate() {
        row(format!("S{}", i + 1), &l.s);
        row(format!("M{}", i + 1), &l.m);
    }
    row("z".into(), &trace.z);
    row("yhat".into(), &trace.yhat);
    writeln!(out, "cycles\t{}", trace.cycles).unwrap();
    out
}
