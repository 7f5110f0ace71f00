use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use gnn_core::harness::{
    self, epoch_orders, load_dataset_csv, load_run_config, Dataset, OracleNet, RunConfig,
};
use gnn_core::lut::build_lut;
use gnn_core::network::{evaluate, forward, init_network, load_model, save_model, NetworkState};
use gnn_core::scheduler::{estimate_resources, render_report, schedule_epoch, PIPELINE_FILL};
use gnn_core::{LutKind, QFormat};

#[derive(Parser)]
#[command(name = "gnn", version, about = "Fixed-point neural network datapath simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train from a run config; writes the model file and per-epoch metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Accuracy and mean loss of a saved model on a labeled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Dump one sample's forward trace.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sample: usize,
        /// Use these weights instead of the seeded initial ones.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Cycle and resource estimate; exits 1 when over budget.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a lookup table dump.
    GenLut {
        #[arg(long)]
        kind: LutKind,
        /// `total,frac`
        #[arg(long, value_parser = parse_bits)]
        bits: QFormat,
        /// `lo,hi`
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated values")?;
    let a = a.trim().parse().map_err(|_| format!("bad value `{a}`"))?;
    let b = b.trim().parse().map_err(|_| format!("bad value `{b}`"))?;
    Ok((a, b))
}

fn parse_bits(s: &str) -> Result<QFormat, String> {
    let (t, f) = parse_pair::<u32>(s)?;
    QFormat::new(t, f).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    parse_pair(s)
}

fn dataset_for(run: &RunConfig) -> Result<Dataset> {
    let path = run.dataset.as_ref().context("config has no `dataset` key")?;
    let net = &run.network;
    Ok(load_dataset_csv(path, net.input_dim, net.output_dim, net.fmt)?)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn oracle_metrics(run: &RunConfig, data: &Dataset) -> String {
    let rows: Vec<(usize, Vec<f64>)> = (0..data.len())
        .map(|i| {
            let (x, label) = data.sample(i);
            (label, x.to_f64())
        })
        .collect();
    let mut net = OracleNet::from_seed(&run.network);
    let gamma = run.network.gamma.to_f64();
    let mut out = String::from("epoch,mean_loss,accuracy\n");
    for (e, order) in epoch_orders(run.network.seed, rows.len(), run.epochs)
        .into_iter()
        .enumerate()
    {
        let epoch_rows: Vec<_> = order.iter().map(|&i| rows[i].clone()).collect();
        let (loss, acc) = net.train_epoch(&epoch_rows, run.batch_size, gamma);
        writeln!(out, "{},{loss:.6},{acc:.6}", e + 1).unwrap();
    }
    out
}

fn train(config: &Path) -> Result<()> {
    let run = load_run_config(config)?;
    let data = dataset_for(&run)?;
    let outcome = harness::train(&run.network, &data, run.epochs, run.batch_size)?;
    write(&run.out_model, save_model(&run.network, &outcome.state))?;
    write(&run.out_metrics, harness::metrics_csv(&outcome.epochs))?;
    if run.oracle {
        write(&run.out_metrics.with_extension("oracle.csv"), oracle_metrics(&run, &data))?;
    }
    if let Some(last) = outcome.epochs.last() {
        println!(
            "epochs {} mean_loss {:.6} accuracy {:.6}",
            outcome.epochs.len(),
            last.mean_loss,
            last.accuracy
        );
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<(gnn_core::NetworkConfig, NetworkState)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (header, weights) =
        load_model(&bytes).with_context(|| format!("loading {}", path.display()))?;
    let cfg = header.to_config();
    let state = NetworkState::from_weights(&cfg, weights)?;
    Ok((cfg, state))
}

fn eval(model: &Path, data: &Path) -> Result<()> {
    let (cfg, state) = read_model(model)?;
    let data = load_dataset_csv(data, cfg.input_dim, cfg.output_dim, cfg.fmt)?;
    let s = evaluate(&state, &cfg, &data)?;
    println!("accuracy {:.6}", s.accuracy);
    println!("mean_loss {:.6}", s.mean_loss);
    Ok(())
}

fn trace(config: &Path, sample: usize, model: Option<&Path>) -> Result<()> {
    let run = load_run_config(config)?;
    let data = dataset_for(&run)?;
    if sample >= data.len() {
        bail!("sample {sample} out of range: dataset has {} rows", data.len());
    }
    let state = match model {
        Some(p) => {
            let (cfg, state) = read_model(p)?;
            if cfg.layers() != run.network.layers() || cfg.fmt != run.network.fmt {
                bail!("model {} does not match the config's network", p.display());
            }
            state
        }
        None => init_network(&run.network)?,
    };
    let t = forward(&state, &run.network, data.sample(sample).0)?;
    print!("{}", harness::trace_text(&t));
    Ok(())
}

fn estimate(config: &Path) -> Result<bool> {
    let run = load_run_config(config)?;
    let samples = match &run.dataset {
        Some(_) => dataset_for(&run)?.len(),
        None => run.batch_size,
    };
    let batch = run.batch_size.min(samples);
    let cycles = schedule_epoch(&run.network, samples, batch, PIPELINE_FILL);
    let res = estimate_resources(&run.network);
    print!("{}", render_report(&cycles, &res));
    if !res.dsp_fits() {
        eprintln!(
            "error: DSP budget exceeded: {} > {}",
            res.dsp_used, res.dsp_budget
        );
    }
    if !res.bram_fits() {
        eprintln!(
            "error: BRAM budget exceeded: {} > {} bits",
            res.bram_bits_used, res.bram_budget_bits
        );
    }
    Ok(res.fits())
}

fn gen_lut(kind: LutKind, fmt: QFormat, range: (f64, f64), n: usize, out: &Path) -> Result<()> {
    let table = build_lut(kind, fmt, range.0, range.1, n)?;
    write(out, table.to_bytes())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Train { config } => train(&config)?,
        Cmd::Eval { model, data } => eval(&model, &data)?,
        Cmd::Trace {
            config,
            sample,
            model,
        } => trace(&config, sample, model.as_deref())?,
        Cmd::Estimate { config } => {
            if !estimate(&config)? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::GenLut {
            kind,
            bits,
            range,
            n,
            out,
        } => gen_lut(kind, bits, range, n, &out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
