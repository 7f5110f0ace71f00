//! `key = value` run configuration files.
//!
//! One pair per line, `#` starts a comment. Unknown or repeated keys are
//! errors. Relative paths resolve against the directory holding the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fxp::{quantize, QFormat};
use crate::lut::LutKind;
use crate::network::NetworkConfig;

const KEYS: &[&str] = &[
    "input_dim",
    "hidden_dims",
    "output_dim",
    "activation",
    "total_bits",
    "frac_bits",
    "bank_width",
    "softmax_limit",
    "lut_size",
    "gamma",
    "seed",
    "epochs",
    "batch_size",
    "dataset",
    "out_model",
    "out_metrics",
    "oracle",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub dataset: Option<PathBuf>,
    pub out_model: PathBuf,
    pub out_metrics: PathBuf,
    /// Also train the double-precision oracle and log its metrics.
    pub oracle: bool,
}

fn key_err(key: &str, msg: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        msg: msg.into(),
    }
}

struct Pairs {
    map: BTreeMap<String, String>,
}

impl Pairs {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| key_err(key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| key_err(key, "missing required key")),
        }
    }
}

pub fn parse_run_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: base_dir.to_path_buf(),
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(key_err(k, "unknown key"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(key_err(k, "given more than once"));
        }
    }
    let p = Pairs { map };

    let hidden_dims = p
        .raw("hidden_dims")
        .ok_or_else(|| key_err("hidden_dims", "missing required key"))?
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| key_err("hidden_dims", "expected a comma list of integers"))?;
    let mut net = NetworkConfig::new(
        p.get("input_dim", None)?,
        hidden_dims,
        p.get("output_dim", None)?,
    );
    net.activation = p.get("activation", Some(LutKind::Tanh))?;
    let total = p.get("total_bits", Some(net.fmt.total_bits()))?;
    let frac = p.get("frac_bits", Some(net.fmt.frac_bits()))?;
    net.fmt = QFormat::new(total, frac).map_err(|e| key_err("frac_bits", e.to_string()))?;
    net.bank_width = p.get("bank_width", Some(net.bank_width))?;
    net.softmax_limit = p.get("softmax_limit", Some(net.softmax_limit))?;
    net.lut_size = p.get("lut_size", Some(net.lut_size))?;
    let gamma: f64 = p.get("gamma", Some(0.5))?;
    net.gamma = quantize(gamma, net.fmt).map_err(|e| key_err("gamma", e.to_string()))?;
    if net.gamma.raw() <= 0 {
        return Err(key_err("gamma", format!("{gamma} quantizes to a non-positive rate")));
    }
    net.seed = p.get("seed", Some(0))?;
    net.validate().map_err(|e| key_err("network", e.to_string()))?;

    let epochs: usize = p.get("epochs", Some(1))?;
    if epochs == 0 {
        return Err(key_err("epochs", "must be >= 1"));
    }
    let batch_size: usize = p.get("batch_size", Some(1))?;
    if batch_size == 0 {
        return Err(key_err("batch_size", "must be >= 1"));
    }
    let path = |key: &str, default: Option<&str>| -> Option<PathBuf> {
        p.raw(key).or(default).map(|v| base_dir.join(v))
    };
    Ok(RunConfig {
        network: net,
        epochs,
        batch_size,
        dataset: path("dataset", None),
        out_model: path("out_model", Some("model.gnn")).unwrap(),
        out_metrics: path("out_metrics", Some("metrics.csv")).unwrap(),
        oracle: p.get("oracle", Some(false))?,
    })
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_run_config(&text, base).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        e => e,
    })
}

impl RunConfig {
    /// Serialize every key explicitly; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let n = &self.network;
        let mut out = String::new();
        let hidden: Vec<String> = n.hidden_dims.iter().map(|d| d.to_string()).collect();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("input_dim", n.input_dim.to_string());
        kv("hidden_dims", hidden.join(","));
        kv("output_dim", n.output_dim.to_string());
        kv("activation", n.activation.to_string());
        kv("total_bits", n.fmt.total_bits().to_string());
        kv("frac_bits", n.fmt.frac_bits().to_string());
        kv("bank_width", n.bank_width.to_string());
        kv("softmax_limit", n.softmax_limit.to_string());
        kv("lut_size", n.lut_size.to_string());
        kv("gamma", n.gamma.to_f64().to_string());
        kv("seed", n.seed.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        if let Some(d) = &self.dataset {
            kv("dataset", d.display().to_string());
        }
        kv("out_model", self.out_model.display().to_string());
        kv("out_metrics", self.out_metrics.display().to_string());
        kv("oracle", self.oracle.to_string());
        out
    }
}
