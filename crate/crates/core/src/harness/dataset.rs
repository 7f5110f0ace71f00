use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datapath::SignalVector;
use crate::error::{Error, Result};
use crate::fxp::QFormat;

/// Labeled feature vectors, quantized on load.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_dim: usize,
    num_classes: usize,
    features: Vec<SignalVector>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn from_rows(
        rows: &[(usize, Vec<f64>)],
        feature_dim: usize,
        num_classes: usize,
        fmt: QFormat,
    ) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (i, (label, x)) in rows.iter().enumerate() {
            if x.len() != feature_dim {
                return Err(Error::Dimension(format!(
                    "row {i}: {} features, expected {feature_dim}",
                    x.len()
                )));
            }
            if *label >= num_classes {
                return Err(Error::Dimension(format!(
                    "row {i}: label {label} >= {num_classes} classes"
                )));
            }
            features.push(SignalVector::quantize(x, fmt)?);
            labels.push(*label);
        }
        Ok(Dataset {
            feature_dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample(&self, i: usize) -> (&SignalVector, usize) {
        (&self.features[i], self.labels[i])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows in the order given by `order` (a permutation of `0..len`).
    pub fn reordered(&self, order: &[usize]) -> Dataset {
        Dataset {
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
            features: order.iter().map(|&i| self.features[i].clone()).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// A seeded permutation of the rows.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.reordered(&order)
    }
}

/// Parse label-first CSV: `label,x1,...,xT` per line, no header.
pub fn parse_dataset_csv(
    text: &str,
    feature_dim: usize,
    num_classes: usize,
    fmt: QFormat,
    path: &Path,
) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.trim().is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rows = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let n = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("").trim();
        let label: usize = label_field
            .parse()
            .map_err(|_| err(n, format!("bad label `{label_field}`")))?;
        if label >= num_classes {
            return Err(err(n, format!("label {label} >= {num_classes} classes")));
        }
        let x = fields
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(n, format!("bad feature `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if x.len() != feature_dim {
            return Err(err(
                n,
                format!("{} features, expected {feature_dim}", x.len()),
            ));
        }
        rows.push((label, x));
    }
    Dataset::from_rows(&rows, feature_dim, num_classes, fmt)
}

pub fn load_dataset_csv(
    path: &Path,
    feature_dim: usize,
    num_classes: usize,
    fmt: QFormat,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_csv(&text, feature_dim, num_classes, fmt, path)
}
