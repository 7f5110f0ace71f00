//! Control-unit model: closed-form per-stage cycle counts and a DSP/BRAM
//! estimate against the ZU9CG budget.
//!
//! With `fill = 0` every prediction here equals the cycles the datapath
//! units report during simulation.

use std::fmt::{self, Write as _};

use crate::datapath::Cycles;
use crate::network::NetworkConfig;

/// Pipeline fill charged to every stage.
pub const PIPELINE_FILL: Cycles = 4;

pub const DSP_BUDGET: u64 = 2520;
/// 32 Mb of on-chip memory.
pub const BRAM_BUDGET_BITS: u64 = 32 << 20;

/// Number of tables resident in the LUT banks (activation, derivative, exp).
pub const LUT_TABLES: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    MultAddBank,
    TanhBank,
    Softmax,
    Mult,
    Accu,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::MultAddBank => "mult-add bank",
            Unit::TanhBank => "tanh bank",
            Unit::Softmax => "softmax",
            Unit::Mult => "mult",
            Unit::Accu => "accu",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Forward,
    /// Once per sample, after the forward pass.
    Backward,
    /// Once per mini-batch.
    Update,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageCycles {
    pub stage: String,
    pub unit: Unit,
    pub phase: Phase,
    pub cycles: Cycles,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CycleReport {
    pub stages: Vec<StageCycles>,
    /// Sum of forward stages: one sample.
    pub total_forward: Cycles,
    /// Sum of backward and update stages: one sample, one update.
    pub total_backward: Cycles,
    pub total_epoch: Cycles,
}

impl CycleReport {
    fn phase_total(&self, phase: Phase) -> Cycles {
        self.stages
            .iter()
            .filter(|s| s.phase == phase)
            .map(|s| s.cycles)
            .sum()
    }

    /// Backward cycles spent per sample, excluding the batch update.
    pub fn per_sample_backward(&self) -> Cycles {
        self.phase_total(Phase::Backward)
    }

    pub fn update(&self) -> Cycles {
        self.phase_total(Phase::Update)
    }

    fn push(&mut self, stage: String, unit: Unit, phase: Phase, cycles: Cycles) {
        self.stages.push(StageCycles {
            stage,
            unit,
            phase,
            cycles,
        });
    }

    fn finish(mut self) -> Self {
        self.total_forward = self.phase_total(Phase::Forward);
        self.total_backward = self.phase_total(Phase::Backward) + self.phase_total(Phase::Update);
        self.total_epoch = self.total_forward + self.total_backward;
        self
    }

    /// `stage<TAB>unit<TAB>cycles` rows followed by the three totals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            writeln!(out, "{}\t{}\t{}", s.stage, s.unit, s.cycles).unwrap();
        }
        writeln!(out, "TOTAL_FORWARD\t{}", self.total_forward).unwrap();
        writeln!(out, "TOTAL_BACKWARD\t{}", self.total_backward).unwrap();
        writeln!(out, "TOTAL_EPOCH\t{}", self.total_epoch).unwrap();
        out
    }
}

fn passes(n: usize, b: usize) -> Cycles {
    n.div_ceil(b) as Cycles
}

fn layer_name(cfg: &NetworkConfig, l: usize) -> String {
    if l + 1 == cfg.layers().len() {
        "out".to_string()
    } else {
        format!("hidden{}", l + 1)
    }
}

fn forward_stages(cfg: &NetworkConfig, fill: Cycles, report: &mut CycleReport) {
    let b = cfg.bank_width;
    let layers = cfg.layers();
    for (l, &(d_in, d_out)) in layers.iter().enumerate() {
        let name = layer_name(cfg, l);
        report.push(
            format!("{name}.matvec"),
            Unit::MultAddBank,
            Phase::Forward,
            passes(d_out, b) * d_in as Cycles + fill,
        );
        if l + 1 < layers.len() {
            report.push(
                format!("{name}.activation"),
                Unit::TanhBank,
                Phase::Forward,
                passes(d_out, b) + fill,
            );
        } else {
            let k = d_out;
            report.push("out.exp".into(), Unit::Softmax, Phase::Forward, passes(k, b) + fill);
            report.push("out.sum".into(), Unit::Softmax, Phase::Forward, k as Cycles + fill);
            report.push("out.divide".into(), Unit::Softmax, Phase::Forward, passes(k, b) + fill);
        }
    }
}

fn backward_stages(cfg: &NetworkConfig, fill: Cycles, report: &mut CycleReport) {
    let b = cfg.bank_width;
    let layers = cfg.layers();
    for (l, &(d_in, d_out)) in layers.iter().enumerate().rev() {
        let name = layer_name(cfg, l);
        report.push(
            format!("{name}.outer"),
            Unit::Mult,
            Phase::Backward,
            passes(d_out * d_in, b) + fill,
        );
        if l > 0 {
            // transposed product: d_in outputs of length d_out
            report.push(
                format!("{name}.matvec_t"),
                Unit::MultAddBank,
                Phase::Backward,
                passes(d_in, b) * d_out as Cycles + fill,
            );
            report.push(
                format!("{}.deriv", layer_name(cfg, l - 1)),
                Unit::TanhBank,
                Phase::Backward,
                passes(d_in, b) + fill,
            );
        }
    }
    for (l, &(d_in, d_out)) in layers.iter().enumerate() {
        report.push(
            format!("{}.update", layer_name(cfg, l)),
            Unit::Accu,
            Phase::Update,
            passes(d_out * d_in, b) + fill,
        );
    }
}

pub fn schedule_forward(cfg: &NetworkConfig) -> CycleReport {
    schedule_forward_with_fill(cfg, PIPELINE_FILL)
}

pub fn schedule_forward_with_fill(cfg: &NetworkConfig, fill: Cycles) -> CycleReport {
    let mut r = CycleReport::default();
    forward_stages(cfg, fill, &mut r);
    r.finish()
}

pub fn schedule_backward(cfg: &NetworkConfig) -> CycleReport {
    schedule_backward_with_fill(cfg, PIPELINE_FILL)
}

pub fn schedule_backward_with_fill(cfg: &NetworkConfig, fill: Cycles) -> CycleReport {
    let mut r = CycleReport::default();
    backward_stages(cfg, fill, &mut r);
    r.finish()
}

/// Full report for one epoch over `samples` samples in batches of `batch`:
/// `samples * (forward + per-sample backward) + batches * update`.
pub fn schedule_epoch(cfg: &NetworkConfig, samples: usize, batch: usize, fill: Cycles) -> CycleReport {
    let mut r = CycleReport::default();
    forward_stages(cfg, fill, &mut r);
    backward_stages(cfg, fill, &mut r);
    let mut r = r.finish();
    let batches = samples.div_ceil(batch.max(1)) as Cycles;
    r.total_epoch =
        samples as Cycles * (r.total_forward + r.per_sample_backward()) + batches * r.update();
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceReport {
    pub dsp_used: u64,
    pub bram_bits_used: u64,
    pub weight_bits: u64,
    pub activation_bits: u64,
    pub lut_bits: u64,
    pub dsp_budget: u64,
    pub bram_budget_bits: u64,
}

impl ResourceReport {
    pub fn dsp_fits(&self) -> bool {
        self.dsp_used <= self.dsp_budget
    }

    pub fn bram_fits(&self) -> bool {
        self.bram_bits_used <= self.bram_budget_bits
    }

    pub fn fits(&self) -> bool {
        self.dsp_fits() && self.bram_fits()
    }

    pub fn to_text(&self) -> String {
        format!(
            "DSP_USED\t{}/{}\nBRAM_BITS_USED\t{}/{}\n",
            self.dsp_used, self.dsp_budget, self.bram_bits_used, self.bram_budget_bits
        )
    }
}

/// DSP and on-chip memory usage.
///
/// One DSP per MAC lane; the backward pass time-shares the same bank.
/// Memory holds every weight matrix, the S and M RAMs of every layer, and
/// the resident LUTs.
pub fn estimate_resources(cfg: &NetworkConfig) -> ResourceReport {
    let tb = cfg.fmt.total_bits() as u64;
    let layers = cfg.layers();
    let weight_bits = layers.iter().map(|&(i, o)| (i * o) as u64 * tb).sum();
    let activation_bits = layers.iter().map(|&(_, o)| 2 * o as u64 * tb).sum();
    let lut_bits = LUT_TABLES * cfg.lut_size as u64 * tb;
    ResourceReport {
        dsp_used: cfg.bank_width as u64,
        bram_bits_used: weight_bits + activation_bits + lut_bits,
        weight_bits,
        activation_bits,
        lut_bits,
        dsp_budget: DSP_BUDGET,
        bram_budget_bits: BRAM_BUDGET_BITS,
    }
}

/// Cycle rows and totals, then the resource lines.
pub fn render_report(cycles: &CycleReport, resources: &ResourceReport) -> String {
    cycles.to_text() + &resources.to_text()
}
