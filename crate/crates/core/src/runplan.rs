//! Run accounting: step counts, the cosine-with-min-lr schedule, FLOPs
//! estimates, achieved throughput and MFU.
//!
//! Warmup is linear from exactly 0 at step 0 to the peak rate at step
//! `W = round(warmup_ratio * S)`; after that the rate follows a half cosine
//! down to `peak * min_lr_rate` at step `S`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 4 × 2^20 tokens per optimizer step.
pub const DEFAULT_GLOBAL_BATCH: u64 = 4 * 1024 * 1024;
/// Dense bf16 peak of the accelerator, in TFLOPS.
pub const DEFAULT_PEAK_TFLOPS: f64 = 989.0;

#[derive(Debug, Error)]
pub enum RunPlanError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("step {step} is outside [0, {total}]")]
    InvalidStep { step: u64, total: u64 },
    #[error("efficiency inputs must be positive: {0}")]
    InvalidRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerMeta {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.95, weight_decay: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub global_batch: u64,
    pub peak_lr: f64,
    pub min_lr_rate: f64,
    pub warmup_ratio: f64,
    pub total_steps: u64,
    pub optimizer: OptimizerMeta,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            global_batch: DEFAULT_GLOBAL_BATCH,
            peak_lr: 5e-5,
            min_lr_rate: 0.01,
            warmup_ratio: 0.001,
            total_steps: 0,
            optimizer: OptimizerMeta::default(),
        }
    }
}

impl RunConfig {
    pub fn for_tokens(total_tokens: u64) -> Self {
        let mut config = Self::default();
        config.total_steps = step_count(total_tokens, config.global_batch);
        config
    }

    pub fn validate(&self) -> Result<(), RunPlanError> {
        let bad = |msg: &str| Err(RunPlanError::InvalidConfig(msg.into()));
        if self.global_batch == 0 {
            return bad("global batch must be positive");
        }
        if !(self.min_lr_rate > 0.0 && self.min_lr_rate < 1.0) {
            return bad("min_lr_rate must be in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio must be in [0, 1)");
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return bad("peak_lr must be positive");
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_ratio * self.total_steps as f64).round() as u64
    }

    pub fn min_lr(&self) -> f64 {
        self.peak_lr * self.min_lr_rate
    }
}

/// Optimizer steps needed to consume `total_tokens`: `ceil(T / G)`.
pub fn step_count(total_tokens: u64, global_batch: u64) -> u64 {
    assert!(global_batch > 0, "global batch must be positive");
    total_tokens.div_ceil(global_batch)
}

/// Learning rate at step `t`.
pub fn lr_at(t: u64, config: &RunConfig) -> Result<f64, RunPlanError> {
    config.validate()?;
    let s = config.total_steps;
    if t > s {
        return Err(RunPlanError::InvalidStep { step: t, total: s });
    }
    let w = config.warmup_steps();
    if t < w {
        return Ok(config.peak_lr * t as f64 / w as f64);
    }
    if s == w {
        return Ok(config.peak_lr);
    }
    let progress = (t - w) as f64 / (s - w) as f64;
    let min = config.min_lr();
    Ok(min + (config.peak_lr - min) * (1.0 + (PI * progress).cos()) / 2.0)
}

/// The `6 P T` training-compute estimate.
pub fn estimate_flops(nonembed_params: f64, total_tokens: f64) -> f64 {
    6.0 * nonembed_params * total_tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub flops_total: f64,
    pub wall_hours: f64,
    pub num_gpus: u32,
    pub peak_tflops_per_gpu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub tflops_total: f64,
    pub tflops_per_gpu: f64,
    pub mfu_percent: f64,
}

pub fn throughput_and_mfu(rec: &EfficiencyRecord) -> Result<Throughput, RunPlanError> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(rec.flops_total) && positive(rec.wall_hours) && rec.num_gpus > 0 && positive(rec.peak_tflops_per_gpu)) {
        return Err(RunPlanError::InvalidRecord(format!("{rec:?}")));
    }
    let tflops_total = rec.flops_total / (rec.wall_hours * 3600.0) / 1e12;
    let tflops_per_gpu = tflops_total / f64::from(rec.num_gpus);
    Ok(Throughput { tflops_total, tflops_per_gpu, mfu_percent: tflops_per_gpu / rec.peak_tflops_per_gpu * 100.0 })
}

/// Summary of a planned run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunCard {
    pub total_tokens: u64,
    pub config: RunConfig,
    pub warmup_steps: u64,
    /// `(step, lr)` at every tenth of the run, both ends included.
    pub lr_samples: Vec<(u64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<(EfficiencyRecord, Throughput)>,
}

/// Builds a run card; `params` enables the FLOPs line, and `hours`/`gpus`
/// additionally the throughput line.
pub fn run_card(
    total_tokens: u64,
    config: &RunConfig,
    params: Option<f64>,
    hours_and_gpus: Option<(f64, u32)>,
    peak_tflops: f64,
) -> Result<RunCard, RunPlanError> {
    let mut config = config.clone();
    config.total_steps = step_count(total_tokens, config.global_batch);
    config.validate()?;
    let s = config.total_steps;
    let lr_samples = (0..=10u64)
        .map(|d| {
            let step = (s * d).div_ceil(10).min(s);
            lr_at(step, &config).map(|lr| (step, lr))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let flops = params.map(|p| estimate_flops(p, total_tokens as f64));
    let efficiency = match (flops, hours_and_gpus) {
        (Some(flops_total), Some((wall_hours, num_gpus))) => {
            let rec = EfficiencyRecord { flops_total, wall_hours, num_gpus, peak_tflops_per_gpu: peak_tflops };
            Some((rec, throughput_and_mfu(&rec)?))
        }
        _ => None,
    };
    Ok(RunCard { total_tokens, warmup_steps: config.warmup_steps(), config, lr_samples, flops, efficiency })
}

impl RunCard {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "tokens          {}", self.total_tokens);
        let _ = writeln!(out, "global batch    {}", c.global_batch);
        let _ = writeln!(out, "steps           {}", c.total_steps);
        let _ = writeln!(out, "warmup steps    {}", self.warmup_steps);
        let _ = writeln!(out, "peak lr         {:e}", c.peak_lr);
        let _ = writeln!(out, "min lr          {:e}", c.min_lr());
        let _ = writeln!(
            out,
            "optimizer       beta1 {} beta2 {} weight decay {}",
            c.optimizer.beta1, c.optimizer.beta2, c.optimizer.weight_decay
        );
        if let Some(flops) = self.flops {
            let _ = writeln!(out, "flops (6PT)     {flops:.4e} ({:.2} ZFLOPs)", flops / 1e21);
        }
        if let Some((rec, t)) = &self.efficiency {
            let _ = writeln!(
                out,
                "throughput      {:.1} TFLOPS total, {:.1} per GPU over {} GPUs, {:.2} h",
                t.tflops_total, t.tflops_per_gpu, rec.num_gpus, rec.wall_hours
            );
            let _ = writeln!(out, "mfu             {:.2}% of {} TFLOPS", t.mfu_percent, rec.peak_tflops_per_gpu);
        }
        out.push_str("schedule\n");
        for (step, lr) in &self.lr_samples {
            let _ = writeln!(out, "  step {step:>8}  lr {lr:.6e}");
        }
        out
    }

    /// `step,lr` rows for the decile samples.
    pub fn schedule_csv(&self) -> String {
        let mut out = String::from("step,lr\n");
        for (step, lr) in &self.lr_samples {
            let _ = writeln!(out, "{step},{lr:e}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(steps: u64) -> RunConfig {
        RunConfig { total_steps: steps, ..RunConfig::default() }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn steps() {
        assert_eq!(step_count(100, 10), 10);
        assert_eq!(step_count(101, 10), 11);
        assert_eq!(step_count(0, 10), 0);
        assert_eq!(6008 * DEFAULT_GLOBAL_BATCH, 25_199_378_432);
    }

    #[test]
    fn schedule_landmarks() {
        let c = config(6008);
        let w = c.warmup_steps();
        assert_eq!(w, 6);
        assert_eq!(lr_at(0, &c).unwrap(), 0.0);
        assert!(rel(lr_at(w, &c).unwrap(), 5e-5) < 1e-12);
        assert!(rel(lr_at(6008, &c).unwrap(), 5e-7) < 1e-12);
        let c = config(2006);
        let mid = c.warmup_steps() + (2006 - c.warmup_steps()) / 2;
        assert!(rel(lr_at(mid, &c).unwrap(), 2.525e-5) < 1e-12);
        assert!(matches!(lr_at(2007, &c), Err(RunPlanError::InvalidStep { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = config(10);
        c.min_lr_rate = 1.0;
        assert!(lr_at(0, &c).is_err());
        let mut c = config(10);
        c.warmup_ratio = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn flops_rows() {
        assert_eq!(estimate_flops(1.0, 1.0), 6.0);
        let t = 6872.0 * DEFAULT_GLOBAL_BATCH as f64;
        assert!(rel(estimate_flops(14e9, t), 2.42e21) < 0.005);
    }

    #[test]
    fn throughput_rows_and_proportionality() {
        let rec = EfficiencyRecord { flops_total: 2.42e21, wall_hours: 31.10, num_gpus: 64, peak_tflops_per_gpu: 989.0 };
        let t = throughput_and_mfu(&rec).unwrap();
        assert!(rel(t.tflops_total, 21_622.0) < 0.01);
        assert!((t.mfu_percent - 34.16).abs() < 0.3);
        let doubled = throughput_and_mfu(&EfficiencyRecord { wall_hours: 62.2, ..rec }).unwrap();
        assert!(rel(doubled.tflops_total * 2.0, t.tflops_total) < 1e-12);
        assert!(rel(doubled.mfu_percent * 2.0, t.mfu_percent) < 1e-12);
        assert!(throughput_and_mfu(&EfficiencyRecord { num_gpus: 0, ..rec }).is_err());
    }

    #[test]
    fn run_card_samples_deciles() {
        let card = run_card(25_199_378_432, &RunConfig::default(), Some(4e9), Some((9.12, 16)), 989.0).unwrap();
        assert_eq!(card.config.total_steps, 6008);
        assert_eq!(card.lr_samples.len(), 11);
        assert_eq!(card.lr_samples[0], (0, 0.0));
        assert_eq!(card.lr_samples[10].0, 6008);
        assert!(card.to_text().contains("steps           6008"));
        assert_eq!(card.schedule_csv().lines().count(), 12);
    }
}
