//! Experiment configuration: flat dotted-key JSON files merged with command
//! line flags (flags win). Unknown keys are rejected so stale configs fail
//! loudly instead of silently running defaults.

use std::collections::BTreeMap;

use cul_core::unlearn::{CropPattern, NoiseMode};
use cul_core::{CoreError, Result};
use serde_json::Value;

/// Every recognized configuration key.
pub const KNOWN_KEYS: &[&str] = &[
    "problem",
    "seed",
    "format",
    "timing",
    "out",
    "out.trajectories",
    "quad.a",
    "quad.b",
    "quad.theta0",
    "phase1.alpha",
    "phase1.delta",
    "phase2.beta",
    "phase2.delta",
    "phase2.scaled",
    "sweep.fractions",
    "sweep.constraint_tol",
    "sweep.warm_start",
    "step.mu",
    "step.mu_phase2",
    "step.max_iters",
    "step.grad_tol",
    "step.omega",
    "step.precondition",
    "step.eta_warn",
    "unlearn.epochs",
    "task.classes",
    "task.per_class",
    "task.size",
    "task.crop_pattern",
    "task.crop_ratio",
    "task.mask_seed",
    "task.batch",
    "task.noise_mode",
    "task.proxy_retain_fraction",
    "pretrain.epochs",
    "pretrain.lr",
    "pretrain.target_rel_err",
    "pretrain.checkpoint",
    "rates.deltas",
    "rates.window",
    "rates.iters",
    "baselines.lambda",
    "baselines.noise_std",
];

/// Partially specified configuration; `None` means "use the default".
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub problem: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub timing: Option<bool>,
    pub out: Option<String>,
    pub trajectories_out: Option<String>,
    pub quad_a: Option<Vec<f64>>,
    pub quad_b: Option<Vec<f64>>,
    pub quad_theta0: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub phase1_delta: Option<f64>,
    pub beta: Option<f64>,
    pub phase2_delta: Option<u32>,
    pub scaled: Option<bool>,
    pub fractions: Option<Vec<f64>>,
    pub constraint_tol: Option<f64>,
    pub warm_start: Option<bool>,
    pub mu: Option<f64>,
    pub mu_phase2: Option<f64>,
    pub max_iters: Option<u64>,
    pub grad_tol: Option<f64>,
    pub omega: Option<f64>,
    pub precondition: Option<bool>,
    pub eta_warn: Option<f64>,
    pub unlearn_epochs: Option<usize>,
    pub classes: Option<usize>,
    pub per_class: Option<usize>,
    pub size: Option<usize>,
    pub crop_pattern: Option<String>,
    pub crop_ratio: Option<f64>,
    pub mask_seed: Option<u64>,
    pub batch: Option<usize>,
    pub noise_mode: Option<String>,
    pub proxy_retain_fraction: Option<f64>,
    pub pretrain_epochs: Option<usize>,
    pub pretrain_lr: Option<f64>,
    pub pretrain_target_rel_err: Option<f64>,
    pub checkpoint: Option<String>,
    pub rates_deltas: Option<Vec<f64>>,
    pub rates_window: Option<f64>,
    pub rates_iters: Option<u64>,
    pub lambda: Option<f64>,
    pub noise_std: Option<f64>,
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| CoreError::invalid(format!("config key '{key}' must be a number")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| CoreError::invalid(format!("config key '{key}' must be a nonnegative integer")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| CoreError::invalid(format!("config key '{key}' must be a boolean")))
}

fn as_string(key: &str, v: &Value) -> Result<String> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| CoreError::invalid(format!("config key '{key}' must be a string")))
}

fn as_f64_array(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .and_then(|a| a.iter().map(|x| x.as_f64()).collect::<Option<Vec<_>>>())
        .ok_or_else(|| CoreError::invalid(format!("config key '{key}' must be an array of numbers")))
}

impl RawConfig {
    /// Loads a flat dotted-key JSON object, rejecting unknown keys. A JSON
    /// `null` leaves the field at its default.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: Value = serde_json::from_str(text)?;
        let map = parsed
            .as_object()
            .ok_or_else(|| CoreError::invalid("config file must hold a JSON object"))?;
        let mut cfg = RawConfig::default();
        for (key, value) in map {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CoreError::invalid(format!("unknown config key '{key}'")));
            }
            if value.is_null() {
                continue;
            }
            match key.as_str() {
                "problem" => cfg.problem = Some(as_string(key, value)?),
                "seed" => cfg.seed = Some(as_u64(key, value)?),
                "format" => cfg.format = Some(as_string(key, value)?),
                "timing" => cfg.timing = Some(as_bool(key, value)?),
                "out" => cfg.out = Some(as_string(key, value)?),
                "out.trajectories" => cfg.trajectories_out = Some(as_string(key, value)?),
                "quad.a" => cfg.quad_a = Some(as_f64_array(key, value)?),
                "quad.b" => cfg.quad_b = Some(as_f64_array(key, value)?),
                "quad.theta0" => cfg.quad_theta0 = Some(as_f64_array(key, value)?),
                "phase1.alpha" => cfg.alpha = Some(as_f64(key, value)?),
                "phase1.delta" => cfg.phase1_delta = Some(as_f64(key, value)?),
                "phase2.beta" => cfg.beta = Some(as_f64(key, value)?),
                "phase2.delta" => cfg.phase2_delta = Some(as_u64(key, value)? as u32),
                "phase2.scaled" => cfg.scaled = Some(as_bool(key, value)?),
                "sweep.fractions" => cfg.fractions = Some(as_f64_array(key, value)?),
                "sweep.constraint_tol" => cfg.constraint_tol = Some(as_f64(key, value)?),
                "sweep.warm_start" => cfg.warm_start = Some(as_bool(key, value)?),
                "step.mu" => cfg.mu = Some(as_f64(key, value)?),
                "step.mu_phase2" => cfg.mu_phase2 = Some(as_f64(key, value)?),
                "step.max_iters" => cfg.max_iters = Some(as_u64(key, value)?),
                "step.grad_tol" => cfg.grad_tol = Some(as_f64(key, value)?),
                "step.omega" => cfg.omega = Some(as_f64(key, value)?),
                "step.precondition" => cfg.precondition = Some(as_bool(key, value)?),
                "step.eta_warn" => cfg.eta_warn = Some(as_f64(key, value)?),
                "unlearn.epochs" => cfg.unlearn_epochs = Some(as_u64(key, value)? as usize),
                "task.classes" => cfg.classes = Some(as_u64(key, value)? as usize),
                "task.per_class" => cfg.per_class = Some(as_u64(key, value)? as usize),
                "task.size" => cfg.size = Some(as_u64(key, value)? as usize),
                "task.crop_pattern" => cfg.crop_pattern = Some(as_string(key, value)?),
                "task.crop_ratio" => cfg.crop_ratio = Some(as_f64(key, value)?),
                "task.mask_seed" => cfg.mask_seed = Some(as_u64(key, value)?),
                "task.batch" => cfg.batch = Some(as_u64(key, value)? as usize),
                "task.noise_mode" => cfg.noise_mode = Some(as_string(key, value)?),
                "task.proxy_retain_fraction" => {
                    cfg.proxy_retain_fraction = Some(as_f64(key, value)?)
                }
                "pretrain.epochs" => cfg.pretrain_epochs = Some(as_u64(key, value)? as usize),
                "pretrain.lr" => cfg.pretrain_lr = Some(as_f64(key, value)?),
                "pretrain.target_rel_err" => {
                    cfg.pretrain_target_rel_err = Some(as_f64(key, value)?)
                }
                "pretrain.checkpoint" => cfg.checkpoint = Some(as_string(key, value)?),
                "rates.deltas" => cfg.rates_deltas = Some(as_f64_array(key, value)?),
                "rates.window" => cfg.rates_window = Some(as_f64(key, value)?),
                "rates.iters" => cfg.rates_iters = Some(as_u64(key, value)?),
                "baselines.lambda" => cfg.lambda = Some(as_f64(key, value)?),
                "baselines.noise_std" => cfg.noise_std = Some(as_f64(key, value)?),
                _ => unreachable!("key checked against KNOWN_KEYS"),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Overlays `other` on `self`; set fields in `other` win.
    pub fn overlay(mut self, other: RawConfig) -> RawConfig {
        macro_rules! take {
            ($($field:ident),* $(,)?) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            problem, seed, format, timing, out, trajectories_out, quad_a, quad_b, quad_theta0,
            alpha, phase1_delta, beta, phase2_delta, scaled, fractions, constraint_tol,
            warm_start, mu, mu_phase2, max_iters, grad_tol, omega, precondition, eta_warn,
            unlearn_epochs, classes, per_class, size, crop_pattern, crop_ratio, mask_seed, batch,
            noise_mode, proxy_retain_fraction, pretrain_epochs, pretrain_lr,
            pretrain_target_rel_err, checkpoint, rates_deltas, rates_window, rates_iters, lambda,
            noise_std,
        );
        self
    }
}

/// Fully resolved configuration with per-problem defaults applied.
#[derive(Debug, Clone)]
pub struct Config {
    pub problem: String,
    pub seed: u64,
    pub format: cul_core::ResultFormat,
    pub timing: bool,
    pub out: Option<String>,
    pub trajectories_out: Option<String>,
    pub quad_a: Vec<f64>,
    pub quad_b: Vec<f64>,
    pub quad_theta0: Vec<f64>,
    pub alpha: f64,
    pub phase1_delta: f64,
    pub beta: f64,
    pub phase2_delta: u32,
    pub scaled: bool,
    pub fractions: Vec<f64>,
    pub constraint_tol: Option<f64>,
    pub warm_start: bool,
    pub mu: f64,
    pub mu_phase2: f64,
    pub max_iters: u64,
    pub grad_tol: f64,
    pub omega: f64,
    pub precondition: bool,
    pub eta_warn: f64,
    pub unlearn_epochs: usize,
    pub classes: usize,
    pub per_class: usize,
    pub size: usize,
    pub crop_pattern: CropPattern,
    pub crop_ratio: f64,
    pub mask_seed: u64,
    pub batch: usize,
    pub noise_mode: NoiseMode,
    pub proxy_retain_fraction: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_target_rel_err: Option<f64>,
    pub checkpoint: Option<String>,
    pub rates_deltas: Vec<f64>,
    pub rates_window: f64,
    pub rates_iters: u64,
    pub lambda: f64,
    pub noise_std: f64,
}

impl Config {
    pub fn resolve(raw: RawConfig) -> Result<Config> {
        let problem = raw.problem.unwrap_or_else(|| "quad".to_string());
        cul_core::check_problem_name(&problem)?;
        let toy = problem == "unlearn-toy";
        let cfg = Config {
            seed: raw.seed.unwrap_or(1),
            format: cul_core::ResultFormat::parse(raw.format.as_deref().unwrap_or("csv"))?,
            timing: raw.timing.unwrap_or(false),
            out: raw.out,
            trajectories_out: raw.trajectories_out,
            quad_a: raw.quad_a.unwrap_or_else(|| vec![0.0, 0.0]),
            quad_b: raw.quad_b.unwrap_or_else(|| vec![1.0, 0.0]),
            quad_theta0: raw.quad_theta0.unwrap_or_else(|| vec![2.0, 0.0]),
            alpha: raw.alpha.unwrap_or(if toy { 5.0 } else { 1.0 }),
            phase1_delta: raw.phase1_delta.unwrap_or(2.0),
            beta: raw.beta.unwrap_or(5.0),
            phase2_delta: raw.phase2_delta.unwrap_or(1),
            scaled: raw.scaled.unwrap_or(true),
            fractions: raw.fractions.unwrap_or_else(|| vec![0.25, 0.5, 0.75]),
            constraint_tol: raw.constraint_tol,
            warm_start: raw.warm_start.unwrap_or(true),
            mu: raw.mu.unwrap_or(if toy { 1e-4 } else { 0.05 }),
            mu_phase2: raw
                .mu_phase2
                .or(raw.mu)
                .unwrap_or(if toy { 1e-4 } else { 0.005 }),
            max_iters: raw.max_iters.unwrap_or(if toy { 0 } else { 20_000 }),
            grad_tol: raw.grad_tol.unwrap_or(if toy { 0.0 } else { 1e-6 }),
            omega: raw.omega.unwrap_or(if toy { 1e-7 } else { 0.0 }),
            precondition: raw.precondition.unwrap_or(false),
            eta_warn: raw.eta_warn.unwrap_or(1e6),
            unlearn_epochs: raw.unlearn_epochs.unwrap_or(5),
            classes: raw.classes.unwrap_or(8),
            per_class: raw.per_class.unwrap_or(32),
            size: raw.size.unwrap_or(16),
            crop_pattern: CropPattern::parse(raw.crop_pattern.as_deref().unwrap_or("center"))?,
            crop_ratio: raw.crop_ratio.unwrap_or(0.5),
            mask_seed: raw.mask_seed.unwrap_or(0),
            batch: raw.batch.unwrap_or(32),
            noise_mode: NoiseMode::parse(raw.noise_mode.as_deref().unwrap_or("through-original"))?,
            proxy_retain_fraction: raw.proxy_retain_fraction.unwrap_or(0.0),
            pretrain_epochs: raw.pretrain_epochs.unwrap_or(500),
            pretrain_lr: raw.pretrain_lr.unwrap_or(2e-3),
            pretrain_target_rel_err: raw.pretrain_target_rel_err,
            checkpoint: raw.checkpoint,
            rates_deltas: raw.rates_deltas.unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0]),
            rates_window: raw.rates_window.unwrap_or(0.5),
            rates_iters: raw.rates_iters.unwrap_or(5000),
            lambda: raw.lambda.unwrap_or(1.0),
            noise_std: raw.noise_std.unwrap_or(0.5),
            problem,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.quad_a.len() != self.quad_b.len() {
            return Err(CoreError::invalid("quad.a and quad.b must have equal lengths"));
        }
        if self.quad_theta0.len() != self.quad_a.len() {
            return Err(CoreError::invalid("quad.theta0 must match the quad dimension"));
        }
        if !(0.0..=1.0).contains(&self.proxy_retain_fraction) {
            return Err(CoreError::invalid("task.proxy_retain_fraction must lie in [0, 1]"));
        }
        if !(self.rates_window > 0.0 && self.rates_window <= 1.0) {
            return Err(CoreError::invalid("rates.window must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Iterations per unlearn run: epochs times full passes over the forget
    /// set (used when `step.max_iters` is zero on the toy problem).
    pub fn toy_max_iters(&self, forget_len: usize) -> u64 {
        let steps_per_epoch = (forget_len / self.batch).max(1) as u64;
        self.unlearn_epochs as u64 * steps_per_epoch
    }

    /// Echoes the resolved configuration as a flat dotted-key JSON object.
    /// Feeding the output back through `--config` reproduces the run.
    pub fn to_flat_json(&self) -> String {
        let mut map: BTreeMap<&str, Value> = BTreeMap::new();
        let f = |x: f64| serde_json::json!(x);
        map.insert("problem", Value::String(self.problem.clone()));
        map.insert("seed", serde_json::json!(self.seed));
        map.insert(
            "format",
            Value::String(
                match self.format {
                    cul_core::ResultFormat::Csv => "csv",
                    cul_core::ResultFormat::Json => "json",
                }
                .into(),
            ),
        );
        map.insert("timing", Value::Bool(self.timing));
        map.insert("out", self.out.clone().map(Value::String).unwrap_or(Value::Null));
        map.insert(
            "out.trajectories",
            self.trajectories_out.clone().map(Value::String).unwrap_or(Value::Null),
        );
        map.insert("quad.a", serde_json::json!(self.quad_a));
        map.insert("quad.b", serde_json::json!(self.quad_b));
        map.insert("quad.theta0", serde_json::json!(self.quad_theta0));
        map.insert("phase1.alpha", f(self.alpha));
        map.insert("phase1.delta", f(self.phase1_delta));
        map.insert("phase2.beta", f(self.beta));
        map.insert("phase2.delta", serde_json::json!(self.phase2_delta));
        map.insert("phase2.scaled", Value::Bool(self.scaled));
        map.insert("sweep.fractions", serde_json::json!(self.fractions));
        map.insert(
            "sweep.constraint_tol",
            self.constraint_tol.map(f).unwrap_or(Value::Null),
        );
        map.insert("sweep.warm_start", Value::Bool(self.warm_start));
        map.insert("step.mu", f(self.mu));
        map.insert("step.mu_phase2", f(self.mu_phase2));
        map.insert("step.max_iters", serde_json::json!(self.max_iters));
        map.insert("step.grad_tol", f(self.grad_tol));
        map.insert("step.omega", f(self.omega));
        map.insert("step.precondition", Value::Bool(self.precondition));
        map.insert("step.eta_warn", f(self.eta_warn));
        map.insert("unlearn.epochs", serde_json::json!(self.unlearn_epochs));
        map.insert("task.classes", serde_json::json!(self.classes));
        map.insert("task.per_class", serde_json::json!(self.per_class));
        map.insert("task.size", serde_json::json!(self.size));
        map.insert(
            "task.crop_pattern",
            Value::String(self.crop_pattern.name().into()),
        );
        map.insert("task.crop_ratio", f(self.crop_ratio));
        map.insert("task.mask_seed", serde_json::json!(self.mask_seed));
        map.insert("task.batch", serde_json::json!(self.batch));
        map.insert("task.noise_mode", Value::String(self.noise_mode.name().into()));
        map.insert("task.proxy_retain_fraction", f(self.proxy_retain_fraction));
        map.insert("pretrain.epochs", serde_json::json!(self.pretrain_epochs));
        map.insert("pretrain.lr", f(self.pretrain_lr));
        map.insert(
            "pretrain.target_rel_err",
            self.pretrain_target_rel_err.map(f).unwrap_or(Value::Null),
        );
        map.insert(
            "pretrain.checkpoint",
            self.checkpoint.clone().map(Value::String).unwrap_or(Value::Null),
        );
        map.insert("rates.deltas", serde_json::json!(self.rates_deltas));
        map.insert("rates.window", f(self.rates_window));
        map.insert("rates.iters", serde_json::json!(self.rates_iters));
        map.insert("baselines.lambda", f(self.lambda));
        map.insert("baselines.noise_std", f(self.noise_std));
        serde_json::to_string_pretty(&map).expect("config serializes")
    }
}
