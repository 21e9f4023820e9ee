//! The four comparison methods and the baseline harness.
//!
//! Each baseline takes single gradient steps on its own loss; none of them
//! solve the constrained subproblem, which is what the comparison is meant
//! to expose. The harness reports per-method metrics without asserting any
//! ranking — the trade-off is an empirical claim, not a contract.

use crate::error::{CoreError, Result};
use crate::numerics::{derive_seed, ParamVector, Rng64};
use crate::unlearn::crop::crop_pixels;
use crate::unlearn::model::{batch_loss_and_grad, ToyModel};
use crate::unlearn::task::{evaluate, UnlearnMetrics, UnlearnTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Gradient ascent on the forget-set reconstruction loss.
    MaxLoss,
    /// Descend toward retain images used as targets for forget inputs.
    RetainLabel,
    /// Descend toward noise-corrupted forget targets.
    NoisyLabel,
    /// NoisyLabel plus `lambda` times the retain reconstruction loss.
    CompositeLoss,
}

impl BaselineKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "max-loss" => BaselineKind::MaxLoss,
            "retain-label" => BaselineKind::RetainLabel,
            "noisy-label" => BaselineKind::NoisyLabel,
            "composite-loss" => BaselineKind::CompositeLoss,
            other => {
                return Err(CoreError::invalid(format!(
                    "unknown baseline '{other}' (expected max-loss|retain-label|noisy-label|composite-loss)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::MaxLoss => "max-loss",
            BaselineKind::RetainLabel => "retain-label",
            BaselineKind::NoisyLabel => "noisy-label",
            BaselineKind::CompositeLoss => "composite-loss",
        }
    }

    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::MaxLoss,
        BaselineKind::RetainLabel,
        BaselineKind::NoisyLabel,
        BaselineKind::CompositeLoss,
    ];
}

fn sample_indices(len: usize, batch: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng64::new(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..batch {
        let j = i + rng.next_below(len - i);
        idx.swap(i, j);
    }
    idx.truncate(batch);
    idx
}

/// Seeded random bijection on `0..len`, fixed per epoch; pairs each forget
/// index with a retain index for the RetainLabel target swap.
fn epoch_pairing(len: usize, epoch_seed: u64) -> Vec<usize> {
    let mut rng = Rng64::new(derive_seed(epoch_seed, 0x5041_4952));
    let mut perm: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = rng.next_below(i + 1);
        perm.swap(i, j);
    }
    perm
}

/// One gradient step of the chosen baseline. `step_seed` drives minibatch
/// and noise sampling; `epoch_seed` fixes the forget-to-retain pairing for
/// the current epoch.
#[allow(clippy::too_many_arguments)]
pub fn baseline_step(
    kind: BaselineKind,
    task: &UnlearnTask,
    current: &ToyModel,
    mu: f64,
    lambda: f64,
    noise_std: f64,
    step_seed: u64,
    epoch_seed: u64,
) -> Result<ToyModel> {
    if lambda < 0.0 {
        return Err(CoreError::invalid("baseline: lambda must be >= 0"));
    }
    if matches!(kind, BaselineKind::NoisyLabel | BaselineKind::CompositeLoss) && noise_std <= 0.0 {
        return Err(CoreError::invalid("baseline: noise_std must be positive"));
    }
    let size = task.image_size();
    let batch = task.batch;
    let forget_idx = sample_indices(task.forget.len(), batch, derive_seed(step_seed, 1));
    let inputs: Vec<Vec<f64>> = forget_idx
        .iter()
        .map(|&i| crop_pixels(&task.forget[i].pixels, size, &task.crop))
        .collect();

    let direction: ParamVector = match kind {
        BaselineKind::MaxLoss => {
            let targets: Vec<Vec<f64>> = forget_idx
                .iter()
                .map(|&i| task.forget[i].pixels.clone())
                .collect();
            let (_, grad) = batch_loss_and_grad(current, &inputs, &targets)?;
            grad.scale(-1.0) // ascend
        }
        BaselineKind::RetainLabel => {
            let pairing = epoch_pairing(task.retain.len(), epoch_seed);
            let targets: Vec<Vec<f64>> = forget_idx
                .iter()
                .map(|&i| task.retain[pairing[i % task.retain.len()]].pixels.clone())
                .collect();
            let (_, grad) = batch_loss_and_grad(current, &inputs, &targets)?;
            grad
        }
        BaselineKind::NoisyLabel => {
            let (_, grad) = batch_loss_and_grad(
                current,
                &inputs,
                &noisy_targets(task, &forget_idx, noise_std, step_seed),
            )?;
            grad
        }
        BaselineKind::CompositeLoss => {
            let (_, forget_grad) = batch_loss_and_grad(
                current,
                &inputs,
                &noisy_targets(task, &forget_idx, noise_std, step_seed),
            )?;
            let retain_idx = sample_indices(task.retain.len(), batch, derive_seed(step_seed, 2));
            let retain_inputs: Vec<Vec<f64>> = retain_idx
                .iter()
                .map(|&i| crop_pixels(&task.retain[i].pixels, size, &task.crop))
                .collect();
            let retain_targets: Vec<Vec<f64>> = retain_idx
                .iter()
                .map(|&i| task.retain[i].pixels.clone())
                .collect();
            let (_, retain_grad) = batch_loss_and_grad(current, &retain_inputs, &retain_targets)?;
            forget_grad.add_scaled(&retain_grad, lambda)
        }
    };
    let params = current.flatten().add_scaled(&direction, -mu);
    if !params.is_finite() {
        return Err(CoreError::NumericFailure {
            iter: 0,
            what: format!("{} step produced non-finite parameters", kind.name()),
        });
    }
    current.with_flat(&params)
}

fn noisy_targets(
    task: &UnlearnTask,
    forget_idx: &[usize],
    noise_std: f64,
    step_seed: u64,
) -> Vec<Vec<f64>> {
    let noise_seed = derive_seed(step_seed, 3);
    forget_idx
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let mut rng = Rng64::new(derive_seed(noise_seed, j as u64));
            task.forget[i]
                .pixels
                .iter()
                .map(|p| p + noise_std * rng.next_gaussian())
                .collect()
        })
        .collect()
}

/// Runs a baseline for `epochs` passes over the forget set.
pub fn run_baseline(
    kind: BaselineKind,
    task: &UnlearnTask,
    epochs: usize,
    mu: f64,
    lambda: f64,
    noise_std: f64,
    seed: u64,
) -> Result<ToyModel> {
    let steps_per_epoch = (task.forget.len() / task.batch).max(1);
    let mut model = task.original.clone();
    for epoch in 0..epochs {
        let epoch_seed = derive_seed(seed, 0xE000 + epoch as u64);
        for step in 0..steps_per_epoch {
            let step_seed = derive_seed(epoch_seed, step as u64);
            model = baseline_step(kind, task, &model, mu, lambda, noise_std, step_seed, epoch_seed)?;
        }
    }
    Ok(model)
}

/// One row of the comparison table.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub metrics: UnlearnMetrics,
    /// `forget_err` minus the original model's `forget_err`.
    pub forget_err_gain: f64,
}

/// Evaluates the original model, every baseline, and any externally supplied
/// unlearned models, returning one report row per method.
pub fn compare_methods(
    task: &UnlearnTask,
    epochs: usize,
    mu: f64,
    lambda: f64,
    noise_std: f64,
    seed: u64,
    extra: &[(String, ToyModel)],
) -> Result<Vec<MethodReport>> {
    let original_metrics = evaluate(&task.original, task)?;
    let mut rows = vec![MethodReport {
        method: "original".into(),
        metrics: original_metrics,
        forget_err_gain: 0.0,
    }];
    for kind in BaselineKind::ALL {
        let model = run_baseline(kind, task, epochs, mu, lambda, noise_std, seed)?;
        let metrics = evaluate(&model, task)?;
        rows.push(MethodReport {
            method: kind.name().into(),
            metrics,
            forget_err_gain: metrics.forget_err - original_metrics.forget_err,
        });
    }
    for (name, model) in extra {
        let metrics = evaluate(model, task)?;
        rows.push(MethodReport {
            method: name.clone(),
            metrics,
            forget_err_gain: metrics.forget_err - original_metrics.forget_err,
        });
    }
    Ok(rows)
}
