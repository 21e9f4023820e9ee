//! The toy unlearning task: pretraining, the two-objective construction, and
//! desk-scale metrics.
//!
//! `f1` pulls the model's output on cropped forget images toward a noise
//! target (the frozen original model applied to cropped Gaussian noise, or
//! the raw noise itself), `f2` pins the output on cropped retain images to
//! the frozen original's output. Both are batch means of squared L2 errors;
//! minibatches and noise draws are keyed off the per-step seed, so an entire
//! run is a pure function of its configuration.

use crate::error::{CoreError, Result};
use crate::numerics::{
    derive_seed, estimate_covariance, sample_gaussian, DiagCovariance, ParamVector, Rng64,
};
use crate::objective::{BiObjectiveProblem, ObjectiveEval};
use crate::unlearn::crop::{crop_pixels, CropSpec};
use crate::unlearn::dataset::ToyImage;
use crate::unlearn::model::{batch_loss_and_grad, ArchConfig, ToyModel};

/// How the f1 target is constructed from sampled noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Target is the original model's output on the cropped noise image.
    ThroughOriginal,
    /// Target is the raw noise image itself.
    DirectNoise,
}

impl NoiseMode {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "through-original" => NoiseMode::ThroughOriginal,
            "direct-noise" => NoiseMode::DirectNoise,
            other => {
                return Err(CoreError::invalid(format!(
                    "unknown noise mode '{other}' (expected through-original|direct-noise)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseMode::ThroughOriginal => "through-original",
            NoiseMode::DirectNoise => "direct-noise",
        }
    }
}

/// Frozen original model plus everything needed to evaluate both objectives.
#[derive(Debug, Clone)]
pub struct UnlearnTask {
    pub original: ToyModel,
    pub forget: Vec<ToyImage>,
    pub retain: Vec<ToyImage>,
    pub crop: CropSpec,
    pub sigma: DiagCovariance,
    pub batch: usize,
    pub noise_mode: NoiseMode,
}

/// Variance floor below which a coordinate of the estimated covariance is
/// replaced by 1.0.
const SIGMA_FLOOR: f64 = 1e-12;

impl UnlearnTask {
    /// Validates the invariants and estimates the noise covariance from the
    /// forget set (per-coordinate; collapsed coordinates fall back to unit
    /// variance).
    pub fn new(
        original: ToyModel,
        forget: Vec<ToyImage>,
        retain: Vec<ToyImage>,
        crop: CropSpec,
        batch: usize,
        noise_mode: NoiseMode,
    ) -> Result<Self> {
        if forget.is_empty() || retain.is_empty() {
            return Err(CoreError::invalid("unlearn task: both splits must be nonempty"));
        }
        let dim = forget[0].dim();
        if forget
            .iter()
            .chain(&retain)
            .any(|i| i.dim() != dim || i.dim() != original.input_dim())
        {
            return Err(CoreError::invalid(
                "unlearn task: image dimensions must match the model input",
            ));
        }
        let forget_classes: std::collections::BTreeSet<u32> =
            forget.iter().map(|i| i.class_id).collect();
        if retain.iter().any(|i| forget_classes.contains(&i.class_id)) {
            return Err(CoreError::invalid(
                "unlearn task: forget and retain sets must be disjoint by class",
            ));
        }
        if batch == 0 || batch > forget.len() || batch > retain.len() {
            return Err(CoreError::invalid(format!(
                "unlearn task: batch {batch} must be positive and no larger than either split"
            )));
        }
        let flat: Vec<ParamVector> = forget
            .iter()
            .map(|i| ParamVector::new(i.pixels.clone()))
            .collect::<Result<_>>()?;
        let est = estimate_covariance(&flat)?;
        let sigma = DiagCovariance::new(
            est.as_slice()
                .iter()
                .map(|v| if *v < SIGMA_FLOOR { 1.0 } else { *v })
                .collect(),
        )?;
        Ok(UnlearnTask {
            original,
            forget,
            retain,
            crop,
            sigma,
            batch,
            noise_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.forget[0].dim()
    }

    pub fn image_size(&self) -> usize {
        self.forget[0].size
    }

    /// Replaces the trailing `fraction` of the retain set with proxy images
    /// from held-out classes (reduced retain-sample availability).
    pub fn substitute_proxy_retain(&mut self, proxies: Vec<ToyImage>, fraction: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(CoreError::invalid("proxy fraction must lie in [0, 1]"));
        }
        let k = ((self.retain.len() as f64) * fraction).round() as usize;
        if k > proxies.len() {
            return Err(CoreError::invalid(format!(
                "need {k} proxy images, only {} provided",
                proxies.len()
            )));
        }
        let start = self.retain.len() - k;
        for (slot, proxy) in self.retain[start..].iter_mut().zip(proxies) {
            *slot = proxy;
        }
        Ok(())
    }
}

/// `batch` distinct indices из `0..len`, seeded partial shuffle.
fn sample_indices(len: usize, batch: usize, seed: u64) -> Vec<usize> {
    debug_assert!(batch <= len);
    let mut rng = Rng64::new(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..batch {
        let j = i + rng.next_below(len - i);
        idx.swap(i, j);
    }
    idx.truncate(batch);
    idx
}

/// Draws `count` noise images with covariance `sigma`.
fn sample_noise_images(
    count: usize,
    dim: usize,
    sigma: &DiagCovariance,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .map(|j| Ok(sample_gaussian(dim, sigma, derive_seed(seed, j as u64))?.into_vec()))
        .collect()
}

/// Evaluates both objectives and their gradients at `current`.
///
/// Batches of forget images, retain images, and noise images (all of size
/// `task.batch`) are drawn deterministically from `iteration_seed`.
pub fn unlearn_objectives(
    task: &UnlearnTask,
    current: &ToyModel,
    iteration_seed: u64,
) -> Result<ObjectiveEval> {
    objectives_on(
        task,
        current,
        &sample_indices(task.forget.len(), task.batch, derive_seed(iteration_seed, 1)),
        &sample_indices(task.retain.len(), task.batch, derive_seed(iteration_seed, 2)),
        derive_seed(iteration_seed, 3),
    )
}

fn objectives_on(
    task: &UnlearnTask,
    current: &ToyModel,
    forget_idx: &[usize],
    retain_idx: &[usize],
    noise_seed: u64,
) -> Result<ObjectiveEval> {
    let size = task.image_size();
    let dim = task.dim();

    // f1: cropped forget images against the noise target
    let f1_inputs: Vec<Vec<f64>> = forget_idx
        .iter()
        .map(|&i| crop_pixels(&task.forget[i].pixels, size, &task.crop))
        .collect();
    let noise = sample_noise_images(forget_idx.len(), dim, &task.sigma, noise_seed)?;
    let f1_targets: Vec<Vec<f64>> = match task.noise_mode {
        NoiseMode::ThroughOriginal => noise
            .iter()
            .map(|n| task.original.forward(&crop_pixels(n, size, &task.crop)))
            .collect::<Result<_>>()?,
        NoiseMode::DirectNoise => noise,
    };
    let (f1, grad_f1) = batch_loss_and_grad(current, &f1_inputs, &f1_targets)?;

    // f2: cropped retain images against the frozen original's output
    let f2_inputs: Vec<Vec<f64>> = retain_idx
        .iter()
        .map(|&i| crop_pixels(&task.retain[i].pixels, size, &task.crop))
        .collect();
    let f2_targets: Vec<Vec<f64>> = f2_inputs
        .iter()
        .map(|x| task.original.forward(x))
        .collect::<Result<_>>()?;
    let (f2, grad_f2) = batch_loss_and_grad(current, &f2_inputs, &f2_targets)?;

    Ok(ObjectiveEval {
        f1,
        f2,
        grad_f1,
        grad_f2,
    })
}

/// Seed for the fixed noise batch used by full-data evaluation.
const FULL_EVAL_NOISE_SEED: u64 = 0x4E4F_4953_4556;

/// [`BiObjectiveProblem`] wrapper: parameters are the flattened model.
pub struct UnlearnProblem {
    task: UnlearnTask,
}

impl UnlearnProblem {
    pub fn new(task: UnlearnTask) -> Self {
        UnlearnProblem { task }
    }

    pub fn task(&self) -> &UnlearnTask {
        &self.task
    }

    pub fn model_at(&self, theta: &ParamVector) -> Result<ToyModel> {
        self.task.original.with_flat(theta)
    }
}

impl BiObjectiveProblem for UnlearnProblem {
    fn dim(&self) -> usize {
        self.task.original.param_count()
    }

    fn eval(&self, theta: &ParamVector, step_seed: u64) -> Result<ObjectiveEval> {
        let current = self.task.original.with_flat(theta)?;
        unlearn_objectives(&self.task, &current, step_seed)
    }

    /// Full-batch evaluation: every forget and retain image, with a fixed
    /// noise batch of matching size.
    fn eval_full(&self, theta: &ParamVector) -> Result<ObjectiveEval> {
        let current = self.task.original.with_flat(theta)?;
        let forget_idx: Vec<usize> = (0..self.task.forget.len()).collect();
        let retain_idx: Vec<usize> = (0..self.task.retain.len()).collect();
        objectives_on(
            &self.task,
            &current,
            &forget_idx,
            &retain_idx,
            FULL_EVAL_NOISE_SEED,
        )
    }
}

/// Pretraining configuration.
#[derive(Debug, Clone, Copy)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Optional early stop once the mean relative reconstruction error over
    /// the training set drops below this value.
    pub target_rel_err: Option<f64>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 500,
            learning_rate: 2e-3,
            seed: 0,
            target_rel_err: None,
        }
    }
}

/// Trains the original model: full-batch Adam on the mean squared
/// reconstruction error of full images from their cropped versions.
pub fn pretrain(
    images: &[ToyImage],
    crop_spec: &CropSpec,
    arch: ArchConfig,
    cfg: &PretrainConfig,
) -> Result<(ToyModel, f64)> {
    if images.is_empty() {
        return Err(CoreError::invalid("pretrain: dataset must be nonempty"));
    }
    let size = images[0].size;
    let inputs: Vec<Vec<f64>> = images
        .iter()
        .map(|i| crop_pixels(&i.pixels, size, crop_spec))
        .collect();
    let targets: Vec<Vec<f64>> = images.iter().map(|i| i.pixels.clone()).collect();

    let mut model = ToyModel::init(arch, cfg.seed);
    let dim = model.param_count();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.95, 1e-8);
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut loss = f64::INFINITY;
    for t in 1..=cfg.epochs {
        let (l, grad) = batch_loss_and_grad(&model, &inputs, &targets)?;
        if !l.is_finite() {
            return Err(CoreError::NumericFailure {
                iter: t as u64,
                what: "pretraining loss diverged".into(),
            });
        }
        loss = l;
        let mut params = model.flatten().into_vec();
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        for i in 0..dim {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            params[i] -= cfg.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        }
        model = model.with_flat(&ParamVector::new(params)?)?;
        if let Some(target) = cfg.target_rel_err {
            if t % 10 == 0 && mean_relative_error(&model, images, crop_spec)? < target {
                break;
            }
        }
    }
    // report the loss at the returned parameters
    if cfg.epochs > 0 {
        loss = crate::unlearn::model::batch_loss(&model, &inputs, &targets)?;
    }
    Ok((model, loss))
}

/// Mean over images of `||model(crop(x)) - x|| / ||x||`.
pub fn mean_relative_error(
    model: &ToyModel,
    images: &[ToyImage],
    crop_spec: &CropSpec,
) -> Result<f64> {
    if images.is_empty() {
        return Err(CoreError::invalid("mean_relative_error: empty image set"));
    }
    let size = images[0].size;
    let mut total = 0.0;
    for img in images {
        let out = model.forward(&crop_pixels(&img.pixels, size, crop_spec))?;
        let err: f64 = out
            .iter()
            .zip(&img.pixels)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = img.pixels.iter().map(|p| p * p).sum::<f64>().sqrt();
        total += err / scale.max(1e-12);
    }
    Ok(total / images.len() as f64)
}

/// Desk-scale evaluation metrics.
#[derive(Debug, Clone, Copy)]
pub struct UnlearnMetrics {
    /// Mean L2 distance between reconstructions and ground truth on the
    /// forget set; rises as unlearning takes hold.
    pub forget_err: f64,
    /// Same on the retain set; should stay near the original's value.
    pub retain_err: f64,
    /// Mean L2 distance between forget reconstructions and the noise target.
    pub noise_prox: f64,
    /// `retain_err(model) - retain_err(original)`.
    pub retain_degradation: f64,
}

fn mean_l2(model: &ToyModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let out = model.forward(x)?;
        total += out
            .iter()
            .zip(t)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            .sqrt();
    }
    Ok(total / inputs.len() as f64)
}

/// Evaluates a model on the task's full splits. The noise targets use a
/// fixed internal seed, so repeated evaluation is deterministic.
pub fn evaluate(model: &ToyModel, task: &UnlearnTask) -> Result<UnlearnMetrics> {
    let size = task.image_size();
    let forget_inputs: Vec<Vec<f64>> = task
        .forget
        .iter()
        .map(|i| crop_pixels(&i.pixels, size, &task.crop))
        .collect();
    let forget_targets: Vec<Vec<f64>> = task.forget.iter().map(|i| i.pixels.clone()).collect();
    let retain_inputs: Vec<Vec<f64>> = task
        .retain
        .iter()
        .map(|i| crop_pixels(&i.pixels, size, &task.crop))
        .collect();
    let retain_targets: Vec<Vec<f64>> = task.retain.iter().map(|i| i.pixels.clone()).collect();

    let noise = sample_noise_images(task.forget.len(), task.dim(), &task.sigma, FULL_EVAL_NOISE_SEED)?;
    let noise_targets: Vec<Vec<f64>> = match task.noise_mode {
        NoiseMode::ThroughOriginal => noise
            .iter()
            .map(|n| task.original.forward(&crop_pixels(n, size, &task.crop)))
            .collect::<Result<_>>()?,
        NoiseMode::DirectNoise => noise,
    };

    let forget_err = mean_l2(model, &forget_inputs, &forget_targets)?;
    let retain_err = mean_l2(model, &retain_inputs, &retain_targets)?;
    let noise_prox = mean_l2(model, &forget_inputs, &noise_targets)?;
    let retain_err_original = mean_l2(&task.original, &retain_inputs, &retain_targets)?;
    Ok(UnlearnMetrics {
        forget_err,
        retain_err,
        noise_prox,
        retain_degradation: retain_err - retain_err_original,
    })
}
