//! Small dense encoder-decoder with hand-written backpropagation.
//!
//! The model is a stack of affine layers with tanh activations everywhere
//! except the final decoder layer, which is linear so outputs are raw
//! reconstructions. Parameters flatten to one vector in a stable order
//! (weights row-major then bias, encoder layers then decoder layers), and
//! flatten/unflatten is a bitwise bijection — the checkpoint format and the
//! solver both depend on that ordering.

use crate::error::{CoreError, Result};
use crate::numerics::{ParamVector, Rng64};
use crate::parallel::map_chunks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `a = act(W x + b)` with `W` stored row-major.
#[derive(Debug, Clone)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.cols);
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let z = self.bias[r]
                + row
                    .iter()
                    .zip(input)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            out.push(self.activation.apply(z));
        }
    }
}

/// Encoder/decoder dimensions. The decoder mirrors the encoder.
#[derive(Debug, Clone, Copy)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl ArchConfig {
    /// Default stack for a given square image size: input -> input/4 ->
    /// input/16 and back. For 16x16 images this is 256 -> 64 -> 16.
    pub fn for_image_dim(input_dim: usize) -> Self {
        ArchConfig {
            input_dim,
            hidden_dim: (input_dim / 4).max(2),
            latent_dim: (input_dim / 16).max(1),
        }
    }
}

/// Encoder-decoder model over flat pixel vectors.
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

impl ToyModel {
    /// Seeded initialization with uniform weights scaled by fan-in.
    pub fn init(arch: ArchConfig, seed: u64) -> Self {
        let mut rng = Rng64::new(seed);
        let mut make = |rows: usize, cols: usize, activation: Activation| {
            let scale = (6.0 / (rows + cols) as f64).sqrt();
            let weights = (0..rows * cols)
                .map(|_| (2.0 * rng.next_f64() - 1.0) * scale)
                .collect();
            Layer {
                rows,
                cols,
                weights,
                bias: vec![0.0; rows],
                activation,
            }
        };
        let encoder = vec![
            make(arch.hidden_dim, arch.input_dim, Activation::Tanh),
            make(arch.latent_dim, arch.hidden_dim, Activation::Tanh),
        ];
        let decoder = vec![
            make(arch.hidden_dim, arch.latent_dim, Activation::Tanh),
            make(arch.input_dim, arch.hidden_dim, Activation::Identity),
        ];
        ToyModel { encoder, decoder }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].cols
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().expect("nonempty encoder").rows
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn layer_count(&self) -> (usize, usize) {
        (self.encoder.len(), self.decoder.len())
    }

    pub fn layer_dims(&self) -> Vec<(u32, u32)> {
        self.layers()
            .map(|l| (l.rows as u32, l.cols as u32))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.rows * l.cols + l.rows).sum()
    }

    /// Flattens all parameters: per layer weights row-major then bias,
    /// encoder first.
    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        ParamVector::from_raw(out)
    }

    /// Builds a model with this model's shapes and the given flat parameters.
    pub fn with_flat(&self, params: &ParamVector) -> Result<ToyModel> {
        if params.len() != self.param_count() {
            return Err(CoreError::invalid(format!(
                "with_flat: expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut model = self.clone();
        let mut offset = 0;
        let src = params.as_slice();
        for l in model.encoder.iter_mut().chain(model.decoder.iter_mut()) {
            let w = l.rows * l.cols;
            l.weights.copy_from_slice(&src[offset..offset + w]);
            offset += w;
            l.bias.copy_from_slice(&src[offset..offset + l.rows]);
            offset += l.rows;
        }
        Ok(model)
    }

    /// Decoder(encoder(input)). Output is unclamped.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(CoreError::invalid(format!(
                "forward: input has length {}, model expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for l in self.layers() {
            l.forward_into(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Forward pass keeping every layer output for backpropagation.
    fn forward_cached(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(5);
        acts.push(input.to_vec());
        let mut next = Vec::new();
        for l in self.layers() {
            l.forward_into(acts.last().expect("nonempty"), &mut next);
            acts.push(next.clone());
        }
        acts
    }

    /// Accumulates parameter gradients for one sample given the gradient of
    /// the loss w.r.t. the model output. Layout matches `flatten`.
    fn backward_into(&self, acts: &[Vec<f64>], out_grad: &[f64], grad: &mut [f64]) {
        let layers: Vec<&Layer> = self.layers().collect();
        // per-layer flat offsets
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for l in &layers {
            offsets.push(off);
            off += l.rows * l.cols + l.rows;
        }
        let mut delta: Vec<f64> = out_grad
            .iter()
            .zip(&acts[layers.len()])
            .map(|(g, a)| g * layers.last().unwrap().activation.derivative_from_output(*a))
            .collect();
        for li in (0..layers.len()).rev() {
            let l = layers[li];
            let input = &acts[li];
            let base = offsets[li];
            for r in 0..l.rows {
                let d = delta[r];
                let wrow = &mut grad[base + r * l.cols..base + (r + 1) * l.cols];
                for (g, x) in wrow.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            let bias_base = base + l.rows * l.cols;
            for r in 0..l.rows {
                grad[bias_base + r] += delta[r];
            }
            if li > 0 {
                let prev = layers[li - 1];
                let mut prev_delta = vec![0.0; l.cols];
                for (r, d) in delta.iter().enumerate() {
                    let row = &l.weights[r * l.cols..(r + 1) * l.cols];
                    for (pd, w) in prev_delta.iter_mut().zip(row) {
                        *pd += d * w;
                    }
                }
                for (pd, a) in prev_delta.iter_mut().zip(&acts[li]) {
                    *pd *= prev.activation.derivative_from_output(*a);
                }
                delta = prev_delta;
            }
        }
    }
}

/// Mean over the batch of squared L2 reconstruction error, with its gradient
/// w.r.t. the flattened model parameters.
///
/// Loss: `(1/B) sum_b ||model(input_b) - target_b||^2`. The batch mean keeps
/// the step size independent of batch size. Samples may fan out over worker
/// threads; per-chunk partials are combined in chunk order.
pub fn batch_loss_and_grad(
    model: &ToyModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(CoreError::invalid(
            "batch_loss_and_grad: inputs and targets must be nonempty and equal-length",
        ));
    }
    let dim = model.param_count();
    let batch = inputs.len() as f64;
    let parts = map_chunks(inputs.len(), |range| {
        let mut loss = 0.0;
        let mut grad = vec![0.0; dim];
        for i in range {
            let acts = model.forward_cached(&inputs[i]);
            let out = acts.last().expect("output layer");
            let mut out_grad = vec![0.0; out.len()];
            for ((og, o), t) in out_grad.iter_mut().zip(out).zip(&targets[i]) {
                let diff = o - t;
                loss += diff * diff;
                *og = 2.0 * diff / batch;
            }
            model.backward_into(&acts, &out_grad, &mut grad);
        }
        (loss, grad)
    });
    let mut total_loss = 0.0;
    let mut total_grad = vec![0.0; dim];
    for (loss, grad) in parts {
        total_loss += loss;
        for (t, g) in total_grad.iter_mut().zip(&grad) {
            *t += g;
        }
    }
    total_loss /= batch;
    if !total_loss.is_finite() || total_grad.iter().any(|g| !g.is_finite()) {
        return Err(CoreError::NumericFailure {
            iter: 0,
            what: "batch loss or gradient is non-finite".into(),
        });
    }
    Ok((total_loss, ParamVector::from_raw(total_grad)))
}

/// Plain batch loss without gradients.
pub fn batch_loss(model: &ToyModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(CoreError::invalid(
            "batch_loss: inputs and targets must be nonempty and equal-length",
        ));
    }
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let out = model.forward(x)?;
        loss += out
            .iter()
            .zip(t)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>();
    }
    Ok(loss / inputs.len() as f64)
}
