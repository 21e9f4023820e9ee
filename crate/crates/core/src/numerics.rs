//! Deterministic numeric substrate: flat parameter vectors, seeded Gaussian
//! sampling, and diagonal covariance estimation.
//!
//! All randomness in the crate flows through [`Rng64`], a SplitMix64 generator
//! with a fixed output stream. Every stochastic operation takes an explicit
//! seed, so identical inputs always produce bitwise-identical outputs,
//! independent of platform or library version.

use crate::error::{CoreError, Result};

/// SplitMix64 pseudo-random generator.
///
/// Chosen over an external RNG crate so the byte streams backing checkpoints
/// and result files can never shift under a dependency upgrade. Gaussian
/// draws use Box-Muller on the 53-bit uniform output.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
    cached_gaussian: Option<f64>,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 {
            state: seed,
            cached_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; never returns zero, so it is safe under `ln`.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box-Muller. Pairs are consumed in order, so
    /// the stream is a pure function of the seed.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.cached_gaussian = Some(r * angle.sin());
        r * angle.cos()
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Derives an independent stream seed from a base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    Rng64::new(base ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)).next_u64()
}

/// Flat vector of model parameters or pixel intensities.
///
/// Entries are finite by construction; arithmetic helpers assume matching
/// lengths and panic otherwise, since a mismatch is a programming error
/// rather than a recoverable condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::invalid(format!(
                "non-finite entry {} at index {i}",
                values[i]
            )));
        }
        Ok(ParamVector(values))
    }

    /// Wraps values that are already known to be finite.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Returns `self + scale * other`.
    pub fn add_scaled(&self, other: &ParamVector, scale: f64) -> ParamVector {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        ParamVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|a| a * s).collect())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-coordinate variances of a zero-mean pixel distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagCovariance(Vec<f64>);

impl DiagCovariance {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if let Some(i) = variances.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(format!(
                "variance {} at index {i} must be finite and nonnegative",
                variances[i]
            )));
        }
        Ok(DiagCovariance(variances))
    }

    pub fn identity(dim: usize) -> Self {
        DiagCovariance(vec![1.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Draws a vector of independent zero-mean Gaussians, coordinate `i` with
/// variance `cov[i]`. Pure function of `(dim, cov, seed)`.
pub fn sample_gaussian(dim: usize, cov: &DiagCovariance, seed: u64) -> Result<ParamVector> {
    if dim == 0 {
        return Err(CoreError::invalid("sample_gaussian: dim must be positive"));
    }
    if dim != cov.len() {
        return Err(CoreError::invalid(format!(
            "sample_gaussian: dim {dim} does not match covariance length {}",
            cov.len()
        )));
    }
    let mut rng = Rng64::new(seed);
    let values = cov
        .as_slice()
        .iter()
        .map(|v| v.sqrt() * rng.next_gaussian())
        .collect();
    Ok(ParamVector::from_raw(values))
}

/// Per-coordinate unbiased sample variance about the sample mean.
pub fn estimate_covariance(samples: &[ParamVector]) -> Result<DiagCovariance> {
    if samples.len() < 2 {
        return Err(CoreError::invalid(
            "estimate_covariance: need at least 2 samples",
        ));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(CoreError::invalid(
            "estimate_covariance: samples have unequal lengths",
        ));
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(s.iter()).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    for v in &mut var {
        *v /= n - 1.0;
    }
    DiagCovariance::new(var)
}
