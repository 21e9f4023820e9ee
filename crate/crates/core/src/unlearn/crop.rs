//! Masking transforms defining the image-to-image task.
//!
//! "Cropping" zeroes the removed region rather than shrinking the image, so
//! model input and output dimensions stay equal. Center and KeepCenter rank
//! pixels by Chebyshev distance from the image center (row-major tie-break)
//! and mask exactly `round(ratio * area)` of them, which keeps the masked
//! pixel count exact even when the target area is not a perfect square.

use crate::error::{CoreError, Result};
use crate::numerics::Rng64;
use crate::unlearn::dataset::ToyImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropPattern {
    /// Zero the most-central `ratio` of the area (inpainting).
    Center,
    /// Zero the top `ratio` of rows (downward extension).
    Top,
    /// Zero the bottom `ratio` of rows (upward extension).
    Bottom,
    /// Zero the left `ratio` of columns (rightward extension).
    Left,
    /// Zero the right `ratio` of columns (leftward extension).
    Right,
    /// Zero a seeded random `ratio` of pixels (masked reconstruction).
    RandomMask,
    /// Keep the most-central `ratio` of the area and zero the rest
    /// (outpainting).
    KeepCenter,
}

impl CropPattern {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "center" => CropPattern::Center,
            "top" => CropPattern::Top,
            "bottom" => CropPattern::Bottom,
            "left" => CropPattern::Left,
            "right" => CropPattern::Right,
            "random" | "random-mask" => CropPattern::RandomMask,
            "keep-center" => CropPattern::KeepCenter,
            other => {
                return Err(CoreError::invalid(format!(
                    "unknown crop pattern '{other}' (expected center|top|bottom|left|right|random|keep-center)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CropPattern::Center => "center",
            CropPattern::Top => "top",
            CropPattern::Bottom => "bottom",
            CropPattern::Left => "left",
            CropPattern::Right => "right",
            CropPattern::RandomMask => "random",
            CropPattern::KeepCenter => "keep-center",
        }
    }
}

/// Masking transform specification. `mask_seed` is only consulted by
/// `RandomMask`, which needs a seed to stay deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub pattern: CropPattern,
    pub ratio: f64,
    pub mask_seed: u64,
}

impl CropSpec {
    pub fn new(pattern: CropPattern, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CoreError::invalid(format!(
                "crop ratio must lie in (0, 1), got {ratio}"
            )));
        }
        Ok(CropSpec {
            pattern,
            ratio,
            mask_seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mask_seed = seed;
        self
    }
}

/// Indices (row-major) zeroed by the spec on a `size x size` image.
pub fn mask_indices(size: usize, spec: &CropSpec) -> Vec<usize> {
    let area = size * size;
    let n = ((spec.ratio * area as f64).round() as usize).clamp(0, area);
    match spec.pattern {
        CropPattern::Center => central_pixels(size, n),
        CropPattern::KeepCenter => {
            let keep: std::collections::BTreeSet<usize> =
                central_pixels(size, n).into_iter().collect();
            (0..area).filter(|i| !keep.contains(i)).collect()
        }
        CropPattern::Top => {
            let rows = ((spec.ratio * size as f64).round() as usize).min(size);
            (0..rows * size).collect()
        }
        CropPattern::Bottom => {
            let rows = ((spec.ratio * size as f64).round() as usize).min(size);
            ((size - rows) * size..area).collect()
        }
        CropPattern::Left => {
            let cols = ((spec.ratio * size as f64).round() as usize).min(size);
            (0..area).filter(|i| i % size < cols).collect()
        }
        CropPattern::Right => {
            let cols = ((spec.ratio * size as f64).round() as usize).min(size);
            (0..area).filter(|i| i % size >= size - cols).collect()
        }
        CropPattern::RandomMask => {
            let mut rng = Rng64::new(spec.mask_seed);
            let mut idx: Vec<usize> = (0..area).collect();
            // partial Fisher-Yates: the first n entries are the sample
            for i in 0..n {
                let j = i + rng.next_below(area - i);
                idx.swap(i, j);
            }
            idx.truncate(n);
            idx.sort_unstable();
            idx
        }
    }
}

/// The `n` pixels closest to the image center by Chebyshev distance,
/// row-major tie-break.
fn central_pixels(size: usize, n: usize) -> Vec<usize> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut idx: Vec<usize> = (0..size * size).collect();
    idx.sort_by(|&a, &b| {
        let d = |i: usize| {
            let y = (i / size) as f64;
            let x = (i % size) as f64;
            (x - c).abs().max((y - c).abs())
        };
        d(a).partial_cmp(&d(b)).unwrap().then(a.cmp(&b))
    });
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

/// Applies the mask to raw pixels.
pub fn crop_pixels(pixels: &[f64], size: usize, spec: &CropSpec) -> Vec<f64> {
    debug_assert_eq!(pixels.len(), size * size);
    let mut out = pixels.to_vec();
    for i in mask_indices(size, spec) {
        out[i] = 0.0;
    }
    out
}

/// Applies the mask to an image, keeping its label and split.
pub fn crop(image: &ToyImage, spec: &CropSpec) -> ToyImage {
    ToyImage {
        pixels: crop_pixels(&image.pixels, image.size, spec),
        ..image.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unlearn::dataset::{build_dataset, DatasetConfig, Split};

    fn image_4x4() -> ToyImage {
        ToyImage {
            pixels: (0..16).map(|i| i as f64 + 1.0).collect(),
            size: 4,
            class_id: 0,
            split: Split::Forget,
        }
    }

    #[test]
    fn center_quarter_zeroes_central_2x2() {
        let spec = CropSpec::new(CropPattern::Center, 0.25).unwrap();
        let cropped = crop(&image_4x4(), &spec);
        let zeroed: Vec<usize> = cropped
            .pixels
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(zeroed, vec![5, 6, 9, 10]);
        assert_eq!(
            cropped.pixels.iter().filter(|p| **p != 0.0).count(),
            12
        );
    }

    #[test]
    fn tiny_ratio_masks_at_most_one_pixel() {
        let spec = CropSpec::new(CropPattern::Center, 0.01).unwrap();
        let cropped = crop(&image_4x4(), &spec);
        let zeroed = cropped.pixels.iter().filter(|p| **p == 0.0).count();
        assert!(zeroed <= 1);
    }

    #[test]
    fn center_half_on_16x16_zeroes_exactly_128() {
        let cfg = DatasetConfig::new(2, 2, 1);
        let (forget, _) = build_dataset(&cfg).unwrap();
        let spec = CropSpec::new(CropPattern::Center, 0.5).unwrap();
        let mask = mask_indices(16, &spec);
        assert_eq!(mask.len(), 128);
        let cropped = crop(&forget[0], &spec);
        let changed = forget[0]
            .pixels
            .iter()
            .zip(&cropped.pixels)
            .filter(|(a, b)| a != b)
            .count();
        // brute-force count of masked, previously nonzero pixels
        let expected = mask
            .iter()
            .filter(|&&i| forget[0].pixels[i] != 0.0)
            .count();
        assert_eq!(changed, expected);
    }

    #[test]
    fn keep_center_complements_center() {
        let c = CropSpec::new(CropPattern::Center, 0.25).unwrap();
        let k = CropSpec::new(CropPattern::KeepCenter, 0.25).unwrap();
        let mc: std::collections::BTreeSet<usize> = mask_indices(8, &c).into_iter().collect();
        let mk: std::collections::BTreeSet<usize> = mask_indices(8, &k).into_iter().collect();
        assert!(mc.is_disjoint(&mk));
        assert_eq!(mc.len() + mk.len(), 64);
    }

    #[test]
    fn directional_patterns_mask_expected_rows_and_columns() {
        let top = CropSpec::new(CropPattern::Top, 0.5).unwrap();
        assert_eq!(mask_indices(4, &top), (0..8).collect::<Vec<_>>());
        let bottom = CropSpec::new(CropPattern::Bottom, 0.5).unwrap();
        assert_eq!(mask_indices(4, &bottom), (8..16).collect::<Vec<_>>());
        let left = CropSpec::new(CropPattern::Left, 0.25).unwrap();
        assert_eq!(mask_indices(4, &left), vec![0, 4, 8, 12]);
        let right = CropSpec::new(CropPattern::Right, 0.25).unwrap();
        assert_eq!(mask_indices(4, &right), vec![3, 7, 11, 15]);
    }

    #[test]
    fn random_mask_is_seeded_and_sized() {
        let a = CropSpec::new(CropPattern::RandomMask, 0.5).unwrap().with_seed(3);
        let b = CropSpec::new(CropPattern::RandomMask, 0.5).unwrap().with_seed(3);
        let c = CropSpec::new(CropPattern::RandomMask, 0.5).unwrap().with_seed(4);
        assert_eq!(mask_indices(16, &a), mask_indices(16, &b));
        assert_ne!(mask_indices(16, &a), mask_indices(16, &c));
        assert_eq!(mask_indices(16, &a).len(), 128);
    }

    #[test]
    fn ratio_bounds_are_enforced() {
        assert!(CropSpec::new(CropPattern::Center, 0.0).is_err());
        assert!(CropSpec::new(CropPattern::Center, 1.0).is_err());
    }
}
