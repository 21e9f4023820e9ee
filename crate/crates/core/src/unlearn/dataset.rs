//! Synthetic image classes for the toy task.
//!
//! Each class is a procedural texture family (stripes, checkers, or blobs)
//! with class-seeded parameters; instances within a class get small jittered
//! variations plus pixel noise. Half the classes form the forget split, half
//! the retain split. Every image is mean-subtracted, so pixel values live in
//! [-1, 1] and the zero-mean assumption behind the noise-target construction
//! holds by construction.

use crate::error::{CoreError, Result};
use crate::numerics::{derive_seed, Rng64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Forget,
    Retain,
}

/// One square grayscale image with its class label and split assignment.
#[derive(Debug, Clone)]
pub struct ToyImage {
    pub pixels: Vec<f64>,
    pub size: usize,
    pub class_id: u32,
    pub split: Split,
}

impl ToyImage {
    pub fn dim(&self) -> usize {
        self.size * self.size
    }
}

/// Dataset shape knobs. The default image size is 16x16.
#[derive(Debug, Clone, Copy)]
pub struct DatasetConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub size: usize,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn new(n_classes: usize, per_class: usize, seed: u64) -> Self {
        DatasetConfig {
            n_classes,
            per_class,
            size: 16,
            seed,
        }
    }
}

/// Generates the forget and retain splits.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<(Vec<ToyImage>, Vec<ToyImage>)> {
    if cfg.n_classes == 0 || !cfg.n_classes.is_multiple_of(2) {
        return Err(CoreError::invalid(format!(
            "build_dataset: n_classes must be positive and even, got {}",
            cfg.n_classes
        )));
    }
    if cfg.per_class < 2 {
        return Err(CoreError::invalid("build_dataset: per_class must be >= 2"));
    }
    if cfg.size < 2 {
        return Err(CoreError::invalid("build_dataset: size must be >= 2"));
    }
    let mut forget = Vec::new();
    let mut retain = Vec::new();
    for class in 0..cfg.n_classes {
        let split = if class < cfg.n_classes / 2 {
            Split::Forget
        } else {
            Split::Retain
        };
        for instance in 0..cfg.per_class {
            let img = generate_image(cfg, class as u32, instance as u64, split);
            match split {
                Split::Forget => forget.push(img),
                Split::Retain => retain.push(img),
            }
        }
    }
    Ok((forget, retain))
}

/// Generates extra classes (ids starting at `first_class_id`) usable as a
/// proxy retain set when real retain samples are withheld.
pub fn generate_proxy_classes(
    cfg: &DatasetConfig,
    first_class_id: u32,
    n_classes: usize,
    count: usize,
) -> Vec<ToyImage> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    'outer: for class in 0..n_classes {
        for instance in 0..cfg.per_class.max(1) {
            if i >= count {
                break 'outer;
            }
            out.push(generate_image(
                cfg,
                first_class_id + class as u32,
                instance as u64,
                Split::Retain,
            ));
            i += 1;
        }
    }
    out
}

fn generate_image(cfg: &DatasetConfig, class: u32, instance: u64, split: Split) -> ToyImage {
    let class_seed = derive_seed(cfg.seed, 0x1000 + class as u64);
    let mut class_rng = Rng64::new(class_seed);
    let family = class % 3;
    // class-level texture parameters
    let p0 = class_rng.next_f64();
    let p1 = class_rng.next_f64();
    let p2 = class_rng.next_f64();
    let p3 = class_rng.next_f64();

    let mut inst_rng = Rng64::new(derive_seed(class_seed, instance));
    let jitter = 0.25 * (inst_rng.next_f64() - 0.5);
    let noise_amp = 0.05;

    let s = cfg.size;
    let mut pixels = Vec::with_capacity(s * s);
    for y in 0..s {
        for x in 0..s {
            let xf = x as f64;
            let yf = y as f64;
            let base = match family {
                0 => {
                    // oriented stripes
                    let angle = p0 * std::f64::consts::PI;
                    let freq = 0.4 + 1.2 * p1;
                    let phase = p2 * 6.0 + jitter;
                    let t = freq * (xf * angle.cos() + yf * angle.sin()) + phase;
                    0.5 + 0.5 * t.sin()
                }
                1 => {
                    // offset checkerboard
                    let cell = 2 + (p0 * 4.0) as usize;
                    let ox = (p1 * cell as f64) as usize;
                    let oy = (p2 * cell as f64) as usize;
                    if ((x + ox) / cell + (y + oy) / cell).is_multiple_of(2) {
                        0.15 + 0.1 * p3
                    } else {
                        0.85 - 0.1 * p3
                    }
                }
                _ => {
                    // sum of two gaussian blobs
                    let cx0 = p0 * (s - 1) as f64;
                    let cy0 = p1 * (s - 1) as f64;
                    let cx1 = p2 * (s - 1) as f64;
                    let cy1 = p3 * (s - 1) as f64;
                    let w = (s as f64 / 5.0) + jitter.abs();
                    let d0 = ((xf - cx0).powi(2) + (yf - cy0).powi(2)) / (2.0 * w * w);
                    let d1 = ((xf - cx1).powi(2) + (yf - cy1).powi(2)) / (2.0 * w * w);
                    ((-d0).exp() + 0.8 * (-d1).exp()).min(1.0)
                }
            };
            let noisy = (base + noise_amp * (2.0 * inst_rng.next_f64() - 1.0)).clamp(0.0, 1.0);
            pixels.push(noisy);
        }
    }
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    for p in &mut pixels {
        *p -= mean;
    }
    ToyImage {
        pixels,
        size: s,
        class_id: class,
        split,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_mean_subtracted_and_bounded() {
        let cfg = DatasetConfig::new(2, 4, 3);
        let (forget, retain) = build_dataset(&cfg).unwrap();
        assert_eq!(forget.len(), 4);
        assert_eq!(retain.len(), 4);
        for img in forget.iter().chain(&retain) {
            let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
            assert!(mean.abs() < 1e-9, "image mean {mean}");
            assert!(img.pixels.iter().all(|p| (-1.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn same_seed_gives_identical_datasets() {
        let cfg = DatasetConfig::new(4, 3, 11);
        let (f1, r1) = build_dataset(&cfg).unwrap();
        let (f2, r2) = build_dataset(&cfg).unwrap();
        for (a, b) in f1.iter().zip(&f2).chain(r1.iter().zip(&r2)) {
            assert_eq!(a.pixels, b.pixels);
        }
    }

    #[test]
    fn rejects_odd_class_count() {
        assert!(build_dataset(&DatasetConfig::new(3, 4, 0)).is_err());
        assert!(build_dataset(&DatasetConfig::new(2, 1, 0)).is_err());
    }

    #[test]
    fn splits_are_disjoint_by_class() {
        let cfg = DatasetConfig::new(6, 3, 5);
        let (forget, retain) = build_dataset(&cfg).unwrap();
        let forget_classes: std::collections::BTreeSet<u32> =
            forget.iter().map(|i| i.class_id).collect();
        let retain_classes: std::collections::BTreeSet<u32> =
            retain.iter().map(|i| i.class_id).collect();
        assert!(forget_classes.is_disjoint(&retain_classes));
    }

    /// Generator self-check: classes must be separable by their centroids.
    #[test]
    fn nearest_centroid_classification_is_accurate() {
        let cfg = DatasetConfig::new(8, 32, 7);
        let (forget, retain) = build_dataset(&cfg).unwrap();
        let all: Vec<&ToyImage> = forget.iter().chain(&retain).collect();
        let mut centroids: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
        for img in &all {
            let c = centroids
                .entry(img.class_id)
                .or_insert_with(|| vec![0.0; img.dim()]);
            for (acc, p) in c.iter_mut().zip(&img.pixels) {
                *acc += p / cfg.per_class as f64;
            }
        }
        let mut correct = 0;
        for img in &all {
            let best = centroids
                .iter()
                .min_by(|(_, a), (_, b)| {
                    let da: f64 = a.iter().zip(&img.pixels).map(|(x, y)| (x - y).powi(2)).sum();
                    let db: f64 = b.iter().zip(&img.pixels).map(|(x, y)| (x - y).powi(2)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(c, _)| *c)
                .unwrap();
            if best == img.class_id {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / all.len() as f64;
        assert!(accuracy >= 0.95, "nearest-centroid accuracy {accuracy}");
    }

    #[test]
    fn proxy_classes_use_fresh_ids() {
        let cfg = DatasetConfig::new(4, 2, 9);
        let proxies = generate_proxy_classes(&cfg, 100, 2, 3);
        assert_eq!(proxies.len(), 3);
        assert!(proxies.iter().all(|p| p.class_id >= 100));
        assert!(proxies.iter().all(|p| p.split == Split::Retain));
    }
}
