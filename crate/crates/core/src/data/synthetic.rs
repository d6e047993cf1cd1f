//! Synthetic two-class images: class 0 is a smooth linear gradient with
//! Gaussian noise, class 1 adds bright elliptical blobs on top.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, GrayImage, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    /// Inclusive range of the number of blobs per image.
    pub blob_count: [usize; 2],
    /// Range of the two semi-axes of each blob, in pixels.
    pub blob_radius: [f64; 2],
    /// Peak brightness added at a blob centre.
    pub blob_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    /// Images are `size` x `size`.
    pub size: usize,
    /// Range of the mean background brightness.
    pub base_range: [f64; 2],
    /// Maximum peak-to-peak height of the background ramp.
    pub gradient_amplitude: f64,
    pub class0: ClassParams,
    pub class1: ClassParams,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            size: 32,
            base_range: [90.0, 130.0],
            gradient_amplitude: 60.0,
            class0: ClassParams {
                noise_sigma: 10.0,
                blob_count: [0, 0],
                blob_radius: [3.0, 6.0],
                blob_intensity: 0.0,
            },
            class1: ClassParams {
                noise_sigma: 10.0,
                blob_count: [1, 3],
                blob_radius: [3.0, 6.0],
                blob_intensity: 80.0,
            },
            seed: 2024,
        }
    }
}

impl SyntheticSpec {
    /// Smooth, low-noise covers used by the steganalysis experiments.
    pub fn smooth_covers(size: usize, seed: u64) -> Self {
        let class = ClassParams {
            noise_sigma: 0.5,
            blob_count: [0, 0],
            blob_radius: [1.0, 1.0],
            blob_intensity: 0.0,
        };
        Self {
            size,
            base_range: [60.0, 190.0],
            gradient_amplitude: 80.0,
            class0: class.clone(),
            class1: class,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config(
                "synthetic image size must be positive".into(),
            ));
        }
        if self.base_range[0] > self.base_range[1] {
            return Err(Error::Config("base_range must be [low, high]".into()));
        }
        for (name, c) in [("class0", &self.class0), ("class1", &self.class1)] {
            if c.noise_sigma < 0.0 || !c.noise_sigma.is_finite() {
                return Err(Error::Config(format!("{name}: noise_sigma must be >= 0")));
            }
            if c.blob_count[0] > c.blob_count[1] {
                return Err(Error::Config(format!(
                    "{name}: blob_count must be [min, max]"
                )));
            }
            if c.blob_radius[0] <= 0.0 || c.blob_radius[0] > c.blob_radius[1] {
                return Err(Error::Config(format!(
                    "{name}: blob_radius must be [min, max] with min > 0"
                )));
            }
        }
        Ok(())
    }

    /// Warning text when both classes are generated identically.
    pub fn degeneracy_warning(&self) -> Option<String> {
        (self.class0 == self.class1).then(|| {
            "class0 and class1 parameters are identical; classes cannot be told apart".to_owned()
        })
    }
}

fn render(spec: &SyntheticSpec, params: &ClassParams, rng: &mut impl Rng) -> GrayImage {
    let n = spec.size;
    let base = if spec.base_range[0] < spec.base_range[1] {
        rng.random_range(spec.base_range[0]..spec.base_range[1])
    } else {
        spec.base_range[0]
    };
    let amplitude = rng.random_range(0.0..=1.0) * spec.gradient_amplitude;
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());

    let blob_n = rng.random_range(params.blob_count[0]..=params.blob_count[1]);
    let blobs: Vec<[f64; 5]> = (0..blob_n)
        .map(|_| {
            let r = params.blob_radius;
            let span = |rng: &mut dyn rand::RngCore| {
                if r[0] < r[1] {
                    rng.random_range(r[0]..r[1])
                } else {
                    r[0]
                }
            };
            let (rx, ry) = (span(rng), span(rng));
            let margin = rx.max(ry).min(n as f64 / 2.0);
            let lo = margin.min(n as f64 - 1.0 - margin);
            let hi = (n as f64 - 1.0 - margin).max(lo);
            let pos = |rng: &mut dyn rand::RngCore| {
                if lo < hi {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            };
            let (cy, cx) = (pos(rng), pos(rng));
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            [cy, cx, rx, ry, theta]
        })
        .collect();

    let noise = Normal::new(0.0, params.noise_sigma.max(0.0)).expect("finite sigma");
    let half = (n as f64 - 1.0) / 2.0;
    GrayImage::from_fn(n, n, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let t = if n > 1 {
            ((x - half) * dx + (y - half) * dy) / (n as f64 - 1.0)
        } else {
            0.0
        };
        let mut v = base + amplitude * t;
        for &[cy, cx, rx, ry, theta] in &blobs {
            let (oy, ox) = (y - cy, x - cx);
            let u = (ox * theta.cos() + oy * theta.sin()) / rx;
            let w = (-ox * theta.sin() + oy * theta.cos()) / ry;
            let d2 = u * u + w * w;
            if d2 < 1.0 {
                v += params.blob_intensity * (1.0 - d2);
            }
        }
        if params.noise_sigma > 0.0 {
            v += noise.sample(rng);
        }
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("size validated")
}

/// One class-0 image drawn from `rng`.
pub fn generate_cover(spec: &SyntheticSpec, rng: &mut impl Rng) -> GrayImage {
    render(spec, &spec.class0, rng)
}

/// `count_per_class` images of each class, interleaved `0, 1, 0, 1, ...`.
/// Output depends only on `spec` (including its seed).
pub fn generate_synthetic(spec: &SyntheticSpec, count_per_class: usize) -> Result<Dataset> {
    spec.validate()?;
    if count_per_class == 0 {
        return Err(Error::Config("count_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::with_capacity(2 * count_per_class);
    for i in 0..count_per_class {
        for label in 0..=1u8 {
            let params = if label == 0 {
                &spec.class0
            } else {
                &spec.class1
            };
            items.push(Sample {
                image: render(spec, params, &mut rng),
                label,
                path: Some(format!("class{label}/img{i:05}.pgm").into()),
            });
        }
    }
    Dataset::new(items)
}
