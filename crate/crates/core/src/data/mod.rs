//! Grayscale images, labelled datasets, manifests and the synthetic
//! two-class generator.

mod image_io;
mod manifest;
mod split;
mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

pub use image_io::{decode_image, load_image, resize, save_image};
pub use manifest::{load_manifest, write_manifest, LoadReport};
pub use split::split;
pub use synthetic::{generate_cover, generate_synthetic, ClassParams, SyntheticSpec};

/// 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }

    /// `[1, H, W]` tensor with values scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![1, self.height, self.width],
            self.pixels.iter().map(|&p| p as f64 / 255.0).collect(),
        )
        .expect("image dimensions are non-zero")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub image: GrayImage,
    /// 0 = negative (normal / cover), 1 = positive (pneumonia / stego)
    pub label: u8,
    pub path: Option<PathBuf>,
}

/// Labelled binary-class image collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<Sample>,
    pub split: Option<SplitTag>,
    pub class_names: [String; 2],
}

pub fn default_class_names() -> [String; 2] {
    ["normal".to_owned(), "pneumonia".to_owned()]
}

impl Dataset {
    pub fn new(items: Vec<Sample>) -> Result<Self> {
        let ds = Self {
            items,
            split: None,
            class_names: default_class_names(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks binary labels and unique paths.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.items.iter().enumerate() {
            if s.label > 1 {
                return Err(Error::Data(format!(
                    "item {i}: label {} is not 0 or 1",
                    s.label
                )));
            }
            if let Some(p) = &s.path {
                if !seen.insert(p.clone()) {
                    return Err(Error::Data(format!("duplicate path {}", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|s| s.label as usize).collect()
    }

    /// `(negatives, positives)`
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.items.iter().filter(|s| s.label == 1).count();
        (self.items.len() - pos, pos)
    }

    /// Stacks every image (resized to `size` x `size` when it differs) into a
    /// `[N, 1, size, size]` tensor, returned with the labels.
    pub fn to_tensors(&self, size: usize) -> Result<(Tensor, Vec<usize>)> {
        if self.items.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let images: Vec<Tensor> = self
            .items
            .iter()
            .map(|s| {
                if s.image.width() == size && s.image.height() == size {
                    s.image.to_tensor()
                } else {
                    resize(&s.image, size).to_tensor()
                }
            })
            .collect();
        Ok((Tensor::stack(&images)?, self.labels()))
    }
}
