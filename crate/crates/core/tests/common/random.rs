//! Seeded random instances shared by the property tests and the acceptance
//! suite.

#![allow(dead_code)]

use distillkit::data::GrayImage;
use distillkit::residual::ResidualMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 1–4 distinct taps inside the 5×5 neighbourhood, never the centre, with
/// small integer weights so that residual identities hold exactly.
pub fn integer_taps(rng: &mut impl Rng) -> (Vec<(isize, isize)>, Vec<f64>) {
    let mut all: Vec<(isize, isize)> = (-2..=2)
        .flat_map(|i| (-2..=2).map(move |j| (i, j)))
        .filter(|&o| o != (0, 0))
        .collect();
    all.shuffle(rng);
    let n = rng.random_range(1..=4);
    let offsets = all[..n].to_vec();
    let weights = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
    (offsets, weights)
}

/// Same as [`integer_taps`] but with real weights.
pub fn real_taps(rng: &mut impl Rng) -> (Vec<(isize, isize)>, Vec<f64>) {
    let (offsets, weights) = integer_taps(rng);
    let weights = weights
        .iter()
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    (offsets, weights)
}

pub fn gray(rng: &mut impl Rng, width: usize, height: usize) -> GrayImage {
    GrayImage::from_fn(width, height, |_, _| rng.random()).unwrap()
}

pub fn pixel_map(rng: &mut impl Rng, rows: usize, cols: usize) -> ResidualMap {
    ResidualMap::from_fn(rows, cols, |_, _| rng.random_range(0..=255) as f64).unwrap()
}
