use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::GrayImage;
use crate::{Error, Result};

/// How embedding positions are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// Uniformly random positions.
    #[default]
    Uniform,
    /// Positions ranked by 3x3 local variance, busiest first; ties are broken
    /// by a seeded random order.
    Texture,
}

/// The ±1/0 change pattern `E` and its support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StegoSignal {
    pub width: usize,
    pub height: usize,
    /// Row-major entries in `{-1, 0, +1}`.
    pub values: Vec<i8>,
    /// Modified `(row, col)` coordinates in row-major order.
    pub positions: Vec<(usize, usize)>,
}

impl StegoSignal {
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.values[row * self.width + col]
    }

    pub fn payload_len(&self) -> usize {
        self.positions.len()
    }

    /// `(# of +1, # of -1)`
    pub fn sign_counts(&self) -> (usize, usize) {
        let plus = self.values.iter().filter(|&&v| v == 1).count();
        let minus = self.values.iter().filter(|&&v| v == -1).count();
        (plus, minus)
    }
}

/// ±1 embedding of `floor(change_rate * width * height)` changes.
///
/// Pixels at 0 are always raised and pixels at 255 always lowered. The
/// remaining positions receive a shuffled sign pattern chosen so that the
/// total numbers of +1 and −1 changes differ by at most one whenever the
/// saturated pixels allow it. Returns `Z = U + E` and `E`.
pub fn embed(
    cover: &GrayImage,
    change_rate: f64,
    seed: u64,
    mode: EmbedMode,
) -> Result<(GrayImage, StegoSignal)> {
    if !(change_rate > 0.0 && change_rate <= 1.0) {
        return Err(Error::Config(format!(
            "change rate {change_rate} must be in (0, 1]"
        )));
    }
    let (w, h) = (cover.width(), cover.height());
    let total = w * h;
    let count = (change_rate * total as f64).floor() as usize;
    if count == 0 {
        return Err(Error::Config(format!(
            "change rate {change_rate} modifies no pixel of a {w}x{h} image"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = match mode {
        EmbedMode::Uniform => index::sample(&mut rng, total, count).into_vec(),
        EmbedMode::Texture => {
            let var = local_variance(cover);
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut rng);
            order.sort_by(|&a, &b| var[b].total_cmp(&var[a]));
            order.truncate(count);
            order
        }
    };
    chosen.sort_unstable();

    let px = cover.pixels();
    let forced_up = chosen.iter().filter(|&&p| px[p] == 0).count();
    let forced_down = chosen.iter().filter(|&&p| px[p] == 255).count();
    let free = count - forced_up - forced_down;
    let want_plus = count / 2 + usize::from(count % 2 == 1 && rng.random_bool(0.5));
    let free_plus = want_plus.saturating_sub(forced_up).min(free);
    let mut free_signs: Vec<i8> = (0..free)
        .map(|k| if k < free_plus { 1 } else { -1 })
        .collect();
    free_signs.shuffle(&mut rng);

    let mut values = vec![0i8; total];
    let mut stego = cover.pixels().to_vec();
    let mut next_free = free_signs.into_iter();
    for &p in &chosen {
        let e = match px[p] {
            0 => 1,
            255 => -1,
            _ => next_free.next().expect("sign per free position"),
        };
        values[p] = e;
        stego[p] = (px[p] as i16 + e as i16) as u8;
    }
    let signal = StegoSignal {
        width: w,
        height: h,
        values,
        positions: chosen.iter().map(|&p| (p / w, p % w)).collect(),
    };
    Ok((GrayImage::new(w, h, stego)?, signal))
}

/// Population variance over the 3x3 neighbourhood clipped to the image.
fn local_variance(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    let v = img.get(rr, cc) as f64;
                    s += v;
                    s2 += v * v;
                    n += 1.0;
                }
            }
            let mean = s / n;
            out.push(s2 / n - mean * mean);
        }
    }
    out
}
