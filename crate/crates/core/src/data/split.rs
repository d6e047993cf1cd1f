use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, SplitTag};
use crate::{Error, Result};

/// Stratified train/test split.
///
/// Each class contributes `round(test_fraction * class_size)` items to the
/// test set (at least one, and at least one left for training). Both halves
/// keep the original item order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; data.len()];
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = (0..data.len())
            .filter(|&i| data.items[i].label == class)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has {} item(s); at least 2 are needed to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = ((test_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..n_test] {
            in_test[i] = true;
        }
    }
    let pick = |want: bool, tag: SplitTag| Dataset {
        items: data
            .items
            .iter()
            .zip(&in_test)
            .filter(|(_, &t)| t == want)
            .map(|(s, _)| s.clone())
            .collect(),
        split: Some(tag),
        class_names: data.class_names.clone(),
    };
    Ok((pick(false, SplitTag::Train), pick(true, SplitTag::Test)))
}
