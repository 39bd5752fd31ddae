use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::{PatchDataset, SplitTag};

/// Default share of patches used for training.
pub const DEFAULT_TRAIN_RATIO: f64 = 0.6;

/// Patch-level random split with `round(ratio * n)` training patches.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratio.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let test = idx.split_off(n_train);
    (idx, test)
}

pub fn split_train_test(dataset: &PatchDataset, ratio: f64, seed: u64) -> (PatchDataset, PatchDataset) {
    let (tr, te) = split_indices(dataset.len(), ratio, seed);
    (
        dataset.subset(&tr, SplitTag::Train),
        dataset.subset(&te, SplitTag::Test),
    )
}
