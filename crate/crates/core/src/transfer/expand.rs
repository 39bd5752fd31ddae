use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchTensor, RecurrentUNet, FIRST_LAYER_WEIGHT};

use super::checkpoint::CheckpointBundle;

/// Widens the first encoder convolution to accept `new_features`.
///
/// Every new input channel is seeded with the kernel slice of an original
/// feature (original features map to themselves, added features are assigned
/// round-robin over the originals). Each original slice is then divided by
/// the number of channels that share it, so a duplicated input produces the
/// same pre-activation as before. For one original feature widened to `N`
/// inputs every slice is `W / N`. The bias and all other parameters are left
/// untouched.
pub fn expand_input_channels(checkpoint: &CheckpointBundle, new_features: &[String]) -> Result<CheckpointBundle> {
    checkpoint.validate()?;
    let old = &checkpoint.feature_names;
    let c_old = old.len();
    let n = new_features.len();
    if n < c_old {
        return Err(Error::Argument(format!(
            "cannot shrink inputs from {c_old} to {n} features"
        )));
    }
    for (i, f) in new_features.iter().enumerate() {
        if new_features[..i].contains(f) {
            return Err(Error::Argument(format!("feature `{f}` listed twice")));
        }
    }
    if let Some(missing) = old.iter().find(|f| !new_features.contains(f)) {
        return Err(Error::Argument(format!(
            "new feature list drops original feature `{missing}`"
        )));
    }

    let source = expansion_sources(old, new_features);
    let mut shares = vec![0usize; c_old];
    for &s in &source {
        shares[s] += 1;
    }

    let mut out = checkpoint.clone();
    let w = out
        .params
        .get_mut(FIRST_LAYER_WEIGHT)
        .expect("validated layout has a first layer");
    let (cout, kh, kw) = (w.shape[0], w.shape[2], w.shape[3]);
    let taps = kh * kw;
    let mut values = Vec::with_capacity(cout * n * taps);
    for co in 0..cout {
        for &s in &source {
            let scale = 1.0 / shares[s] as f32;
            let slice = &w.values[(co * c_old + s) * taps..(co * c_old + s + 1) * taps];
            values.extend(slice.iter().map(|&v| v * scale));
        }
    }
    w.values = values;
    w.shape[1] = n;
    out.config.in_channels = n;
    out.feature_names = new_features.to_vec();
    out.provenance = format!(
        "{}; inputs expanded {} -> {}",
        checkpoint.provenance,
        old.join("|"),
        new_features.join("|")
    );
    out.validate()?;
    Ok(out)
}

/// Index of the original feature each new feature is seeded from.
///
/// Assumes `new` contains every entry of `old`.
pub fn expansion_sources(old: &[String], new: &[String]) -> Vec<usize> {
    let mut extra = 0usize;
    new.iter()
        .map(|f| match old.iter().position(|o| o == f) {
            Some(i) => i,
            None => {
                let s = extra % old.len();
                extra += 1;
                s
            }
        })
        .collect()
}

/// Outcome of [`verify_expansion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub max_abs_diff: f64,
    pub tolerance: f64,
    /// Parameters other than the first-layer kernel whose values or shape changed.
    pub changed: Vec<String>,
    pub passed: bool,
}

/// Compares `original` on random inputs with `expanded` on the same inputs
/// copied into every derived channel.
pub fn verify_expansion(
    original: &CheckpointBundle,
    expanded: &CheckpointBundle,
    n_samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ExpansionCheck> {
    original.validate()?;
    expanded.validate()?;
    let old = &original.feature_names;
    let new = &expanded.feature_names;
    if let Some(missing) = old.iter().find(|f| !new.contains(f)) {
        return Err(Error::Argument(format!("expanded checkpoint lacks original feature `{missing}`")));
    }
    let (a, b) = (&original.config, &expanded.config);
    if a.time_steps != b.time_steps || a.patch_size != b.patch_size || a.depth != b.depth {
        return Err(Error::Config("checkpoints differ beyond their input channels".into()));
    }
    let source = expansion_sources(old, new);
    let (t, hw) = (a.time_steps, a.patch_size * a.patch_size);
    let (c_old, c_new) = (old.len(), new.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f32> = (0..n_samples * t * c_old * hw).map(|_| rng.gen::<f32>()).collect();
    let mut xd = Vec::with_capacity(n_samples * t * c_new * hw);
    for frame in x.chunks_exact(c_old * hw) {
        for &s in &source {
            xd.extend_from_slice(&frame[s * hw..(s + 1) * hw]);
        }
    }
    let p = a.patch_size;
    let ya = RecurrentUNet::new(a.clone())?.forward(&original.params, &BatchTensor::full(x, [n_samples, t, c_old, p, p])?)?;
    let yb = RecurrentUNet::new(b.clone())?.forward(&expanded.params, &BatchTensor::full(xd, [n_samples, t, c_new, p, p])?)?;
    let max_abs_diff = ya
        .values
        .iter()
        .zip(&yb.values)
        .map(|(u, v)| (u - v).abs() as f64)
        .fold(0.0, f64::max);
    let mut changed: Vec<String> = original
        .params
        .iter()
        .filter(|(path, _)| *path != FIRST_LAYER_WEIGHT)
        .filter(|(path, p)| {
            expanded.params.get(path).is_none_or(|q| {
                q.shape != p.shape || q.values.iter().map(|v| v.to_bits()).ne(p.values.iter().map(|v| v.to_bits()))
            })
        })
        .map(|(path, _)| path.to_string())
        .collect();
    changed.extend(
        expanded
            .params
            .paths()
            .filter(|path| original.params.get(path).is_none())
            .map(str::to_string),
    );
    Ok(ExpansionCheck {
        max_abs_diff,
        tolerance,
        passed: max_abs_diff <= tolerance && changed.is_empty(),
        changed,
    })
}
