//! Pixel-wise random forest baseline.
//!
//! Each pixel's feature vector is its flattened `[T, C]` time series. Features
//! are quantised into equal-width bins fitted on the training pixels, and
//! trees are grown with histogram Gini splits on bootstrap samples.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dims, PatchDataset};
use crate::error::{Error, Result};
use crate::model::BinaryMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfHyper {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    /// Training pixels are subsampled to at most this many.
    pub max_pixels: usize,
    /// Features tried per split; `None` uses `round(sqrt(F))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub bins: usize,
}

impl Default for RfHyper {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            max_pixels: 200_000,
            max_features: None,
            min_samples_split: 2,
            bins: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { p: f32 },
    Split { feature: u16, bin: u8, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, codes: &[u8]) -> f32 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { p } => return p,
                Node::Split { feature, bin, left, right } => {
                    i = if codes[feature as usize] <= bin { left } else { right } as usize;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    dims: Dims,
    lo: Vec<f32>,
    width: Vec<f32>,
    bins: usize,
    trees: Vec<Tree>,
    /// Set when training labels held a single class; predictions are constant.
    pub constant: Option<u8>,
}

/// Length of a pixel feature vector: `T * C`.
pub fn pixel_feature_len(dims: Dims) -> usize {
    dims.t * dims.c
}

fn pixel_features(x: &[f32], dims: Dims, px: usize, out: &mut [f32]) {
    let hw = dims.hw();
    for t in 0..dims.t {
        for c in 0..dims.c {
            out[t * dims.c + c] = x[(t * dims.c + c) * hw + px];
        }
    }
}

impl RfModel {
    fn encode(&self, feats: &[f32], codes: &mut [u8]) {
        for (j, (&v, code)) in feats.iter().zip(codes.iter_mut()).enumerate() {
            let b = if self.width[j] > 0.0 {
                ((v - self.lo[j]) / self.width[j]).floor()
            } else {
                0.0
            };
            *code = b.clamp(0.0, (self.bins - 1) as f32) as u8;
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean leaf probability per pixel of one `[T, C, H, W]` stack.
    pub fn predict_proba(&self, x: &[f32]) -> Vec<f32> {
        let hw = self.dims.hw();
        if let Some(c) = self.constant {
            return vec![c as f32; hw];
        }
        let f = pixel_feature_len(self.dims);
        let mut feats = vec![0.0f32; f];
        let mut codes = vec![0u8; f];
        (0..hw)
            .map(|px| {
                pixel_features(x, self.dims, px, &mut feats);
                self.encode(&feats, &mut codes);
                self.trees.iter().map(|t| t.predict(&codes)).sum::<f32>() / self.trees.len() as f32
            })
            .collect()
    }
}

/// Fits the forest on (a subsample of) every training pixel.
pub fn rf_train(dataset: &PatchDataset, hyper: &RfHyper, seed: u64) -> Result<RfModel> {
    if dataset.is_empty() {
        return Err(Error::Argument("random forest needs a non-empty training set".into()));
    }
    if hyper.n_trees == 0 || hyper.bins < 2 || hyper.bins > 256 {
        return Err(Error::Config("need >= 1 tree and 2..=256 bins".into()));
    }
    let dims = dataset.dims;
    let hw = dims.hw();
    let f = pixel_feature_len(dims);
    let total = dataset.len() * hw;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = if total > hyper.max_pixels {
        let mut v = sample_indices(&mut rng, total, hyper.max_pixels).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..total).collect()
    };
    let n = chosen.len();
    let mut raw = vec![0.0f32; n * f];
    let mut labels = vec![0u8; n];
    for (row, &g) in chosen.iter().enumerate() {
        let (s, px) = (g / hw, g % hw);
        pixel_features(&dataset.samples[s].x, dims, px, &mut raw[row * f..(row + 1) * f]);
        labels[row] = dataset.samples[s].y[px];
    }

    let mut lo = vec![f32::INFINITY; f];
    let mut hi = vec![f32::NEG_INFINITY; f];
    for row in raw.chunks_exact(f) {
        for j in 0..f {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let width: Vec<f32> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / hyper.bins as f32).collect();
    let mut model = RfModel {
        dims,
        lo,
        width,
        bins: hyper.bins,
        trees: Vec::new(),
        constant: None,
    };

    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        let c = u8::from(positives == n);
        log::warn!("random forest trained on single-class labels; predicting constant {c}");
        model.constant = Some(c);
        return Ok(model);
    }

    let mut codes = vec![0u8; n * f];
    for (row, crow) in raw.chunks_exact(f).zip(codes.chunks_exact_mut(f)) {
        model.encode(row, crow);
    }
    drop(raw);
    let mtry = hyper
        .max_features
        .unwrap_or_else(|| (f as f64).sqrt().round() as usize)
        .clamp(1, f);
    let trees: Vec<Tree> = (0..hyper.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let boot: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n) as u32).collect();
            grow_tree(&codes, &labels, f, boot, hyper, mtry, &mut rng)
        })
        .collect();
    model.trees = trees;
    Ok(model)
}

fn grow_tree(
    codes: &[u8],
    labels: &[u8],
    f: usize,
    rows: Vec<u32>,
    hyper: &RfHyper,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let bins = hyper.bins;
    let mut nodes = vec![Node::Leaf { p: 0.0 }];
    // (node index, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    let mut features: Vec<usize> = (0..f).collect();
    let mut hist_pos = vec![0u32; bins];
    let mut hist_all = vec![0u32; bins];
    while let Some((node, rows, depth)) = stack.pop() {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| labels[r as usize] == 1).count();
        let p = pos as f32 / n.max(1) as f32;
        let stop = pos == 0
            || pos == n
            || n < hyper.min_samples_split
            || hyper.max_depth.is_some_and(|d| depth >= d);
        if stop {
            nodes[node] = Node::Leaf { p };
            continue;
        }
        // partial Fisher-Yates for the candidate features
        for k in 0..mtry {
            let j = rng.gen_range(k..f);
            features.swap(k, j);
        }
        let parent_gini = gini(pos as f64, n as f64);
        let mut best: Option<(f64, usize, usize)> = None;
        for &feat in &features[..mtry] {
            hist_pos.fill(0);
            hist_all.fill(0);
            for &r in &rows {
                let b = codes[r as usize * f + feat] as usize;
                hist_all[b] += 1;
                hist_pos[b] += u32::from(labels[r as usize]);
            }
            let (mut lp, mut ln) = (0f64, 0f64);
            for b in 0..bins - 1 {
                lp += hist_pos[b] as f64;
                ln += hist_all[b] as f64;
                if ln == 0.0 || ln == n as f64 || hist_all[b] == 0 {
                    continue;
                }
                let (rp, rn) = (pos as f64 - lp, n as f64 - ln);
                let weighted = (ln * gini(lp, ln) + rn * gini(rp, rn)) / n as f64;
                let gain = parent_gini - weighted;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, feat, b));
                }
            }
        }
        let Some((_, feat, bin)) = best else {
            nodes[node] = Node::Leaf { p };
            continue;
        };
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .into_iter()
            .partition(|&r| codes[r as usize * f + feat] as usize <= bin);
        let left = nodes.len();
        nodes.push(Node::Leaf { p: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { p: 0.0 });
        nodes[node] = Node::Split {
            feature: feat as u16,
            bin: bin as u8,
            left: left as u32,
            right: right as u32,
        };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    Tree { nodes }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

/// Binary masks for every sample (probability >= 0.5).
pub fn rf_predict(model: &RfModel, dataset: &PatchDataset) -> Result<BinaryMask> {
    if dataset.dims != model.dims {
        return Err(Error::Config(format!(
            "forest trained on {:?}, dataset is {:?}",
            model.dims, dataset.dims
        )));
    }
    let per: Vec<Vec<u8>> = dataset
        .samples
        .par_iter()
        .map(|s| model.predict_proba(&s.x).into_iter().map(|p| u8::from(p >= 0.5)).collect())
        .collect();
    Ok(BinaryMask {
        shape: [dataset.len(), dataset.dims.h, dataset.dims.w],
        values: per.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic_dataset, SynthSpec};
    use crate::eval::metrics::{compute_metrics, confusion_counts};

    fn tiny() -> PatchDataset {
        let spec = SynthSpec {
            n_patches: 4,
            patch_size: 32,
            field_size: (6, 12),
            noise_sigma: 0.03,
            ..SynthSpec::source_rice()
        };
        generate_synthetic_dataset(&spec, 3).unwrap()
    }

    fn quick() -> RfHyper {
        RfHyper {
            n_trees: 10,
            ..RfHyper::default()
        }
    }

    #[test]
    fn feature_length_is_t_times_c() {
        assert_eq!(pixel_feature_len(Dims { t: 8, c: 2, h: 1, w: 1 }), 16);
    }

    #[test]
    fn overfits_its_training_set() {
        let d = tiny();
        let m = rf_train(&d, &quick(), 0).unwrap();
        let pred = rf_predict(&m, &d).unwrap();
        let labels: Vec<u8> = d.samples.iter().flat_map(|s| s.y.clone()).collect();
        let iou = compute_metrics(&confusion_counts(&pred.values, &labels).unwrap()).iou;
        assert!(iou >= 0.9, "iou {iou}");
    }

    #[test]
    fn deterministic_per_seed() {
        let d = tiny();
        let a = rf_predict(&rf_train(&d, &quick(), 5).unwrap(), &d).unwrap();
        let b = rf_predict(&rf_train(&d, &quick(), 5).unwrap(), &d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_gives_constant_predictor() {
        let mut d = tiny();
        for s in &mut d.samples {
            s.y.fill(0);
        }
        let m = rf_train(&d, &quick(), 0).unwrap();
        assert_eq!(m.constant, Some(0));
        assert_eq!(rf_predict(&m, &d).unwrap().positives(), 0);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = tiny().subset(&[], crate::data::SplitTag::Train);
        assert!(matches!(rf_train(&d, &quick(), 0), Err(Error::Argument(_))));
    }
}
