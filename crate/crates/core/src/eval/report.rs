use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PatchDataset;
use crate::error::{Error, Result};
use crate::model::{binarize, BinaryMask, RecurrentUNet};
use crate::scenario::ScenarioSpec;
use crate::transfer::CheckpointBundle;

use super::forest::{rf_predict, RfModel};
use super::metrics::{compute_metrics, confusion_counts, ConfusionCounts, Metrics};

/// How per-pixel counts over several patches become one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Sum counts over all test pixels, then compute metrics once.
    #[default]
    Micro,
    /// Mean of per-patch metrics.
    PatchMean,
}

/// Anything that turns a dataset into binary masks.
pub enum Predictor<'a> {
    Network(&'a CheckpointBundle),
    Forest(&'a RfModel),
}

/// Samples per forward call in [`predict_dataset`].
const PREDICT_CHUNK: usize = 8;

fn check_compatible(bundle: &CheckpointBundle, dataset: &PatchDataset) -> Result<()> {
    let cfg = &bundle.config;
    let d = dataset.dims;
    if bundle.feature_names != dataset.feature_names || cfg.in_channels != d.c {
        return Err(Error::Config(format!(
            "checkpoint features {:?} do not match dataset features {:?}; adapt the checkpoint's input channels first",
            bundle.feature_names, dataset.feature_names
        )));
    }
    if cfg.time_steps != d.t || cfg.patch_size != d.h || cfg.patch_size != d.w {
        return Err(Error::Config(format!(
            "model expects T={} and {}x{} patches, dataset has T={} and {}x{}",
            cfg.time_steps, cfg.patch_size, cfg.patch_size, d.t, d.h, d.w
        )));
    }
    Ok(())
}

/// Thresholded network predictions for every sample, using the first `t_avail` steps.
pub fn predict_dataset(
    bundle: &CheckpointBundle,
    dataset: &PatchDataset,
    t_avail: usize,
    threshold: f64,
) -> Result<BinaryMask> {
    check_compatible(bundle, dataset)?;
    let net = RecurrentUNet::new(bundle.config.clone())?;
    let idx: Vec<usize> = (0..dataset.len()).collect();
    let mut values = Vec::with_capacity(dataset.len() * dataset.dims.hw());
    for chunk in idx.chunks(PREDICT_CHUNK) {
        let (batch, _) = dataset.batch(chunk, dataset.dims.t)?;
        let probs = net.forward_early(&bundle.params, &batch, t_avail)?;
        values.extend(binarize(&probs, threshold).values);
    }
    Ok(BinaryMask {
        shape: [dataset.len(), dataset.dims.h, dataset.dims.w],
        values,
    })
}

pub fn predict_with(predictor: &Predictor<'_>, dataset: &PatchDataset, t_avail: usize, threshold: f64) -> Result<BinaryMask> {
    match predictor {
        Predictor::Network(b) => predict_dataset(b, dataset, t_avail, threshold),
        Predictor::Forest(m) => rf_predict(m, dataset),
    }
}

/// Per-patch confusion counts in dataset order.
pub fn patch_counts(pred: &BinaryMask, dataset: &PatchDataset) -> Result<Vec<ConfusionCounts>> {
    let hw = dataset.dims.hw();
    if pred.values.len() != dataset.len() * hw {
        return Err(Error::Dimension(format!(
            "{} predicted pixels for {} patches of {hw}",
            pred.values.len(),
            dataset.len()
        )));
    }
    dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| confusion_counts(&pred.values[i * hw..(i + 1) * hw], &s.y))
        .collect()
}

/// Aggregated counts and metrics of `pred` against the dataset labels.
pub fn score_masks(pred: &BinaryMask, dataset: &PatchDataset, averaging: Averaging) -> Result<(ConfusionCounts, Metrics)> {
    if dataset.is_empty() {
        return Err(Error::Argument("evaluation needs a non-empty test set".into()));
    }
    let per = patch_counts(pred, dataset)?;
    let total: ConfusionCounts = per.iter().copied().sum();
    let metrics = match averaging {
        Averaging::Micro => compute_metrics(&total),
        Averaging::PatchMean => Metrics::mean(&per.iter().map(compute_metrics).collect::<Vec<_>>()),
    };
    Ok((total, metrics))
}

/// One method's score on one feature set (and one seed, if seeded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub method: String,
    pub features: Vec<String>,
    pub seed: Option<u64>,
    pub t_avail: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Scores a predictor on a test dataset.
pub fn evaluate_scenario(
    method: &str,
    predictor: &Predictor<'_>,
    dataset: &PatchDataset,
    threshold: f64,
    t_avail: usize,
    averaging: Averaging,
) -> Result<EvalEntry> {
    if dataset.is_empty() {
        return Err(Error::Argument("evaluation needs a non-empty test set".into()));
    }
    let pred = predict_with(predictor, dataset, t_avail, threshold)?;
    let (counts, metrics) = score_masks(&pred, dataset, averaging)?;
    Ok(EvalEntry {
        method: method.to_string(),
        features: dataset.feature_names.clone(),
        seed: None,
        t_avail,
        counts,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: ScenarioSpec,
    pub averaging: Averaging,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    /// Full-season scores, one per (method, features, seed).
    pub entries: Vec<EvalEntry>,
    /// Seed means per (method, features).
    pub summary: Vec<EvalEntry>,
    /// Scores with later steps withheld.
    pub early: Vec<EvalEntry>,
    /// Published numbers for the matching preset; informational only.
    pub reference_values: Option<IndexMap<String, Metrics>>,
}

impl EvalReport {
    pub fn new(scenario: ScenarioSpec, averaging: Averaging, threshold: f64) -> Self {
        let reference_values = scenario.reference_values();
        let seeds = scenario.seeds.clone();
        Self {
            scenario,
            averaging,
            threshold,
            seeds,
            entries: Vec::new(),
            summary: Vec::new(),
            early: Vec::new(),
            reference_values,
        }
    }

    /// Rebuilds [`EvalReport::summary`] from the entries, keeping first-seen order.
    pub fn summarize(&mut self) {
        self.summary = summarize(&self.entries);
    }

    pub fn mean_metrics(&self, method: &str) -> Option<Metrics> {
        self.summary.iter().find(|e| e.method == method).map(|e| e.metrics)
    }
}

/// Component-wise metric means and count sums grouped by (method, features, t_avail).
pub fn summarize(entries: &[EvalEntry]) -> Vec<EvalEntry> {
    let mut groups: IndexMap<(String, Vec<String>, usize), Vec<&EvalEntry>> = IndexMap::new();
    for e in entries {
        groups
            .entry((e.method.clone(), e.features.clone(), e.t_avail))
            .or_default()
            .push(e);
    }
    groups
        .into_iter()
        .map(|((method, features, t_avail), es)| EvalEntry {
            method,
            features,
            seed: None,
            t_avail,
            counts: es.iter().map(|e| e.counts).sum(),
            metrics: Metrics::mean(&es.iter().map(|e| e.metrics).collect::<Vec<_>>()),
        })
        .collect()
}
