//! Transfer scenarios `r1-r2-c-s` and their published reference numbers.
//!
//! Reference values are informational metadata carried into reports; they are
//! never used as pass/fail thresholds.

use std::path::PathBuf;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::train::TrainConfig;
use crate::transfer::FinetuneMode;

/// One transfer experiment: fine-tune in `finetune_region`, test in `test_region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    /// Preset id (1-10) when the scenario matches a published one.
    pub id: Option<u32>,
    pub finetune_region: String,
    pub test_region: String,
    pub crop: String,
    pub features: Vec<String>,
    pub finetune_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub mode: FinetuneMode,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            id: None,
            finetune_region: "synthetic-target".into(),
            test_region: "synthetic-target".into(),
            crop: "rice".into(),
            features: vec!["VH".into()],
            finetune_data: None,
            test_data: None,
            checkpoint: None,
            mode: FinetuneMode::Encoder,
            seeds: vec![0, 1, 2],
            train: TrainConfig::finetune(),
        }
    }
}

impl ScenarioSpec {
    /// `r1-r2-c-s`, e.g. `Spain-France-rice-VH|VV`.
    pub fn name(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.finetune_region,
            self.test_region,
            self.crop,
            self.features.join("|")
        )
    }

    /// Published scenario `id` in 1..=10.
    pub fn preset(id: u32) -> Result<Self> {
        let (r1, r2, crop) = match id {
            1 | 2 => ("Spain", "Spain", "rice"),
            3 | 4 => ("Spain", "France", "rice"),
            5 | 6 => ("France", "France", "rice"),
            7 | 8 => ("France", "Spain", "rice"),
            9 | 10 => ("Netherlands", "Netherlands", "summer barley"),
            _ => return Err(Error::Config(format!("unknown scenario preset {id}; expected 1-10"))),
        };
        let features = if id % 2 == 1 { vec!["VH".into()] } else { vec!["VH".into(), "VV".into()] };
        Ok(Self {
            id: Some(id),
            finetune_region: r1.into(),
            test_region: r2.into(),
            crop: crop.into(),
            features,
            ..Self::default()
        })
    }

    pub fn presets() -> Vec<Self> {
        (1..=10).map(|i| Self::preset(i).expect("valid preset")).collect()
    }

    pub fn reference_values(&self) -> Option<IndexMap<String, Metrics>> {
        self.id.and_then(reference_values)
    }
}

/// Method order of the reference tables.
pub const REFERENCE_METHODS: [&str; 4] = ["RF", "RI", "FT", "FT_E"];

#[rustfmt::skip]
const IOU: [[f64; 10]; 4] = [
    [0.87, 0.90, 0.63, 0.66, 0.76, 0.84, 0.77, 0.78, 0.26, 0.40],
    [0.86, 0.69, 0.52, 0.36, 0.76, 0.74, 0.70, 0.73, 0.31, 0.00],
    [0.89, 0.90, 0.57, 0.63, 0.82, 0.83, 0.82, 0.83, 0.40, 0.45],
    [0.90, 0.90, 0.63, 0.66, 0.86, 0.86, 0.79, 0.84, 0.42, 0.54],
];
#[rustfmt::skip]
const RECALL: [[f64; 10]; 4] = [
    [0.957, 0.964, 0.665, 0.698, 0.831, 0.881, 0.878, 0.846, 0.293, 0.446],
    [0.967, 0.765, 0.584, 0.460, 0.879, 0.841, 0.809, 0.818, 0.400, 0.004],
    [0.957, 0.962, 0.601, 0.674, 0.896, 0.894, 0.954, 0.950, 0.490, 0.614],
    [0.964, 0.962, 0.674, 0.694, 0.915, 0.911, 0.914, 0.964, 0.518, 0.705],
];
#[rustfmt::skip]
const PRECISION: [[f64; 10]; 4] = [
    [0.910, 0.926, 0.926, 0.931, 0.901, 0.943, 0.866, 0.906, 0.718, 0.781],
    [0.891, 0.875, 0.826, 0.638, 0.849, 0.856, 0.838, 0.871, 0.590, 0.477],
    [0.932, 0.928, 0.919, 0.915, 0.905, 0.920, 0.858, 0.872, 0.686, 0.631],
    [0.929, 0.935, 0.903, 0.929, 0.933, 0.939, 0.854, 0.873, 0.683, 0.696],
];
#[rustfmt::skip]
const F1: [[f64; 10]; 4] = [
    [0.932, 0.945, 0.774, 0.798, 0.864, 0.911, 0.872, 0.875, 0.416, 0.567],
    [0.927, 0.816, 0.684, 0.534, 0.864, 0.848, 0.824, 0.844, 0.477, 0.007],
    [0.944, 0.945, 0.726, 0.776, 0.901, 0.907, 0.903, 0.909, 0.571, 0.622],
    [0.947, 0.948, 0.772, 0.794, 0.924, 0.925, 0.883, 0.916, 0.589, 0.700],
];

/// Published metrics per method for scenario `id`, or `None` outside 1..=10.
pub fn reference_values(id: u32) -> Option<IndexMap<String, Metrics>> {
    if !(1..=10).contains(&id) {
        return None;
    }
    let j = id as usize - 1;
    Some(
        REFERENCE_METHODS
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let metrics = Metrics {
                    iou: IOU[m][j],
                    recall: RECALL[m][j],
                    precision: PRECISION[m][j],
                    f1: F1[m][j],
                };
                (name.to_string(), metrics)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names() {
        assert_eq!(ScenarioSpec::preset(1).unwrap().name(), "Spain-Spain-rice-VH");
        assert_eq!(ScenarioSpec::preset(4).unwrap().name(), "Spain-France-rice-VH|VV");
        assert_eq!(ScenarioSpec::preset(10).unwrap().name(), "Netherlands-Netherlands-summer barley-VH|VV");
        assert!(ScenarioSpec::preset(0).is_err());
        assert!(ScenarioSpec::preset(11).is_err());
    }

    #[test]
    fn scenario_one_reference() {
        let r = ScenarioSpec::preset(1).unwrap().reference_values().unwrap();
        assert_eq!(r["FT_E"].iou, 0.90);
        assert_eq!(r["RF"].recall, 0.957);
        assert_eq!(r.keys().collect::<Vec<_>>(), ["RF", "RI", "FT", "FT_E"]);
    }

    #[test]
    fn all_reference_values_are_unit_interval() {
        for id in 1..=10 {
            for m in reference_values(id).unwrap().values() {
                for v in [m.iou, m.recall, m.precision, m.f1] {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
        assert!(ScenarioSpec::default().reference_values().is_none());
    }

    #[test]
    fn serde_round_trip() {
        let s = ScenarioSpec::preset(6).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), s);
    }
}
