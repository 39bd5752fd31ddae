//! JSON run configuration. Command-line flags override the matching keys.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use sarcrop::data::synth::SynthSpec;
use sarcrop::eval::{Averaging, RfHyper};
use sarcrop::model::ModelConfig;
use sarcrop::train::TrainConfig;
use sarcrop::transfer::FinetuneMode;
use sarcrop::{Error, Result};

/// Synthetic generator input: a preset name or a full spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SynthSource {
    Preset(String),
    Spec(Box<SynthSpec>),
}

impl SynthSource {
    pub fn resolve(&self) -> Result<SynthSpec> {
        match self {
            SynthSource::Spec(s) => Ok((**s).clone()),
            SynthSource::Preset(name) => synth_preset(name),
        }
    }
}

pub const SYNTH_PRESETS: [&str; 5] = [
    "source_rice",
    "target_shifted_rice",
    "two_variant_rice",
    "vv_discriminative",
    "barley_like",
];

pub fn synth_preset(name: &str) -> Result<SynthSpec> {
    Ok(match name {
        "source_rice" => SynthSpec::source_rice(),
        "target_shifted_rice" => SynthSpec::target_shifted_rice(),
        "two_variant_rice" => SynthSpec::two_variant_rice(),
        "vv_discriminative" => SynthSpec::vv_discriminative(),
        "barley_like" => SynthSpec::barley_like(),
        other => {
            return Err(Error::Config(format!(
                "unknown synthetic preset `{other}`; expected one of {}",
                SYNTH_PRESETS.join(", ")
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threshold: f64,
    /// Visible-step counts for the early-prediction sweep.
    pub early_steps: Vec<usize>,
    /// Architecture for `pretrain`; input channels, steps and patch size follow the dataset.
    pub model: ModelConfig,
    /// Training hyperparameters; defaults depend on the command.
    pub train: Option<TrainConfig>,
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Reference checkpoint for `verify-checkpoint`.
    pub reference: Option<PathBuf>,
    pub features: Option<Vec<String>>,
    pub mode: FinetuneMode,
    pub seeds: Option<Vec<u64>>,
    /// Scenario preset id (1-10) whose reference values are attached to reports.
    pub scenario: Option<u32>,
    pub synth: Option<SynthSource>,
    pub n_patches: Option<usize>,
    pub ratio: f64,
    pub rf: bool,
    pub rf_hyper: RfHyper,
    pub averaging: Averaging,
    /// Checkpoints to evaluate, keyed `METHOD` or `METHOD@SEED`.
    pub models: IndexMap<String, PathBuf>,
    pub t_avail: Option<usize>,
    /// Patches drawn in the mosaic image.
    pub mosaic_patches: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            threshold: 0.5,
            early_steps: Vec::new(),
            model: ModelConfig::desk_scale(),
            train: None,
            data: None,
            test_data: None,
            checkpoint: None,
            reference: None,
            features: None,
            mode: FinetuneMode::Encoder,
            seeds: None,
            scenario: None,
            synth: None,
            n_patches: None,
            ratio: sarcrop::data::DEFAULT_TRAIN_RATIO,
            rf: false,
            rf_hyper: RfHyper::default(),
            averaging: Averaging::Micro,
            models: IndexMap::new(),
            t_avail: None,
            mosaic_patches: 8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory; pass --out or set `out`".into()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("split ratio {} outside (0, 1)", self.ratio)));
        }
        if self.early_steps.contains(&0) {
            return Err(Error::Config("early steps start at 1".into()));
        }
        Ok(())
    }
}

pub fn require<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("missing {what}")))
}
