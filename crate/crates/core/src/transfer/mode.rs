use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_with::{DeserializeFromStr, SerializeDisplay};

use crate::error::{Error, Result};
use crate::model::{Group, ParameterSet, RecurrentUNet};

use super::checkpoint::CheckpointBundle;

/// Fine-tuning regime: which pretrained values are kept and which are updated.
///
/// Serialised as its label string, e.g. `"FT_E"` or `"FT_D_LAST(2)"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, SerializeDisplay, DeserializeFromStr)]
pub enum FinetuneMode {
    /// Architecture only; weights re-initialised.
    RandomInit,
    /// Whole network fine-tuned.
    Full,
    /// Encoder fine-tuned, decoder frozen.
    #[default]
    Encoder,
    /// Decoder fine-tuned, encoder frozen.
    Decoder,
    /// Only the trailing `k` decoder layers fine-tuned.
    DecoderLast(usize),
}

impl FinetuneMode {
    pub fn label(&self) -> String {
        match self {
            FinetuneMode::RandomInit => "RI".into(),
            FinetuneMode::Full => "FT".into(),
            FinetuneMode::Encoder => "FT_E".into(),
            FinetuneMode::Decoder => "FT_D".into(),
            FinetuneMode::DecoderLast(k) => format!("FT_D_LAST({k})"),
        }
    }
}

impl fmt::Display for FinetuneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for FinetuneMode {
    type Err = Error;

    /// Accepts `RI`, `FT`, `FT_E`, `FT_D`, `FT_D_LAST(k)` or `FT_D_LAST:k`.
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "RI" => return Ok(FinetuneMode::RandomInit),
            "FT" => return Ok(FinetuneMode::Full),
            "FT_E" => return Ok(FinetuneMode::Encoder),
            "FT_D" => return Ok(FinetuneMode::Decoder),
            _ => {}
        }
        let rest = up
            .strip_prefix("FT_D_LAST")
            .ok_or_else(|| Error::Argument(format!("unknown fine-tune mode `{s}`")))?;
        let digits = rest.trim_matches(|c| c == '(' || c == ')' || c == ':');
        let k = digits
            .parse()
            .map_err(|_| Error::Argument(format!("bad layer count in `{s}`")))?;
        Ok(FinetuneMode::DecoderLast(k))
    }
}

/// Per-parameter trainability flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainableMask(IndexMap<String, bool>);

impl TrainableMask {
    pub fn all(params: &ParameterSet, value: bool) -> Self {
        Self(params.paths().map(|p| (p.to_string(), value)).collect())
    }

    pub fn from_fn(params: &ParameterSet, f: impl Fn(&str, Group, usize) -> bool) -> Self {
        Self(
            params
                .iter()
                .map(|(path, p)| (path.to_string(), f(path, p.group, p.layer)))
                .collect(),
        )
    }

    pub fn get(&self, path: &str) -> Option<bool> {
        self.0.get(path).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Flags in parameter order; errors if the key sets differ.
    pub fn aligned(&self, params: &ParameterSet) -> Result<Vec<bool>> {
        if self.0.len() != params.len() {
            return Err(Error::Argument(format!(
                "mask has {} entries, parameter set has {}",
                self.0.len(),
                params.len()
            )));
        }
        params
            .paths()
            .map(|p| {
                self.get(p)
                    .ok_or_else(|| Error::Argument(format!("mask has no entry for `{p}`")))
            })
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.0.values().filter(|&&v| v).count()
    }
}

/// Parameters and trainability mask for fine-tuning `checkpoint` under `mode`.
///
/// `RandomInit` discards the pretrained values and draws new ones from `seed`.
pub fn apply_finetune_mode(
    checkpoint: &CheckpointBundle,
    mode: FinetuneMode,
    seed: u64,
) -> Result<(ParameterSet, TrainableMask)> {
    checkpoint.validate()?;
    let layers = checkpoint.config.decoder_layer_count();
    let params = match mode {
        FinetuneMode::RandomInit => RecurrentUNet::new(checkpoint.config.clone())?.init(seed)?,
        FinetuneMode::DecoderLast(k) if k == 0 || k > layers => {
            return Err(Error::Argument(format!(
                "FT_D_LAST needs 1 <= k <= {layers}, got {k}"
            )));
        }
        _ => checkpoint.params.clone(),
    };
    let mask = match mode {
        FinetuneMode::RandomInit | FinetuneMode::Full => TrainableMask::all(&params, true),
        FinetuneMode::Encoder => TrainableMask::from_fn(&params, |_, g, _| g == Group::Encoder),
        FinetuneMode::Decoder => TrainableMask::from_fn(&params, |_, g, _| g == Group::Decoder),
        FinetuneMode::DecoderLast(k) => {
            TrainableMask::from_fn(&params, |_, g, layer| g == Group::Decoder && layer + k >= layers)
        }
    };
    Ok((params, mask))
}
