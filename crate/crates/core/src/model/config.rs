use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Logistic,
}

/// Shape of the learnable weight applied to the previous time step's state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CarryKind {
    /// One weight per feature channel.
    #[default]
    PerChannel,
    /// One weight shared by all channels of a level.
    Scalar,
}

/// Architecture hyperparameters of the recurrent U-Net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub time_steps: usize,
    /// Number of downsampling encoder levels; a bottleneck level follows them.
    pub depth: usize,
    pub base_channels: usize,
    pub dropout_rate: f64,
    pub temporal_pool_window: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub carry: CarryKind,
    pub patch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ModelConfig {
    /// Full-size preset: 256 px patches, 4 levels, 32 base channels.
    pub fn full_scale() -> Self {
        Self {
            in_channels: 1,
            time_steps: 8,
            depth: 4,
            base_channels: 32,
            dropout_rate: 0.2,
            temporal_pool_window: 2,
            hidden_activation: HiddenActivation::Relu,
            output_activation: OutputActivation::Logistic,
            carry: CarryKind::PerChannel,
            patch_size: 256,
        }
    }

    /// Laptop preset used by the synthetic experiments: 64 px, 2 levels, 8 base channels.
    pub fn desk_scale() -> Self {
        Self {
            depth: 2,
            base_channels: 8,
            patch_size: 64,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be >= 1".into()));
        }
        if self.time_steps == 0 {
            return Err(Error::Config("time_steps must be >= 1".into()));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be >= 1".into()));
        }
        if self.temporal_pool_window == 0 || !self.time_steps.is_multiple_of(self.temporal_pool_window) {
            return Err(Error::Config(format!(
                "time_steps {} not divisible by temporal_pool_window {}",
                self.time_steps, self.temporal_pool_window
            )));
        }
        let stride = 1usize << self.depth;
        if self.patch_size == 0 || !self.patch_size.is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "patch_size {} not divisible by 2^depth = {}",
                self.patch_size, stride
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Channel width of encoder level `level` (`depth` is the bottleneck).
    pub fn level_channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.patch_size >> level
    }

    /// Time length of skip features after temporal pooling.
    pub fn pooled_steps(&self) -> usize {
        self.time_steps / self.temporal_pool_window
    }

    /// Number of decoder units addressable by fine-tuning the trailing layers
    /// (up-convolution and two convolutions per level, plus the output head).
    pub fn decoder_layer_count(&self) -> usize {
        3 * self.depth + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        ModelConfig::full_scale().validate().unwrap();
        ModelConfig::desk_scale().validate().unwrap();
    }

    #[test]
    fn rejects_patch_not_divisible_by_depth_stride() {
        let cfg = ModelConfig {
            patch_size: 60,
            depth: 4,
            ..ModelConfig::full_scale()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_time_not_divisible_by_pool_window() {
        let cfg = ModelConfig {
            time_steps: 7,
            ..ModelConfig::desk_scale()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn skip_time_length_is_half() {
        let cfg = ModelConfig::desk_scale();
        assert_eq!(cfg.pooled_steps(), 4);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"in_channels": 2, "patch_size": 32}"#).unwrap();
        assert_eq!(cfg.in_channels, 2);
        assert_eq!(cfg.time_steps, 8);
    }
}
