//! Patch datasets: compositing, normalization, splitting, synthetic generation and files.

pub mod composite;
pub mod io;
pub mod normalize;
pub mod sample;
pub mod split;
pub mod synth;

pub use composite::{composite_20day, Composite, Scene};
pub use io::{load_dataset, save_dataset};
pub use normalize::{fit_normalization, normalize, normalize_value};
pub use sample::{Dims, FeatureStats, PatchDataset, PatchSample, SampleMeta, SplitTag};
pub use split::{split_indices, split_train_test, DEFAULT_TRAIN_RATIO};
pub use synth::{generate_synthetic_dataset, SynthSpec};
