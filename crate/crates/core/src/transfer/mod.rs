//! Fine-tuning regimes, first-layer channel expansion and checkpoint files.

pub mod checkpoint;
pub mod expand;
pub mod mode;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointBundle, CheckpointManifest};
pub use expand::{expand_input_channels, expansion_sources, verify_expansion, ExpansionCheck};
pub use mode::{apply_finetune_mode, FinetuneMode, TrainableMask};
