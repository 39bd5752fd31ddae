//! Recurrent U-Net definition and evaluation.

pub mod batch;
pub mod config;
pub mod kernels;
pub mod net;
pub mod ops;
pub mod params;

pub use batch::{BatchTensor, ProbMap};
pub use config::{CarryKind, ModelConfig};
pub use kernels::Real;
pub use net::{build_model, RecurrentUNet};
pub use ops::{binarize, temporal_maxpool, BinaryMask};
pub use params::{Group, Param, ParameterSet, Params, FIRST_LAYER_BIAS, FIRST_LAYER_WEIGHT};
