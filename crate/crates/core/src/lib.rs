//! Transfer learning toolkit for SAR time-series crop segmentation.
//!
//! The crate covers the recurrent U-Net ([`model`]), fine-tuning regimes and
//! pretrained-weight surgery ([`transfer`]), chronologically ordered training
//! ([`train`]), patch datasets ([`data`]) and the evaluation harness ([`eval`]).

pub mod error;
pub mod data;
pub mod eval;
pub mod model;
pub mod scenario;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
