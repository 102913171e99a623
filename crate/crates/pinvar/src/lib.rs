//! File formats, the cross-validation harness and the command line for
//! physics-informed NVAR. The numerics live in [`pinvar_core`].
//!
//! Every index that appears in a file, a config or a flag is 1-based: row
//! `k` of a dataset is the state at `t0 + (k − 1) h`.

pub mod cli;
pub mod dataset_csv;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod model_file;

pub use error::{Error, Result};
pub use pinvar_core as core;
