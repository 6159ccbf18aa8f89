//! Experiment harness around `gnc-core`: configuration, file formats,
//! quality metrics, phantoms and the basin, census and reconstruction
//! experiments behind the `gnc` command-line tool.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod census;
pub mod config;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod problem;
pub mod recon;
pub mod seeds;

pub use error::{LabError, LabResult};
