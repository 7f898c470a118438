//! Multi-sensor multi-target tracking with Gaussian-mixture PHD, MB and LMB
//! filters, fused by averaging their unlabeled PHDs through a
//! coordinate-descent fit of the local Gaussian-mixture weights.

pub mod assignment;
pub mod error;
pub mod filters;
pub mod fusion;
pub mod gm;
pub mod metrics;
pub mod models;
pub mod rfs;

pub use error::{Error, Result};
