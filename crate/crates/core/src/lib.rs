//! Domain model, data preparation, models and evaluation for traffic
//! incident prediction.

pub mod datagen;
pub mod dataset_io;
pub mod digest;
pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod geomatch;
pub mod models;
pub mod rng;
pub mod sampling;
pub mod tuning;

pub use error::{Error, Result};
