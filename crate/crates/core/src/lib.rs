pub mod analysis;
pub mod datagen;
pub mod error;
pub mod evaluator;
pub mod fmt;
pub mod harness;
pub mod normal;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
