pub mod activation;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod hexfloat;
pub mod monitor;
pub mod montage;
pub mod rng;
pub mod scoring;
pub mod tinynet;

pub use error::{Error, Result};
