pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod render;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
