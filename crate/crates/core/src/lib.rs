pub mod config;
pub mod error;
pub mod imaging;
pub mod labeler;
pub mod metrics;
pub mod pipeline;
pub mod poisson;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
