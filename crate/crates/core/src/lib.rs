pub mod bits;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod exact;
pub mod model;
pub mod observables;
pub mod rbm;
pub mod runner;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
