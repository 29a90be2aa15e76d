pub mod classifiers;
pub mod data;
pub mod error;
pub mod eval;
pub mod hierarchy;
mod linalg;
pub mod reduce;
pub mod rng;
pub mod schemes;

pub use error::{Error, ErrorCategory, Result};
