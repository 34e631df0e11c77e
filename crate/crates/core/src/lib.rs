pub mod discretize;
pub mod error;
pub mod formats;
pub mod numerics;
pub mod phs_model;
pub mod riccati;
pub mod simulate;
pub mod synthesis;

pub use error::{Error, Result};
