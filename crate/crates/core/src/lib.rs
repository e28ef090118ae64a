pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod states;
pub mod sweep;

pub use error::{Error, Result};
