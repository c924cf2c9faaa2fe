pub mod diagnostics;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod error;
pub mod kernel;
pub mod mesh;
pub mod model;
pub mod output;
pub mod solver;

pub use error::{Error, Result};
