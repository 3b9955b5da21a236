//! Files, parallel execution and the command-line driver around
//! [`plgg_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod nifti;
pub mod tables;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use exec::Rayon;
