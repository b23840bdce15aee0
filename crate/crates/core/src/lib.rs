pub mod asymptote;
pub mod config;
pub mod error;
pub mod error_models;
pub mod estimator;
pub mod functionals;
pub mod grid;
pub mod kernels;
pub mod limit_process;
pub mod oracles;
pub mod quad;
pub mod report;
pub mod selftest;
pub mod signal;
pub mod special;
pub mod study;

pub use error::{Error, Result};
