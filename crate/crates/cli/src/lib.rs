//! Command-line front end and local HTTP service for the meshfim pipeline.

pub mod cli;
pub mod error;
pub mod masks;
pub mod ops;
pub mod service;
pub mod store;

pub use error::CliError;
