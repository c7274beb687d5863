//! Command-line front end and HTTP service for capacity scenario networks.

pub mod api;
pub mod cli;
pub mod error;
pub mod render;
pub mod server;

pub use error::{ApiError, ErrorBody, Kind};
