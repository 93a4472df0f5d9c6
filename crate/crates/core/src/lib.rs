pub mod cli;
pub mod episode;
pub mod error;
pub mod eval;
pub mod models;
pub mod nets;
pub mod pushsim;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
