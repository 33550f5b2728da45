pub mod bundled;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod encoder;
pub mod error;
pub mod evalrep;
pub mod gmmthresh;
pub mod phon;
pub mod plot;
pub mod pmialign;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
