pub mod calendar;
pub mod cases;
pub mod config;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod learn;
pub mod model;
pub mod sim;
pub mod store;
pub mod wire;

pub use error::{Error, Result};
