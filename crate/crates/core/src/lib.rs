pub mod crowd;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod expansion;
pub mod factor;
pub mod kernel;
pub mod lsi;
pub mod metrics;
pub mod space;
pub mod synthetic;

pub use error::{Error, Result};
