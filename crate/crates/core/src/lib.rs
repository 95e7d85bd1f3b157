pub mod anomaly;
pub mod baseline;
pub mod calibrate;
pub mod error;
pub mod hotspot;
pub mod ingest;
pub mod perceptron;
pub mod series;
pub mod srf;
pub mod stigspace;
pub mod synth;

pub use error::{Error, Result};
