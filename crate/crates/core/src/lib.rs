//! Simulation library for a bit-limited MIMO radar receiver.
//!
//! The receiver combines the matched-filter outputs in analog, samples them
//! with few-bit ADCs and recovers on-grid targets by sparse regression. The
//! combiner and digital filter are designed for the compressed task vector
//! rather than for the raw signal.
//!
//! All numerical types are generic over the real scalar ([`Real`]); the
//! aliases at the crate root fix it to `f64`.

pub mod adc;
pub mod bundle;
pub mod combiner;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod recovery;
pub mod scalar;
pub mod statistics;

pub use error::{Error, Result};
pub use model::{ArrayParams, CoeffModel, GridCell, RadarConfig, Target, TargetScene};
pub use scalar::Real;
pub use statistics::CompressionKind;

pub type SteeringDictionary = dictionary::SteeringDictionary<f64>;
pub type SignalStatistics = statistics::SignalStatistics<f64>;
pub type CompressionMatrix = statistics::CompressionMatrix<f64>;
pub type AcquisitionDesign = combiner::AcquisitionDesign<f64>;
pub type ComplexMatrix = linalg::CMatrix<f64>;
pub type ComplexVector = linalg::CVector<f64>;
