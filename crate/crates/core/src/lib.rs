//! Efficiency bounds, drive synthesis and verification for single-photon
//! emission from a Λ-type emitter in a lossy cavity.
//!
//! Units throughout: angular frequencies in rad/ns, times in ns. Use
//! [`model::ghz`] to convert from GHz.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod depletion;
pub mod error;
pub mod model;
pub mod ode;
pub mod optimize;
pub mod protocol;
pub mod pulse;
pub mod quad;
pub mod report;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use model::{cooperativity, EmitterParams, ParamFile, RawRates};
pub use pulse::{CosineSeriesPulse, Envelope, GenericEnvelope};
