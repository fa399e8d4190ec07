//! Link-level simulation and error-rate analysis for cooperative backscatter
//! over a reconfigurable intelligent surface using APSK.
//!
//! The surface turns elements ON/OFF (or amplified/passive) to select an
//! APSK ring and applies a common phase offset to select a point within it,
//! riding on top of the A-PSK symbol sent by the active transmitter.

pub mod analysis;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod miso;
pub mod rng;
pub mod scalar;
pub mod sdp;
pub mod transceiver;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

/// Double-precision aliases.
pub type Apsk = constellation::ApskConstellation<f64>;
pub type BitMap = constellation::BitMap<f64>;
