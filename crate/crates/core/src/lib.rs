//! Two-orthogonal-coil wireless power transfer model with communication-free
//! metal object detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`magnetics`] - field steering and square-loop mutual inductance.
//! * [`eddy`] - equivalent series `R_m`, `L_m` of a metal plate.
//! * [`circuit`] - phasor solutions of the coupled resonant circuits.
//! * [`characteristics`] - U-I and P-I sweeps over transmitter current.
//! * [`detection`] - threshold fitting and metal/coil classification.
//! * [`scenario`] - TOML scenarios tying the pipeline together.

pub mod characteristics;
pub mod circuit;
pub mod detection;
pub mod eddy;
pub mod error;
pub mod magnetics;
pub mod materials;
pub mod quadrature;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
