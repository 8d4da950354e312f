//! Physical layer of an IRS-assisted symbiotic radio link.
//!
//! An access point serves `K` primary users through an intelligent reflecting
//! surface. The surface piggybacks its own symbols by switching a few of its
//! elements on and off, and a secondary user decodes them non-coherently from
//! the received energy over `L` primary symbols.
//!
//! * [`scenario`] holds configuration, geometry and seeded Rician channels.
//! * [`signal`] builds the on/off codebook and evaluates powers and rates.
//! * [`ser`] is the detection side: incomplete gamma functions, the MAP
//!   energy detector and the closed-form union bound.
//! * [`mc`] simulates the receive chain to check the analytics.

pub mod mc;
pub mod rng;
pub mod scenario;
pub mod ser;
pub mod signal;

pub use num_complex::Complex64 as C64;
pub use scenario::{ChannelRealization, ScenarioConfig};
pub use signal::{BeamformingSolution, HypothesisPowers, IrsCodebook};
