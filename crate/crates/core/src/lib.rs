//! Laser phase-noise analysis for coherent optical OFDM.
//!
//! - [`noise`]: per-symbol phase variance with equalization-enhanced phase
//!   noise, and phase-sample correlation models.
//! - [`variance`]: closed-form common-phase-error plus inter-carrier
//!   interference variance per received channel.
//! - [`search`]: exhaustive and sampled worst-case search over QPSK frames.
//! - [`monte_carlo`]: stochastic oracle for the closed forms.
//! - [`ber`]: BER floor, reach and linewidth fitting.

pub mod ber;
pub mod cli;
pub mod config;
pub mod error;
pub mod frame;
pub mod monte_carlo;
pub mod noise;
pub mod parallel;
pub mod search;
pub mod system;
pub mod variance;

pub use error::{Error, Result};
pub use frame::{ConstellationFrame, QpskSymbol};
pub use noise::CorrelationModel;
pub use system::{FiberLink, LaserSpec, OfdmGrid, SystemKind, SystemParams};
