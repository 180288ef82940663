//! System description: OFDM grid, lasers, fiber link and the system kind.
//!
//! All quantities are SI. Construction validates every invariant, so a value of
//! any of these types is always usable by the noise and BER models.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Free-space light speed used throughout, in m/s.
pub const LIGHT_SPEED: f64 = 3.0e8;

/// Bits per QPSK symbol per polarization.
const BITS_PER_SYMBOL: f64 = 2.0;
const POLARIZATIONS: f64 = 2.0;

/// Relative tolerance on `Δf·T = 1` before a grid is flagged non-orthogonal.
const ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmGrid {
    n_channels: usize,
    symbol_time: f64,
    channel_spacing: f64,
    non_orthogonal: bool,
}

impl OfdmGrid {
    pub fn new(n_channels: usize, symbol_time: f64, channel_spacing: f64) -> Result<Self> {
        if n_channels < 1 {
            return Err(Error::RangeViolation("n_channels".into()));
        }
        if !(symbol_time.is_finite() && symbol_time > 0.0) {
            return Err(Error::RangeViolation("symbol_time".into()));
        }
        if !(channel_spacing.is_finite() && channel_spacing > 0.0) {
            return Err(Error::RangeViolation("channel_spacing".into()));
        }
        let non_orthogonal = (channel_spacing * symbol_time - 1.0).abs() > ORTHOGONALITY_TOL;
        Ok(Self {
            n_channels,
            symbol_time,
            channel_spacing,
            non_orthogonal,
        })
    }

    /// Grid with the orthogonal spacing `Δf = 1/T`.
    pub fn orthogonal(n_channels: usize, symbol_time: f64) -> Result<Self> {
        Self::new(n_channels, symbol_time, 1.0 / symbol_time)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn symbol_time(&self) -> f64 {
        self.symbol_time
    }

    pub fn channel_spacing(&self) -> f64 {
        self.channel_spacing
    }

    /// Set when `|Δf·T − 1| > 1e-9`. Such grids are accepted but lose
    /// subcarrier orthogonality.
    pub fn non_orthogonal(&self) -> bool {
        self.non_orthogonal
    }
}

/// Transmitter and local-oscillator linewidths in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    linewidth_tx: f64,
    linewidth_lo: f64,
}

impl LaserSpec {
    pub fn new(linewidth_tx: f64, linewidth_lo: f64) -> Result<Self> {
        if !(linewidth_tx.is_finite() && linewidth_tx >= 0.0) {
            return Err(Error::RangeViolation("linewidth_tx".into()));
        }
        if !(linewidth_lo.is_finite() && linewidth_lo >= 0.0) {
            return Err(Error::RangeViolation("linewidth_lo".into()));
        }
        Ok(Self {
            linewidth_tx,
            linewidth_lo,
        })
    }

    pub fn equal(linewidth: f64) -> Result<Self> {
        Self::new(linewidth, linewidth)
    }

    pub fn linewidth_tx(&self) -> f64 {
        self.linewidth_tx
    }

    pub fn linewidth_lo(&self) -> f64 {
        self.linewidth_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberLink {
    dispersion: f64,
    length: f64,
    wavelength: f64,
    light_speed: f64,
}

impl FiberLink {
    /// `dispersion` in s/m², `length` and `wavelength` in m.
    pub fn new(dispersion: f64, length: f64, wavelength: f64) -> Result<Self> {
        if !(dispersion.is_finite() && dispersion >= 0.0) {
            return Err(Error::RangeViolation("dispersion".into()));
        }
        if !(length.is_finite() && length >= 0.0) {
            return Err(Error::RangeViolation("length".into()));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::RangeViolation("wavelength".into()));
        }
        Ok(Self {
            dispersion,
            length,
            wavelength,
            light_speed: LIGHT_SPEED,
        })
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.dispersion, length, self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// N-channel OFDM designed for the worst-case normalized variance N.
    OfdmWorstCase,
    /// Single-carrier QPSK with the same capacity, symbol time T/N.
    SingleChannelQpsk,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::OfdmWorstCase => "ofdm_worst_case",
            SystemKind::SingleChannelQpsk => "single_qpsk",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ofdm_worst_case" => Ok(SystemKind::OfdmWorstCase),
            "single_qpsk" => Ok(SystemKind::SingleChannelQpsk),
            other => Err(Error::InvalidValue {
                key: "system_kind".into(),
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub grid: OfdmGrid,
    pub lasers: LaserSpec,
    pub fiber: FiberLink,
    pub kind: SystemKind,
}

impl SystemParams {
    pub fn new(grid: OfdmGrid, lasers: LaserSpec, fiber: FiberLink, kind: SystemKind) -> Self {
        Self {
            grid,
            lasers,
            fiber,
            kind,
        }
    }

    /// Symbol time seen by the phase-noise model: T for OFDM, T/N for the
    /// equal-capacity single-channel system.
    pub fn effective_symbol_time(&self) -> f64 {
        match self.kind {
            SystemKind::OfdmWorstCase => self.grid.symbol_time(),
            SystemKind::SingleChannelQpsk => {
                self.grid.symbol_time() / self.grid.n_channels() as f64
            }
        }
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        Ok(Self {
            fiber: self.fiber.with_length(length)?,
            ..*self
        })
    }

    pub fn with_lasers(&self, lasers: LaserSpec) -> Self {
        Self { lasers, ..*self }
    }

    /// Dual-polarization QPSK line rate in Gbit/s.
    pub fn capacity_gbit(&self) -> f64 {
        capacity_gbit(self)
    }
}

/// `N · 2 bit · (1/T) · 2 polarizations`, in Gbit/s.
pub fn capacity_gbit(params: &SystemParams) -> f64 {
    let n = params.grid.n_channels() as f64;
    n * BITS_PER_SYMBOL * POLARIZATIONS / params.grid.symbol_time() / 1e9
}
