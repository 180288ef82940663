//! Laser phase variance per symbol, including equalization-enhanced phase
//! noise (EEPN), and the time-correlation matrices for phase samples.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::system::{FiberLink, LaserSpec, SystemKind, SystemParams};

/// Time-correlation assumption between the N phase samples of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrelationModel {
    /// `ρ = 1` everywhere.
    Full,
    /// `ρ_{p,q} = (1 − |p − q|/N)^{1/2}`.
    Partial,
    /// Identity: independent samples.
    Uncorrelated,
}

impl CorrelationModel {
    pub const ALL: [CorrelationModel; 3] = [
        CorrelationModel::Full,
        CorrelationModel::Partial,
        CorrelationModel::Uncorrelated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationModel::Full => "full",
            CorrelationModel::Partial => "partial",
            CorrelationModel::Uncorrelated => "none",
        }
    }

    /// Correlation coefficient between samples `p` and `q` of an `n`-sample frame.
    pub fn coefficient(&self, n: usize, p: usize, q: usize) -> f64 {
        match self {
            CorrelationModel::Full => 1.0,
            CorrelationModel::Uncorrelated => {
                if p == q {
                    1.0
                } else {
                    0.0
                }
            }
            CorrelationModel::Partial => (1.0 - p.abs_diff(q) as f64 / n as f64).sqrt(),
        }
    }
}

impl fmt::Display for CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CorrelationModel::Full),
            "partial" => Ok(CorrelationModel::Partial),
            "none" => Ok(CorrelationModel::Uncorrelated),
            other => Err(Error::InvalidValue {
                key: "correlation".into(),
                value: other.into(),
            }),
        }
    }
}

/// Dense symmetric `n × n` correlation matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.entries[p * self.n + q]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.entries[p * self.n..(p + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// `xᵀ R x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut total = 0.0;
        for (p, &xp) in x.iter().enumerate() {
            let row = self.row(p);
            let inner: f64 = row.iter().zip(x).map(|(r, xq)| r * xq).sum();
            total += xp * inner;
        }
        total
    }
}

pub fn correlation_matrix(n: usize, model: CorrelationModel) -> CorrelationMatrix {
    let mut entries = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            entries.push(model.coefficient(n, p, q));
        }
    }
    CorrelationMatrix { n, entries }
}

/// Phase variance per symbol interval, split into its laser and EEPN parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseVariance {
    /// Total variance in rad².
    pub sigma2: f64,
    /// `2π(Δν_Tx + Δν_LO)·T`, times the worst-case factor.
    pub intrinsic_part: f64,
    /// Dispersion-induced part, times the worst-case factor.
    pub eepn_part: f64,
    /// Equivalent EEPN linewidth `Δν_EEPN` in Hz (not scaled by the factor).
    pub eepn_linewidth: f64,
    pub effective_symbol_time: f64,
    /// Normalized-variance factor applied to both parts: N for worst-case
    /// OFDM, otherwise 1.
    pub worst_case_factor: f64,
}

/// Which terms of the phase variance a calculation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseTerms {
    #[default]
    All,
    IntrinsicOnly,
    EepnOnly,
}

impl PhaseVariance {
    pub fn select(&self, terms: NoiseTerms) -> f64 {
        match terms {
            NoiseTerms::All => self.sigma2,
            NoiseTerms::IntrinsicOnly => self.intrinsic_part,
            NoiseTerms::EepnOnly => self.eepn_part,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            sigma2: self.intrinsic_part * factor + self.eepn_part * factor,
            intrinsic_part: self.intrinsic_part * factor,
            eepn_part: self.eepn_part * factor,
            worst_case_factor: self.worst_case_factor * factor,
            ..self
        }
    }
}

/// Per-symbol phase variance over symbol time `symbol_time`:
///
/// `σ² = 2π(Δν_Tx + Δν_LO)·T + (πλ²/2c)·D·L·Δν_LO / T = 2π(Δν_Tx + Δν_LO + Δν_EEPN)·T`
pub fn sigma2_intrinsic(
    symbol_time: f64,
    lasers: &LaserSpec,
    fiber: &FiberLink,
) -> Result<PhaseVariance> {
    if !(symbol_time > 0.0 && symbol_time.is_finite()) {
        return Err(Error::NonPositiveSymbolTime(symbol_time));
    }
    let intrinsic_part = 2.0 * PI * (lasers.linewidth_tx() + lasers.linewidth_lo()) * symbol_time;
    let lambda2 = fiber.wavelength() * fiber.wavelength();
    let eepn_part = PI * lambda2 / (2.0 * fiber.light_speed())
        * fiber.dispersion()
        * fiber.length()
        * lasers.linewidth_lo()
        / symbol_time;
    let eepn_linewidth = lambda2 * fiber.dispersion() * fiber.length() * lasers.linewidth_lo()
        / (4.0 * fiber.light_speed() * symbol_time * symbol_time);
    Ok(PhaseVariance {
        sigma2: intrinsic_part + eepn_part,
        intrinsic_part,
        eepn_part,
        eepn_linewidth,
        effective_symbol_time: symbol_time,
        worst_case_factor: 1.0,
    })
}

/// Design phase variance for a system: single-channel QPSK at symbol time
/// T/N, or worst-case OFDM at T scaled by the normalized variance N.
pub fn effective_sigma2(params: &SystemParams) -> PhaseVariance {
    let t = params.effective_symbol_time();
    // SystemParams guarantees T > 0.
    let base = sigma2_intrinsic(t, &params.lasers, &params.fiber).expect("validated symbol time");
    match params.kind {
        SystemKind::SingleChannelQpsk => base,
        SystemKind::OfdmWorstCase => base.scaled(params.grid.n_channels() as f64),
    }
}
