//! QPSK symbols and OFDM frames.
//!
//! Frames are encoded as base-4 integers with channel 0 in the least
//! significant digit. The string form writes the most significant digit
//! first, so the rightmost character is channel 0.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One of the unit-modulus points `exp(j·index·π/2)`, i.e. `{1, j, −1, −j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QpskSymbol(u8);

impl QpskSymbol {
    pub fn new(index: u8) -> Result<Self> {
        if index > 3 {
            return Err(Error::InvalidFrame(format!(
                "QPSK index {index} not in 0..=3"
            )));
        }
        Ok(Self(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn value(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Quarter turns of `self / other`.
    pub fn ratio_index(self, other: QpskSymbol) -> u8 {
        (self.0 + 4 - other.0) & 3
    }

    pub fn rotate(self, quarter_turns: u8) -> Self {
        Self((self.0 + quarter_turns) & 3)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstellationFrame {
    symbols: Vec<QpskSymbol>,
}

impl ConstellationFrame {
    pub fn new(symbols: Vec<QpskSymbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidFrame("frame has no channels".into()));
        }
        Ok(Self { symbols })
    }

    pub fn from_indices(indices: &[u8]) -> Result<Self> {
        let symbols = indices
            .iter()
            .map(|&i| QpskSymbol::new(i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols)
    }

    pub fn all_equal(n: usize, symbol: QpskSymbol) -> Result<Self> {
        Self::new(vec![symbol; n])
    }

    /// Decodes a base-4 frame code; channel 0 is the least significant digit.
    pub fn from_code(code: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_CODE_CHANNELS {
            return Err(Error::InvalidFrame(format!(
                "frame codes support 1..={MAX_CODE_CHANNELS} channels, got {n}"
            )));
        }
        if n < MAX_CODE_CHANNELS && code >> (2 * n) != 0 {
            return Err(Error::InvalidFrame(format!(
                "code {code} does not fit {n} base-4 digits"
            )));
        }
        let symbols = (0..n)
            .map(|i| QpskSymbol(((code >> (2 * i)) & 3) as u8))
            .collect();
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[QpskSymbol] {
        &self.symbols
    }

    pub fn symbol(&self, k: usize) -> QpskSymbol {
        self.symbols[k]
    }

    /// Base-4 code, or `None` if the frame is too long for a `u64`.
    pub fn code(&self) -> Option<u64> {
        if self.symbols.len() > MAX_CODE_CHANNELS {
            return None;
        }
        Some(
            self.symbols
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, s)| acc | (u64::from(s.0) << (2 * i))),
        )
    }

    /// Multiplies every symbol by `j^quarter_turns`.
    pub fn rotated(&self, quarter_turns: u8) -> Self {
        Self {
            symbols: self
                .symbols
                .iter()
                .map(|s| s.rotate(quarter_turns))
                .collect(),
        }
    }
}

/// Longest frame whose base-4 code fits in a `u64`.
pub const MAX_CODE_CHANNELS: usize = 32;

impl fmt::Display for ConstellationFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.symbols.iter().rev() {
            write!(f, "{}", s.0)?;
        }
        Ok(())
    }
}

impl FromStr for ConstellationFrame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .trim()
            .chars()
            .rev()
            .map(|c| match c {
                '0'..='3' => Ok(QpskSymbol(c as u8 - b'0')),
                other => Err(Error::InvalidFrame(format!(
                    "`{other}` is not a base-4 digit"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols)
    }
}
