//! `key = value` system configuration documents.
//!
//! Values are given in presentation units (ps, GHz, ps/(nm·km), km, nm) and
//! converted to SI on parse. Entries are separated by newlines or commas and
//! `#` starts a comment.
//!
//! ```text
//! channels            = 10
//! symbol_time_ps      = 100
//! linewidth_tx_hz     = 4e6
//! linewidth_lo_hz     = 4e6
//! dispersion_ps_nm_km = 16
//! length_km           = 800
//! wavelength_nm       = 1550
//! system_kind         = ofdm_worst_case
//! ```

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::system::{FiberLink, LaserSpec, OfdmGrid, SystemKind, SystemParams};

/// Decimal exponent of each presentation unit in SI.
const PS: i32 = -12;
const GHZ: i32 = 9;
const PS_PER_NM_KM: i32 = -6;
const KM: i32 = 3;
const NM: i32 = -9;

/// Converts to SI with one correctly rounded operation, so `1550 nm` lands on
/// the same double as the literal `1550e-9`.
fn to_si(x: f64, exponent: i32) -> f64 {
    let scale = 10f64.powi(exponent.abs());
    if exponent >= 0 {
        x * scale
    } else {
        x / scale
    }
}

const CHANNELS: &str = "channels";
const SYMBOL_TIME: &str = "symbol_time_ps";
const SPACING: &str = "channel_spacing_ghz";
const LINEWIDTH_TX: &str = "linewidth_tx_hz";
const LINEWIDTH_LO: &str = "linewidth_lo_hz";
const DISPERSION: &str = "dispersion_ps_nm_km";
const LENGTH: &str = "length_km";
const WAVELENGTH: &str = "wavelength_nm";
const SYSTEM_KIND: &str = "system_kind";

const KEYS: [&str; 9] = [
    CHANNELS,
    SYMBOL_TIME,
    SPACING,
    LINEWIDTH_TX,
    LINEWIDTH_LO,
    DISPERSION,
    LENGTH,
    WAVELENGTH,
    SYSTEM_KIND,
];

/// Unit-bearing keys, by the stem a misspelled unit would share.
const UNIT_STEMS: [(&str, &str); 7] = [
    ("symbol_time_", SYMBOL_TIME),
    ("channel_spacing_", SPACING),
    ("linewidth_tx_", LINEWIDTH_TX),
    ("linewidth_lo_", LINEWIDTH_LO),
    ("dispersion_", DISPERSION),
    ("length_", LENGTH),
    ("wavelength_", WAVELENGTH),
];

pub fn parse_system_config(text: &str) -> Result<SystemParams> {
    let entries = collect_entries(text)?;
    let get = |key: &str| entries.get(key).map(String::as_str);
    let require = |key: &str| get(key).ok_or_else(|| Error::MissingKey(key.into()));

    let channels = parse_channels(require(CHANNELS)?)?;
    let symbol_time_ps = parse_number(SYMBOL_TIME, require(SYMBOL_TIME)?)?;
    check(SYMBOL_TIME, symbol_time_ps > 0.0)?;
    let symbol_time = to_si(symbol_time_ps, PS);
    check(SYMBOL_TIME, symbol_time > 0.0 && symbol_time.is_finite())?;

    let channel_spacing = match get(SPACING) {
        Some(v) => {
            let ghz = parse_number(SPACING, v)?;
            check(SPACING, ghz > 0.0)?;
            to_si(ghz, GHZ)
        }
        None => 1.0 / symbol_time,
    };
    check(
        SPACING,
        channel_spacing > 0.0 && channel_spacing.is_finite(),
    )?;

    let linewidth_tx = parse_number(LINEWIDTH_TX, require(LINEWIDTH_TX)?)?;
    check(LINEWIDTH_TX, linewidth_tx >= 0.0)?;
    let linewidth_lo = parse_number(LINEWIDTH_LO, require(LINEWIDTH_LO)?)?;
    check(LINEWIDTH_LO, linewidth_lo >= 0.0)?;

    let dispersion = parse_number(DISPERSION, require(DISPERSION)?)?;
    check(DISPERSION, dispersion >= 0.0)?;
    let length = parse_number(LENGTH, require(LENGTH)?)?;
    check(LENGTH, length >= 0.0)?;
    let wavelength = parse_number(WAVELENGTH, require(WAVELENGTH)?)?;
    check(WAVELENGTH, wavelength > 0.0)?;

    let kind = match get(SYSTEM_KIND) {
        Some(v) => v.parse::<SystemKind>()?,
        None => SystemKind::OfdmWorstCase,
    };

    let grid = OfdmGrid::new(channels, symbol_time, channel_spacing)
        .map_err(|_| Error::RangeViolation(SYMBOL_TIME.into()))?;
    let lasers = LaserSpec::new(linewidth_tx, linewidth_lo)?;
    let fiber = FiberLink::new(
        to_si(dispersion, PS_PER_NM_KM),
        to_si(length, KM),
        to_si(wavelength, NM),
    )
    .map_err(|_| Error::RangeViolation(WAVELENGTH.into()))?;
    Ok(SystemParams::new(grid, lasers, fiber, kind))
}

/// Emits a document that [`parse_system_config`] maps back to `params`.
///
/// Each value is written as the shortest decimal whose unit conversion lands
/// exactly on the stored SI value. Parameters that did not come from a parse
/// may have no such preimage, in which case the nearest value is written.
pub fn render_system_config(params: &SystemParams) -> String {
    let grid = &params.grid;
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        out.push_str(&format!("{key} = {value}\n"));
    };
    line(CHANNELS, grid.n_channels().to_string());
    line(SYMBOL_TIME, preimage(grid.symbol_time(), PS).to_string());
    if grid.channel_spacing() != 1.0 / grid.symbol_time() {
        line(SPACING, preimage(grid.channel_spacing(), GHZ).to_string());
    }
    line(LINEWIDTH_TX, params.lasers.linewidth_tx().to_string());
    line(LINEWIDTH_LO, params.lasers.linewidth_lo().to_string());
    line(
        DISPERSION,
        preimage(params.fiber.dispersion(), PS_PER_NM_KM).to_string(),
    );
    line(LENGTH, preimage(params.fiber.length(), KM).to_string());
    line(
        WAVELENGTH,
        preimage(params.fiber.wavelength(), NM).to_string(),
    );
    line(SYSTEM_KIND, params.kind.to_string());
    out
}

/// Smallest-step search for `x` with `to_si(x, exponent) == si`.
fn preimage(si: f64, exponent: i32) -> f64 {
    let guess = to_si(si, -exponent);
    if to_si(guess, exponent) == si {
        return guess;
    }
    let (mut up, mut down) = (guess, guess);
    for _ in 0..16 {
        up = up.next_up();
        if to_si(up, exponent) == si {
            return up;
        }
        down = down.next_down();
        if to_si(down, exponent) == si {
            return down;
        }
    }
    guess
}

fn collect_entries(text: &str) -> Result<HashMap<String, String>> {
    let mut entries = HashMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        for item in content.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, value) = item
                .split_once('=')
                .ok_or(Error::Syntax { line: line_no + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Syntax { line: line_no + 1 });
            }
            if !KEYS.contains(&key) {
                return Err(unknown_key(key));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::DuplicateKey(key.into()));
            }
        }
    }
    Ok(entries)
}

fn unknown_key(key: &str) -> Error {
    for (stem, expected) in UNIT_STEMS {
        if key.starts_with(stem) {
            return Error::BadUnit {
                key: key.into(),
                expected: expected.into(),
            };
        }
    }
    Error::UnknownKey(key.into())
}

fn parse_number(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::InvalidValue {
        key: key.into(),
        value: value.into(),
    })?;
    check(key, v.is_finite())?;
    Ok(v)
}

fn parse_channels(value: &str) -> Result<usize> {
    if let Ok(n) = value.parse::<usize>() {
        check(CHANNELS, n >= 1)?;
        return Ok(n);
    }
    // Scientific notation such as `1e1`, as long as it is integral.
    let v = parse_number(CHANNELS, value)?;
    check(
        CHANNELS,
        v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
    )?;
    Ok(v as usize)
}

fn check(key: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::RangeViolation(key.into()))
    }
}
