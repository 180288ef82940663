//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use ofdm_phase::{
    ConstellationFrame, CorrelationModel, FiberLink, LaserSpec, OfdmGrid, SystemKind, SystemParams,
};

/// Normalized variance of channel `k` as the literal nested sum over
/// sample pairs and channel pairs, in complex arithmetic.
pub fn nested_sum_variance(frame: &ConstellationFrame, k: usize, model: CorrelationModel) -> f64 {
    let n = frame.len();
    let nf = n as f64;
    let ak = frame.symbol(k).value();
    let term = |r: usize, m: usize| {
        let phase = 2.0 * std::f64::consts::PI * (r as f64 - k as f64) * m as f64 / nf;
        (frame.symbol(r).value() / ak * Complex64::from_polar(1.0, phase)).re
    };
    let mut total = 0.0;
    for m in 0..n {
        for q in 0..n {
            let rho = model.coefficient(n, m, q);
            for r in 0..n {
                for s in 0..n {
                    total += term(r, m) * term(s, q) * rho;
                }
            }
        }
    }
    total / (nf * nf)
}

pub fn all_frames(n: usize) -> impl Iterator<Item = ConstellationFrame> {
    (0..4u64.pow(n as u32)).map(move |code| ConstellationFrame::from_code(code, n).unwrap())
}

/// Ten-channel system with 4 MHz lasers on standard fiber at 1550 nm.
pub fn reference_system(symbol_time: f64, kind: SystemKind, length_km: f64) -> SystemParams {
    SystemParams::new(
        OfdmGrid::new(10, symbol_time, 10e9).unwrap(),
        LaserSpec::equal(4e6).unwrap(),
        FiberLink::new(16e-6, length_km * 1e3, 1550e-9).unwrap(),
        kind,
    )
}
