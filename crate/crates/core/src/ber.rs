//! Phase-noise BER floor, reach and linewidth fitting.
//!
//! The floor for a phase error of standard deviation σ is
//! `½·erfc(π / (4√2·σ))`.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{effective_sigma2, NoiseTerms};
use crate::system::{LaserSpec, SystemParams};

/// Upper end of the erfc inversion bracket; `erfc(40)` underflows to 0.
const ERFC_ARG_MAX: f64 = 40.0;
/// Initial upper reach bracket, in meters.
const INITIAL_REACH: f64 = 1e3;
/// Beyond this length the floor is considered never to reach the target.
const MAX_REACH: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerPoint {
    pub length: f64,
    pub sigma2: f64,
    pub ber_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachResult {
    /// Length in meters where the floor equals the target;
    /// `f64::INFINITY` when the floor never reaches it.
    pub length: f64,
    pub target: f64,
    pub bracket: (f64, f64),
}

impl ReachResult {
    pub fn is_unbounded(&self) -> bool {
        self.length.is_infinite()
    }
}

pub fn ber_floor(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    0.5 * libm::erfc(PI / (4.0 * SQRT_2 * sigma))
}

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidTarget(target))
    }
}

/// Phase standard deviation σ at which the floor equals `target`,
/// by bisection on the monotone `erfc`.
pub fn sigma_for_ber(target: f64) -> Result<f64> {
    check_target(target)?;
    let (mut lo, mut hi) = (0.0, ERFC_ARG_MAX);
    // 0.5·erfc(x) decreases from 0.5 at x = 0.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if 0.5 * libm::erfc(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(PI / (4.0 * SQRT_2 * x))
}

fn sigma2_at(params: &SystemParams, length: f64, terms: NoiseTerms) -> Result<f64> {
    Ok(effective_sigma2(&params.with_length(length)?).select(terms))
}

pub fn reach(params: &SystemParams, target_ber: f64) -> Result<ReachResult> {
    reach_with(params, target_ber, NoiseTerms::All)
}

/// Length at which the BER floor of `params` (with only `terms` kept in the
/// phase variance) reaches `target_ber`. The floor is monotone in length, so
/// bisection converges to the unique root.
pub fn reach_with(
    params: &SystemParams,
    target_ber: f64,
    terms: NoiseTerms,
) -> Result<ReachResult> {
    check_target(target_ber)?;
    let ber = |l: f64| -> Result<f64> { Ok(ber_floor(sigma2_at(params, l, terms)?.sqrt())) };

    let at_zero = ber(0.0)?;
    if at_zero > target_ber {
        return Err(Error::NoRootInBracket {
            ber_at_zero: at_zero,
            target: target_ber,
        });
    }
    let unbounded = ReachResult {
        length: f64::INFINITY,
        target: target_ber,
        bracket: (0.0, f64::INFINITY),
    };
    if at_zero == target_ber {
        return Ok(ReachResult {
            length: 0.0,
            target: target_ber,
            bracket: (0.0, 0.0),
        });
    }
    if sigma2_at(params, INITIAL_REACH, terms)? <= sigma2_at(params, 0.0, terms)? {
        // No length dependence (zero LO linewidth or zero dispersion).
        return Ok(unbounded);
    }

    let mut lo = 0.0;
    let mut hi = INITIAL_REACH;
    while ber(hi)? < target_ber {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_REACH {
            return Ok(unbounded);
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ber(mid)? < target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let length = if (ber(lo)? - target_ber).abs() <= (ber(hi)? - target_ber).abs() {
        lo
    } else {
        hi
    };
    Ok(ReachResult {
        length,
        target: target_ber,
        bracket: (lo, hi),
    })
}

/// Linewidth that places the reach of `template` exactly at `anchor_km`.
///
/// The phase variance is linear in each linewidth, so the fit is closed
/// form. With `assume_equal` both lasers share the fitted linewidth;
/// otherwise the template's Tx linewidth is kept and the LO linewidth is
/// fitted (and returned).
pub fn fit_linewidth(
    template: &SystemParams,
    anchor_km: f64,
    target_ber: f64,
    assume_equal: bool,
) -> Result<f64> {
    if !(anchor_km > 0.0 && anchor_km.is_finite()) {
        return Err(Error::NonPositiveAnchor(anchor_km));
    }
    let threshold = sigma_for_ber(target_ber)?.powi(2);
    let at_anchor = template.with_length(anchor_km * 1e3)?;
    let per_hz = |tx: f64, lo: f64| -> Result<f64> {
        Ok(effective_sigma2(&at_anchor.with_lasers(LaserSpec::new(tx, lo)?)).sigma2)
    };
    let tx_coeff = per_hz(1.0, 0.0)?;
    let lo_coeff = per_hz(0.0, 1.0)?;
    if assume_equal {
        return Ok(threshold / (tx_coeff + lo_coeff));
    }
    let remaining = threshold - tx_coeff * template.lasers.linewidth_tx();
    if lo_coeff <= 0.0 || remaining < 0.0 {
        return Err(Error::InfeasibleFit);
    }
    Ok(remaining / lo_coeff)
}

pub fn ber_sweep(template: &SystemParams, lengths: &[f64]) -> Result<Vec<BerPoint>> {
    lengths
        .iter()
        .map(|&length| {
            let sigma2 = effective_sigma2(&template.with_length(length)?).sigma2;
            Ok(BerPoint {
                length,
                sigma2,
                ber_floor: ber_floor(sigma2.sqrt()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{FiberLink, OfdmGrid, SystemKind};

    fn system(kind: SystemKind, n: usize, t: f64, dnu: f64) -> SystemParams {
        SystemParams::new(
            OfdmGrid::orthogonal(n, t).unwrap(),
            LaserSpec::equal(dnu).unwrap(),
            FiberLink::new(16.0 * 1e-6, 0.0, 1550.0 * 1e-9).unwrap(),
            kind,
        )
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn erfc_reference_values() {
        // 30-digit references (mpmath).
        let refs = [
            (0.0, 1.0),
            (0.5, 0.479500122186953462317253346108),
            (1.0, 0.157299207050285130658779364917),
            (1.6449763571331870, 0.0200000000000000037825403373562),
            (2.0, 0.00467773498104726583793074363275),
            (3.0, 0.0000220904969985854413727761295823),
            (4.5, 1.96616044154288747627916036766e-10),
            (6.0, 2.15197367124989131165933503992e-17),
        ];
        for (x, want) in refs {
            let got = libm::erfc(x);
            assert!(rel(got, want) < 1e-10, "erfc({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn floor_examples() {
        assert_eq!(ber_floor(0.0), 0.0);
        assert!(ber_floor(1e-3) < 1e-300);
        assert!((ber_floor(PI / (4.0 * SQRT_2)) - 0.0786496).abs() < 1e-6);
        assert!(rel(ber_floor(0.33763), 1e-2) < 5e-3);
    }

    #[test]
    fn floor_is_monotone_and_bounded() {
        let mut last = 0.0;
        for i in 1..200 {
            let s = i as f64 * 0.05;
            let b = ber_floor(s);
            assert!(b > last && b < 0.5);
            last = b;
        }
    }

    #[test]
    fn sigma_threshold_inverts_floor() {
        let s = sigma_for_ber(1e-2).unwrap();
        assert!((s - 0.33761).abs() < 1e-4);
        assert!(rel(ber_floor(s), 1e-2) < 1e-12);
        assert!(sigma_for_ber(0.0).is_err());
        assert!(sigma_for_ber(0.5).is_err());
    }

    #[test]
    fn reach_worked_examples() {
        let ofdm = reach(&system(SystemKind::OfdmWorstCase, 10, 1e-10, 4e6), 1e-2).unwrap();
        assert!(rel(ofdm.length, 8.0e5) < 0.05);
        assert!(
            rel(
                ber_floor(
                    effective_sigma2(
                        &system(SystemKind::OfdmWorstCase, 10, 1e-10, 4e6)
                            .with_length(ofdm.length)
                            .unwrap()
                    )
                    .sigma2
                    .sqrt()
                ),
                1e-2
            ) < 1e-6
        );
        let qpsk = reach(&system(SystemKind::SingleChannelQpsk, 10, 1e-10, 4e6), 1e-2).unwrap();
        assert!(rel(qpsk.length, 1.4e6) < 0.05);
        assert!(qpsk.bracket.1 - qpsk.bracket.0 <= 1.0);
    }

    #[test]
    fn reach_without_phase_noise_is_unbounded() {
        let r = reach(&system(SystemKind::OfdmWorstCase, 10, 1e-10, 0.0), 1e-2).unwrap();
        assert!(r.is_unbounded());
        let tx_only = system(SystemKind::OfdmWorstCase, 10, 1e-10, 0.0)
            .with_lasers(LaserSpec::new(1e6, 0.0).unwrap());
        assert!(reach(&tx_only, 1e-2).unwrap().is_unbounded());
    }

    #[test]
    fn reach_fails_when_intrinsic_noise_dominates() {
        let noisy = system(SystemKind::OfdmWorstCase, 10, 1e-8, 1e8);
        assert!(matches!(
            reach(&noisy, 1e-2),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn eepn_only_reach_scales_with_symbol_time() {
        let at = |t: f64| {
            reach_with(
                &system(SystemKind::SingleChannelQpsk, 1, t, 4e6),
                1e-2,
                NoiseTerms::EepnOnly,
            )
            .unwrap()
            .length
        };
        assert!((at(4e-12) / at(1e-11) - 0.4).abs() < 1e-6);
    }

    #[test]
    fn linewidth_fit_examples() {
        let qpsk = system(SystemKind::SingleChannelQpsk, 10, 1e-10, 1.0);
        let dnu = fit_linewidth(&qpsk, 1400.0, 1e-2, true).unwrap();
        assert!(rel(dnu, 4.03e6) < 5e-3);
        let ofdm = system(SystemKind::OfdmWorstCase, 10, 1e-10, 1.0);
        let dnu = fit_linewidth(&ofdm, 800.0, 1e-2, true).unwrap();
        assert!(rel(dnu, 3.98e6) < 5e-3);
        assert_eq!(
            fit_linewidth(&ofdm, 0.0, 1e-2, true),
            Err(Error::NonPositiveAnchor(0.0))
        );
    }

    #[test]
    fn fit_then_reach_round_trips() {
        for (kind, t, km) in [
            (SystemKind::SingleChannelQpsk, 1e-10, 1400.0),
            (SystemKind::OfdmWorstCase, 4e-11, 460.0),
        ] {
            let template = system(kind, 10, t, 1.0);
            let dnu = fit_linewidth(&template, km, 1e-2, true).unwrap();
            let fitted = template.with_lasers(LaserSpec::equal(dnu).unwrap());
            let r = reach(&fitted, 1e-2).unwrap();
            assert!(
                (r.length - km * 1e3).abs() < 1.0,
                "{} vs {}",
                r.length,
                km * 1e3
            );
        }
    }

    #[test]
    fn lo_only_fit_keeps_tx_linewidth() {
        let template = system(SystemKind::SingleChannelQpsk, 10, 1e-10, 0.0)
            .with_lasers(LaserSpec::new(2e6, 0.0).unwrap());
        let lo = fit_linewidth(&template, 1400.0, 1e-2, false).unwrap();
        let fitted = template.with_lasers(LaserSpec::new(2e6, lo).unwrap());
        assert!((reach(&fitted, 1e-2).unwrap().length - 1.4e6).abs() < 1.0);
        let hopeless = template.with_lasers(LaserSpec::new(1e12, 0.0).unwrap());
        assert_eq!(
            fit_linewidth(&hopeless, 1400.0, 1e-2, false),
            Err(Error::InfeasibleFit)
        );
    }

    #[test]
    fn sweep_examples() {
        let p = system(SystemKind::OfdmWorstCase, 10, 1e-10, 4e6);
        let pts = ber_sweep(&p, &[0.0]).unwrap();
        assert!(pts[0].ber_floor > 0.0);
        let at_800 = ber_sweep(&p, &[8e5]).unwrap()[0].ber_floor;
        assert!(rel(at_800, 1e-2) < 0.3);
        let lengths: Vec<f64> = (0..40).map(|i| i as f64 * 5e4).collect();
        let pts = ber_sweep(&p, &lengths).unwrap();
        assert!(pts.windows(2).all(|w| w[1].ber_floor >= w[0].ber_floor));
        assert!(ber_sweep(&p, &[-1.0]).is_err());
    }
}
