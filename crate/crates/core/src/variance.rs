//! Leading-order common-phase-error plus inter-carrier-interference variance.
//!
//! For received channel k the detected phase error is `θ = (1/N)·Σ_m c_m·ψ_m`
//! with real weights
//!
//! `c_m = Σ_r Re((a_r/a_k)·exp(j2π(r−k)m/N))`
//!
//! where the `r = k` term is the common phase error and contributes exactly
//! `+1` to every `c_m`. With sample correlation `R` the normalized variance is
//! the quadratic form `v_k = cᵀRc / N²`.
//!
//! Symbol ratios are evaluated as quarter-turn differences, so the weights
//! depend only on the ratio pattern and a global frame rotation leaves every
//! result bit-identical.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::ConstellationFrame;
use crate::noise::{correlation_matrix, CorrelationMatrix, CorrelationModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights {
    pub k: usize,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub per_channel: Vec<f64>,
    pub aggregate: f64,
    /// `(k*, v_max)`, smallest k on ties.
    pub max_channel: (usize, f64),
    #[serde(serialize_with = "serialize_model")]
    pub model: CorrelationModel,
}

fn serialize_model<S: serde::Serializer>(
    model: &CorrelationModel,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(model.as_str())
}

/// Reusable evaluator for one channel count and correlation model.
#[derive(Debug, Clone)]
pub struct VarianceEvaluator {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    correlation: CorrelationMatrix,
}

impl VarianceEvaluator {
    pub fn new(n: usize, model: CorrelationModel) -> Self {
        let (cos, sin) = (0..n).map(|t| unit_root(t, n)).unzip();
        Self {
            n,
            cos,
            sin,
            correlation: correlation_matrix(n, model),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    /// `Re(j^d · exp(j2πt/N))`.
    fn term(&self, d: u8, t: usize) -> f64 {
        match d {
            0 => self.cos[t],
            1 => -self.sin[t],
            2 => -self.cos[t],
            _ => self.sin[t],
        }
    }

    /// Writes the weights for received channel `k` of a frame given as QPSK
    /// indices. `symbols.len()` and `out.len()` must equal `n`.
    pub fn weights_into(&self, symbols: &[u8], k: usize, out: &mut [f64]) {
        let n = self.n;
        let ak = symbols[k];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, &ar) in symbols.iter().enumerate() {
                let d = (ar + 4 - ak) & 3;
                let t = ((r + n - k) % n) * m % n;
                acc += self.term(d, t);
            }
            *slot = acc;
        }
    }

    /// Normalized variance `cᵀRc / N²` for precomputed weights.
    pub fn variance_from_weights(&self, c: &[f64]) -> f64 {
        let nf = self.n as f64;
        self.correlation.quadratic_form(c) / (nf * nf)
    }

    /// Normalized variance of channel `k`, using `scratch` (length `n`) for
    /// the weights.
    pub fn variance_with(&self, symbols: &[u8], k: usize, scratch: &mut [f64]) -> f64 {
        self.weights_into(symbols, k, scratch);
        self.variance_from_weights(scratch)
    }
}

/// `(cos, sin)` of `2πt/n`, exact at quarter turns and symmetric about half
/// a turn.
fn unit_root(t: usize, n: usize) -> (f64, f64) {
    match (4 * t) % (4 * n) {
        0 => return (1.0, 0.0),
        q if q == n => return (0.0, 1.0),
        q if q == 2 * n => return (-1.0, 0.0),
        q if q == 3 * n => return (0.0, -1.0),
        _ => {}
    }
    let (s, c) = (2.0 * std::f64::consts::PI * t.min(n - t) as f64 / n as f64).sin_cos();
    if 2 * t > n {
        (c, -s)
    } else {
        (c, s)
    }
}

fn indices(frame: &ConstellationFrame) -> Vec<u8> {
    frame.symbols().iter().map(|s| s.index()).collect()
}

fn check_index(frame: &ConstellationFrame, k: usize) -> Result<()> {
    if k >= frame.len() {
        return Err(Error::IndexOutOfRange { k, n: frame.len() });
    }
    Ok(())
}

pub fn channel_weights(frame: &ConstellationFrame, k: usize) -> Result<ChannelWeights> {
    check_index(frame, k)?;
    // The weights do not depend on the correlation model.
    let eval = VarianceEvaluator::new(frame.len(), CorrelationModel::Uncorrelated);
    let mut c = vec![0.0; frame.len()];
    eval.weights_into(&indices(frame), k, &mut c);
    Ok(ChannelWeights { k, c })
}

/// Normalized variance `σ²_{k,CPE+ICI} / σ²` of received channel `k`.
pub fn channel_variance(
    frame: &ConstellationFrame,
    k: usize,
    model: CorrelationModel,
) -> Result<f64> {
    check_index(frame, k)?;
    let eval = VarianceEvaluator::new(frame.len(), model);
    let mut scratch = vec![0.0; frame.len()];
    Ok(eval.variance_with(&indices(frame), k, &mut scratch))
}

pub fn frame_report(frame: &ConstellationFrame, model: CorrelationModel) -> VarianceReport {
    let n = frame.len();
    let eval = VarianceEvaluator::new(n, model);
    let symbols = indices(frame);
    let mut scratch = vec![0.0; n];
    let per_channel: Vec<f64> = (0..n)
        .map(|k| eval.variance_with(&symbols, k, &mut scratch))
        .collect();
    let aggregate = per_channel.iter().sum();
    let max_channel =
        per_channel
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            });
    VarianceReport {
        per_channel,
        aggregate,
        max_channel,
        model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn frame(s: &[u8]) -> ConstellationFrame {
        ConstellationFrame::from_indices(s).unwrap()
    }

    fn all_frames(n: usize) -> impl Iterator<Item = ConstellationFrame> {
        (0..4u64.pow(n as u32)).map(move |code| ConstellationFrame::from_code(code, n).unwrap())
    }

    /// Weights straight from complex arithmetic.
    fn complex_weights(f: &ConstellationFrame, k: usize) -> Vec<f64> {
        let n = f.len();
        let ak = f.symbol(k).value();
        (0..n)
            .map(|m| {
                (0..n)
                    .map(|r| {
                        let phase = 2.0 * std::f64::consts::PI * (r as f64 - k as f64) * m as f64
                            / n as f64;
                        (f.symbol(r).value() / ak * Complex64::from_polar(1.0, phase)).re
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn two_channel_weights() {
        assert_eq!(
            channel_weights(&frame(&[0, 1]), 0).unwrap().c,
            vec![1.0, 1.0]
        );
        let c = channel_weights(&frame(&[0, 2]), 0).unwrap().c;
        assert!((c[0] - 0.0).abs() < 1e-15 && (c[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn all_equal_frame_concentrates_on_first_sample() {
        for n in 1..10 {
            let f = ConstellationFrame::from_code(0, n).unwrap().rotated(2);
            for k in 0..n {
                let c = channel_weights(&f, k).unwrap().c;
                assert!((c[0] - n as f64).abs() < 1e-12);
                assert!(c[1..].iter().all(|x| x.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn table_weights_match_complex_arithmetic() {
        for n in 1..=4 {
            for f in all_frames(n) {
                for k in 0..n {
                    let fast = channel_weights(&f, k).unwrap().c;
                    let slow = complex_weights(&f, k);
                    for (a, b) in fast.iter().zip(&slow) {
                        assert!((a - b).abs() < 1e-12, "{f} k={k}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn cpe_term_is_exactly_one() {
        let f = frame(&[0]);
        assert_eq!(channel_weights(&f, 0).unwrap().c, vec![1.0]);
    }

    #[test]
    fn hand_evaluated_variances() {
        let v = channel_variance(&frame(&[0, 1]), 0, CorrelationModel::Partial).unwrap();
        assert!((v - 0.8535534).abs() < 1e-6);
        for model in CorrelationModel::ALL {
            let v = channel_variance(&frame(&[0, 2]), 0, model).unwrap();
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn index_out_of_range() {
        let f = frame(&[0, 1, 2]);
        assert_eq!(
            channel_weights(&f, 3),
            Err(Error::IndexOutOfRange { k: 3, n: 3 })
        );
        assert!(channel_variance(&f, 5, CorrelationModel::Full).is_err());
    }

    #[test]
    fn frame_report_examples() {
        let r = frame_report(
            &ConstellationFrame::from_code(0, 5).unwrap(),
            CorrelationModel::Partial,
        );
        assert!((r.aggregate - 5.0).abs() < 1e-9);
        assert!(r.per_channel.iter().all(|v| (v - 1.0).abs() < 1e-9));

        let single = frame_report(&frame(&[3]), CorrelationModel::Uncorrelated);
        assert_eq!(single.per_channel, vec![1.0]);
        assert_eq!(single.aggregate, 1.0);

        let r = frame_report(&frame(&[0, 1]), CorrelationModel::Partial);
        assert!((r.per_channel[0] - 0.8535534).abs() < 1e-6);
        assert!((r.per_channel[1] - 0.8535534).abs() < 1e-6);
        assert!((r.aggregate - 1.7071068).abs() < 1e-6);
        assert_eq!(r.max_channel.0, 0);
    }

    #[test]
    fn weight_sum_and_full_correlation_identities() {
        for n in 1..=5 {
            for f in all_frames(n) {
                for k in 0..n {
                    let c = channel_weights(&f, k).unwrap().c;
                    let sum: f64 = c.iter().sum();
                    assert!((sum - n as f64).abs() <= 1e-9 * n as f64);
                    let v = channel_variance(&f, k, CorrelationModel::Full).unwrap();
                    assert!((v - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn uncorrelated_variance_is_bounded() {
        for n in 1..=5 {
            for f in all_frames(n) {
                for k in 0..n {
                    let v = channel_variance(&f, k, CorrelationModel::Uncorrelated).unwrap();
                    assert!(
                        v >= 1.0 / n as f64 - 1e-12 && v <= 1.0 + 1e-12,
                        "{f} {k} {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn global_rotation_is_bit_identical() {
        for n in 1..=4 {
            for f in all_frames(n) {
                for turn in 1..4 {
                    let g = f.rotated(turn);
                    for k in 0..n {
                        assert_eq!(channel_weights(&f, k), channel_weights(&g, k));
                    }
                    for model in CorrelationModel::ALL {
                        assert_eq!(frame_report(&f, model), frame_report(&g, model));
                    }
                }
            }
        }
    }
}
