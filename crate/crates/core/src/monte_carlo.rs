//! Monte-Carlo oracle for the closed-form phase-error variance.
//!
//! Phase samples are drawn per trial from a ChaCha stream selected by the
//! trial index, so an ensemble depends only on `(seed, n, sigma2, trials,
//! generator)` and never on how trials are spread over workers.
//!
//! Two estimators use the same samples:
//! - the leading-order estimate `θ = (1/N)·Σ_m c_m ψ_m`, and
//! - a full IFFT-multiplex / DFT-demultiplex chain with the phase applied
//!   multiplicatively at each of the N time samples, `θ = arg(a'_k / a_k)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::ConstellationFrame;
use crate::noise::{correlation_matrix, CorrelationModel};
use crate::variance::channel_weights;

/// Below this, a demodulated symbol is treated as lost.
const DEGENERATE_MAGNITUDE: f64 = 1e-12;
/// Trials per unit of parallel work in reductions.
const CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseGenerator {
    /// Gaussian rows with covariance `σ²·R` for the given correlation model.
    PaperRho(CorrelationModel),
    /// Sums of N overlapping increments out of 2N − 1, each of variance
    /// `σ²/N`; covariance `σ²·(1 − |p − q|/N)`.
    WienerOverlap,
}

impl PhaseGenerator {
    pub fn label(&self) -> String {
        match self {
            PhaseGenerator::PaperRho(m) => format!("rho-{}", m.as_str()),
            PhaseGenerator::WienerOverlap => "wiener-overlap".into(),
        }
    }
}

/// Closed-form leading-order variance `σ²·cᵀRc/N²` for the covariance the
/// generator targets.
pub fn analytic_variance(
    frame: &ConstellationFrame,
    k: usize,
    generator: PhaseGenerator,
    sigma2: f64,
) -> Result<f64> {
    let n = frame.len();
    let c = channel_weights(frame, k)?.c;
    let nf = n as f64;
    let form = match generator {
        PhaseGenerator::PaperRho(model) => correlation_matrix(n, model).quadratic_form(&c),
        PhaseGenerator::WienerOverlap => {
            let mut total = 0.0;
            for p in 0..n {
                for q in 0..n {
                    total += c[p] * c[q] * (1.0 - p.abs_diff(q) as f64 / nf);
                }
            }
            total
        }
    };
    Ok(sigma2 * form / (nf * nf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEnsemble {
    trials: usize,
    n: usize,
    psi: Vec<f64>,
    generator: PhaseGenerator,
    clipped_mass: f64,
}

impl PhaseEnsemble {
    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> PhaseGenerator {
        self.generator
    }

    /// Phase samples `ψ_0 … ψ_{N−1}` of one trial.
    pub fn row(&self, trial: usize) -> &[f64] {
        &self.psi[trial * self.n..(trial + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psi
    }

    /// Sum of the negative eigenvalues of `R` that were clipped to zero
    /// before factorization (zero for a positive semidefinite `R`).
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Sample covariance `(1/trials)·Σ ψ_p ψ_q` about the known zero mean.
    pub fn sample_covariance(&self, p: usize, q: usize) -> f64 {
        let sum: f64 = (0..self.trials)
            .map(|t| {
                let row = self.row(t);
                row[p] * row[q]
            })
            .sum();
        sum / self.trials as f64
    }
}

/// Symmetric square-root factor `V·diag(√λ⁺)` of `R`, with negative
/// eigenvalues clipped to zero. Returns the row-major factor and the clipped mass.
fn psd_factor(n: usize, model: CorrelationModel) -> (Vec<f64>, f64) {
    let r = correlation_matrix(n, model);
    let eigen = SymmetricEigen::new(DMatrix::from_row_slice(n, n, r.as_slice()));
    let mut clipped = 0.0;
    let scales: Vec<f64> = eigen
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clipped -= l;
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    let mut factor = vec![0.0; n * n];
    for p in 0..n {
        for j in 0..n {
            factor[p * n + j] = eigen.eigenvectors[(p, j)] * scales[j];
        }
    }
    (factor, clipped)
}

fn trial_rng(base: &ChaCha8Rng, trial: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(trial as u64);
    rng
}

pub fn sample_phases(
    n: usize,
    sigma2: f64,
    trials: usize,
    generator: PhaseGenerator,
    seed: u64,
) -> Result<PhaseEnsemble> {
    if trials < 1 {
        return Err(Error::BadTrials);
    }
    if n < 1 {
        return Err(Error::RangeViolation("n_channels".into()));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::RangeViolation("sigma2".into()));
    }
    let sigma = sigma2.sqrt();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = vec![0.0; trials * n];
    let mut clipped_mass = 0.0;

    match generator {
        PhaseGenerator::PaperRho(model) => {
            let (factor, clipped) = psd_factor(n, model);
            clipped_mass = clipped;
            psi.par_chunks_mut(n).enumerate().for_each(|(t, row)| {
                let mut rng = trial_rng(&base, t);
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for (p, out) in row.iter_mut().enumerate() {
                    let f = &factor[p * n..(p + 1) * n];
                    *out = sigma * f.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                }
            });
        }
        PhaseGenerator::WienerOverlap => {
            let step = (sigma2 / n as f64).sqrt();
            psi.par_chunks_mut(n).enumerate().for_each(|(t, row)| {
                let mut rng = trial_rng(&base, t);
                let inc: Vec<f64> = (0..2 * n - 1)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        step * z
                    })
                    .collect();
                // Running window sum over increments m..m+N−1.
                let mut window: f64 = inc[..n].iter().sum();
                row[0] = window;
                for m in 1..n {
                    window += inc[m + n - 1] - inc[m - 1];
                    row[m] = window;
                }
            });
        }
    }

    Ok(PhaseEnsemble {
        trials,
        n,
        psi,
        generator,
        clipped_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Sample variance in rad².
    pub variance: f64,
    /// Standard error of `variance`.
    pub std_error: f64,
    pub trials: usize,
}

impl McEstimate {
    /// Two-pass central moments over fixed-size chunks, merged in order.
    fn from_samples(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                variance: 0.0,
                std_error: 0.0,
                trials: 0,
            };
        }
        let nf = count as f64;
        let mean = chunked_sum(values, |x| x) / nf;
        let m2 = chunked_sum(values, |x| (x - mean).powi(2)) / nf;
        let m4 = chunked_sum(values, |x| (x - mean).powi(4)) / nf;
        let variance = if count > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
        let std_error = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
        Self {
            variance,
            std_error,
            trials: count,
        }
    }
}

fn chunked_sum(values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = values
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&x| f(x)).sum())
        .collect();
    partials.iter().sum()
}

fn check_dims(frame: &ConstellationFrame, k: usize, ensemble: &PhaseEnsemble) -> Result<()> {
    if ensemble.n != frame.len() {
        return Err(Error::DimensionMismatch {
            ensemble: ensemble.n,
            frame: frame.len(),
        });
    }
    if k >= frame.len() {
        return Err(Error::IndexOutOfRange { k, n: frame.len() });
    }
    Ok(())
}

/// Variance of the leading-order phase error `(1/N)·Σ_m c_m ψ_m`.
pub fn taylor_phase_error(
    frame: &ConstellationFrame,
    k: usize,
    ensemble: &PhaseEnsemble,
) -> Result<McEstimate> {
    check_dims(frame, k, ensemble)?;
    let n = frame.len();
    let c = channel_weights(frame, k)?.c;
    let theta: Vec<f64> = (0..ensemble.trials)
        .into_par_iter()
        .map(|t| {
            let row = ensemble.row(t);
            c.iter().zip(row).map(|(w, p)| w * p).sum::<f64>() / n as f64
        })
        .collect();
    Ok(McEstimate::from_samples(&theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullDemodEstimate {
    pub estimate: McEstimate,
    /// Trials dropped because `|a'_k|` underflowed.
    pub degenerate: usize,
}

/// Variance of `arg(a'_k / a_k)` through the full multiplex/demultiplex
/// chain. `amplitudes`, when given, scales each channel's symbol before
/// multiplexing (length N); the default is unit amplitude everywhere.
pub fn full_demod_phase_error(
    frame: &ConstellationFrame,
    k: usize,
    ensemble: &PhaseEnsemble,
    amplitudes: Option<&[f64]>,
) -> Result<FullDemodEstimate> {
    check_dims(frame, k, ensemble)?;
    let n = frame.len();
    if let Some(a) = amplitudes {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                ensemble: a.len(),
                frame: n,
            });
        }
        if a.iter().any(|x| !x.is_finite()) || a[k] == 0.0 {
            return Err(Error::RangeViolation("amplitudes".into()));
        }
    }
    let symbols: Vec<Complex64> = frame
        .symbols()
        .iter()
        .enumerate()
        .map(|(r, s)| s.value() * amplitudes.map_or(1.0, |a| a[r]))
        .collect();
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let twiddle = |e: usize| Complex64::from_polar(1.0, step * (e % n) as f64);

    // Time samples x_m = Σ_r a_r e^{j2πrm/N}, then the demodulation kernel
    // g_m = x_m e^{−j2πkm/N} / N so that a'_k = Σ_m g_m e^{jψ_m}.
    let kernel: Vec<Complex64> = (0..n)
        .map(|m| {
            let x: Complex64 = symbols
                .iter()
                .enumerate()
                .map(|(r, a)| a * twiddle(r * m))
                .sum();
            x * twiddle(k * m).conj() / n as f64
        })
        .collect();
    let ak = symbols[k];

    let theta: Vec<Option<f64>> = (0..ensemble.trials)
        .into_par_iter()
        .map(|t| {
            let row = ensemble.row(t);
            let demod: Complex64 = kernel
                .iter()
                .zip(row)
                .map(|(g, &psi)| g * Complex64::from_polar(1.0, psi))
                .sum();
            if demod.norm() < DEGENERATE_MAGNITUDE {
                None
            } else {
                Some((demod / ak).arg())
            }
        })
        .collect();
    let kept: Vec<f64> = theta.iter().flatten().copied().collect();
    Ok(FullDemodEstimate {
        estimate: McEstimate::from_samples(&kept),
        degenerate: theta.len() - kept.len(),
    })
}
