//! Exhaustive and sampled search over QPSK frame configurations.
//!
//! Every case is a `(frame, k)` pair, so an exhaustive search over N channels
//! visits `N·4^N` cases. Because the normalized variance only depends on
//! symbol ratios, the exhaustive search can visit one frame per global
//! rotation class instead and count it four times. The class representative
//! is the member whose most significant digit is zero, i.e. codes below
//! `4^(N−1)`, which is also the smallest code in its class; this keeps the
//! lexicographic tie-break identical to the unreduced enumeration.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{ConstellationFrame, MAX_CODE_CHANNELS};
use crate::noise::CorrelationModel;
use crate::variance::VarianceEvaluator;

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 12;

/// Largest N whose `4^N` frame count fits a `u64`.
const MAX_EXHAUSTIVE_CHANNELS: usize = 31;
/// Frames (or samples) per unit of parallel work.
const CHUNK: u64 = 4096;
/// Values within this distance below a bin edge are counted in the upper bin,
/// so round-off on exact edge values such as 1.0 cannot split a bin.
const EDGE_SLACK: f64 = 1e-9;

/// Maps a unit index to `(frame code, multiplicity)`.
type CaseSource = dyn Fn(u64) -> (u64, u64) + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    /// `count` uniformly drawn frames, each evaluated for every k.
    RandomSample {
        count: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub n_channels: usize,
    pub model: CorrelationModel,
    pub mode: SearchMode,
    pub bin_width: f64,
    pub exhaustive_cap: usize,
    /// Evaluate one frame per rotation class in exhaustive mode.
    pub use_symmetry: bool,
}

impl SearchSpec {
    pub fn exhaustive(n_channels: usize, model: CorrelationModel) -> Self {
        Self {
            n_channels,
            model,
            mode: SearchMode::Exhaustive,
            bin_width: DEFAULT_BIN_WIDTH,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            use_symmetry: true,
        }
    }

    pub fn random(n_channels: usize, model: CorrelationModel, count: u64, seed: u64) -> Self {
        Self {
            mode: SearchMode::RandomSample { count, seed },
            ..Self::exhaustive(n_channels, model)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.n_channels > MAX_CODE_CHANNELS {
            return Err(Error::RangeViolation("n_channels".into()));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::InvalidBinWidth(self.bin_width));
        }
        if self.mode == SearchMode::Exhaustive {
            let cap = self.exhaustive_cap.min(MAX_EXHAUSTIVE_CHANNELS);
            if self.n_channels > cap {
                return Err(Error::CapExceeded {
                    n: self.n_channels,
                    cap,
                });
            }
        }
        Ok(())
    }
}

/// Argmax case of a search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCase {
    pub frame_code: u64,
    pub n_channels: usize,
    pub k: usize,
    pub v: f64,
}

#[derive(Serialize)]
struct WorstCaseJson {
    frame: String,
    k: usize,
    v: f64,
}

impl WorstCase {
    pub fn frame(&self) -> ConstellationFrame {
        ConstellationFrame::from_code(self.frame_code, self.n_channels)
            .expect("search codes fit their channel count")
    }

    /// `{"frame": <base-4 string>, "k": .., "v": ..}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&WorstCaseJson {
            frame: self.frame().to_string(),
            k: self.k,
            v: self.v,
        })
        .expect("plain struct serializes")
    }

    /// Larger v wins; equal v goes to the smaller `(frame_code, k)`.
    fn beats(&self, other: &WorstCase) -> bool {
        self.v > other.v
            || (self.v == other.v && (self.frame_code, self.k) < (other.frame_code, other.k))
    }
}

fn better(a: Option<WorstCase>, b: Option<WorstCase>) -> Option<WorstCase> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.beats(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_width: f64,
    counts: BTreeMap<u64, u64>,
    min_bins: u64,
}

impl Histogram {
    fn new(bin_width: f64, span: f64) -> Self {
        Self {
            bin_width,
            counts: BTreeMap::new(),
            min_bins: (span / bin_width - EDGE_SLACK).ceil().max(1.0) as u64,
        }
    }

    fn bin_of(&self, v: f64) -> u64 {
        let x = (v / self.bin_width + EDGE_SLACK).floor();
        if x > 0.0 {
            x as u64
        } else {
            0
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Dense `(lower edge, count)` list from 0 up to the last occupied bin,
    /// covering at least `[0, N]`.
    pub fn bins(&self) -> Vec<(f64, u64)> {
        let last = self.counts.keys().next_back().map_or(0, |&b| b + 1);
        (0..last.max(self.min_bins))
            .map(|b| {
                (
                    b as f64 * self.bin_width,
                    self.counts.get(&b).copied().unwrap_or(0),
                )
            })
            .collect()
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Number of cases in bins whose lower edge is at or above `threshold`.
    /// Exact when `threshold` is a multiple of the bin width.
    pub fn count_from(&self, threshold: f64) -> u64 {
        let first = self.bin_of(threshold.max(0.0));
        let first = if (first as f64) * self.bin_width < threshold - EDGE_SLACK * self.bin_width {
            first + 1
        } else {
            first
        };
        self.counts.range(first..).map(|(_, c)| c).sum()
    }

    fn merge(&mut self, other: Histogram) {
        for (b, c) in other.counts {
            *self.counts.entry(b).or_insert(0) += c;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub worst: WorstCase,
    pub histogram: Histogram,
    pub total_cases: u64,
}

impl SearchResult {
    /// Fraction of cases whose value lies at or above `threshold`
    /// (see [`Histogram::count_from`]).
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        self.histogram.count_from(threshold) as f64 / self.total_cases as f64
    }
}

struct Tally {
    histogram: Histogram,
    worst: Option<WorstCase>,
    total: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.histogram.merge(other.histogram);
        self.worst = better(self.worst, other.worst);
        self.total += other.total;
        self
    }
}

fn decode(code: u64, symbols: &mut [u8]) {
    for (i, s) in symbols.iter_mut().enumerate() {
        *s = ((code >> (2 * i)) & 3) as u8;
    }
}

fn frame_count(n: usize) -> u64 {
    1u64 << (2 * n)
}

pub fn search(spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    let n = spec.n_channels;
    let eval = VarianceEvaluator::new(n, spec.model);
    let empty = || Histogram::new(spec.bin_width, n as f64);

    // Evaluates all k of one frame code into a tally with the given weight.
    let visit =
        |tally: &mut Tally, code: u64, weight: u64, symbols: &mut [u8], scratch: &mut [f64]| {
            decode(code, symbols);
            for k in 0..n {
                let v = eval.variance_with(symbols, k, scratch);
                let bin = tally.histogram.bin_of(v);
                *tally.histogram.counts.entry(bin).or_insert(0) += weight;
                tally.total += weight;
                let case = WorstCase {
                    frame_code: code,
                    n_channels: n,
                    k,
                    v,
                };
                tally.worst = better(tally.worst, Some(case));
            }
        };

    let (units, draw): (u64, Box<CaseSource>) = match spec.mode {
        SearchMode::Exhaustive => {
            if spec.use_symmetry {
                (frame_count(n - 1), Box::new(|code| (code, 4)))
            } else {
                (frame_count(n), Box::new(|code| (code, 1)))
            }
        }
        SearchMode::RandomSample { count, seed } => {
            let base = ChaCha8Rng::seed_from_u64(seed);
            (
                count,
                Box::new(move |i| {
                    let mut rng = base.clone();
                    rng.set_stream(i);
                    let code = if n == MAX_CODE_CHANNELS {
                        rng.gen::<u64>()
                    } else {
                        rng.gen_range(0..frame_count(n))
                    };
                    (code, 1)
                }),
            )
        }
    };

    let chunks = units.div_ceil(CHUNK);
    let partials: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut tally = Tally {
                histogram: empty(),
                worst: None,
                total: 0,
            };
            let mut symbols = vec![0u8; n];
            let mut scratch = vec![0.0; n];
            let end = ((chunk + 1) * CHUNK).min(units);
            for unit in chunk * CHUNK..end {
                let (code, weight) = draw(unit);
                visit(&mut tally, code, weight, &mut symbols, &mut scratch);
            }
            tally
        })
        .collect();

    let merged = partials.into_iter().fold(
        Tally {
            histogram: empty(),
            worst: None,
            total: 0,
        },
        Tally::merge,
    );
    let worst = merged.worst.ok_or(Error::BadTrials)?;
    Ok(SearchResult {
        worst,
        histogram: merged.histogram,
        total_cases: merged.total,
    })
}

/// How `worst_case_vs_n` chooses the frames it evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSelection {
    /// Every frame, within `cap` channels.
    Exhaustive { cap: usize },
    /// Only the all-equal frame; usable for any N.
    AllEqual,
}

/// Worst normalized variance as a function of N. With `aggregate` the value
/// per frame is `Σ_k v_k`, otherwise the largest single-channel `v_k`.
pub fn worst_case_vs_n(
    n_range: &[usize],
    model: CorrelationModel,
    aggregate: bool,
    selection: FrameSelection,
) -> Result<Vec<(usize, f64)>> {
    n_range
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::RangeViolation("n_channels".into()));
            }
            let value = match selection {
                FrameSelection::AllEqual => frame_value(
                    &VarianceEvaluator::new(n, model),
                    &vec![0u8; n],
                    aggregate,
                    &mut vec![0.0; n],
                ),
                FrameSelection::Exhaustive { cap } => {
                    let cap = cap.min(MAX_EXHAUSTIVE_CHANNELS);
                    if n > cap {
                        return Err(Error::CapExceeded { n, cap });
                    }
                    exhaustive_frame_max(n, model, aggregate)
                }
            };
            Ok((n, value))
        })
        .collect()
}

fn frame_value(
    eval: &VarianceEvaluator,
    symbols: &[u8],
    aggregate: bool,
    scratch: &mut [f64],
) -> f64 {
    let values = (0..symbols.len()).map(|k| eval.variance_with(symbols, k, scratch));
    if aggregate {
        values.sum()
    } else {
        values.fold(f64::NEG_INFINITY, f64::max)
    }
}

fn exhaustive_frame_max(n: usize, model: CorrelationModel, aggregate: bool) -> f64 {
    let eval = VarianceEvaluator::new(n, model);
    let reps = frame_count(n - 1);
    (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut symbols = vec![0u8; n];
            let mut scratch = vec![0.0; n];
            let mut best = f64::NEG_INFINITY;
            for code in chunk * CHUNK..((chunk + 1) * CHUNK).min(reps) {
                decode(code, &mut symbols);
                best = best.max(frame_value(&eval, &symbols, aggregate, &mut scratch));
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_workers;

    #[test]
    fn two_channels_partial() {
        let r = search(&SearchSpec::exhaustive(2, CorrelationModel::Partial)).unwrap();
        assert_eq!(r.total_cases, 32);
        assert!((r.worst.v - 1.0).abs() < 1e-12);
        assert_eq!(r.histogram.total(), 32);
        // Ratio 1 and −1 give 1.0, ±j give 0.85355: half the cases each.
        let bins = r.histogram.bins();
        let at = |lo: f64| bins.iter().find(|(l, _)| (l - lo).abs() < 1e-9).unwrap().1;
        assert_eq!(at(0.85), 16);
        assert_eq!(at(1.0), 16);
    }

    #[test]
    fn full_correlation_occupies_one_bin() {
        let r = search(&SearchSpec::exhaustive(2, CorrelationModel::Full)).unwrap();
        assert_eq!(r.histogram.occupied_bins(), 1);
        assert!((r.worst.v - 1.0).abs() < 1e-12);
        let r4 = search(&SearchSpec::exhaustive(4, CorrelationModel::Full)).unwrap();
        assert_eq!(r4.histogram.occupied_bins(), 1);
    }

    #[test]
    fn five_channels_case_count() {
        for model in CorrelationModel::ALL {
            let r = search(&SearchSpec::exhaustive(5, model)).unwrap();
            assert_eq!(r.total_cases, 5120);
            assert_eq!(r.histogram.total(), 5120);
        }
    }

    #[test]
    fn symmetry_reduction_is_exact() {
        for n in 1..=4 {
            for model in CorrelationModel::ALL {
                let mut spec = SearchSpec::exhaustive(n, model);
                let reduced = search(&spec).unwrap();
                spec.use_symmetry = false;
                let full = search(&spec).unwrap();
                assert_eq!(reduced, full, "n={n} {model}");
                assert_eq!(full.total_cases, n as u64 * 4u64.pow(n as u32));
            }
        }
    }

    #[test]
    fn cap_and_validation_errors() {
        let spec = SearchSpec::exhaustive(13, CorrelationModel::Partial);
        assert_eq!(search(&spec), Err(Error::CapExceeded { n: 13, cap: 12 }));
        let mut bad = SearchSpec::exhaustive(3, CorrelationModel::Partial);
        bad.bin_width = 0.0;
        assert_eq!(search(&bad), Err(Error::InvalidBinWidth(0.0)));
        assert!(search(&SearchSpec::exhaustive(0, CorrelationModel::Full)).is_err());
    }

    #[test]
    fn random_sampling_is_deterministic_across_pools() {
        let spec = SearchSpec::random(16, CorrelationModel::Partial, 10_000, 7);
        let a = with_workers(1, || search(&spec).unwrap());
        let b = with_workers(4, || search(&spec).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.total_cases, 160_000);
        let other = search(&SearchSpec::random(
            16,
            CorrelationModel::Partial,
            10_000,
            8,
        ))
        .unwrap();
        assert_ne!(a.histogram, other.histogram);
    }

    #[test]
    fn exhaustive_is_independent_of_pool_size() {
        let spec = SearchSpec::exhaustive(7, CorrelationModel::Partial);
        let a = with_workers(1, || search(&spec).unwrap());
        let b = with_workers(3, || search(&spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn cyclic_relabeling_preserves_histogram() {
        // Shifting the frame cyclically together with k maps (frame, k) cases
        // onto each other, so the per-k histogram of shifted frames matches.
        let n = 4;
        let eval = VarianceEvaluator::new(n, CorrelationModel::Partial);
        let mut scratch = vec![0.0; n];
        let mut plain = Vec::new();
        let mut shifted = Vec::new();
        for code in 0..frame_count(n) {
            let mut s = vec![0u8; n];
            decode(code, &mut s);
            let mut t = s.clone();
            t.rotate_right(1);
            for k in 0..n {
                plain.push(eval.variance_with(&s, k, &mut scratch));
                shifted.push(eval.variance_with(&t, (k + 1) % n, &mut scratch));
            }
        }
        let bin = |v: &f64| (v / DEFAULT_BIN_WIDTH + EDGE_SLACK).floor() as i64;
        let mut a: Vec<i64> = plain.iter().map(bin).collect();
        let mut b: Vec<i64> = shifted.iter().map(bin).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn worst_case_table() {
        let agg = worst_case_vs_n(
            &(2..=9).collect::<Vec<_>>(),
            CorrelationModel::Partial,
            true,
            FrameSelection::AllEqual,
        )
        .unwrap();
        for (n, v) in agg {
            assert!((v - n as f64).abs() < 1e-9);
        }
        for aggregate in [false, true] {
            let one = worst_case_vs_n(
                &[1],
                CorrelationModel::Partial,
                aggregate,
                FrameSelection::Exhaustive { cap: 12 },
            )
            .unwrap();
            assert!((one[0].1 - 1.0).abs() < 1e-12);
        }
        let full = worst_case_vs_n(
            &[2, 3, 4, 5],
            CorrelationModel::Full,
            false,
            FrameSelection::Exhaustive { cap: 12 },
        )
        .unwrap();
        for (_, v) in full {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(worst_case_vs_n(
            &[13],
            CorrelationModel::Full,
            false,
            FrameSelection::Exhaustive { cap: 12 }
        )
        .is_err());
    }

    #[test]
    fn worst_case_json_shape() {
        let w = WorstCase {
            frame_code: 0b11_00,
            n_channels: 3,
            k: 1,
            v: 0.5,
        };
        assert_eq!(w.to_json(), r#"{"frame":"030","k":1,"v":0.5}"#);
    }

    #[test]
    fn fraction_above_counts_upper_bins() {
        let r = search(&SearchSpec::exhaustive(2, CorrelationModel::Partial)).unwrap();
        assert_eq!(r.fraction_above(0.1), 1.0);
        assert_eq!(r.fraction_above(0.9), 0.5);
        assert_eq!(r.fraction_above(1.5), 0.0);
    }
}
