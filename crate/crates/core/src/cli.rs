//! Command-line front end.
//!
//! Every subcommand writes one artifact (CSV or JSON) to `--output` or
//! standard output and logs the resolved parameters to standard error.
//! Exit status is 0 on success, 1 for invalid input and 2 for failures at
//! run time; errors are reported as a single `ERROR <status>: <message>` line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::ber::{ber_sweep, fit_linewidth, reach};
use crate::config::parse_system_config;
use crate::error::Error;
use crate::frame::ConstellationFrame;
use crate::monte_carlo::{
    analytic_variance, full_demod_phase_error, sample_phases, taylor_phase_error, PhaseGenerator,
};
use crate::noise::{effective_sigma2, sigma2_intrinsic, CorrelationModel};
use crate::parallel::with_workers;
use crate::search::{
    search, worst_case_vs_n, FrameSelection, SearchMode, SearchSpec, DEFAULT_BIN_WIDTH,
    DEFAULT_EXHAUSTIVE_CAP,
};
use crate::system::SystemParams;
use crate::variance::frame_report;

const TOOL: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "ofdm-phase",
    version,
    about = "Laser phase-noise penalties in coherent optical OFDM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all random streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,

    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalized CPE+ICI variance of every channel of one frame (JSON).
    Variance(VarianceArgs),
    /// Worst case and histogram over frame configurations (CSV).
    Search(SearchArgs),
    /// Monte-Carlo check of the closed-form variance (JSON).
    Mc(McArgs),
    /// BER floor against fiber length (CSV).
    BerSweep(SweepArgs),
    /// Length at which the BER floor reaches the target (JSON).
    Reach(ReachArgs),
    /// Laser linewidth that reproduces a given reach (JSON).
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Correlation {
    Full,
    Partial,
    None,
}

impl From<Correlation> for CorrelationModel {
    fn from(c: Correlation) -> Self {
        match c {
            Correlation::Full => CorrelationModel::Full,
            Correlation::Partial => CorrelationModel::Partial,
            Correlation::None => CorrelationModel::Uncorrelated,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Generator {
    /// Gaussian samples with the selected correlation matrix.
    Rho,
    /// Overlapping Wiener increments.
    Wiener,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    /// System configuration; adds absolute variances to the report.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame as a base-4 string, channel 0 rightmost.
    #[arg(long)]
    frame: String,
    #[arg(long, value_enum, default_value_t = Correlation::Partial)]
    correlation: Correlation,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, value_enum, default_value_t = Correlation::Partial)]
    correlation: Correlation,
    /// Histogram bin width.
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bins: f64,
    /// Draw this many random frames instead of enumerating all of them.
    #[arg(long)]
    samples: Option<u64>,
    /// Largest N allowed for exhaustive enumeration.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    cap: usize,
    /// Enumerate every frame instead of one per rotation class.
    #[arg(long)]
    no_symmetry: bool,
    /// Threshold for the reported fraction of cases at or above it.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Emit worst value against N for an inclusive range such as `2-9`.
    #[arg(long, value_name = "FROM-TO")]
    vs_n: Option<String>,
    /// With --vs-n: rank frames by the sum over all received channels.
    #[arg(long)]
    aggregate: bool,
    /// With --vs-n: evaluate only the all-equal frame.
    #[arg(long)]
    all_equal: bool,
}

#[derive(Debug, Args)]
struct McArgs {
    /// System configuration supplying N and σ² (per-symbol, EEPN included).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame as a base-4 string; defaults to the all-zero frame.
    #[arg(long)]
    frame: Option<String>,
    /// Channel count when neither --config nor --frame is given.
    #[arg(long)]
    channels: Option<usize>,
    /// Received channel.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Phase variance per symbol in rad², overriding the configuration.
    #[arg(long, allow_negative_numbers = true)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Correlation::Partial)]
    correlation: Correlation,
    #[arg(long, value_enum, default_value_t = Generator::Rho)]
    generator: Generator,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated lengths in km; overrides --max-km/--step-km.
    #[arg(long, value_delimiter = ',')]
    lengths_km: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000.0)]
    max_km: f64,
    #[arg(long, default_value_t = 20.0)]
    step_km: f64,
}

#[derive(Debug, Args)]
struct ReachArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    target_ber: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Template configuration; its linewidths are ignored unless --lo-only.
    #[arg(long)]
    config: PathBuf,
    /// Reach to reproduce, in km.
    #[arg(long, allow_negative_numbers = true)]
    anchor_km: f64,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    target_ber: f64,
    /// Keep the configured Tx linewidth and fit only the LO linewidth.
    #[arg(long)]
    lo_only: bool,
}

/// Failure classes mapped to exit status.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn status(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoRootInBracket { .. } | Error::InfeasibleFit => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "ERROR 1: {}", line.trim_start_matches("error: "));
            return 1;
        }
    };
    let workers = cli.workers as usize;
    let mut log = Vec::new();
    let result = with_workers(workers, || execute(&cli, &mut log));
    let _ = stderr.write_all(&log);
    match result {
        Ok(artifact) => match emit(&cli, &artifact, stdout) {
            Ok(()) => 0,
            Err(e) => report(stderr, &Failure::Runtime(e)),
        },
        Err(f) => report(stderr, &f),
    }
}

fn report(stderr: &mut dyn Write, f: &Failure) -> i32 {
    let _ = writeln!(stderr, "ERROR {}: {}", f.status(), f.message());
    f.status()
}

fn emit(cli: &Cli, artifact: &str, stdout: &mut dyn Write) -> Result<(), String> {
    match &cli.output {
        Some(path) => std::fs::write(path, artifact)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => stdout
            .write_all(artifact.as_bytes())
            .map_err(|e| format!("cannot write output: {e}")),
    }
}

fn load_config(path: &PathBuf) -> Result<SystemParams, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_system_config(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn describe(params: &SystemParams) -> String {
    let g = &params.grid;
    format!(
        "system_kind={} channels={} symbol_time_s={:e} channel_spacing_hz={:e} \
         linewidth_tx_hz={:e} linewidth_lo_hz={:e} dispersion_s_m2={:e} length_m={:e} wavelength_m={:e}",
        params.kind,
        g.n_channels(),
        g.symbol_time(),
        g.channel_spacing(),
        params.lasers.linewidth_tx(),
        params.lasers.linewidth_lo(),
        params.fiber.dispersion(),
        params.fiber.length(),
        params.fiber.wavelength(),
    )
}

fn log_params(stderr: &mut dyn Write, params: &SystemParams) {
    let _ = writeln!(stderr, "resolved: {}", describe(params));
    if params.grid.non_orthogonal() {
        let _ = writeln!(
            stderr,
            "warning: channel spacing {:e} Hz is not 1/T = {:e} Hz; subcarriers are not orthogonal",
            params.grid.channel_spacing(),
            1.0 / params.grid.symbol_time()
        );
    }
}

fn provenance(command: &str, details: &str, seed: u64) -> String {
    format!("{TOOL} {command} {details} seed={seed}")
}

fn json_artifact(mut body: Value, prov: String) -> String {
    if let Value::Object(map) = &mut body {
        map.insert("provenance".into(), Value::String(prov));
    }
    let mut s = serde_json::to_string_pretty(&body).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Fixed-point text for histogram edges without binary noise.
fn fmt_edge(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> Result<String, Failure> {
    let seed = cli.seed;
    let _ = writeln!(stderr, "seed={seed} workers={}", cli.workers);
    match &cli.command {
        Command::Variance(a) => run_variance(a, seed, stderr),
        Command::Search(a) => run_search(a, seed, stderr),
        Command::Mc(a) => run_mc(a, seed, stderr),
        Command::BerSweep(a) => run_sweep(a, seed, stderr),
        Command::Reach(a) => run_reach(a, seed, stderr),
        Command::Fit(a) => run_fit(a, seed, stderr),
    }
}

fn run_variance(a: &VarianceArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let frame: ConstellationFrame = a.frame.parse()?;
    let model = CorrelationModel::from(a.correlation);
    let sigma2 = match &a.config {
        Some(path) => {
            let params = load_config(path)?;
            log_params(stderr, &params);
            if params.grid.n_channels() != frame.len() {
                return Err(invalid(format!(
                    "frame has {} channels, configuration has {}",
                    frame.len(),
                    params.grid.n_channels()
                )));
            }
            Some(sigma2_intrinsic(params.grid.symbol_time(), &params.lasers, &params.fiber)?.sigma2)
        }
        None => None,
    };
    let report = frame_report(&frame, model);
    let mut body = json!({
        "frame": frame.to_string(),
        "correlation": model.as_str(),
        "per_channel": report.per_channel,
        "aggregate": report.aggregate,
        "max_channel": { "k": report.max_channel.0, "v": report.max_channel.1 },
    });
    if let Some(s2) = sigma2 {
        body["sigma2_rad2"] = json!(s2);
        body["per_channel_rad2"] = json!(report
            .per_channel
            .iter()
            .map(|v| v * s2)
            .collect::<Vec<_>>());
    }
    let prov = provenance(
        "variance",
        &format!("frame={frame} correlation={model}"),
        seed,
    );
    Ok(json_artifact(body, prov))
}

fn parse_range(text: &str) -> Result<Vec<usize>, Failure> {
    let bad = || invalid(format!("--vs-n expects FROM-TO, got `{text}`"));
    let (from, to) = text.split_once('-').ok_or_else(bad)?;
    let from: usize = from.trim().parse().map_err(|_| bad())?;
    let to: usize = to.trim().parse().map_err(|_| bad())?;
    if from == 0 || to < from {
        return Err(bad());
    }
    Ok((from..=to).collect())
}

fn run_search(a: &SearchArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let model = CorrelationModel::from(a.correlation);
    if let Some(range) = &a.vs_n {
        let ns = parse_range(range)?;
        let selection = if a.all_equal {
            FrameSelection::AllEqual
        } else {
            FrameSelection::Exhaustive { cap: a.cap }
        };
        let _ = writeln!(
            stderr,
            "resolved: n={range} correlation={model} aggregate={}",
            a.aggregate
        );
        let table = worst_case_vs_n(&ns, model, a.aggregate, selection)?;
        let details = format!(
            "vs_n={range} correlation={model} aggregate={} frames={}",
            a.aggregate,
            if a.all_equal {
                "all_equal"
            } else {
                "exhaustive"
            }
        );
        let mut out = format!("# {}\nn,value\n", provenance("search", &details, seed));
        for (n, v) in table {
            let _ = writeln!(out, "{n},{v}");
        }
        return Ok(out);
    }

    let n = a
        .channels
        .ok_or_else(|| invalid("search needs --channels (or --vs-n)"))?;
    let mode = match a.samples {
        Some(count) => SearchMode::RandomSample { count, seed },
        None => SearchMode::Exhaustive,
    };
    let spec = SearchSpec {
        n_channels: n,
        model,
        mode,
        bin_width: a.bins,
        exhaustive_cap: a.cap,
        use_symmetry: !a.no_symmetry,
    };
    let mode_text = match mode {
        SearchMode::Exhaustive => "exhaustive".to_string(),
        SearchMode::RandomSample { count, .. } => format!("random samples={count}"),
    };
    let _ = writeln!(
        stderr,
        "resolved: channels={n} correlation={model} mode={mode_text} bin_width={}",
        a.bins
    );
    let result = search(&spec)?;
    let details = format!(
        "channels={n} correlation={model} mode={mode_text} bin_width={}",
        a.bins
    );
    let mut out = String::new();
    let _ = writeln!(out, "# {}", provenance("search", &details, seed));
    let _ = writeln!(out, "# worst {}", result.worst.to_json());
    let _ = writeln!(out, "# total_cases {}", result.total_cases);
    let _ = writeln!(
        out,
        "# fraction_at_or_above {} {}",
        a.threshold,
        result.fraction_above(a.threshold)
    );
    out.push_str("bin_lower,count\n");
    for (lower, count) in result.histogram.bins() {
        let _ = writeln!(out, "{},{count}", fmt_edge(lower));
    }
    Ok(out)
}

fn run_mc(a: &McArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let params = a.config.as_ref().map(load_config).transpose()?;
    if let Some(p) = &params {
        log_params(stderr, p);
    }
    let n = params
        .as_ref()
        .map(|p| p.grid.n_channels())
        .or(a.channels)
        .or_else(|| a.frame.as_ref().map(|f| f.trim().len()))
        .ok_or_else(|| invalid("mc needs --config, --channels or --frame"))?;
    let frame = match &a.frame {
        Some(f) => f.parse::<ConstellationFrame>()?,
        None => ConstellationFrame::from_indices(&vec![0; n])?,
    };
    if frame.len() != n {
        return Err(invalid(format!(
            "frame has {} channels, expected {n}",
            frame.len()
        )));
    }
    let sigma2 = match (a.sigma2, &params) {
        (Some(s), _) => s,
        (None, Some(p)) => sigma2_intrinsic(p.grid.symbol_time(), &p.lasers, &p.fiber)?.sigma2,
        (None, None) => return Err(invalid("mc needs --sigma2 or --config")),
    };
    let generator = match a.generator {
        Generator::Rho => PhaseGenerator::PaperRho(a.correlation.into()),
        Generator::Wiener => PhaseGenerator::WienerOverlap,
    };
    let _ = writeln!(
        stderr,
        "resolved: frame={frame} k={} sigma2_rad2={sigma2:e} trials={} generator={}",
        a.k,
        a.trials,
        generator.label()
    );

    let analytic = analytic_variance(&frame, a.k, generator, sigma2)?;
    let ensemble = sample_phases(n, sigma2, a.trials, generator, seed)?;
    if ensemble.clipped_mass() > 1e-12 * n as f64 {
        let _ = writeln!(
            stderr,
            "warning: correlation matrix not positive semidefinite; clipped eigenvalue mass {:e}",
            ensemble.clipped_mass()
        );
    }
    let taylor = taylor_phase_error(&frame, a.k, &ensemble)?;
    let full = full_demod_phase_error(&frame, a.k, &ensemble, None)?;
    if full.degenerate > 0 {
        let _ = writeln!(
            stderr,
            "warning: {} degenerate trials excluded",
            full.degenerate
        );
    }
    let body = json!({
        "frame": frame.to_string(),
        "k": a.k,
        "generator": generator.label(),
        "sigma2": sigma2,
        "analytic": analytic,
        "mc_taylor": taylor.variance,
        "mc_full": full.estimate.variance,
        "std_errors": { "taylor": taylor.std_error, "full": full.estimate.std_error },
        "trials": a.trials,
        "degenerate": full.degenerate,
        "clipped_mass": ensemble.clipped_mass(),
    });
    let details = format!(
        "frame={frame} k={} sigma2={sigma2:e} trials={} generator={}",
        a.k,
        a.trials,
        generator.label()
    );
    Ok(json_artifact(body, provenance("mc", &details, seed)))
}

fn run_sweep(a: &SweepArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let params = load_config(&a.config)?;
    log_params(stderr, &params);
    let lengths_km = match &a.lengths_km {
        Some(v) if !v.is_empty() => v.clone(),
        Some(_) => return Err(invalid("--lengths-km is empty")),
        None => {
            if !(a.step_km > 0.0 && a.max_km >= 0.0) {
                return Err(invalid(
                    "--step-km must be positive and --max-km non-negative",
                ));
            }
            let steps = (a.max_km / a.step_km + 1e-9).floor() as usize;
            (0..=steps).map(|i| i as f64 * a.step_km).collect()
        }
    };
    let meters: Vec<f64> = lengths_km.iter().map(|km| km * 1e3).collect();
    let points = ber_sweep(&params, &meters)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}",
        provenance("ber-sweep", &describe(&params), seed)
    );
    out.push_str("length_km,sigma2_rad2,ber_floor\n");
    for (km, p) in lengths_km.iter().zip(&points) {
        let _ = writeln!(out, "{km},{:e},{:e}", p.sigma2, p.ber_floor);
    }
    Ok(out)
}

fn anchor_json(params: &SystemParams) -> Value {
    json!({
        "system_kind": params.kind.as_str(),
        "channels": params.grid.n_channels(),
        "symbol_time_s": params.grid.symbol_time(),
        "effective_symbol_time_s": params.effective_symbol_time(),
        "linewidth_tx_hz": params.lasers.linewidth_tx(),
        "linewidth_lo_hz": params.lasers.linewidth_lo(),
        "capacity_gbit": params.capacity_gbit(),
    })
}

fn run_reach(a: &ReachArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let params = load_config(&a.config)?;
    log_params(stderr, &params);
    let r = reach(&params, a.target_ber)?;
    let (reach_km, bracket) = if r.is_unbounded() {
        (Value::Null, Value::Null)
    } else {
        (
            json!(r.length / 1e3),
            json!([r.bracket.0 / 1e3, r.bracket.1 / 1e3]),
        )
    };
    let body = json!({
        "reach_km": reach_km,
        "unbounded": r.is_unbounded(),
        "bracket_km": bracket,
        "anchor": anchor_json(&params),
        "target_ber": a.target_ber,
        "sigma2_at_zero_length": effective_sigma2(&params.with_length(0.0)?).sigma2,
    });
    let details = format!("{} target_ber={:e}", describe(&params), a.target_ber);
    Ok(json_artifact(body, provenance("reach", &details, seed)))
}

fn run_fit(a: &FitArgs, seed: u64, stderr: &mut dyn Write) -> Result<String, Failure> {
    let params = load_config(&a.config)?;
    log_params(stderr, &params);
    let linewidth = fit_linewidth(&params, a.anchor_km, a.target_ber, !a.lo_only)?;
    let mut anchor = anchor_json(&params);
    anchor["reach_km"] = json!(a.anchor_km);
    let body = json!({
        "linewidth_hz": linewidth,
        "fitted": if a.lo_only { "lo" } else { "tx_and_lo" },
        "anchor": anchor,
        "target_ber": a.target_ber,
    });
    let details = format!(
        "{} anchor_km={} target_ber={:e} lo_only={}",
        describe(&params),
        a.anchor_km,
        a.target_ber,
        a.lo_only
    );
    Ok(json_artifact(body, provenance("fit", &details, seed)))
}
