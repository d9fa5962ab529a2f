// SPDX-License-Identifier: Apache-2.0

//! `smtl`: synthesize, map and evaluate threshold-logic designs on
//! spin-memristor arrays.
//!
//! Exit codes: 0 success, 1 bad input, 2 equivalence failure, 3 capacity
//! infeasible, 4 mismatch with ideal devices, 5 timing violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use thiserror::Error;

use smtl::artifact::{
    ArtifactError, EvaluationReport, MappedArtifact, TlnArtifact, REPORT_FORMAT,
};
use smtl::devices::{
    default_k_w, write_csv, write_statistics, DeviceParams, WriteConfig, DEFAULT_PARAMS_JSON,
};
use smtl::evaluator::{
    baseline_ratios, design_partition, figures, partition_rows, sigma_grid, simulate_mapped,
    sweep, sweep_csv, variation_tolerance, Baseline, EvalError, ProgrammedDesign, SweepParam,
};
use smtl::mapper::{map_tln, MapConfig, MapError};
use smtl::partition::{interconnect_stats, partition_csv};
use smtl::vectors::{VectorMode, DEFAULT_SAMPLE_COUNT};
use smtl::{parse_bench, synthesize_tln, verify_equivalence, PackedVectors, SynthesisConfig};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("equivalence check failed: {0}")]
    Equivalence(String),
    #[error("capacity infeasible: {0}")]
    Capacity(MapError),
    #[error("{0} vectors disagree with the reference netlist under ideal devices")]
    Mismatch(usize),
    #[error("{0}")]
    Timing(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Equivalence(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Timing(_) => 5,
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Map(m) => m.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::CapacityInfeasible { .. }
            | MapError::BlocksExceeded { .. }
            | MapError::RowsExceeded { .. } => CliError::Capacity(e),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "smtl", version, about = "Threshold-logic synthesis and spin-memristor array mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a .bench netlist into a threshold network.
    Synth(SynthArgs),
    /// Stage, buffer and place a threshold network.
    Map(MapArgs),
    /// Simulate a mapped design and estimate power, delay and area.
    Evaluate(EvaluateArgs),
    /// Evaluate a mapped design over a parameter grid.
    Sweep(SweepArgs),
    /// Monte-Carlo statistics of the feedback write loop.
    WriteSim(WriteSimArgs),
}

#[derive(Args)]
struct ParamsArg {
    /// Device parameter JSON; the built-in defaults when absent.
    #[arg(long, env = "SMTL_PARAMS")]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long, default_value_t = 4)]
    fanin: usize,
    #[arg(long, default_value_t = 6)]
    wmax: i32,
    /// Sampled vectors for the equivalence check above 20 inputs.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    vectors: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    tln: PathBuf,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_LEVELS_PER_STAGE)]
    levels_per_stage: usize,
    /// Blocks per stage; unbounded when absent.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_COLS)]
    cols: usize,
    /// Sub-array size as ROWSxCOLS; overrides --rows and --cols.
    #[arg(long, value_parser = parse_dims)]
    subarray: Option<(usize, usize)>,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_FANOUT_MAX)]
    fanout_max: usize,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_MIN_FILL)]
    min_fill: f64,
    #[arg(long, default_value_t = smtl::mapper::DEFAULT_BACKWARD_MAX)]
    backward_max: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    mapped: PathBuf,
    #[command(flatten)]
    params: ParamsArg,
    /// Relative conductance standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    vectors: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comparison band half-width (A); 0 is an ideal sign compare.
    #[arg(long, default_value_t = 0.0)]
    i_threshold_eff: f64,
    /// Drive current for the timing check (A); the source current by default.
    #[arg(long)]
    drive: Option<f64>,
    /// Also search the variation tolerance.
    #[arg(long)]
    tolerance: bool,
    #[arg(long, default_value_t = 5)]
    tolerance_seeds: u64,
    /// Sigma grid as START:STOP:STEP.
    #[arg(long, default_value = "0.005:0.3:0.005", value_parser = parse_range)]
    sigma_grid: (f64, f64, f64),
    /// Reference energy (J) for ratio reporting.
    #[arg(long, requires = "baseline_delay")]
    baseline_energy: Option<f64>,
    /// Reference latency (s) for ratio reporting.
    #[arg(long, requires = "baseline_energy")]
    baseline_delay: Option<f64>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    mapped: PathBuf,
    #[command(flatten)]
    params: ParamsArg,
    /// dv (mV), ith (µA), k, or subarray (columns).
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated grid values.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    drive: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct WriteSimArgs {
    #[command(flatten)]
    params: ParamsArg,
    /// Comparator resolutions; `inf` for an ideal comparator.
    #[arg(long, default_value = "8")]
    bits: String,
    /// Programming currents (A).
    #[arg(long, default_value = "10e-6")]
    i_prog: String,
    /// Time limits (s).
    #[arg(long, default_value = "2e-6")]
    t_max: String,
    #[arg(long, default_value_t = 0.5e-3)]
    offset_sigma: f64,
    #[arg(long, default_value_t = 0.1e-9)]
    dt: f64,
    #[arg(long, default_value_t = 1e-9)]
    response_delay: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(r)?, parse(c)?))
}

fn parse_range(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] if c > 0.0 && a >= 0.0 && b >= a => Ok((a, b, c)),
        _ => Err(format!("expected START:STOP:STEP with 0 <= START <= STOP, STEP > 0, got `{s}`")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::Input(format!("bad {what} value `{v}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Input(format!("empty {what} list")));
    }
    Ok(items)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, so a failed
/// run never leaves a partial file behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

fn load_params(arg: &ParamsArg) -> Result<DeviceParams, CliError> {
    let text = match &arg.params {
        Some(p) => read(p)?,
        None => DEFAULT_PARAMS_JSON.to_string(),
    };
    DeviceParams::from_json(&text).map_err(|e| CliError::Input(e.to_string()))
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let net = parse_bench(&read(&a.bench)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.bench.display())))?;
    let config = SynthesisConfig {
        fanin_limit: a.fanin,
        w_max: a.wmax,
    };
    let (tln, stats) = synthesize_tln(&net, config).map_err(|e| CliError::Input(e.to_string()))?;
    let mode = VectorMode::auto(net.inputs().len(), a.vectors, a.seed);
    let eq = verify_equivalence(&net, &tln, mode).map_err(|e| CliError::Input(e.to_string()))?;
    if !eq.passed {
        return Err(CliError::Equivalence(format!("{:?}", eq.counterexample)));
    }
    println!(
        "nodes: {} ({} before collapse)\nlevels: {}\nmax fan-in: {}\nequivalence: passed on {} vectors ({:?})",
        tln.nodes.len(),
        stats.nodes_before_collapse,
        tln.depth(),
        tln.max_fanin(),
        eq.vectors,
        eq.mode
    );
    write_atomic(&a.output, &to_json(&TlnArtifact::new(net, tln)))
}

fn cmd_map(a: MapArgs) -> Result<(), CliError> {
    let tln = TlnArtifact::from_json(&read(&a.tln)?)?;
    let (rows, cols) = a.subarray.unwrap_or((a.rows, a.cols));
    let config = MapConfig {
        levels_per_stage: a.levels_per_stage,
        blocks: a.blocks,
        rows,
        cols,
        fanout_max: a.fanout_max,
        min_fill: a.min_fill,
        backward_max: a.backward_max,
        ..MapConfig::default()
    };
    let design = map_tln(&tln.network, config)?;
    print!("{}", design.summary());
    println!("buffers: {}", design.buffer_count());
    write_atomic(&a.output, &to_json(&MappedArtifact::new(tln, design)))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let mapped = MappedArtifact::from_json(&read(&a.mapped)?)?;
    let params = load_params(&a.params)?;
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Input(format!("sigma must be non-negative, got {}", a.sigma)));
    }
    let design = &mapped.design;
    let prog = ProgrammedDesign::new(design, &params)?;
    let n = design.inputs.len();
    let vectors = PackedVectors::generate(n, VectorMode::covering(n, a.vectors, a.seed));
    let nominal = simulate_mapped(&prog, &mapped.source, &vectors, 0.0, a.seed, a.i_threshold_eff)?;
    let variation =
        simulate_mapped(&prog, &mapped.source, &vectors, a.sigma, a.seed, a.i_threshold_eff)?;
    let tolerance = if a.tolerance {
        let seeds: Vec<u64> = (a.seed..a.seed + a.tolerance_seeds).collect();
        let (lo, hi, step) = a.sigma_grid;
        Some(variation_tolerance(
            &prog,
            &mapped.source,
            a.vectors,
            &seeds,
            &sigma_grid(lo, hi, step),
            a.i_threshold_eff,
        )?)
    } else {
        None
    };
    let partition = design_partition(design)?;
    let fig = figures(design, &partition, &params, a.drive);
    let baseline = match (a.baseline_energy, a.baseline_delay) {
        (Some(energy), Some(delay)) => Some(baseline_ratios(&fig, Baseline { energy, delay })),
        _ => None,
    };
    let report = EvaluationReport {
        format: REPORT_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: a.seed,
        sigma: a.sigma,
        i_threshold_eff: a.i_threshold_eff,
        params,
        nominal,
        variation,
        tolerance,
        figures: fig,
        interconnect: interconnect_stats(&partition.links),
        baseline,
    };
    write_atomic(&a.report, &to_json(&report))?;

    println!(
        "errors: {} of {} vectors at sigma {} ({} at sigma 0)",
        report.variation.errors, report.variation.vectors, a.sigma, report.nominal.errors
    );
    if let Some(t) = &report.tolerance {
        println!("variation tolerance: {}", t.sigma_star);
    }
    println!(
        "power: {:.4e} W (mca {:.4e}, detect {:.4e}, interconnect {:.4e})",
        fig.power.p_total, fig.power.p_mca, fig.power.p_det, fig.power.p_interconnect
    );
    println!(
        "latency: {:.4e} s over {} stages, energy {:.4e} J, EDP {:.4e} J*s, area {:.4e} m^2",
        fig.delay.latency, fig.delay.pipeline_depth, fig.energy, fig.edp, fig.area
    );
    if let Some(b) = &report.baseline {
        println!(
            "vs baseline: energy x{:.3}, delay x{:.3}, EDP x{:.3}",
            b.energy_ratio, b.delay_ratio, b.edp_ratio
        );
    }
    if report.nominal.errors > 0 {
        return Err(CliError::Mismatch(report.nominal.errors));
    }
    if !fig.delay.timing_ok {
        return Err(CliError::Timing(match fig.delay.switch_time {
            Some(t) => format!(
                "timing violation: {} switching events of {t:.3e} s do not fit in a {:.3e} s period",
                fig.delay.levels_per_period, fig.delay.clock_period
            ),
            None => format!(
                "timing violation: drive {:.3e} A cannot switch the threshold device",
                fig.delay.drive_current
            ),
        }));
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = parse_list(&a.grid, "grid")?;
    let mapped = MappedArtifact::from_json(&read(&a.mapped)?)?;
    let params = load_params(&a.params)?;
    let rows = sweep(&mapped.network, &mapped.design, &params, a.param, &grid, a.drive)?;
    let csv = match a.param {
        SweepParam::Subarray => partition_csv(&partition_rows(&rows)),
        _ => sweep_csv(a.param, &rows),
    };
    write_atomic(&a.output, &csv)?;
    info!("{} grid points written to {}", rows.len(), a.output.display());
    Ok(())
}

fn parse_bits(s: &str) -> Result<Option<u32>, String> {
    if s.eq_ignore_ascii_case("inf") {
        Ok(None)
    } else {
        s.parse::<u32>().map(Some).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy)]
struct Bits(Option<u32>);

impl std::str::FromStr for Bits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bits(s).map(Bits)
    }
}

fn cmd_write_sim(a: WriteSimArgs) -> Result<(), CliError> {
    let bits: Vec<Bits> = parse_list(&a.bits, "bits")?;
    let currents: Vec<f64> = parse_list(&a.i_prog, "i-prog")?;
    let limits: Vec<f64> = parse_list(&a.t_max, "t-max")?;
    let params = load_params(&a.params)?;
    let mut rows = Vec::new();
    for &Bits(b) in &bits {
        for &i_prog in &currents {
            for &t_max in &limits {
                let config = WriteConfig {
                    i_prog,
                    comparator_bits: b,
                    comparator_offset_sigma: a.offset_sigma,
                    dt: a.dt,
                    t_max,
                    response_delay: a.response_delay,
                    k_w: default_k_w(&params),
                };
                let s = write_statistics(&config, &params, a.trials, a.seed)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                println!(
                    "bits {:>3}  I {:.2e} A  t_max {:.2e} s  mean error {:.4e}  p95 {:.4e}  timeouts {}",
                    b.map_or_else(|| "inf".to_string(), |b| b.to_string()),
                    i_prog,
                    t_max,
                    s.mean_error,
                    s.p95_error,
                    s.timeouts
                );
                rows.push(s);
            }
        }
    }
    write_atomic(&a.output, &write_csv(&rows))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Map(a) => cmd_map(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::WriteSim(a) => cmd_write_sim(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
