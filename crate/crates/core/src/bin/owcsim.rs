//! Config-driven command line: single cells, grid sweeps, FOV
//! optimization, closed-loop adaptation and coverage dumps.
//!
//! Exit codes: 0 on success, 1 on configuration/validation errors, 2 on
//! runtime errors.

use clap::{Args, Parser, Subcommand};
use owcsim::adapt::{adaptive_run, optimize_fov, AdaptError, PreambleConfig};
use owcsim::config::{ConfigError, FormatConfig, Preset, RunConfig};
use owcsim::geometry::{grid_positions, incidence_angle_deg, Coverage};
use owcsim::output::{
    fmt_float, write_records, AdaptiveRecord, CoverageRecord, LookupRecord, OutputFormat, Record,
    SweepRecord,
};
use owcsim::sim::{run_frames, run_frames_traced, sweep, SimError, SweepCell};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "owcsim",
    version,
    about = "Multi-receiver coded slotted ALOHA simulator for indoor optical wireless IoT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (p_a, FOV) cell and print its metrics.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Write per-frame decode traces as newline-delimited JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate the full (p_a, FOV) grid.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Bundled experiment preset; writes one table per variant.
        #[arg(long, value_parser = ["fig4", "fig5", "fig6"])]
        preset: Option<String>,
    },
    /// Tabulate the throughput-maximizing FOV per activation probability.
    Optimize {
        #[command(flatten)]
        common: CommonOpts,
        /// Bundled experiment preset; writes one table per variant.
        #[arg(long, value_parser = ["fig4", "fig5", "fig6"])]
        preset: Option<String>,
    },
    /// Closed-loop FOV adaptation over the configured trajectory.
    Adapt {
        #[command(flatten)]
        common: CommonOpts,
        /// Estimator override: oracle or power.
        #[arg(long, value_parser = ["oracle", "power"])]
        estimator: Option<String>,
    },
    /// Dump the gain matrix and coverage geometry as CSV.
    Coverage {
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Args)]
struct CommonOpts {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override (takes precedence over OWCSIM_SEED and the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Frames-per-cell override.
    #[arg(long)]
    frames: Option<u64>,
    /// Output path override; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format override.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker threads (default: all cores); never affects results.
    #[arg(long)]
    threads: Option<usize>,
}

enum AppError {
    /// Bad inputs: unreadable/invalid config, out-of-range overrides.
    Usage(String),
    /// Failures while running or writing results.
    Runtime(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Usage(e.to_string())
    }
}

impl From<SimError> for AppError {
    fn from(e: SimError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<AdaptError> for AppError {
    fn from(e: AdaptError) -> Self {
        match e {
            AdaptError::Invalid(msg) => AppError::Usage(msg),
            other => AppError::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate { common, trace } => cmd_simulate(&common, trace.as_deref()),
        Command::Sweep { common, preset } => cmd_sweep(&common, preset.as_deref()),
        Command::Optimize { common, preset } => cmd_optimize(&common, preset.as_deref()),
        Command::Adapt { common, estimator } => cmd_adapt(&common, estimator.as_deref()),
        Command::Coverage { common } => cmd_coverage(&common),
    }
}

struct Resolved {
    config: RunConfig,
    seed: u64,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn resolve(common: &CommonOpts) -> Result<Resolved, AppError> {
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AppError::Runtime(format!("thread pool: {e}")))?;
    }
    let mut config = RunConfig::load(&common.config)?;
    if let Some(frames) = common.frames {
        config.sweep.frames = frames;
    }
    let mut seed = config.sweep.seed;
    if let Ok(env_seed) = std::env::var("OWCSIM_SEED") {
        seed = env_seed.trim().parse().map_err(|_| {
            AppError::Usage(format!(
                "OWCSIM_SEED must be a 64-bit unsigned integer, got {env_seed:?}"
            ))
        })?;
    }
    if let Some(s) = common.seed {
        seed = s;
    }
    config.sweep.seed = seed;
    config.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.path.clone().map(PathBuf::from));
    let format = match common.format.as_deref() {
        Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => return Err(AppError::Usage(format!("unknown format {other:?}"))),
        None => match config.output.format {
            FormatConfig::Csv => OutputFormat::Csv,
            FormatConfig::Json => OutputFormat::Json,
        },
    };
    Ok(Resolved { config, seed, out, format })
}

fn write_to<R: Record>(
    out: &Option<PathBuf>,
    format: OutputFormat,
    records: &[R],
) -> Result<(), AppError> {
    let io_err = |e: std::io::Error| AppError::Runtime(format!("writing output: {e}"));
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| AppError::Runtime(format!("creating {}: {e}", path.display())))?;
            let mut writer = BufWriter::new(file);
            write_records(&mut writer, format, records).map_err(io_err)?;
            writer.flush().map_err(io_err)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_records(&mut lock, format, records).map_err(io_err)
        }
    }
}

/// `results.csv` + `ap3` -> `results_ap3.csv`.
fn variant_path(base: &Path, variant: &str) -> PathBuf {
    let stem = base.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{variant}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{variant}"),
    };
    base.with_file_name(name)
}

fn cmd_simulate(common: &CommonOpts, trace: Option<&Path>) -> Result<(), AppError> {
    let r = resolve(common)?;
    let cfg = &r.config;
    if cfg.protocol.pa_list.len() != 1 {
        return Err(AppError::Usage(format!(
            "simulate needs exactly one entry in protocol.pa_list, got {}",
            cfg.protocol.pa_list.len()
        )));
    }
    let scenario = cfg.scenario.to_scenario();
    let degrees = cfg.protocol.degree_distribution()?;
    let pa = cfg.protocol.pa_list[0];
    let fov = cfg.scenario.fov_deg;
    let slots = cfg.protocol.slots_per_frame;

    let metrics = match trace {
        Some(path) => {
            let coverage = Coverage::from_scenario(&scenario)
                .map_err(|e| AppError::Runtime(e.to_string()))?;
            let file = File::create(path)
                .map_err(|e| AppError::Runtime(format!("creating {}: {e}", path.display())))?;
            let mut writer = BufWriter::new(file);
            let metrics = run_frames_traced(
                &coverage,
                pa,
                &degrees,
                slots,
                cfg.sweep.frames,
                r.seed,
                |frame, result| {
                    for (iteration, devices) in result.rounds.iter().enumerate() {
                        let line = serde_json::json!({
                            "frame": frame,
                            "iteration": iteration + 1,
                            "devices": devices,
                        });
                        let _ = writeln!(writer, "{line}");
                    }
                },
            )?;
            writer
                .flush()
                .map_err(|e| AppError::Runtime(format!("writing trace: {e}")))?;
            metrics
        }
        None => run_frames(&scenario, pa, fov, &degrees, slots, cfg.sweep.frames, r.seed)?,
    };

    println!(
        "pa = {}  fov = {} deg  p_rec = {} +/- {}{}  r_avg = {} +/- {}  frames = {}",
        fmt_float(pa),
        fmt_float(fov),
        fmt_float(metrics.p_rec),
        fmt_float(metrics.p_rec_se),
        if metrics.zero_weight() { " (zero weight)" } else { "" },
        fmt_float(metrics.r_avg),
        fmt_float(metrics.r_avg_se),
        metrics.frames,
    );
    let record = SweepRecord {
        cell: SweepCell { activation_probability: pa, fov_deg: fov, metrics },
        seed: r.seed,
    };
    write_to(&r.out, r.format, &[record])
}

fn sweep_records(cfg: &RunConfig, seed: u64) -> Result<Vec<SweepRecord>, AppError> {
    let scenario = cfg.scenario.to_scenario();
    let degrees = cfg.protocol.degree_distribution()?;
    let cells = sweep(
        &scenario,
        &cfg.protocol.pa_list,
        &cfg.sweep.fov_deg_list,
        &degrees,
        cfg.protocol.slots_per_frame,
        cfg.sweep.frames,
        seed,
    )?;
    Ok(cells.into_iter().map(|cell| SweepRecord { cell, seed }).collect())
}

fn expand_preset(
    preset: Option<&str>,
    r: &Resolved,
) -> Result<Option<Vec<(String, RunConfig)>>, AppError> {
    let Some(name) = preset else { return Ok(None) };
    let preset = Preset::from_name(name)
        .ok_or_else(|| AppError::Usage(format!("unknown preset {name:?}")))?;
    if r.out.is_none() {
        return Err(AppError::Usage(
            "presets write one table per variant; set --out or output.path".into(),
        ));
    }
    Ok(Some(preset.variants(&r.config)))
}

fn cmd_sweep(common: &CommonOpts, preset: Option<&str>) -> Result<(), AppError> {
    let r = resolve(common)?;
    match expand_preset(preset, &r)? {
        None => {
            let records = sweep_records(&r.config, r.seed)?;
            write_to(&r.out, r.format, &records)
        }
        Some(variants) => {
            let base = r.out.as_deref().expect("checked in expand_preset");
            for (variant, cfg) in variants {
                let records = sweep_records(&cfg, r.seed)?;
                let path = variant_path(base, &variant);
                write_to(&Some(path), r.format, &records)?;
            }
            Ok(())
        }
    }
}

fn optimize_records(cfg: &RunConfig, seed: u64) -> Result<Vec<LookupRecord>, AppError> {
    let scenario = cfg.scenario.to_scenario();
    let degrees = cfg.protocol.degree_distribution()?;
    let table = optimize_fov(
        &scenario,
        &cfg.protocol.pa_list,
        &cfg.sweep.fov_deg_list,
        &degrees,
        cfg.protocol.slots_per_frame,
        cfg.sweep.frames,
        seed,
    )?;
    Ok(table.entries().iter().map(|&e| LookupRecord(e)).collect())
}

fn cmd_optimize(common: &CommonOpts, preset: Option<&str>) -> Result<(), AppError> {
    let r = resolve(common)?;
    match expand_preset(preset, &r)? {
        None => {
            let records = optimize_records(&r.config, r.seed)?;
            write_to(&r.out, r.format, &records)
        }
        Some(variants) => {
            let base = r.out.as_deref().expect("checked in expand_preset");
            for (variant, cfg) in variants {
                let records = optimize_records(&cfg, r.seed)?;
                let path = variant_path(base, &variant);
                write_to(&Some(path), r.format, &records)?;
            }
            Ok(())
        }
    }
}

fn cmd_adapt(common: &CommonOpts, estimator: Option<&str>) -> Result<(), AppError> {
    let r = resolve(common)?;
    let cfg = &r.config;
    let trajectory = cfg.protocol.pa_trajectory.clone().ok_or_else(|| {
        AppError::Usage("adapt needs protocol.pa_trajectory in the config".into())
    })?;
    let scenario = cfg.scenario.to_scenario();
    let degrees = cfg.protocol.degree_distribution()?;
    let estimator = match estimator {
        Some("oracle") => owcsim::adapt::EstimatorKind::Oracle,
        Some("power") => owcsim::adapt::EstimatorKind::Power,
        Some(other) => return Err(AppError::Usage(format!("unknown estimator {other:?}"))),
        None => cfg.adapt.estimator.into(),
    };
    let lookup = optimize_fov(
        &scenario,
        &cfg.protocol.pa_list,
        &cfg.sweep.fov_deg_list,
        &degrees,
        cfg.protocol.slots_per_frame,
        cfg.sweep.frames,
        r.seed,
    )?;
    let preamble = PreambleConfig {
        noise_std_w: cfg.adapt.preamble_noise_std_w,
        fixed_fov_deg: cfg.adapt.preamble_fov_deg,
    };
    let frames = adaptive_run(
        &scenario,
        &trajectory,
        &lookup,
        estimator,
        &degrees,
        cfg.protocol.slots_per_frame,
        r.seed,
        &preamble,
    )?;
    let slots_total = scenario.receiver_count() * cfg.protocol.slots_per_frame;
    let records: Vec<AdaptiveRecord> = frames
        .into_iter()
        .map(|record| AdaptiveRecord { record, slots_total })
        .collect();
    write_to(&r.out, r.format, &records)
}

fn cmd_coverage(common: &CommonOpts) -> Result<(), AppError> {
    let r = resolve(common)?;
    let scenario = r.config.scenario.to_scenario();
    let (tx_pos, rx_pos) =
        grid_positions(&scenario).map_err(|e| AppError::Usage(e.to_string()))?;
    let coverage =
        Coverage::from_scenario(&scenario).map_err(|e| AppError::Runtime(e.to_string()))?;
    let mut records = Vec::with_capacity(tx_pos.len() * rx_pos.len());
    for (i, tx) in tx_pos.iter().enumerate() {
        for (j, rx) in rx_pos.iter().enumerate() {
            records.push(CoverageRecord {
                tx_index: i,
                rx_index: j,
                gain: coverage.gains().get(i, j),
                incidence_deg: incidence_angle_deg(*tx, *rx)
                    .map_err(|e| AppError::Runtime(e.to_string()))?,
            });
        }
    }
    write_to(&r.out, r.format, &records)
}
