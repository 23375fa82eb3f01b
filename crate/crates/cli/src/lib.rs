//! The `photonlink` command line: analytic budgets, phase sweeps, histogram
//! runs and a comparison report over their outputs.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error,
//! 3 physics-validity failure, 4 analysis failure (e.g. no peaks),
//! 5 statistical acceptance failure in `report`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use photonlink_core::analysis::{locate_peaks, peak_report, AnalysisError, PeakReport};
use photonlink_core::config::{config_hash, preset, ConfigError, ExperimentConfig, Preset};
use photonlink_core::experiment::{even_phases, run_histogram, run_sweep, ExperimentError};
use photonlink_core::optics::{
    expected_rates, franson_validity, reservoir_coherence_ok, sfg_transfer_probability,
    FransonValidity, RateReport, SfgBudget, ValidityCheck,
};
use photonlink_core::sim::{PhaseMode, SimError};

pub mod report;

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDITY: u8 = 3;
pub const EXIT_ANALYSIS: u8 = 4;
pub const EXIT_STATISTICS: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "photonlink", version, about = "Entangled-pair transfer simulation and Franson analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true, env = "PHOTONLINK_CONFIG", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: fig2-baseline or fig3-transfer.
    #[arg(long, global = true, env = "PHOTONLINK_PRESET")]
    pub preset: Option<String>,
    #[arg(long, global = true, env = "PHOTONLINK_SEED")]
    pub seed: Option<u64>,
    /// Integration time in seconds (per phase point for `sweep`).
    #[arg(long, global = true, env = "PHOTONLINK_DURATION")]
    pub duration: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, env = "PHOTONLINK_OUT", default_value = "photonlink-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer probability, coherence lengths, validity checks and expected rates.
    Budget,
    /// Phase sweep with fringe fit.
    Sweep {
        /// Number of evenly spaced phase settings over one period.
        #[arg(long)]
        points: Option<usize>,
        /// Explicit phase offsets in radians, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "points", allow_hyphen_values = true)]
        phases: Option<Vec<f64>>,
    },
    /// Single coincidence histogram with located peaks.
    Histogram {
        /// Draw the combined phase uniformly for every pair.
        #[arg(long)]
        phase_averaged: bool,
    },
    /// Compare earlier outputs against the reference numbers.
    Report {
        /// Output directories of earlier runs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("physics validity check failed: {0}")]
    Validity(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Statistics(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Validity(_) => EXIT_VALIDITY,
            CliError::Analysis(_) => EXIT_ANALYSIS,
            CliError::Statistics(_) => EXIT_STATISTICS,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => CliError::Config(c),
            ExperimentError::Sim(SimError::Chain(o)) => CliError::Config(o.into()),
            ExperimentError::Sim(s) => CliError::Config(ConfigError::Invalid(s.to_string())),
            ExperimentError::Analysis(a) => CliError::Analysis(a),
        }
    }
}

/// Everything needed to repeat a run: the effective configuration (with the
/// seed and duration overrides folded in), the arguments and the files written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub software_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub arguments: serde_json::Value,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
}

pub const MANIFEST: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Write through a temporary file and rename, so readers never see a
    /// half-written output.
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, contents).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        if name != MANIFEST {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("output serializes");
        s.push('\n');
        self.write(name, &s)
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &ExperimentConfig,
        arguments: serde_json::Value,
        started: Instant,
    ) -> Result<(), CliError> {
        let mut outputs = self.written.clone();
        outputs.push(MANIFEST.to_string());
        let manifest = RunManifest {
            command: command.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.simulation.seed,
            config_sha256: config_hash(cfg),
            config: cfg.clone(),
            arguments,
            outputs,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        self.write_json(MANIFEST, &manifest)
    }
}

/// Resolve `--config` / `--preset` and fold in the seed override.
pub fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name.parse::<Preset>()?),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --config PATH or --preset NAME is required".into(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checked_duration(d: Option<f64>) -> Result<Option<f64>, CliError> {
    match d {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::Usage(format!(
            "--duration must be a positive number of seconds, got {x}"
        ))),
        other => Ok(other),
    }
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    match &cli.command {
        Command::Budget => cmd_budget(&cli.common, out),
        Command::Sweep { points, phases } => cmd_sweep(&cli.common, *points, phases.as_deref(), out),
        Command::Histogram { phase_averaged } => cmd_histogram(&cli.common, *phase_averaged, out),
        Command::Report { inputs } => report::cmd_report(inputs, &cli.common.out, out),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub name: String,
    pub transfer: Option<SfgBudget>,
    pub reservoir_coherence: Option<ValidityCheck>,
    pub franson: FransonValidity,
    pub rates: RateReport,
    pub passed: bool,
}

pub fn budget(cfg: &ExperimentConfig) -> Result<BudgetReport, CliError> {
    let chain = &cfg.chain;
    let franson = franson_validity(&chain.source, &chain.alice_interferometer, &chain.bob_interferometer)
        .map_err(ConfigError::from)?;
    let transfer = chain.sfg.as_ref().map(sfg_transfer_probability);
    let reservoir = chain
        .sfg
        .as_ref()
        .map(|s| reservoir_coherence_ok(s, &chain.bob_interferometer));
    let rates = expected_rates(chain, cfg.expected_window_ns(), cfg.simulation.visibility);
    let passed = franson.passed() && reservoir.as_ref().is_none_or(|c| c.passed);
    Ok(BudgetReport {
        name: cfg.name.clone(),
        transfer,
        reservoir_coherence: reservoir,
        franson,
        rates,
        passed,
    })
}

fn line<W: Write>(out: &mut W, text: std::fmt::Arguments) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_budget<W: Write>(common: &Common, out: &mut W) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = load_config(common)?;
    let report = budget(&cfg)?;
    let mut dir = OutDir::create(&common.out)?;

    line(out, format_args!("configuration           {}", report.name))?;
    if let Some(t) = &report.transfer {
        line(out, format_args!("transfer probability    {:.5}", t.probability))?;
        if t.saturation_warning {
            line(out, format_args!("warning: transfer estimate beyond the small-signal regime"))?;
        }
    }
    let f = &report.franson;
    line(out, format_args!("single-photon coherence {:.1} um", f.single_photon_coherence_m * 1e6))?;
    line(out, format_args!("pump coherence          {} m", f.pump_coherence_m))?;
    for c in f.checks.iter().chain(report.reservoir_coherence.iter()) {
        line(out, format_args!("check {:<30} {} (margin {:.3e})", c.name, pass(c.passed), c.margin))?;
    }
    let r = &report.rates;
    line(out, format_args!("bob singles             {:.1} /s", r.bob_singles_per_s))?;
    line(out, format_args!("alice singles (gated)   {:.1} /s", r.alice_singles_per_s))?;
    line(out, format_args!("coincidence window      {:.3} ns", r.window_ns))?;
    line(out, format_args!("true coincidences       {:.4} /s", r.true_coincidences_per_s))?;
    line(out, format_args!("accidentals             {:.4} /s", r.accidental_coincidences_per_s))?;
    line(out, format_args!("accidental fraction     {:.4}", r.accidental_fraction))?;
    line(out, format_args!("predicted raw V         {:.4}", r.predicted_raw_visibility))?;

    dir.write_json("budget.json", &report)?;
    dir.write_json("config.json", &cfg)?;
    dir.finish("budget", &cfg, serde_json::json!({}), started)?;

    if !report.passed {
        let failed: Vec<&str> = f
            .checks
            .iter()
            .chain(report.reservoir_coherence.iter())
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        return Err(CliError::Validity(failed.join(", ")));
    }
    Ok(())
}

fn cmd_sweep<W: Write>(
    common: &Common,
    points: Option<usize>,
    phases: Option<&[f64]>,
    out: &mut W,
) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(common)?;
    if let Some(d) = checked_duration(common.duration)? {
        cfg.sweep.duration_per_point_s = d;
    }
    if let Some(n) = points {
        cfg.sweep.phase_points = n;
    }
    let offsets = match phases {
        Some(p) => p.to_vec(),
        None => even_phases(cfg.sweep.phase_points),
    };
    if offsets.len() < 5 {
        return Err(CliError::Usage(format!("a sweep needs at least 5 phase points, got {}", offsets.len())));
    }
    let sweep = run_sweep(&cfg, &offsets, cfg.sweep.duration_per_point_s)?;
    let fit = &sweep.fit;

    let mut dir = OutDir::create(&common.out)?;
    dir.write("fringe.csv", &photonlink_core::analysis::fringe_csv(&sweep.points))?;
    dir.write_json("fit.json", fit)?;
    dir.write("fit.txt", &fit.to_key_value())?;
    dir.write("histogram.csv", &sweep.histogram.to_csv())?;
    dir.write_json(
        "windows.json",
        &serde_json::json!({
            "windows": sweep.windows,
            "accidentals_per_s": sweep.accidentals_per_s,
            "alice_clicks": sweep.alice_clicks,
            "bob_clicks": sweep.bob_clicks,
            "total_duration_s": sweep.total_duration_s,
            "point_seeds": sweep.point_seeds,
        }),
    )?;
    dir.write_json("config.json", &cfg)?;
    let args = serde_json::json!({ "phases": offsets, "duration_per_point_s": cfg.sweep.duration_per_point_s });
    dir.finish("sweep", &cfg, args, started)?;

    line(out, format_args!("points                  {}", sweep.points.len()))?;
    line(out, format_args!("mean coincidences/point {:.0}", sweep.mean_coincidences_per_point()))?;
    line(out, format_args!("accidentals             {:.5} /s", sweep.accidentals_per_s))?;
    line(out, format_args!("v_raw                   {:.4} +- {:.4}", fit.v_raw, fit.v_raw_err))?;
    line(out, format_args!("v_net                   {:.4} +- {:.4}", fit.v_net, fit.v_net_err))?;
    line(out, format_args!("phase offset            {:.4} rad", fit.phase_offset_rad))?;
    line(out, format_args!("reduced chi2            {:.3}", fit.reduced_chi2))?;
    Ok(())
}

/// Histogram run summary written to `peaks.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub total_coincidences: u64,
    pub duration_s: f64,
    pub phase_averaged: bool,
    pub peaks: PeakReport,
}

fn cmd_histogram<W: Write>(common: &Common, phase_averaged: bool, out: &mut W) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(common)?;
    if let Some(d) = checked_duration(common.duration)? {
        cfg.simulation.duration_s = d;
    }
    if phase_averaged {
        cfg.simulation.phase_mode = PhaseMode::UniformPerPair;
    }
    let run = run_histogram(&cfg, cfg.simulation.duration_s)?;
    let mut dir = OutDir::create(&common.out)?;
    dir.write("histogram.csv", &run.histogram.to_csv())?;
    dir.write_json("config.json", &cfg)?;
    let args = serde_json::json!({ "phase_averaged": phase_averaged, "duration_s": cfg.simulation.duration_s });

    let located = locate_peaks(&run.histogram, cfg.chain.peak_spacing_ns(), cfg.analysis.window_half_width_ns)
        .and_then(|w| peak_report(&run.histogram, w));
    let peaks = match located {
        Ok(p) => p,
        Err(e) => {
            dir.finish("histogram", &cfg, args, started)?;
            return Err(e.into());
        }
    };
    let summary = HistogramSummary {
        total_coincidences: run.histogram.total(),
        duration_s: run.duration_s,
        phase_averaged: cfg.simulation.phase_mode == PhaseMode::UniformPerPair,
        peaks,
    };
    dir.write_json("peaks.json", &summary)?;
    dir.finish("histogram", &cfg, args, started)?;

    let p = &summary.peaks;
    let w = &p.windows;
    line(out, format_args!("histogram entries       {}", summary.total_coincidences))?;
    for (name, win, n) in [
        ("early", &w.side_early, p.side_early_counts),
        ("central", &w.central, p.central_counts),
        ("late", &w.side_late, p.side_late_counts),
    ] {
        line(out, format_args!(
            "peak {name:<8} [{:+.3}, {:+.3}] ns  {n}",
            win.lo_ns, win.hi_ns
        ))?;
    }
    line(out, format_args!("accidentals/window      {:.2}", p.accidentals))?;
    line(out, format_args!("central/side ratio      {:.4}", p.central_to_side_ratio))?;
    Ok(())
}
