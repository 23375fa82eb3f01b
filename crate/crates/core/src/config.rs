//! Experiment configuration file and the two embedded presets.
//!
//! A config is one JSON document:
//!
//! ```json
//! { "name": "...", "chain": { ... }, "simulation": { ... },
//!   "analysis": { ... }, "sweep": { ... } }
//! ```
//!
//! `chain` mirrors [`ChainConfig`]; the other sections carry the Monte Carlo,
//! histogram and phase-sweep settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::optics::{
    ChainConfig, DetectorParams, DetectorRole, InterferometerParams, OpticsError, SfgParams,
    SourceParams,
};
use crate::sim::{PhaseMode, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (expected fig2-baseline or fig3-transfer)")]
    UnknownPreset(String),
}

impl From<OpticsError> for ConfigError {
    fn from(e: OpticsError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub visibility: f64,
    /// Per-click Gaussian jitter σ.
    pub jitter_ns: f64,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub phase_mode: PhaseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    pub bin_width_ns: f64,
    pub range_ns: [f64; 2],
    /// Half-width of the three peak windows; `None` means 3σ of the fitted peak.
    #[serde(default)]
    pub window_half_width_ns: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            bin_width_ns: 0.05,
            range_ns: [-3.0, 3.0],
            window_half_width_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub phase_points: usize,
    pub duration_per_point_s: f64,
    /// Longest single simulated run; longer points are split and summed.
    pub shard_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub chain: ChainConfig,
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    pub sweep: SweepSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chain.validate()?;
        self.sim_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let a = &self.analysis;
        if !(a.bin_width_ns > 0.0) || !(a.range_ns[1] > a.range_ns[0]) {
            return Err(ConfigError::Invalid(
                "analysis: bin width must be positive and range increasing".into(),
            ));
        }
        if let Some(h) = a.window_half_width_ns {
            if !(h > 0.0) {
                return Err(ConfigError::Invalid("analysis: window half-width must be positive".into()));
            }
        }
        let s = &self.sweep;
        if !(s.duration_per_point_s > 0.0) || !(s.shard_duration_s > 0.0) {
            return Err(ConfigError::Invalid("sweep: durations must be positive".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            chain: self.chain.clone(),
            visibility: self.simulation.visibility,
            jitter_ns: self.simulation.jitter_ns,
            duration_s: self.simulation.duration_s,
            seed: self.simulation.seed,
            phase_mode: self.simulation.phase_mode,
        }
    }

    pub fn sim_config_with_duration(&self, duration_s: f64) -> SimConfig {
        SimConfig {
            duration_s,
            ..self.sim_config()
        }
    }

    /// Width of the central coincidence window the analysis will use, for rate
    /// predictions: `2·min(3σ_Δt, spacing/2)` unless fixed in the config.
    pub fn expected_window_ns(&self) -> f64 {
        let half_spacing = 0.5 * self.chain.peak_spacing_ns();
        let half = match self.analysis.window_half_width_ns {
            Some(h) => h,
            None => 3.0 * std::f64::consts::SQRT_2 * self.simulation.jitter_ns,
        };
        2.0 * half.min(half_spacing)
    }
}

/// Lowercase hex SHA-256 of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Franson analysis of the source alone.
    Fig2Baseline,
    /// Same analysis after up-converting Bob's photon.
    Fig3Transfer,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Fig2Baseline, Preset::Fig3Transfer];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2Baseline => "fig2-baseline",
            Preset::Fig3Transfer => "fig3-transfer",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ConfigError::UnknownPreset(s.to_string()))
    }
}

// Pair rates solve `pair_rate_for_accidental_fraction` for the accidental
// fraction implied by the raw/net visibility ratios (1 - 87.4/97.0 and
// 1 - 86.4/96.2) with a 0.594 ns central window; see the preset tests.
const BASELINE_PAIR_RATE: f64 = 3769.0;
const TRANSFER_PAIR_RATE: f64 = 205.8;

fn source(pair_rate: f64, alice_filter_nm: f64) -> SourceParams {
    SourceParams {
        pump_wavelength_nm: 711.6,
        pump_coherence_length_m: 300.0,
        signal_wavelength_nm: 1555.0,
        idler_wavelength_nm: 1312.0,
        raw_bandwidth_nm: 15.0,
        alice_filter_bandwidth_nm: alice_filter_nm,
        pair_rate_per_s: pair_rate,
    }
}

fn analyzer(transmission: f64) -> InterferometerParams {
    InterferometerParams {
        path_imbalance_m: 0.20,
        phase_rad: 0.0,
        transmission,
    }
}

/// InGaAs APD at Alice, gated by Bob's clicks. The gate is wide enough to
/// hold the whole ±3 ns histogram range, including off-peak background.
fn ingaas_gated() -> DetectorParams {
    DetectorParams {
        quantum_efficiency: 0.14,
        dark_prob_per_ns: 1e-5,
        gate_width_ns: 6.0,
        role: DetectorRole::Gated,
    }
}

pub fn preset(which: Preset) -> ExperimentConfig {
    let analysis = AnalysisSettings::default();
    match which {
        Preset::Fig2Baseline => ExperimentConfig {
            name: which.name().into(),
            chain: ChainConfig {
                source: source(BASELINE_PAIR_RATE, 15.0),
                alice_interferometer: analyzer(0.5),
                bob_interferometer: analyzer(0.5),
                sfg: None,
                alice_detector: ingaas_gated(),
                // liquid-nitrogen cooled Ge APD
                bob_detector: DetectorParams {
                    quantum_efficiency: 0.10,
                    dark_prob_per_ns: 3e-5,
                    gate_width_ns: 2.5,
                    role: DetectorRole::FreeRunning,
                },
            },
            simulation: SimulationSettings {
                visibility: 0.97,
                jitter_ns: 0.07,
                duration_s: 100.0,
                seed: 2004,
                phase_mode: PhaseMode::Fixed,
            },
            analysis,
            sweep: SweepSettings {
                phase_points: 21,
                duration_per_point_s: 900.0,
                shard_duration_s: 100.0,
            },
        },
        Preset::Fig3Transfer => ExperimentConfig {
            name: which.name().into(),
            chain: ChainConfig {
                source: source(TRANSFER_PAIR_RATE, 1.5),
                alice_interferometer: analyzer(0.5),
                // bulk interferometer plus >60% single-mode fibre coupling
                bob_interferometer: analyzer(0.5),
                sfg: Some(SfgParams {
                    efficiency_per_watt: 0.8,
                    reservoir_power_w: 0.7,
                    coupling_qubit: 0.4,
                    coupling_reservoir: 0.4,
                    input_wavelength_nm: 1312.0,
                    output_wavelength_nm: 712.4,
                    reservoir_wavelength_nm: 1560.0,
                    reservoir_coherence_length_m: 1000.0,
                    acceptance_halving_detuning_nm: 1.0,
                }),
                alice_detector: ingaas_gated(),
                // Si APD
                bob_detector: DetectorParams {
                    quantum_efficiency: 0.60,
                    dark_prob_per_ns: 5e-7,
                    gate_width_ns: 2.5,
                    role: DetectorRole::FreeRunning,
                },
            },
            simulation: SimulationSettings {
                visibility: 0.962,
                jitter_ns: 0.07,
                duration_s: 2000.0,
                seed: 2004,
                phase_mode: PhaseMode::Fixed,
            },
            analysis,
            sweep: SweepSettings {
                phase_points: 21,
                duration_per_point_s: 114_000.0,
                shard_duration_s: 1000.0,
            },
        },
    }
}
