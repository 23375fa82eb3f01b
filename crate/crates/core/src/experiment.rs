//! Whole-experiment pipelines: a phase sweep producing a fringe fit, and a
//! single long histogram run. Both simulate in shards and only keep the
//! summed histograms, so memory stays bounded for long integrations.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    build_histogram, count_window, estimate_accidentals, fit_fringe, locate_peaks,
    AnalysisError, CoincidenceHistogram, FringeFit, FringePoint, PeakWindows,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::sim::{simulate, DetectorId, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// SplitMix64 finalizer over `seed + index`; used to give every phase point
/// and shard its own seed from the single run seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` phase offsets evenly spaced over one period, starting at 0.
pub fn even_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Counts accumulated over one or more shards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardedRun {
    pub histogram: CoincidenceHistogram,
    pub alice_clicks: u64,
    pub bob_clicks: u64,
    pub duration_s: f64,
    pub shard_seeds: Vec<u64>,
}

/// Simulate `duration_s` seconds as consecutive shards of at most
/// `shard_s` seconds, histogramming each and summing.
pub fn run_sharded(
    cfg: &ExperimentConfig,
    sim: &SimConfig,
    duration_s: f64,
) -> Result<ShardedRun, ExperimentError> {
    let a = &cfg.analysis;
    let range = (a.range_ns[0], a.range_ns[1]);
    let mut run = ShardedRun {
        histogram: CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, a.bin_width_ns, range)?,
        alice_clicks: 0,
        bob_clicks: 0,
        duration_s: 0.0,
        shard_seeds: Vec::new(),
    };
    let shard_s = cfg.sweep.shard_duration_s;
    let shards = (duration_s / shard_s).ceil().max(1.0) as u64;
    for j in 0..shards {
        let len = (duration_s - j as f64 * shard_s).min(shard_s);
        if len <= 0.0 {
            break;
        }
        let seed = derive_seed(sim.seed, j);
        let shard = SimConfig {
            duration_s: len,
            seed,
            ..sim.clone()
        };
        let events = simulate(&shard)?;
        let h = build_histogram(&events, DetectorId::Bob, DetectorId::Alice, a.bin_width_ns, range)?;
        run.histogram.add(&h)?;
        run.alice_clicks += events.events.iter().filter(|e| e.detector == DetectorId::Alice).count() as u64;
        run.bob_clicks += events.events.iter().filter(|e| e.detector == DetectorId::Bob).count() as u64;
        run.duration_s += len;
        run.shard_seeds.push(seed);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub points: Vec<FringePoint>,
    pub point_seeds: Vec<u64>,
    /// All phase points summed; the peak windows are located on this.
    pub histogram: CoincidenceHistogram,
    pub windows: PeakWindows,
    /// Accidental coincidences per second in the central window.
    pub accidentals_per_s: f64,
    pub fit: FringeFit,
    pub alice_clicks: u64,
    pub bob_clicks: u64,
    pub total_duration_s: f64,
}

impl SweepOutput {
    pub fn bob_singles_per_s(&self) -> f64 {
        self.bob_clicks as f64 / self.total_duration_s
    }

    pub fn alice_clicks_per_s(&self) -> f64 {
        self.alice_clicks as f64 / self.total_duration_s
    }

    pub fn mean_coincidences_per_point(&self) -> f64 {
        self.points.iter().map(|p| p.coincidences).sum::<f64>() / self.points.len() as f64
    }
}

/// Sweep Bob's analyzer phase through `offsets` (added to the configured
/// phase), integrating `duration_per_point_s` at each setting, then locate
/// the peaks on the summed histogram, estimate accidentals from its
/// background and fit the central-window fringe.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    offsets: &[f64],
    duration_per_point_s: f64,
) -> Result<SweepOutput, ExperimentError> {
    cfg.validate()?;
    if offsets.len() < 5 {
        return Err(AnalysisError::InsufficientData(format!("{} phase points", offsets.len())).into());
    }
    let base = cfg.sim_config_with_duration(duration_per_point_s);
    let mut runs = Vec::with_capacity(offsets.len());
    let mut seeds = Vec::with_capacity(offsets.len());
    for (k, offset) in offsets.iter().enumerate() {
        let mut sim = base.clone();
        sim.chain.bob_interferometer.phase_rad += offset;
        sim.seed = derive_seed(cfg.simulation.seed, k as u64);
        seeds.push(sim.seed);
        runs.push(run_sharded(cfg, &sim, duration_per_point_s)?);
    }

    let mut total = runs[0].histogram.clone();
    for r in &runs[1..] {
        total.add(&r.histogram)?;
    }
    let windows = locate_peaks(&total, cfg.chain.peak_spacing_ns(), cfg.analysis.window_half_width_ns)?;
    let total_duration_s: f64 = runs.iter().map(|r| r.duration_s).sum();
    let accidentals_per_s = estimate_accidentals(&total, &windows)? / total_duration_s;

    let phase_a = cfg.chain.alice_interferometer.phase_rad;
    let phase_b = cfg.chain.bob_interferometer.phase_rad;
    let mut points = Vec::with_capacity(runs.len());
    for (r, offset) in runs.iter().zip(offsets) {
        points.push(FringePoint {
            combined_phase_rad: phase_a + phase_b + offset,
            coincidences: count_window(&r.histogram, &windows.central)? as f64,
            duration_s: r.duration_s,
        });
    }
    let fit = fit_fringe(&points, accidentals_per_s)?;

    Ok(SweepOutput {
        points,
        point_seeds: seeds,
        histogram: total,
        windows,
        accidentals_per_s,
        fit,
        alice_clicks: runs.iter().map(|r| r.alice_clicks).sum(),
        bob_clicks: runs.iter().map(|r| r.bob_clicks).sum(),
        total_duration_s,
    })
}

/// Sweep with the configured number of evenly spaced points and duration.
pub fn run_default_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, ExperimentError> {
    run_sweep(cfg, &even_phases(cfg.sweep.phase_points), cfg.sweep.duration_per_point_s)
}

/// One histogram integration of `duration_s` at the configured phases.
pub fn run_histogram(cfg: &ExperimentConfig, duration_s: f64) -> Result<ShardedRun, ExperimentError> {
    cfg.validate()?;
    let sim = cfg.sim_config_with_duration(duration_s);
    run_sharded(cfg, &sim, duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Preset};

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(2004, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(derive_seed(2004, 7), s[7]);
        assert_ne!(derive_seed(2005, 0), s[0]);
    }

    #[test]
    fn shards_cover_the_duration() {
        let mut cfg = preset(Preset::Fig2Baseline);
        cfg.sweep.shard_duration_s = 0.3;
        let r = run_histogram(&cfg, 1.0).unwrap();
        assert_eq!(r.shard_seeds.len(), 4);
        assert!((r.duration_s - 1.0).abs() < 1e-12);
        assert!(r.bob_clicks > 20_000);
    }

    #[test]
    fn short_sweep_runs() {
        let mut cfg = preset(Preset::Fig2Baseline);
        cfg.sweep.shard_duration_s = 20.0;
        let out = run_sweep(&cfg, &even_phases(7), 40.0).unwrap();
        assert_eq!(out.points.len(), 7);
        assert!(out.fit.v_net > 0.8, "{:?}", out.fit);
        assert!(out.fit.v_raw <= out.fit.v_net);
        assert!(run_sweep(&cfg, &even_phases(4), 1.0).is_err());
    }
}
