//! Browser demo backend. Three operations, each available as a plain Rust
//! function and as a `wasm_bindgen` export returning JSON
//! (`{"ok": ...}` or `{"error": "..."}`) for the page in `www/`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use photonlink_core::analysis::{
    fidelity_from_visibility, locate_peaks, peak_report, FringeFit, PeakReport,
};
use photonlink_core::config::{preset, ExperimentConfig, Preset};
use photonlink_core::experiment::{even_phases, run_histogram, run_sweep};
use photonlink_core::quantum::{
    evolve_transfer, make_entangled_input, post_select_transfer, transfer_fidelity, BinLabel,
    CouplingPair, Mode,
};
use photonlink_core::sim::PhaseMode;
use photonlink_core::Complex64;

const CURVE_POINTS: usize = 65;

#[derive(Debug, Clone, Serialize)]
pub struct TransferView {
    pub probability: f64,
    pub fidelity: f64,
    /// Conditional populations of the two transferred time bins.
    pub bin_weights: [f64; 2],
    /// Fidelity against phase mismatch over one period, at the chosen magnitudes.
    pub mismatch_rad: Vec<f64>,
    pub fidelity_curve: Vec<f64>,
}

/// `weight1` is `|c1|²`; the couplings are `g1 = m1` and `g2 = m2·e^{iδ}`.
pub fn explore_transfer(weight1: f64, m1: f64, m2: f64, mismatch_rad: f64) -> Result<TransferView, String> {
    if !(0.0..=1.0).contains(&weight1) {
        return Err(format!("|c1|² = {weight1} outside [0, 1]"));
    }
    if !(m1 >= 0.0 && m2 >= 0.0) {
        return Err("coupling magnitudes must be non-negative".into());
    }
    let c1 = Complex64::new(weight1.sqrt(), 0.0);
    let c2 = Complex64::new((1.0 - weight1).sqrt(), 0.0);
    let input = make_entangled_input(c1, c2).map_err(|e| e.to_string())?;
    let run = |delta: f64| {
        let pair = CouplingPair::new(Complex64::new(m1, 0.0), Complex64::from_polar(m2, delta));
        post_select_transfer(&evolve_transfer(&input, &pair)).map_err(|e| e.to_string())
    };

    let outcome = run(mismatch_rad)?;
    let fidelity = transfer_fidelity(&outcome, c1, c2).map_err(|e| e.to_string())?;
    let st = &outcome.conditional_state;
    let weight = |b: BinLabel| st.amplitude(b, Mode::Vacuum, Mode::Photon(b)).norm_sqr();

    let mismatch: Vec<f64> = (0..CURVE_POINTS).map(|k| TAU * k as f64 / (CURVE_POINTS - 1) as f64).collect();
    let mut curve = Vec::with_capacity(CURVE_POINTS);
    for &d in &mismatch {
        let o = run(d)?;
        curve.push(transfer_fidelity(&o, c1, c2).map_err(|e| e.to_string())?);
    }
    Ok(TransferView {
        probability: outcome.probability,
        fidelity,
        bin_weights: [weight(BinLabel::Bin1), weight(BinLabel::Bin2)],
        mismatch_rad: mismatch,
        fidelity_curve: curve,
    })
}

fn load_preset(name: &str) -> Result<ExperimentConfig, String> {
    name.parse::<Preset>().map(preset).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepView {
    pub phase_rad: Vec<f64>,
    /// Central-window coincidences per second at each phase.
    pub rate_per_s: Vec<f64>,
    pub rate_err_per_s: Vec<f64>,
    pub fit: FringeFit,
    pub fidelity: f64,
    pub model_phase_rad: Vec<f64>,
    pub model_rate_per_s: Vec<f64>,
}

/// Simulated phase sweep. `dark_scale` multiplies both detectors' dark-count
/// probabilities.
pub fn fringe_sweep(
    preset_name: &str,
    visibility: f64,
    dark_scale: f64,
    points: usize,
    duration_per_point_s: f64,
    seed: u64,
) -> Result<SweepView, String> {
    let mut cfg = load_preset(preset_name)?;
    if dark_scale.is_nan() || dark_scale < 0.0 {
        return Err("dark-count scale must be non-negative".into());
    }
    cfg.simulation.visibility = visibility;
    cfg.simulation.seed = seed;
    cfg.chain.alice_detector.dark_prob_per_ns *= dark_scale;
    cfg.chain.bob_detector.dark_prob_per_ns *= dark_scale;
    let out = run_sweep(&cfg, &even_phases(points), duration_per_point_s).map_err(|e| e.to_string())?;
    let fit = out.fit;
    let fidelity = fidelity_from_visibility(fit.v_net).map_err(|e| e.to_string())?;
    let model_phase: Vec<f64> = (0..=120).map(|k| TAU * k as f64 / 120.0).collect();
    let model = model_phase
        .iter()
        .map(|p| fit.mean_level * (1.0 + fit.v_raw * (p - fit.phase_offset_rad).cos()))
        .collect();
    Ok(SweepView {
        phase_rad: out.points.iter().map(|p| p.combined_phase_rad).collect(),
        rate_per_s: out.points.iter().map(|p| p.coincidences / p.duration_s).collect(),
        rate_err_per_s: out.points.iter().map(|p| p.coincidences.sqrt() / p.duration_s).collect(),
        fit,
        fidelity,
        model_phase_rad: model_phase,
        model_rate_per_s: model,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramView {
    pub bin_center_ns: Vec<f64>,
    pub counts: Vec<u64>,
    /// Absent when the three peaks cannot be found.
    pub peaks: Option<PeakReport>,
    pub peak_error: Option<String>,
}

/// Coincidence histogram at combined phase `phase_rad`, or with the phase
/// drawn per pair when `phase_averaged` is set.
pub fn coincidence_histogram(
    preset_name: &str,
    phase_averaged: bool,
    phase_rad: f64,
    duration_s: f64,
    seed: u64,
) -> Result<HistogramView, String> {
    let mut cfg = load_preset(preset_name)?;
    cfg.simulation.seed = seed;
    cfg.chain.bob_interferometer.phase_rad = phase_rad - cfg.chain.alice_interferometer.phase_rad;
    if phase_averaged {
        cfg.simulation.phase_mode = PhaseMode::UniformPerPair;
    }
    let run = run_histogram(&cfg, duration_s).map_err(|e| e.to_string())?;
    let h = &run.histogram;
    let located = locate_peaks(h, cfg.chain.peak_spacing_ns(), cfg.analysis.window_half_width_ns)
        .and_then(|w| peak_report(h, w));
    let (peaks, peak_error) = match located {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(HistogramView {
        bin_center_ns: (0..h.counts.len()).map(|i| h.bin_center(i)).collect(),
        counts: h.counts.clone(),
        peaks,
        peak_error,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::json!({ "ok": v }).to_string(),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = exploreTransfer)]
pub fn explore_transfer_js(weight1: f64, m1: f64, m2: f64, mismatch_rad: f64) -> String {
    to_json(explore_transfer(weight1, m1, m2, mismatch_rad))
}

#[wasm_bindgen(js_name = fringeSweep)]
pub fn fringe_sweep_js(
    preset_name: &str,
    visibility: f64,
    dark_scale: f64,
    points: u32,
    duration_per_point_s: f64,
    seed: u32,
) -> String {
    to_json(fringe_sweep(preset_name, visibility, dark_scale, points as usize, duration_per_point_s, seed as u64))
}

#[wasm_bindgen(js_name = coincidenceHistogram)]
pub fn coincidence_histogram_js(
    preset_name: &str,
    phase_averaged: bool,
    phase_rad: f64,
    duration_s: f64,
    seed: u32,
) -> String {
    to_json(coincidence_histogram(preset_name, phase_averaged, phase_rad, duration_s, seed as u64))
}

/// Coupling magnitude giving full transfer, for the page's slider default.
#[wasm_bindgen(js_name = fullTransferCoupling)]
pub fn full_transfer_coupling() -> f64 {
    FRAC_PI_2
}
