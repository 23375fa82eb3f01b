//! Analytic parameter calculus for the optical chain: coherence lengths,
//! Franson validity, the up-conversion budget and expected count rates.
//!
//! Wavelengths are in nm, lengths in m, rates in 1/s, dark counts per ns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::SIDE_PEAK_PROBABILITY;

/// Speed of light in m/ns.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

/// Factor used for every "much greater / much smaller" comparison.
pub const MUCH_GREATER: f64 = 10.0;

/// Linear up-conversion results above this are outside the small-signal regime.
pub const SATURATION_WARNING: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("bandwidth must be positive, got {0} nm")]
    ZeroBandwidth(f64),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> OpticsError {
    OpticsError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), OpticsError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn fraction(field: &'static str, v: f64, allow_zero: bool) -> Result<(), OpticsError> {
    let lower_ok = if allow_zero { v >= 0.0 } else { v > 0.0 };
    if lower_ok && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a fraction, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    pub pump_wavelength_nm: f64,
    pub pump_coherence_length_m: f64,
    /// Photon sent to Alice.
    pub signal_wavelength_nm: f64,
    /// Photon sent to Bob.
    pub idler_wavelength_nm: f64,
    pub raw_bandwidth_nm: f64,
    pub alice_filter_bandwidth_nm: f64,
    /// Effective pair rate after filtering.
    pub pair_rate_per_s: f64,
}

impl SourceParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        positive("source.pump_wavelength_nm", self.pump_wavelength_nm)?;
        positive("source.pump_coherence_length_m", self.pump_coherence_length_m)?;
        positive("source.signal_wavelength_nm", self.signal_wavelength_nm)?;
        positive("source.idler_wavelength_nm", self.idler_wavelength_nm)?;
        positive("source.raw_bandwidth_nm", self.raw_bandwidth_nm)?;
        positive("source.alice_filter_bandwidth_nm", self.alice_filter_bandwidth_nm)?;
        if self.alice_filter_bandwidth_nm > self.raw_bandwidth_nm {
            return Err(invalid(
                "source.alice_filter_bandwidth_nm",
                "filter is wider than the raw bandwidth",
            ));
        }
        if !(self.pair_rate_per_s.is_finite() && self.pair_rate_per_s >= 0.0) {
            return Err(invalid("source.pair_rate_per_s", "must be non-negative"));
        }
        Ok(())
    }

    /// Longer of the two single-photon coherence lengths at the raw bandwidth.
    pub fn single_photon_coherence_m(&self) -> Result<f64, OpticsError> {
        let a = coherence_length(self.signal_wavelength_nm, self.raw_bandwidth_nm)?;
        let b = coherence_length(self.idler_wavelength_nm, self.raw_bandwidth_nm)?;
        Ok(a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerParams {
    /// Optical path difference between the long and short arm.
    pub path_imbalance_m: f64,
    pub phase_rad: f64,
    /// Transmission to the monitored port, excluding the 50/50 port split.
    pub transmission: f64,
}

impl InterferometerParams {
    pub fn validate(&self, side: &'static str) -> Result<(), OpticsError> {
        positive(side, self.path_imbalance_m)?;
        fraction(side, self.transmission, false)?;
        if !self.phase_rad.is_finite() {
            return Err(invalid(side, "phase must be finite"));
        }
        Ok(())
    }

    /// Long-arm delay `ΔL / c` in ns.
    pub fn delay_ns(&self) -> f64 {
        self.path_imbalance_m / SPEED_OF_LIGHT_M_PER_NS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfgParams {
    pub efficiency_per_watt: f64,
    pub reservoir_power_w: f64,
    pub coupling_qubit: f64,
    pub coupling_reservoir: f64,
    pub input_wavelength_nm: f64,
    pub output_wavelength_nm: f64,
    pub reservoir_wavelength_nm: f64,
    pub reservoir_coherence_length_m: f64,
    pub acceptance_halving_detuning_nm: f64,
}

impl SfgParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        positive("sfg.efficiency_per_watt", self.efficiency_per_watt)?;
        if !(self.reservoir_power_w.is_finite() && self.reservoir_power_w >= 0.0) {
            return Err(invalid("sfg.reservoir_power_w", "must be non-negative"));
        }
        fraction("sfg.coupling_qubit", self.coupling_qubit, true)?;
        fraction("sfg.coupling_reservoir", self.coupling_reservoir, true)?;
        positive("sfg.input_wavelength_nm", self.input_wavelength_nm)?;
        positive("sfg.output_wavelength_nm", self.output_wavelength_nm)?;
        positive("sfg.reservoir_wavelength_nm", self.reservoir_wavelength_nm)?;
        positive(
            "sfg.reservoir_coherence_length_m",
            self.reservoir_coherence_length_m,
        )?;
        positive(
            "sfg.acceptance_halving_detuning_nm",
            self.acceptance_halving_detuning_nm,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorRole {
    FreeRunning,
    /// Opens a gate on each click of the partner detector.
    Gated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub quantum_efficiency: f64,
    pub dark_prob_per_ns: f64,
    #[serde(default = "default_gate_width")]
    pub gate_width_ns: f64,
    pub role: DetectorRole,
}

fn default_gate_width() -> f64 {
    2.5
}

impl DetectorParams {
    pub fn validate(&self, which: &'static str) -> Result<(), OpticsError> {
        fraction(which, self.quantum_efficiency, true)?;
        if !(self.dark_prob_per_ns.is_finite() && self.dark_prob_per_ns >= 0.0) {
            return Err(invalid(which, "dark count probability must be non-negative"));
        }
        if self.role == DetectorRole::Gated {
            positive(which, self.gate_width_ns)?;
        }
        Ok(())
    }

    pub fn dark_rate_per_s(&self) -> f64 {
        self.dark_prob_per_ns * 1e9
    }
}

/// Full chain: source, the two analyzers, the optional up-conversion stage on
/// Bob's side and the two detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub source: SourceParams,
    pub alice_interferometer: InterferometerParams,
    pub bob_interferometer: InterferometerParams,
    #[serde(default)]
    pub sfg: Option<SfgParams>,
    pub alice_detector: DetectorParams,
    pub bob_detector: DetectorParams,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        self.source.validate()?;
        self.alice_interferometer.validate("alice_interferometer")?;
        self.bob_interferometer.validate("bob_interferometer")?;
        if let Some(sfg) = &self.sfg {
            sfg.validate()?;
        }
        self.alice_detector.validate("alice_detector")?;
        self.bob_detector.validate("bob_detector")?;
        if self.alice_detector.role == DetectorRole::Gated
            && self.bob_detector.role == DetectorRole::Gated
        {
            return Err(invalid(
                "bob_detector.role",
                "at most one detector can be gated by the other",
            ));
        }
        Ok(())
    }

    /// Up-conversion success probability applied to Bob's photon, 1 without the stage.
    pub fn transfer_probability(&self) -> f64 {
        self.sfg
            .as_ref()
            .map_or(1.0, |p| sfg_transfer_probability(p).probability.min(1.0))
    }

    /// Mean time separation of the side peaks from the central one.
    pub fn peak_spacing_ns(&self) -> f64 {
        0.5 * (self.alice_interferometer.delay_ns() + self.bob_interferometer.delay_ns())
    }
}

/// `λ² / Δλ`, returned in metres.
pub fn coherence_length(wavelength_nm: f64, bandwidth_nm: f64) -> Result<f64, OpticsError> {
    if !(bandwidth_nm > 0.0) {
        return Err(OpticsError::ZeroBandwidth(bandwidth_nm));
    }
    positive("wavelength_nm", wavelength_nm)?;
    Ok(wavelength_nm * wavelength_nm / bandwidth_nm * 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Ratio to the threshold; values ≥ 1 pass.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FransonValidity {
    pub single_photon_coherence_m: f64,
    pub pump_coherence_m: f64,
    pub checks: [ValidityCheck; 3],
}

impl FransonValidity {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ValidityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NO_SINGLE_PHOTON_INTERFERENCE: &str = "no_single_photon_interference";
pub const CHECK_ANALYZER_ALIGNMENT: &str = "analyzer_alignment";
pub const CHECK_PAIR_COHERENCE: &str = "pair_coherence";

/// The three Franson conditions on explicit lengths (all in metres).
pub fn franson_checks(
    imbalance_a: f64,
    imbalance_b: f64,
    single_photon_coherence: f64,
    pump_coherence: f64,
) -> FransonValidity {
    let shortest = imbalance_a.min(imbalance_b);
    let longest = imbalance_a.max(imbalance_b);
    let mismatch = (imbalance_a - imbalance_b).abs();

    let no_single = ValidityCheck {
        name: CHECK_NO_SINGLE_PHOTON_INTERFERENCE,
        passed: shortest >= MUCH_GREATER * single_photon_coherence,
        margin: shortest / (MUCH_GREATER * single_photon_coherence),
    };
    let alignment = ValidityCheck {
        name: CHECK_ANALYZER_ALIGNMENT,
        passed: mismatch <= single_photon_coherence,
        margin: if mismatch == 0.0 {
            f64::INFINITY
        } else {
            single_photon_coherence / mismatch
        },
    };
    let pair = ValidityCheck {
        name: CHECK_PAIR_COHERENCE,
        passed: MUCH_GREATER * longest <= pump_coherence,
        margin: pump_coherence / (MUCH_GREATER * longest),
    };
    FransonValidity {
        single_photon_coherence_m: single_photon_coherence,
        pump_coherence_m: pump_coherence,
        checks: [no_single, alignment, pair],
    }
}

pub fn franson_validity(
    source: &SourceParams,
    alice: &InterferometerParams,
    bob: &InterferometerParams,
) -> Result<FransonValidity, OpticsError> {
    let single = source.single_photon_coherence_m()?;
    Ok(franson_checks(
        alice.path_imbalance_m,
        bob.path_imbalance_m,
        single,
        source.pump_coherence_length_m,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SfgBudget {
    pub probability: f64,
    /// Set when the linear estimate exceeds the small-signal regime.
    pub saturation_warning: bool,
}

/// Linear small-signal transfer budget:
/// efficiency × power × both couplings × (λ_out / λ_in).
pub fn sfg_transfer_probability(p: &SfgParams) -> SfgBudget {
    let probability = p.efficiency_per_watt
        * p.reservoir_power_w
        * p.coupling_qubit
        * p.coupling_reservoir
        * (p.output_wavelength_nm / p.input_wavelength_nm);
    SfgBudget {
        probability,
        saturation_warning: probability > SATURATION_WARNING,
    }
}

/// Relative efficiency `2^-(δ/δ½)²` of a Gaussian phase-matching acceptance.
pub fn sfg_acceptance(detuning_nm: f64, halving_detuning_nm: f64) -> Result<f64, OpticsError> {
    positive("halving_detuning_nm", halving_detuning_nm)?;
    let x = detuning_nm / halving_detuning_nm;
    Ok((-x * x).exp2())
}

pub fn reservoir_coherence_ok(p: &SfgParams, bob: &InterferometerParams) -> ValidityCheck {
    ValidityCheck {
        name: "reservoir_coherence",
        passed: p.reservoir_coherence_length_m >= MUCH_GREATER * bob.path_imbalance_m,
        margin: p.reservoir_coherence_length_m / bob.path_imbalance_m,
    }
}

/// Accidental rate `R_start · R_stop · τ` for uncorrelated streams, τ in ns.
pub fn accidental_rate(r_start: f64, r_stop: f64, window_ns: f64) -> f64 {
    r_start * r_stop * window_ns * 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub alice_singles_per_s: f64,
    pub bob_singles_per_s: f64,
    pub alice_photon_rate_per_s: f64,
    pub bob_photon_rate_per_s: f64,
    pub window_ns: f64,
    pub true_coincidences_per_s: f64,
    pub accidental_coincidences_per_s: f64,
    pub accidental_fraction: f64,
    /// `V · (1 - f_acc)` for the given underlying visibility.
    pub predicted_raw_visibility: f64,
    pub raw_to_net_ratio: f64,
}

/// Port split into the single monitored output of each analyzer.
const PORT_FACTOR: f64 = 0.5;

struct RateTerms {
    alice_photon: f64,
    bob_photon: f64,
    alice_dark: f64,
    bob_dark: f64,
    true_per_pair: f64,
}

fn rate_terms(chain: &ChainConfig, pair_rate: f64) -> RateTerms {
    let ta = chain.alice_interferometer.transmission * chain.alice_detector.quantum_efficiency;
    let tb = chain.bob_interferometer.transmission
        * chain.bob_detector.quantum_efficiency
        * chain.transfer_probability();
    RateTerms {
        alice_photon: pair_rate * PORT_FACTOR * ta,
        bob_photon: pair_rate * PORT_FACTOR * tb,
        alice_dark: chain.alice_detector.dark_rate_per_s(),
        bob_dark: chain.bob_detector.dark_rate_per_s(),
        // phase-averaged central peak: 2 × side peak
        true_per_pair: 2.0 * SIDE_PEAK_PROBABILITY * ta * tb,
    }
}

/// Expected singles, true and accidental coincidence rates in a central window
/// of `window_ns`, for an underlying two-photon visibility `visibility`.
///
/// For a gated detector the singles figure is the rate while its gate is open.
pub fn expected_rates(chain: &ChainConfig, window_ns: f64, visibility: f64) -> RateReport {
    let pair_rate = chain.source.pair_rate_per_s;
    let t = rate_terms(chain, pair_rate);
    let alice = t.alice_photon + t.alice_dark;
    let bob = t.bob_photon + t.bob_dark;
    let true_rate = pair_rate * t.true_per_pair;
    let acc = accidental_rate(bob, alice, window_ns);
    let total = true_rate + acc;
    let f = if total > 0.0 { acc / total } else { 0.0 };
    RateReport {
        alice_singles_per_s: alice,
        bob_singles_per_s: bob,
        alice_photon_rate_per_s: t.alice_photon,
        bob_photon_rate_per_s: t.bob_photon,
        window_ns,
        true_coincidences_per_s: true_rate,
        accidental_coincidences_per_s: acc,
        accidental_fraction: f,
        predicted_raw_visibility: visibility * (1.0 - f),
        raw_to_net_ratio: 1.0 - f,
    }
}

/// Smallest pair rate at which the accidental fraction in the central window
/// equals `target_fraction` (the dark-count dominated branch).
pub fn pair_rate_for_accidental_fraction(
    chain: &ChainConfig,
    window_ns: f64,
    target_fraction: f64,
) -> Result<f64, OpticsError> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(invalid("target_fraction", "must lie in (0, 1)"));
    }
    // acc = (B0 + bR)(A0 + aR)τ, true = cR, acc = k·true
    let unit = rate_terms(chain, 1.0);
    let tau = window_ns * 1e-9;
    let k = target_fraction / (1.0 - target_fraction);
    let qa = unit.alice_photon * unit.bob_photon * tau;
    let qb = (unit.bob_dark * unit.alice_photon + unit.alice_dark * unit.bob_photon) * tau
        - k * unit.true_per_pair;
    let qc = unit.alice_dark * unit.bob_dark * tau;
    let root = if qa == 0.0 {
        if qb >= 0.0 {
            return Err(invalid("target_fraction", "unreachable with this chain"));
        }
        -qc / qb
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 || qb >= 0.0 {
            return Err(invalid("target_fraction", "unreachable with this chain"));
        }
        // numerically stable smaller root
        2.0 * qc / (-qb + disc.sqrt())
    };
    Ok(root)
}
