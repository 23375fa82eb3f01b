//! Seeded Monte Carlo generator of detector clicks.
//!
//! Pairs are emitted as a Poisson process. Each pair's joint outcome (which
//! analyzer port each photon leaves by and which arms it took) is drawn from
//! the two-photon distribution, never from independent per-photon choices:
//! the central peak carries `(1 + σ_A σ_B V cos φ) / 8` per port combination
//! `σ = ±1`, each side peak `1/16`. Losses and detector efficiency thin each
//! photon independently afterwards, and dark counts are an independent Poisson
//! process per detector. A gated detector only sees light and darks inside the
//! gates opened by its partner's clicks.
//!
//! Randomness comes from ChaCha8 seeded through `seed_from_u64`, with one
//! stream per source: stream 1 for pairs, 2 and 3 for Alice's and Bob's dark
//! counts. Changing dark rates therefore leaves the photon history untouched.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{ChainConfig, DetectorParams, DetectorRole, OpticsError};

const PAIR_STREAM: u64 = 1;
const ALICE_DARK_STREAM: u64 = 2;
const BOB_DARK_STREAM: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Chain(#[from] OpticsError),
    #[error("event streams were generated from different configs")]
    ConfigMismatch,
    #[error("transfer probability {0} outside [0, 1]")]
    TransferRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Use the interferometer phases from the chain config.
    #[default]
    Fixed,
    /// Draw the combined phase uniformly in [0, 2π) for every pair.
    UniformPerPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub chain: ChainConfig,
    /// Two-photon visibility of the emitted state.
    pub visibility: f64,
    /// Gaussian timing jitter σ added to every photon click.
    pub jitter_ns: f64,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub phase_mode: PhaseMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.chain.validate()?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(SimError::InvalidConfig(format!(
                "visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        if !(self.jitter_ns.is_finite() && self.jitter_ns >= 0.0) {
            return Err(SimError::InvalidConfig("jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Same config with only the seed differing is considered compatible.
    fn same_setup(&self, other: &SimConfig) -> bool {
        let mut a = self.clone();
        a.seed = other.seed;
        a == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    Alice,
    Bob,
}

impl DetectorId {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Alice => "alice",
            DetectorId::Bob => "bob",
        }
    }
}

impl std::str::FromStr for DetectorId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alice" => Ok(DetectorId::Alice),
            "bob" => Ok(DetectorId::Bob),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

/// Ground-truth tag; analysis code never looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Photon,
    Dark,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Photon => "photon",
            Origin::Dark => "dark",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "photon" => Ok(Origin::Photon),
            "dark" => Ok(Origin::Dark),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub time_ns: f64,
    pub detector: DetectorId,
    pub origin: Origin,
}

/// Time-ordered clicks of both detectors. Ties keep Alice before Bob.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub config: SimConfig,
    /// Seeds of every run merged into this stream, ascending.
    pub seeds: Vec<u64>,
    pub events: Vec<DetectionEvent>,
}

impl EventStream {
    pub fn empty(config: SimConfig) -> Self {
        Self {
            seeds: vec![config.seed],
            config,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Click times of one detector, ascending.
    pub fn times(&self, detector: DetectorId) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.detector == detector)
            .map(|e| e.time_ns)
            .collect()
    }

    pub fn count(&self, detector: DetectorId, origin: Origin) -> usize {
        self.events
            .iter()
            .filter(|e| e.detector == detector && e.origin == origin)
            .count()
    }

    /// Stream restricted to clicks with the given origin.
    pub fn filter_origin(&self, origin: Origin) -> EventStream {
        EventStream {
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            events: self.events.iter().filter(|e| e.origin == origin).copied().collect(),
        }
    }
}

/// Survival factor applied to Bob's photon by the up-conversion stage.
pub fn apply_transfer_thinning(p_transfer: f64) -> Result<f64, SimError> {
    if (0.0..=1.0).contains(&p_transfer) {
        Ok(p_transfer)
    } else {
        Err(SimError::TransferRange(p_transfer))
    }
}

/// Joint outcome for one pair at the two analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOutcome {
    pub alice_monitored: bool,
    pub bob_monitored: bool,
    pub alice_long: bool,
    pub bob_long: bool,
}

/// Draw one joint outcome for combined phase `phi` and visibility `v`.
pub fn sample_pair_outcome<R: Rng + ?Sized>(rng: &mut R, phi: f64, v: f64) -> PairOutcome {
    let u: f64 = rng.random();
    let bits: u32 = rng.random();
    let b0 = bits & 1 == 1;
    let b1 = bits & 2 == 2;
    let b2 = bits & 4 == 4;
    if u < 0.5 {
        // distinguishable paths: ports independent, arms opposite
        PairOutcome {
            alice_monitored: b0,
            bob_monitored: b1,
            alice_long: b2,
            bob_long: !b2,
        }
    } else {
        // indistinguishable same-arm paths: port parity follows the fringe
        let same_parity = (u - 0.5) * 2.0 < 0.5 * (1.0 + v * phi.cos());
        let alice_monitored = b0;
        let bob_monitored = if same_parity { b0 } else { !b0 };
        PairOutcome {
            alice_monitored,
            bob_monitored,
            alice_long: b1,
            bob_long: b1,
        }
    }
}

fn exp_gap<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Merge two ascending click lists; on ties `a` comes first.
fn merge_sorted(a: Vec<DetectionEvent>, b: Vec<DetectionEvent>) -> Vec<DetectionEvent> {
    if a.is_empty() {
        return b;
    }
    if b.is_empty() {
        return a;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].time_ns <= b[j].time_ns {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn poisson_darks(
    rng: &mut ChaCha8Rng,
    rate_per_ns: f64,
    end_ns: f64,
    detector: DetectorId,
) -> Vec<DetectionEvent> {
    let mut out = Vec::new();
    if rate_per_ns <= 0.0 {
        return out;
    }
    out.reserve((rate_per_ns * end_ns * 1.01) as usize + 16);
    let mut t = exp_gap(rng, rate_per_ns);
    while t < end_ns {
        out.push(DetectionEvent {
            time_ns: t,
            detector,
            origin: Origin::Dark,
        });
        t += exp_gap(rng, rate_per_ns);
    }
    out
}

/// Union of `[t - w/2, t + w/2)` around each trigger, clipped to the run.
fn gate_intervals(triggers: &[DetectionEvent], width: f64, end_ns: f64) -> Vec<(f64, f64)> {
    let mut gates: Vec<(f64, f64)> = Vec::with_capacity(triggers.len());
    let half = 0.5 * width;
    for ev in triggers {
        let lo = (ev.time_ns - half).max(0.0);
        let hi = (ev.time_ns + half).min(end_ns);
        if hi <= lo {
            continue;
        }
        match gates.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => gates.push((lo, hi)),
        }
    }
    gates
}

/// Clicks of a detector gated by its partner's clicks.
fn gated_clicks(
    photons: Vec<DetectionEvent>,
    gates: &[(f64, f64)],
    dark_per_ns: f64,
    detector: DetectorId,
    rng: &mut ChaCha8Rng,
) -> Vec<DetectionEvent> {
    let mut seen = Vec::new();
    let mut g = 0;
    for ph in photons {
        while g < gates.len() && gates[g].1 <= ph.time_ns {
            g += 1;
        }
        if g < gates.len() && gates[g].0 <= ph.time_ns {
            seen.push(ph);
        }
    }

    // darks as a Poisson process in accumulated open-gate time
    let mut darks = Vec::new();
    if dark_per_ns > 0.0 {
        let mut next = exp_gap(rng, dark_per_ns);
        let mut open_before = 0.0;
        for &(lo, hi) in gates {
            let len = hi - lo;
            while next < open_before + len {
                darks.push(DetectionEvent {
                    time_ns: lo + (next - open_before),
                    detector,
                    origin: Origin::Dark,
                });
                next += exp_gap(rng, dark_per_ns);
            }
            open_before += len;
        }
    }
    merge_sorted(seen, darks)
}

fn free_running_clicks(
    photons: Vec<DetectionEvent>,
    det: &DetectorParams,
    end_ns: f64,
    id: DetectorId,
    rng: &mut ChaCha8Rng,
) -> Vec<DetectionEvent> {
    let darks = poisson_darks(rng, det.dark_prob_per_ns, end_ns, id);
    merge_sorted(photons, darks)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate the click record for `config`. Deterministic in `(config, seed)`.
///
/// Event times are f64 nanoseconds from the start of the run; for runs much
/// longer than ~1e3 s prefer several shorter runs merged or summed, since the
/// timestamp resolution degrades with magnitude.
pub fn simulate(config: &SimConfig) -> Result<EventStream, SimError> {
    config.validate()?;
    let chain = &config.chain;
    let end_ns = config.duration_s * 1e9;
    let transfer = apply_transfer_thinning(chain.transfer_probability())?;

    let alice_survival = chain.alice_interferometer.transmission * chain.alice_detector.quantum_efficiency;
    let bob_survival =
        chain.bob_interferometer.transmission * chain.bob_detector.quantum_efficiency * transfer;
    let delay_a = chain.alice_interferometer.delay_ns();
    let delay_b = chain.bob_interferometer.delay_ns();
    let fixed_phase = chain.alice_interferometer.phase_rad + chain.bob_interferometer.phase_rad;
    let jitter = if config.jitter_ns > 0.0 {
        Some(Normal::new(0.0, config.jitter_ns).map_err(|e| SimError::InvalidConfig(e.to_string()))?)
    } else {
        None
    };

    let mut rng = stream_rng(config.seed, PAIR_STREAM);
    let mut alice_photons = Vec::new();
    let mut bob_photons = Vec::new();
    let rate_per_ns = chain.source.pair_rate_per_s * 1e-9;
    if rate_per_ns > 0.0 {
        let mut t = exp_gap(&mut rng, rate_per_ns);
        while t < end_ns {
            let phi = match config.phase_mode {
                PhaseMode::Fixed => fixed_phase,
                PhaseMode::UniformPerPair => rng.random::<f64>() * TAU,
            };
            let outcome = sample_pair_outcome(&mut rng, phi, config.visibility);
            let arms = [
                (outcome.alice_monitored, outcome.alice_long, alice_survival, delay_a, DetectorId::Alice),
                (outcome.bob_monitored, outcome.bob_long, bob_survival, delay_b, DetectorId::Bob),
            ];
            for (monitored, long, survival, delay, id) in arms {
                if !monitored || rng.random::<f64>() >= survival {
                    continue;
                }
                let mut time = t + if long { delay } else { 0.0 };
                if let Some(n) = &jitter {
                    time += n.sample(&mut rng);
                }
                if (0.0..end_ns).contains(&time) {
                    let ev = DetectionEvent {
                        time_ns: time,
                        detector: id,
                        origin: Origin::Photon,
                    };
                    match id {
                        DetectorId::Alice => alice_photons.push(ev),
                        DetectorId::Bob => bob_photons.push(ev),
                    }
                }
            }
            t += exp_gap(&mut rng, rate_per_ns);
        }
    }
    alice_photons.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
    bob_photons.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));

    let mut alice_rng = stream_rng(config.seed, ALICE_DARK_STREAM);
    let mut bob_rng = stream_rng(config.seed, BOB_DARK_STREAM);
    let (alice, bob) = match (chain.alice_detector.role, chain.bob_detector.role) {
        (DetectorRole::Gated, _) => {
            let bob = free_running_clicks(bob_photons, &chain.bob_detector, end_ns, DetectorId::Bob, &mut bob_rng);
            let gates = gate_intervals(&bob, chain.alice_detector.gate_width_ns, end_ns);
            let alice = gated_clicks(alice_photons, &gates, chain.alice_detector.dark_prob_per_ns, DetectorId::Alice, &mut alice_rng);
            (alice, bob)
        }
        (DetectorRole::FreeRunning, DetectorRole::Gated) => {
            let alice = free_running_clicks(alice_photons, &chain.alice_detector, end_ns, DetectorId::Alice, &mut alice_rng);
            let gates = gate_intervals(&alice, chain.bob_detector.gate_width_ns, end_ns);
            let bob = gated_clicks(bob_photons, &gates, chain.bob_detector.dark_prob_per_ns, DetectorId::Bob, &mut bob_rng);
            (alice, bob)
        }
        (DetectorRole::FreeRunning, DetectorRole::FreeRunning) => (
            free_running_clicks(alice_photons, &chain.alice_detector, end_ns, DetectorId::Alice, &mut alice_rng),
            free_running_clicks(bob_photons, &chain.bob_detector, end_ns, DetectorId::Bob, &mut bob_rng),
        ),
    };

    Ok(EventStream {
        config: config.clone(),
        seeds: vec![config.seed],
        events: merge_sorted(alice, bob),
    })
}

/// Time-sorted union of two streams from the same setup.
pub fn merge(a: &EventStream, b: &EventStream) -> Result<EventStream, SimError> {
    if !a.config.same_setup(&b.config) {
        return Err(SimError::ConfigMismatch);
    }
    let mut seeds: Vec<u64> = a.seeds.iter().chain(b.seeds.iter()).copied().collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut config = a.config.clone();
    config.seed = seeds[0];
    let mut events = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.events.len() && j < b.events.len() {
        if event_order(&a.events[i], &b.events[j]).is_le() {
            events.push(a.events[i]);
            i += 1;
        } else {
            events.push(b.events[j]);
            j += 1;
        }
    }
    events.extend_from_slice(&a.events[i..]);
    events.extend_from_slice(&b.events[j..]);
    Ok(EventStream { config, seeds, events })
}

/// Total order used by `merge`: time, then detector, then origin.
fn event_order(x: &DetectionEvent, y: &DetectionEvent) -> std::cmp::Ordering {
    x.time_ns
        .total_cmp(&y.time_ns)
        .then((x.detector as u8).cmp(&(y.detector as u8)))
        .then((x.origin as u8).cmp(&(y.origin as u8)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Preset};

    fn ideal(duration_s: f64) -> SimConfig {
        let mut cfg = preset(Preset::Fig2Baseline).sim_config();
        let chain = &mut cfg.chain;
        chain.alice_interferometer.transmission = 1.0;
        chain.bob_interferometer.transmission = 1.0;
        chain.alice_interferometer.phase_rad = 0.0;
        chain.bob_interferometer.phase_rad = 0.0;
        for det in [&mut chain.alice_detector, &mut chain.bob_detector] {
            det.quantum_efficiency = 1.0;
            det.dark_prob_per_ns = 0.0;
            det.role = DetectorRole::FreeRunning;
        }
        chain.source.pair_rate_per_s = 1e5;
        cfg.visibility = 1.0;
        cfg.duration_s = duration_s;
        cfg
    }

    #[test]
    fn outcome_distribution_matches_joint_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let phi = 0.9;
        let v = 0.8;
        let (mut central_pp, mut side_pp) = (0usize, 0usize);
        for _ in 0..n {
            let o = sample_pair_outcome(&mut rng, phi, v);
            if o.alice_monitored && o.bob_monitored {
                if o.alice_long == o.bob_long {
                    central_pp += 1;
                } else {
                    side_pp += 1;
                }
            }
        }
        let p_c = (1.0 + v * phi.cos()) / 8.0;
        let sigma = (p_c * (1.0 - p_c) / n as f64).sqrt();
        assert!((central_pp as f64 / n as f64 - p_c).abs() < 4.0 * sigma);
        let p_s = 2.0 / 16.0;
        let sigma = (p_s * (1.0 - p_s) / n as f64).sqrt();
        assert!((side_pp as f64 / n as f64 - p_s).abs() < 4.0 * sigma);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = preset(Preset::Fig2Baseline).sim_config_with_duration(0.05);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(simulate(&other).unwrap().events, a.events);
    }

    #[test]
    fn stream_is_sorted_and_in_range() {
        let cfg = preset(Preset::Fig2Baseline).sim_config_with_duration(0.05);
        let s = simulate(&cfg).unwrap();
        assert!(!s.is_empty());
        assert!(s.events.windows(2).all(|w| w[0].time_ns <= w[1].time_ns));
        assert!(s.events.iter().all(|e| e.time_ns >= 0.0 && e.time_ns < 0.05e9));
    }

    #[test]
    fn free_running_dark_counts_are_poisson() {
        let mut cfg = ideal(10.0);
        cfg.chain.source.pair_rate_per_s = 0.0;
        cfg.chain.bob_detector.dark_prob_per_ns = 1e-5;
        let s = simulate(&cfg).unwrap();
        let n = s.count(DetectorId::Bob, Origin::Dark) as f64;
        let mean = 1e-5 * 10.0 * 1e9;
        assert!((n - mean).abs() < 3.0 * mean.sqrt(), "{n}");
        assert_eq!(s.count(DetectorId::Alice, Origin::Dark), 0);
    }

    #[test]
    fn ideal_chain_zero_delay_fraction() {
        let mut cfg = ideal(0.2);
        cfg.jitter_ns = 0.0;
        let s = simulate(&cfg).unwrap();
        let pairs: f64 = 1e5 * 0.2;
        // with no jitter, zero-delay coincidences share an exact timestamp
        let alice: std::collections::HashSet<u64> =
            s.times(DetectorId::Alice).iter().map(|t| t.to_bits()).collect();
        let zero = s
            .times(DetectorId::Bob)
            .iter()
            .filter(|t| alice.contains(&t.to_bits()))
            .count() as f64;
        let p: f64 = 0.25;
        let sigma = (pairs * p * (1.0 - p)).sqrt();
        assert!((zero - pairs * p).abs() < 3.0 * sigma, "{zero}");
    }

    #[test]
    fn transfer_thinning_range() {
        assert_eq!(apply_transfer_thinning(1.0).unwrap(), 1.0);
        assert_eq!(apply_transfer_thinning(0.0486).unwrap(), 0.0486);
        assert!(matches!(apply_transfer_thinning(1.5), Err(SimError::TransferRange(_))));
    }

    #[test]
    fn zero_transfer_leaves_only_bob_darks() {
        let mut cfg = preset(Preset::Fig3Transfer).sim_config_with_duration(20.0);
        cfg.chain.sfg.as_mut().unwrap().reservoir_power_w = 0.0;
        let s = simulate(&cfg).unwrap();
        assert_eq!(s.count(DetectorId::Bob, Origin::Photon), 0);
        assert!(s.count(DetectorId::Bob, Origin::Dark) > 0);
    }

    #[test]
    fn gated_detector_only_clicks_inside_gates() {
        let cfg = preset(Preset::Fig2Baseline).sim_config_with_duration(0.2);
        let s = simulate(&cfg).unwrap();
        let bob = s.times(DetectorId::Bob);
        let half = 0.5 * cfg.chain.alice_detector.gate_width_ns;
        for t in s.times(DetectorId::Alice) {
            let i = bob.partition_point(|&b| b < t - half);
            assert!(i < bob.len() && bob[i] <= t + half, "alice click at {t} outside any gate");
        }
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let cfg = preset(Preset::Fig2Baseline).sim_config_with_duration(0.02);
        let a = simulate(&cfg).unwrap();
        let mut cfg_b = cfg.clone();
        cfg_b.seed = 99;
        let b = simulate(&cfg_b).unwrap();
        let empty = EventStream::empty(cfg.clone());
        assert_eq!(merge(&a, &empty).unwrap().events, a.events);
        let ab = merge(&a, &b).unwrap();
        let ba = merge(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.len(), a.len() + b.len());

        let mut cfg_c = cfg.clone();
        cfg_c.visibility = 0.5;
        let c = EventStream::empty(cfg_c);
        assert_eq!(merge(&a, &c), Err(SimError::ConfigMismatch));
    }

    #[test]
    fn rejects_invalid_config() {
        let mut cfg = preset(Preset::Fig2Baseline).sim_config();
        cfg.duration_s = 0.0;
        assert!(matches!(simulate(&cfg), Err(SimError::InvalidConfig(_))));
        let mut cfg = preset(Preset::Fig2Baseline).sim_config();
        cfg.visibility = 1.1;
        assert!(matches!(simulate(&cfg), Err(SimError::InvalidConfig(_))));
    }
}
