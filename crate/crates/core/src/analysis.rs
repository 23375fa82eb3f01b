//! Measurement pipeline on click records: start-stop histogram, the three
//! peak windows, accidental estimation and fringe fitting.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{DetectorId, EventStream};

/// Peaks must reach this multiple of the background bin mean.
const PEAK_SIGNIFICANCE: f64 = 5.0;
const MAX_FIT_ITERATIONS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid histogram layout: {0}")]
    InvalidHistogram(String),
    #[error("histograms have different layouts")]
    LayoutMismatch,
    #[error("window [{lo}, {hi}] ns lies outside the histogram range")]
    OutOfRange { lo: f64, hi: f64 },
    #[error("found {found} of 3 significant coincidence peaks")]
    PeaksNotFound { found: usize },
    #[error("no off-peak background bins to estimate accidentals from")]
    NoBackground,
    #[error("fringe fit needs at least 5 points covering the full phase circle: {0}")]
    InsufficientData(String),
    #[error("fringe fit failed after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },
    #[error("value {0} outside [0, 1]")]
    Range(f64),
    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Start-stop time-difference histogram. Bin `i` covers
/// `[(first_bin + i)·w, (first_bin + i + 1)·w)`, so every edge is an integer
/// multiple of the bin width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub start: DetectorId,
    pub stop: DetectorId,
    pub bin_width_ns: f64,
    pub first_bin: i64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn new(
        start: DetectorId,
        stop: DetectorId,
        bin_width_ns: f64,
        range_ns: (f64, f64),
    ) -> Result<Self, AnalysisError> {
        if !(bin_width_ns > 0.0 && bin_width_ns.is_finite()) {
            return Err(AnalysisError::InvalidHistogram(format!("bin width {bin_width_ns}")));
        }
        let first = (range_ns.0 / bin_width_ns).round();
        let last = (range_ns.1 / bin_width_ns).round();
        if !(last > first) || !first.is_finite() || !last.is_finite() {
            return Err(AnalysisError::InvalidHistogram(format!(
                "range [{}, {}] with bin width {bin_width_ns}",
                range_ns.0, range_ns.1
            )));
        }
        Ok(Self {
            start,
            stop,
            bin_width_ns,
            first_bin: first as i64,
            counts: vec![0; (last - first) as usize],
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.first_bin as f64 * self.bin_width_ns,
            (self.first_bin + self.counts.len() as i64) as f64 * self.bin_width_ns,
        )
    }

    pub fn bin_lo(&self, i: usize) -> f64 {
        (self.first_bin + i as i64) as f64 * self.bin_width_ns
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (self.first_bin as f64 + i as f64 + 0.5) * self.bin_width_ns
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn bin_of(&self, dt: f64) -> Option<usize> {
        let k = (dt / self.bin_width_ns).floor() as i64 - self.first_bin;
        (k >= 0 && (k as usize) < self.counts.len()).then_some(k as usize)
    }

    /// Bin-wise sum.
    pub fn add(&mut self, other: &CoincidenceHistogram) -> Result<(), AnalysisError> {
        if self.start != other.start
            || self.stop != other.stop
            || self.bin_width_ns != other.bin_width_ns
            || self.first_bin != other.first_bin
            || self.counts.len() != other.counts.len()
        {
            return Err(AnalysisError::LayoutMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `bin_center_ns,counts`, one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_ns,counts\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.bin_center(i), c);
        }
        out
    }
}

/// First-stop pairing: each start is matched with the first stop at or after
/// `t_start + range.0`, and counted if that stop falls before `t_start + range.1`.
pub fn build_histogram(
    events: &EventStream,
    start: DetectorId,
    stop: DetectorId,
    bin_width_ns: f64,
    range_ns: (f64, f64),
) -> Result<CoincidenceHistogram, AnalysisError> {
    let mut hist = CoincidenceHistogram::new(start, stop, bin_width_ns, range_ns)?;
    let (lo, hi) = hist.range();
    let stops = events.times(stop);
    let mut j = 0;
    for e in events.events.iter().filter(|e| e.detector == start) {
        let t = e.time_ns;
        while j < stops.len() && stops[j] < t + lo {
            j += 1;
        }
        if j == stops.len() {
            break;
        }
        let dt = stops[j] - t;
        if dt < hi {
            if let Some(k) = hist.bin_of(dt) {
                hist.counts[k] += 1;
            }
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo_ns: f64,
    pub hi_ns: f64,
}

impl Window {
    pub fn new(lo_ns: f64, hi_ns: f64) -> Self {
        Self { lo_ns, hi_ns }
    }

    pub fn width(&self) -> f64 {
        self.hi_ns - self.lo_ns
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo_ns + self.hi_ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakWindows {
    pub side_early: Window,
    pub central: Window,
    pub side_late: Window,
    pub background: Vec<Window>,
    /// RMS width of the central peak.
    pub peak_sigma_ns: f64,
    pub half_width_ns: f64,
}

/// Sum of the bins lying entirely inside `window`.
pub fn count_window(hist: &CoincidenceHistogram, window: &Window) -> Result<u64, AnalysisError> {
    let (lo, hi) = hist.range();
    let eps = 1e-9 * hist.bin_width_ns;
    if window.lo_ns < lo - eps || window.hi_ns > hi + eps || window.hi_ns < window.lo_ns {
        return Err(AnalysisError::OutOfRange {
            lo: window.lo_ns,
            hi: window.hi_ns,
        });
    }
    let w = hist.bin_width_ns;
    let first = ((window.lo_ns / w) - 1e-9).ceil() as i64 - hist.first_bin;
    let last = ((window.hi_ns / w) + 1e-9).floor() as i64 - hist.first_bin;
    let first = first.max(0) as usize;
    let last = (last.max(0) as usize).min(hist.counts.len());
    Ok(hist.counts[first.min(last)..last].iter().sum())
}

fn snap(x: f64, w: f64) -> f64 {
    (x / w).round() * w
}

/// Find the central peak and the two side peaks expected at `±spacing`.
///
/// Window half-width defaults to three times the RMS width of the central
/// peak, capped at half the peak spacing so the windows never overlap.
/// Background bins are those at least two full window widths from every peak.
pub fn locate_peaks(
    hist: &CoincidenceHistogram,
    expected_spacing_ns: f64,
    half_width_ns: Option<f64>,
) -> Result<PeakWindows, AnalysisError> {
    let s = expected_spacing_ns;
    if !(s > 0.0) {
        return Err(AnalysisError::InvalidHistogram(format!("peak spacing {s}")));
    }
    let n = hist.counts.len();
    let expected = [-s, 0.0, s];
    let centers: Vec<f64> = (0..n).map(|i| hist.bin_center(i)).collect();

    let far: Vec<u64> = (0..n)
        .filter(|&i| expected.iter().all(|p| (centers[i] - p).abs() >= s))
        .map(|i| hist.counts[i])
        .collect();
    let bg_mean = if far.is_empty() {
        0.0
    } else {
        far.iter().sum::<u64>() as f64 / far.len() as f64
    };

    let mut found = Vec::with_capacity(3);
    for p in expected {
        let best = (0..n)
            .filter(|&i| (centers[i] - p).abs() <= 0.5 * s)
            .max_by(|&a, &b| hist.counts[a].cmp(&hist.counts[b]).then(b.cmp(&a)));
        let Some(k) = best else { continue };
        if (hist.counts[k] as f64) < PEAK_SIGNIFICANCE * bg_mean.max(1.0) {
            continue;
        }
        // background-subtracted centroid around the maximum
        let (mut wsum, mut xsum) = (0.0, 0.0);
        for i in 0..n {
            if (centers[i] - centers[k]).abs() <= 0.25 * s {
                let c = (hist.counts[i] as f64 - bg_mean).max(0.0);
                wsum += c;
                xsum += c * centers[i];
            }
        }
        found.push(if wsum > 0.0 { xsum / wsum } else { centers[k] });
    }
    if found.len() < 3 {
        return Err(AnalysisError::PeaksNotFound { found: found.len() });
    }

    let c0 = found[1];
    let (mut wsum, mut x2) = (0.0, 0.0);
    for (&x, &count) in centers.iter().zip(&hist.counts) {
        let d = x - c0;
        if d.abs() <= 0.5 * s {
            let c = (count as f64 - bg_mean).max(0.0);
            wsum += c;
            x2 += c * d * d;
        }
    }
    let w = hist.bin_width_ns;
    let sigma = if wsum > 0.0 && x2 > 0.0 {
        (x2 / wsum).sqrt()
    } else {
        w / 12f64.sqrt()
    };
    let half = half_width_ns.unwrap_or(3.0 * sigma).min(0.5 * s);

    let mk = |c: f64| Window::new(snap(c - half, w), snap(c + half, w));
    let central = mk(c0);
    let mut side_early = mk(found[0]);
    let mut side_late = mk(found[2]);
    side_early.hi_ns = side_early.hi_ns.min(central.lo_ns);
    side_late.lo_ns = side_late.lo_ns.max(central.hi_ns);

    let keep_out = 2.0 * (2.0 * half);
    let peaks = [side_early.center(), central.center(), side_late.center()];
    let mut background: Vec<Window> = Vec::new();
    for (i, &x) in centers.iter().enumerate() {
        if peaks.iter().all(|p| (x - p).abs() >= keep_out) {
            let lo = hist.bin_lo(i);
            let hi = lo + w;
            match background.last_mut() {
                Some(last) if (last.hi_ns - lo).abs() < 1e-9 * w => last.hi_ns = hi,
                _ => background.push(Window::new(lo, hi)),
            }
        }
    }

    Ok(PeakWindows {
        side_early,
        central,
        side_late,
        background,
        peak_sigma_ns: sigma,
        half_width_ns: half,
    })
}

/// Expected accidental counts inside the central window: the mean background
/// density per ns times the central window width.
pub fn estimate_accidentals(
    hist: &CoincidenceHistogram,
    windows: &PeakWindows,
) -> Result<f64, AnalysisError> {
    let width: f64 = windows.background.iter().map(Window::width).sum();
    if windows.background.is_empty() || width <= 0.0 {
        return Err(AnalysisError::NoBackground);
    }
    let mut counts = 0u64;
    for b in &windows.background {
        counts += count_window(hist, b)?;
    }
    Ok(counts as f64 / width * windows.central.width())
}

/// Window areas of the three peaks with and without background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub windows: PeakWindows,
    pub side_early_counts: u64,
    pub central_counts: u64,
    pub side_late_counts: u64,
    /// Accidentals per central-window width.
    pub accidentals: f64,
    /// Background-subtracted central area over the mean side area.
    pub central_to_side_ratio: f64,
}

pub fn peak_report(
    hist: &CoincidenceHistogram,
    windows: PeakWindows,
) -> Result<PeakReport, AnalysisError> {
    let early = count_window(hist, &windows.side_early)?;
    let central = count_window(hist, &windows.central)?;
    let late = count_window(hist, &windows.side_late)?;
    let acc = estimate_accidentals(hist, &windows)?;
    let per_ns = acc / windows.central.width();
    let net_c = central as f64 - per_ns * windows.central.width();
    let net_e = early as f64 - per_ns * windows.side_early.width();
    let net_l = late as f64 - per_ns * windows.side_late.width();
    let side = 0.5 * (net_e + net_l);
    Ok(PeakReport {
        windows,
        side_early_counts: early,
        central_counts: central,
        side_late_counts: late,
        accidentals: acc,
        central_to_side_ratio: if side > 0.0 { net_c / side } else { f64::NAN },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub combined_phase_rad: f64,
    /// Counts in the central window; may be fractional for synthetic data.
    pub coincidences: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub v_raw: f64,
    pub v_raw_err: f64,
    pub v_net: f64,
    pub v_net_err: f64,
    pub phase_offset_rad: f64,
    pub phase_offset_err: f64,
    /// Fitted mean coincidence rate, 1/s.
    pub mean_level: f64,
    /// Accidental rate subtracted for the net visibility, 1/s.
    pub accidental_level: f64,
    /// Poisson-weighted χ² per degree of freedom.
    pub reduced_chi2: f64,
    pub iterations: usize,
}

impl FringeFit {
    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let v = serde_json::to_value(self).expect("fit serializes");
        if let serde_json::Value::Object(map) = v {
            for (k, val) in map {
                let _ = writeln!(out, "{k}={val}");
            }
        }
        out
    }
}

/// Largest gap between consecutive phases on the circle.
fn largest_phase_gap(points: &[FringePoint]) -> f64 {
    let mut phases: Vec<f64> = points
        .iter()
        .map(|p| p.combined_phase_rad.rem_euclid(TAU))
        .collect();
    phases.sort_by(f64::total_cmp);
    let mut gap = phases[0] + TAU - phases[phases.len() - 1];
    for w in phases.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

/// Fit `R(φ) = A (1 + v cos(φ - φ₀))` to coincidence rates.
///
/// The model is linear in `(a, b, c)` with `R = a + b cos φ + c sin φ`, fitted
/// by least squares with Poisson weights `duration / R_model`, iterated to a
/// fixed point (the Poisson maximum-likelihood solution). Each point's
/// variance is floored at one expected count so empty points near a fringe
/// minimum cannot dominate the fit. The net visibility
/// uses the same fit with `accidental_rate` removed from the mean level.
/// Uncertainties come from the weighted-fit covariance.
pub fn fit_fringe(points: &[FringePoint], accidental_rate: f64) -> Result<FringeFit, AnalysisError> {
    if points.len() < 5 {
        return Err(AnalysisError::InsufficientData(format!("{} points", points.len())));
    }
    if points.iter().any(|p| !(p.duration_s > 0.0) || !(p.coincidences >= 0.0)) {
        return Err(AnalysisError::InsufficientData(
            "durations must be positive and counts non-negative".into(),
        ));
    }
    let gap = largest_phase_gap(points);
    if gap >= std::f64::consts::PI {
        return Err(AnalysisError::InsufficientData(format!(
            "phase coverage leaves a gap of {gap:.3} rad"
        )));
    }

    let rows: Vec<(Vector3<f64>, f64, f64)> = points
        .iter()
        .map(|p| {
            let (s, c) = p.combined_phase_rad.sin_cos();
            (Vector3::new(1.0, c, s), p.coincidences / p.duration_s, p.duration_s)
        })
        .collect();
    let total_t: f64 = rows.iter().map(|r| r.2).sum();
    let mean_rate = rows.iter().map(|r| r.1 * r.2).sum::<f64>() / total_t;
    if !(mean_rate > 0.0) {
        return Err(AnalysisError::NonConvergence {
            iterations: 0,
            reason: "no coincidences".into(),
        });
    }

    let solve = |weights: &[f64]| -> Option<(Vector3<f64>, Matrix3<f64>)> {
        let mut xtx = Matrix3::zeros();
        let mut xty = Vector3::zeros();
        for ((x, y, _), w) in rows.iter().zip(weights) {
            xtx += *w * x * x.transpose();
            xty += *w * *y * x;
        }
        let inv = xtx.try_inverse()?;
        Some((inv * xty, inv))
    };

    let mut weights: Vec<f64> = rows.iter().map(|r| r.2 / mean_rate).collect();
    let mut params = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let (next, inv) = solve(&weights).ok_or_else(|| AnalysisError::NonConvergence {
            iterations,
            reason: "singular normal equations".into(),
        })?;
        let change = (next - params).amax();
        params = next;
        cov = inv;
        weights = rows
            .iter()
            .map(|(x, _, t)| t / x.dot(&params).max(1.0 / t))
            .collect();
        if change <= 1e-13 * mean_rate {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(AnalysisError::NonConvergence {
            iterations,
            reason: format!("parameters still moving: {:?}", params.as_slice()),
        });
    }
    // covariance with the final weights
    if let Some((_, inv)) = solve(&weights) {
        cov = inv;
    }

    let (a, b, c) = (params[0], params[1], params[2]);
    let amp = b.hypot(c);
    let net_level = a - accidental_rate;
    if !(a > 0.0) || !(net_level > 0.0) {
        return Err(AnalysisError::NonConvergence {
            iterations,
            reason: format!("non-positive mean level (a = {a}, accidentals = {accidental_rate})"),
        });
    }
    let visibility_err = |level: f64| {
        let v = amp / level;
        let grad = if amp > 0.0 {
            Vector3::new(-v / level, b / (amp * level), c / (amp * level))
        } else {
            Vector3::new(0.0, 1.0 / level / SQRT_2, 1.0 / level / SQRT_2)
        };
        (grad.transpose() * cov * grad)[(0, 0)].max(0.0).sqrt()
    };
    let phase_err = if amp > 0.0 {
        let grad = Vector3::new(0.0, -c / (amp * amp), b / (amp * amp));
        (grad.transpose() * cov * grad)[(0, 0)].max(0.0).sqrt()
    } else {
        f64::INFINITY
    };
    let chi2: f64 = rows
        .iter()
        .zip(&weights)
        .map(|((x, y, _), w)| w * (y - x.dot(&params)).powi(2))
        .sum();
    let dof = rows.len().saturating_sub(3).max(1) as f64;

    Ok(FringeFit {
        v_raw: (amp / a).clamp(0.0, 1.0),
        v_raw_err: visibility_err(a),
        v_net: (amp / net_level).clamp(0.0, 1.0),
        v_net_err: visibility_err(net_level),
        phase_offset_rad: if amp > 0.0 { c.atan2(b) } else { 0.0 },
        phase_offset_err: phase_err,
        mean_level: a,
        accidental_level: accidental_rate,
        reduced_chi2: chi2 / dof,
        iterations,
    })
}

/// `phase_rad,coincidences,duration_s`.
pub fn fringe_csv(points: &[FringePoint]) -> String {
    let mut out = String::from("phase_rad,coincidences,duration_s\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.combined_phase_rad, p.coincidences, p.duration_s);
    }
    out
}

pub fn parse_fringe_csv(text: &str) -> Result<Vec<FringePoint>, AnalysisError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "phase_rad,coincidences,duration_s" => {}
        _ => {
            return Err(AnalysisError::Csv {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| AnalysisError::Csv { line: i + 1, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", f.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        out.push(FringePoint {
            combined_phase_rad: num(f[0])?,
            coincidences: num(f[1])?,
            duration_s: num(f[2])?,
        });
    }
    Ok(out)
}

/// `(1 + V_net) / 2`.
pub fn fidelity_from_visibility(v_net: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&v_net) {
        return Err(AnalysisError::Range(v_net));
    }
    Ok((1.0 + v_net) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    /// CHSH value reachable with this visibility, `2√2 V`.
    pub s: f64,
    /// `S > 2`, i.e. `V > 1/√2`.
    pub violation: bool,
}

pub fn bell_parameter(v: f64) -> Result<BellReport, AnalysisError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(AnalysisError::Range(v));
    }
    Ok(BellReport {
        s: 2.0 * SQRT_2 * v,
        violation: v > std::f64::consts::FRAC_1_SQRT_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Preset};
    use crate::sim::{DetectionEvent, Origin};

    fn stream(events: &[(f64, DetectorId)]) -> EventStream {
        let mut s = EventStream::empty(preset(Preset::Fig2Baseline).sim_config());
        s.events = events
            .iter()
            .map(|&(t, d)| DetectionEvent {
                time_ns: t,
                detector: d,
                origin: Origin::Photon,
            })
            .collect();
        s
    }

    #[test]
    fn single_pair_lands_in_expected_bin() {
        let s = stream(&[(10.0, DetectorId::Bob), (10.5, DetectorId::Alice)]);
        let h = build_histogram(&s, DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap();
        assert_eq!(h.total(), 1);
        let k = h.counts.iter().position(|&c| c == 1).unwrap();
        assert!(h.bin_lo(k) <= 0.5 && 0.5 < h.bin_lo(k) + 0.05);
        assert_eq!(h.range(), (-3.0, 3.0));
        assert_eq!(h.counts.len(), 120);
    }

    #[test]
    fn empty_stream_gives_zero_histogram() {
        let s = stream(&[]);
        let h = build_histogram(&s, DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap();
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn first_stop_pairing() {
        // the second stop is shadowed by the first one
        let s = stream(&[
            (0.0, DetectorId::Bob),
            (0.2, DetectorId::Alice),
            (0.4, DetectorId::Alice),
            (10.0, DetectorId::Bob),
            (8.0, DetectorId::Alice),
        ]);
        let mut s = s;
        s.events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
        let h = build_histogram(&s, DetectorId::Bob, DetectorId::Alice, 0.1, (-3.0, 3.0)).unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts[h.bin_of(0.2).unwrap()], 1);
        assert_eq!(h.counts[h.bin_of(-2.0).unwrap()], 1);
    }

    #[test]
    fn window_counting() {
        let mut h = CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, 0.1, (-1.0, 1.0)).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 5);
        assert_eq!(count_window(&h, &Window::new(-1.0, 1.0)).unwrap(), 100);
        assert_eq!(count_window(&h, &Window::new(0.3, 0.3)).unwrap(), 0);
        assert_eq!(count_window(&h, &Window::new(-0.5, 0.5)).unwrap(), 50);
        // partial bins are excluded
        assert_eq!(count_window(&h, &Window::new(-0.45, 0.45)).unwrap(), 40);
        assert!(matches!(
            count_window(&h, &Window::new(-2.0, 0.0)),
            Err(AnalysisError::OutOfRange { .. })
        ));
    }

    #[test]
    fn accidentals_from_uniform_background() {
        let mut h = CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, 0.1, (-3.0, 3.0)).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 5);
        let windows = PeakWindows {
            side_early: Window::new(-1.0, -0.5),
            central: Window::new(-0.5, 0.5),
            side_late: Window::new(0.5, 1.0),
            background: vec![Window::new(-3.0, -2.0), Window::new(2.0, 3.0)],
            peak_sigma_ns: 0.1,
            half_width_ns: 0.5,
        };
        // 10 bins of 5 counts
        assert!((estimate_accidentals(&h, &windows).unwrap() - 50.0).abs() < 1e-9);
        let none = PeakWindows {
            background: vec![],
            ..windows
        };
        assert_eq!(estimate_accidentals(&h, &none), Err(AnalysisError::NoBackground));
    }

    fn synthetic_peaks(bg: u64, amp: f64) -> CoincidenceHistogram {
        let mut h = CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap();
        let s = 0.667;
        for i in 0..h.counts.len() {
            let x = h.bin_center(i);
            let g = |c: f64, a: f64| a * (-(x - c).powi(2) / (2.0 * 0.1f64.powi(2))).exp();
            h.counts[i] = bg + (g(-s, amp) + g(0.0, 2.0 * amp) + g(s, amp)).round() as u64;
        }
        h
    }

    #[test]
    fn locates_three_peaks() {
        let h = synthetic_peaks(3, 200.0);
        let w = locate_peaks(&h, 0.667, None).unwrap();
        assert!(w.central.center().abs() <= 0.05);
        assert!((w.side_early.center() + 0.667).abs() <= 0.05);
        assert!((w.side_late.center() - 0.667).abs() <= 0.05);
        assert!((w.peak_sigma_ns - 0.1).abs() < 0.01, "{}", w.peak_sigma_ns);
        assert!(w.side_early.hi_ns <= w.central.lo_ns && w.central.hi_ns <= w.side_late.lo_ns);
        assert!(!w.background.is_empty());
        let r = peak_report(&h, w).unwrap();
        assert!((r.central_to_side_ratio - 2.0).abs() < 0.05);
        assert!((r.accidentals - 3.0 * r.windows.central.width() / 0.05).abs() < 1e-9);
    }

    #[test]
    fn flat_histogram_has_no_peaks() {
        let mut h = CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap();
        h.counts.iter_mut().enumerate().for_each(|(i, c)| *c = 20 + (i as u64 * 7) % 9);
        assert!(matches!(locate_peaks(&h, 0.667, None), Err(AnalysisError::PeaksNotFound { .. })));
        let empty = CoincidenceHistogram::new(DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap();
        assert_eq!(locate_peaks(&empty, 0.667, None), Err(AnalysisError::PeaksNotFound { found: 0 }));
    }

    fn synthetic_fringe(v: f64, phi0: f64, mean: f64, floor: f64) -> Vec<FringePoint> {
        (0..21)
            .map(|k| {
                let phi = TAU * k as f64 / 21.0;
                FringePoint {
                    combined_phase_rad: phi,
                    coincidences: 10.0 * (mean * (1.0 + v * (phi - phi0).cos()) + floor),
                    duration_s: 10.0,
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let fit = fit_fringe(&synthetic_fringe(0.9, 0.3, 50.0, 0.0), 0.0).unwrap();
        assert!((fit.v_raw - 0.9).abs() < 1e-9);
        assert!((fit.v_net - 0.9).abs() < 1e-9);
        assert!((fit.phase_offset_rad - 0.3).abs() < 1e-9);
        assert!((fit.mean_level - 50.0).abs() < 1e-9);
    }

    #[test]
    fn accidental_floor_separates_raw_and_net() {
        // floor of 9.9 % of the mean level
        let mean = 100.0;
        let floor = mean * 0.099 / 0.901;
        let fit = fit_fringe(&synthetic_fringe(0.970, 0.0, mean, floor), floor).unwrap();
        assert!((fit.v_net - 0.970).abs() < 1e-9);
        assert!((fit.v_raw - 0.970 * 0.901).abs() < 1e-9);
        assert!((fit.v_raw - 0.874).abs() < 1e-3);
        assert!(fit.v_net >= fit.v_raw);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let pts = synthetic_fringe(0.5, 0.0, 10.0, 0.0);
        assert!(matches!(fit_fringe(&pts[..4], 0.0), Err(AnalysisError::InsufficientData(_))));
        // only half the circle
        assert!(matches!(fit_fringe(&pts[..10], 0.0), Err(AnalysisError::InsufficientData(_))));
        let zeros: Vec<FringePoint> = pts.iter().map(|p| FringePoint { coincidences: 0.0, ..*p }).collect();
        assert!(matches!(fit_fringe(&zeros, 0.0), Err(AnalysisError::NonConvergence { .. })));
    }

    #[test]
    fn sparse_counts_with_empty_point_converge() {
        let counts = [14.0, 10.0, 6.0, 0.0, 2.0, 5.0, 13.0];
        let pts: Vec<FringePoint> = counts
            .iter()
            .enumerate()
            .map(|(k, &n)| FringePoint {
                combined_phase_rad: TAU * k as f64 / 7.0,
                coincidences: n,
                duration_s: 300.0,
            })
            .collect();
        let fit = fit_fringe(&pts, 0.003).unwrap();
        assert!(fit.v_raw > 0.8 && fit.v_raw <= fit.v_net && fit.v_net <= 1.0);
        assert!(fit.v_raw_err > 0.05);
    }

    #[test]
    fn fringe_csv_round_trip() {
        let pts = synthetic_fringe(0.7, 0.1, 33.3, 1.0);
        let text = fringe_csv(&pts);
        assert_eq!(parse_fringe_csv(&text).unwrap(), pts);
        assert!(parse_fringe_csv("nope\n1,2,3").is_err());
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity_from_visibility(1.0).unwrap(), 1.0);
        assert!((fidelity_from_visibility(0.970).unwrap() - 0.985).abs() < 1e-15);
        assert!((fidelity_from_visibility(0.962).unwrap() - 0.981).abs() < 1e-15);
        assert!(fidelity_from_visibility(1.2).is_err());
    }

    #[test]
    fn bell_examples() {
        let b = bell_parameter(1.0).unwrap();
        assert!((b.s - 2.828).abs() < 1e-3 && b.violation);
        let t = bell_parameter(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((t.s - 2.0).abs() < 1e-12 && !t.violation);
        let p = bell_parameter(0.970).unwrap();
        assert!((p.s - 2.744).abs() < 1e-3 && p.violation);
        assert!(bell_parameter(-0.1).is_err());
    }
}
