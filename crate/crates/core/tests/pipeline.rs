//! Simulation and analysis working together.

use std::f64::consts::TAU;

use photonlink_core::analysis::{
    bell_parameter, build_histogram, count_window, fidelity_from_visibility, fit_fringe,
    locate_peaks, FringePoint,
};
use photonlink_core::config::{preset, Preset};
use photonlink_core::events_io::{events_to_string, read_events};
use photonlink_core::sim::{merge, simulate, DetectorId, Origin};
use proptest::prelude::*;

fn hist(s: &photonlink_core::sim::EventStream) -> photonlink_core::analysis::CoincidenceHistogram {
    build_histogram(s, DetectorId::Bob, DetectorId::Alice, 0.05, (-3.0, 3.0)).unwrap()
}

#[test]
fn histogram_of_merged_shards_is_the_sum() {
    let cfg = preset(Preset::Fig2Baseline);
    let mut a_cfg = cfg.sim_config_with_duration(5.0);
    a_cfg.seed = 1;
    let mut b_cfg = a_cfg.clone();
    b_cfg.seed = 2;
    let (a, b) = (simulate(&a_cfg).unwrap(), simulate(&b_cfg).unwrap());
    // the same window in two independent runs: their union interleaves, so
    // compare against disjoint-time shards instead
    let mut shifted = b.clone();
    for e in &mut shifted.events {
        e.time_ns += 10e9;
    }
    let m = merge(&a, &shifted).unwrap();
    let mut sum = hist(&a);
    sum.add(&hist(&b)).unwrap();
    assert_eq!(hist(&m), sum);
}

#[test]
fn peaks_sit_at_the_imbalance_delay() {
    let cfg = preset(Preset::Fig2Baseline);
    let s = simulate(&cfg.sim_config_with_duration(200.0)).unwrap();
    let h = hist(&s);
    let w = locate_peaks(&h, cfg.chain.peak_spacing_ns(), None).unwrap();
    assert!((cfg.chain.peak_spacing_ns() - 0.667).abs() < 1e-3);
    assert!(w.central.center().abs() <= 0.05);
    assert!((w.side_early.center() + 0.667).abs() <= 0.05, "{:?}", w.side_early);
    assert!((w.side_late.center() - 0.667).abs() <= 0.05, "{:?}", w.side_late);
}

#[test]
fn destructive_setting_leaves_only_accidentals() {
    let mut cfg = preset(Preset::Fig2Baseline);
    cfg.chain.bob_interferometer.phase_rad = std::f64::consts::PI;
    cfg.chain.alice_detector.dark_prob_per_ns = 0.0;
    cfg.chain.bob_detector.dark_prob_per_ns = 0.0;
    let mut sim = cfg.sim_config_with_duration(100.0);
    sim.visibility = 1.0;
    let s = simulate(&sim).unwrap();
    let h = hist(&s);
    let w = locate_peaks(&h, cfg.chain.peak_spacing_ns(), None);
    // with no central peak, only the side peaks are significant
    assert!(w.is_err());
    let central = photonlink_core::analysis::Window::new(-0.3, 0.3);
    let photons_only = hist(&s.filter_origin(Origin::Photon));
    // only multi-pair accidentals can land here
    let n = count_window(&photons_only, &central).unwrap();
    let side = count_window(&photons_only, &photonlink_core::analysis::Window::new(0.35, 1.0)).unwrap();
    assert!(n * 50 < side, "central {n}, side {side}");
}

#[test]
fn event_file_round_trip_for_transfer_run() {
    let cfg = preset(Preset::Fig3Transfer);
    let s = simulate(&cfg.sim_config_with_duration(1.0)).unwrap();
    let text = events_to_string(&s);
    assert_eq!(read_events(text.as_bytes()).unwrap(), s);
}

#[test]
fn noiseless_fit_oracle() {
    for v in [0.0, 0.25, 0.5, 0.87, 0.97, 1.0] {
        for phi0 in [0.0, 1.0, -2.5] {
            let points: Vec<FringePoint> = (0..21)
                .map(|k| {
                    let phi = TAU * k as f64 / 21.0;
                    FringePoint {
                        combined_phase_rad: phi,
                        coincidences: 300.0 * (1.0 + v * (phi - phi0).cos()),
                        duration_s: 3.0,
                    }
                })
                .collect();
            let fit = fit_fringe(&points, 0.0).unwrap();
            assert!((fit.v_raw - v).abs() < 1e-9, "v={v}: {}", fit.v_raw);
            assert_eq!(fit.v_raw, fit.v_net);
            if v > 0.0 {
                let d = (fit.phase_offset_rad - phi0 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                assert!(d.abs() < 1e-9, "phi0={phi0}: {}", fit.phase_offset_rad);
            }
        }
    }
}

proptest! {
    #[test]
    fn net_visibility_never_below_raw(v in 0.0..0.95f64, frac in 0.0..0.5f64, phi0 in -3.0..3.0f64) {
        let floor = 100.0 * frac;
        let points: Vec<FringePoint> = (0..9)
            .map(|k| {
                let phi = TAU * k as f64 / 9.0;
                FringePoint {
                    combined_phase_rad: phi,
                    coincidences: 100.0 * (1.0 + v * (phi - phi0).cos()) + floor,
                    duration_s: 1.0,
                }
            })
            .collect();
        let fit = fit_fringe(&points, floor).unwrap();
        prop_assert!(fit.v_net >= fit.v_raw);
        prop_assert!((fit.v_net - v).abs() < 1e-9);
    }

    #[test]
    fn reporting_functions_increase(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        prop_assume!(a < b);
        prop_assert!(fidelity_from_visibility(a).unwrap() < fidelity_from_visibility(b).unwrap());
        prop_assert!(bell_parameter(a).unwrap().s < bell_parameter(b).unwrap().s);
    }
}
