//! Closed-form transfer evolution against a numerically exponentiated
//! Hamiltonian, plus algebraic properties of the transfer.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::DMatrix;
use photonlink_core::quantum::{
    evolve_transfer, hamiltonian_matrix, make_entangled_input, post_select_transfer,
    transfer_fidelity, CouplingPair,
};
use photonlink_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expm_evolve(h: &DMatrix<Complex64>, psi: &nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
    let minus_i = Complex64::new(0.0, -1.0);
    (h.map(|x| x * minus_i)).exp() * psi
}

fn random_schmidt(rng: &mut impl Rng) -> (Complex64, Complex64) {
    let theta: f64 = rng.random::<f64>() * FRAC_PI_2;
    let (p1, p2): (f64, f64) = (rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI);
    (Complex64::from_polar(theta.cos(), p1), Complex64::from_polar(theta.sin(), p2))
}

fn random_coupling(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI)
}

#[test]
fn closed_form_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let (c1, c2) = random_schmidt(&mut rng);
        let pair = CouplingPair::new(random_coupling(&mut rng), random_coupling(&mut rng));
        let psi = make_entangled_input(c1, c2).unwrap();
        let closed = evolve_transfer(&psi, &pair).to_vector();
        let numeric = expm_evolve(&hamiltonian_matrix(&pair), &psi.to_vector());
        worst = worst.max((closed - numeric).camax());
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn zero_coupling_is_identity() {
    let psi = make_entangled_input(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
    let out = evolve_transfer(&psi, &CouplingPair::equal(Complex64::new(0.0, 0.0)));
    assert_eq!(out, psi);
}

#[test]
fn hamiltonian_is_hermitian() {
    let pair = CouplingPair::new(Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.4));
    let h = hamiltonian_matrix(&pair);
    assert_eq!(h.adjoint(), h);
}

proptest! {
    #[test]
    fn evolution_preserves_norm_and_excitation(
        theta in 0.0..FRAC_PI_2, p in 0.0..(2.0 * PI),
        m1 in 0.0..4.0f64, a1 in 0.0..(2.0 * PI), m2 in 0.0..4.0f64, a2 in 0.0..(2.0 * PI),
    ) {
        let psi = make_entangled_input(
            Complex64::new(theta.cos(), 0.0),
            Complex64::from_polar(theta.sin(), p),
        ).unwrap();
        let out = evolve_transfer(&psi, &CouplingPair::new(Complex64::from_polar(m1, a1), Complex64::from_polar(m2, a2)));
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((out.transferred_weight() + out.untransferred_weight() - 1.0).abs() < 1e-12);
        prop_assert!(out.is_single_excitation());
    }

    #[test]
    fn fidelity_is_a_probability(
        m1 in 0.05..1.5f64, a1 in 0.0..(2.0 * PI), m2 in 0.05..1.5f64, a2 in 0.0..(2.0 * PI),
    ) {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let psi = make_entangled_input(h, h).unwrap();
        let pair = CouplingPair::new(Complex64::from_polar(m1, a1), Complex64::from_polar(m2, a2));
        let outcome = post_select_transfer(&evolve_transfer(&psi, &pair)).unwrap();
        let f = transfer_fidelity(&outcome, h, h).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        // conditional amplitudes ∝ g_j sin|g_j|/|g_j|, so F = |k1 + k2|² / (2(|k1|² + |k2|²))
        let k = |m: f64, a: f64| Complex64::from_polar(m.sin(), a);
        let (k1, k2) = (k(m1, a1), k(m2, a2));
        let expected = (k1 + k2).norm_sqr() / (2.0 * (k1.norm_sqr() + k2.norm_sqr()));
        prop_assert!((f - expected).abs() < 1e-12);
    }
}
