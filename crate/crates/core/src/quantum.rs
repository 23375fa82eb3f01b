//! Exact finite-dimensional algebra for the qubit transfer.
//!
//! The joint Hilbert space is Alice's qubit `A` (two time bins) times Bob's
//! input mode `B` and output mode `B'`, each of which holds either vacuum or a
//! single photon in one of two bins. Basis order is fixed A-major, then B,
//! then B': index = `a * 9 + b * 3 + b'` with `a ∈ {0,1}` meaning bin1/bin2
//! and `b, b' ∈ {0,1,2}` meaning vacuum/bin1/bin2.
//!
//! The interaction time is fixed at one unit; couplings absorb the duration.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Dimension of the A ⊗ B ⊗ B' space.
pub const JOINT_DIM: usize = 18;

const NORM_TOL: f64 = 1e-9;
const EMPTY_SECTOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("amplitudes are not normalized: |c1|^2 + |c2|^2 = {0}")]
    NonNormalized(f64),
    #[error("post-selected sector is empty (weight {0:e})")]
    EmptySector(f64),
    #[error("visibility {0} outside [0, 1]")]
    VisibilityRange(f64),
    #[error("degenerate contrast: p_max + p_min = 0")]
    Degenerate,
    #[error("invalid contrast inputs: p_max = {p_max}, p_min = {p_min}")]
    InvalidContrast { p_max: f64, p_min: f64 },
}

/// Time-bin label: `Bin1` is the early / short-arm bin, `Bin2` the late / long-arm bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinLabel {
    Bin1,
    Bin2,
}

impl BinLabel {
    pub const ALL: [BinLabel; 2] = [BinLabel::Bin1, BinLabel::Bin2];

    fn index(self) -> usize {
        match self {
            BinLabel::Bin1 => 0,
            BinLabel::Bin2 => 1,
        }
    }
}

/// Occupation of one of Bob's modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Vacuum,
    Photon(BinLabel),
}

impl Mode {
    fn index(self) -> usize {
        match self {
            Mode::Vacuum => 0,
            Mode::Photon(bin) => 1 + bin.index(),
        }
    }

    fn from_index(i: usize) -> Mode {
        match i {
            0 => Mode::Vacuum,
            1 => Mode::Photon(BinLabel::Bin1),
            _ => Mode::Photon(BinLabel::Bin2),
        }
    }
}

/// Index of the basis element |alice⟩_A |bob⟩_B |out⟩_B'.
pub fn basis_index(alice: BinLabel, bob: Mode, out: Mode) -> usize {
    alice.index() * 9 + bob.index() * 3 + out.index()
}

/// Human-readable label of a basis index, e.g. `a1,b1,0`.
pub fn basis_label(index: usize) -> String {
    let a = index / 9 + 1;
    let mode = |m: Mode, prefix: &str| match m {
        Mode::Vacuum => "0".to_string(),
        Mode::Photon(b) => format!("{prefix}{}", b.index() + 1),
    };
    let b = Mode::from_index((index / 3) % 3);
    let o = Mode::from_index(index % 3);
    format!("a{a},{},{}", mode(b, "b"), mode(o, "b'"))
}

/// Pure state on A ⊗ B ⊗ B'.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    amps: [Complex64; JOINT_DIM],
}

impl JointState {
    pub fn amplitudes(&self) -> &[Complex64; JOINT_DIM] {
        &self.amps
    }

    pub fn amplitude(&self, alice: BinLabel, bob: Mode, out: Mode) -> Complex64 {
        self.amps[basis_index(alice, bob, out)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &JointState) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Weight of basis elements where Bob's input mode is empty, i.e. the photon sits in B'.
    pub fn transferred_weight(&self) -> f64 {
        self.sector_weight(|bob, _| bob == Mode::Vacuum)
    }

    /// Weight of basis elements where the photon is still in B.
    pub fn untransferred_weight(&self) -> f64 {
        self.sector_weight(|bob, _| bob != Mode::Vacuum)
    }

    fn sector_weight(&self, keep: impl Fn(Mode, Mode) -> bool) -> f64 {
        (0..JOINT_DIM)
            .filter(|&i| keep(Mode::from_index((i / 3) % 3), Mode::from_index(i % 3)))
            .map(|i| self.amps[i].norm_sqr())
            .sum()
    }

    /// True when every populated basis element has exactly one of B, B' occupied.
    pub fn is_single_excitation(&self) -> bool {
        (0..JOINT_DIM).all(|i| {
            let b = (i / 3) % 3;
            let o = i % 3;
            self.amps[i] == Complex64::new(0.0, 0.0) || ((b == 0) != (o == 0))
        })
    }

    /// Column vector view in the documented basis order.
    pub fn to_vector(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(JOINT_DIM, self.amps.iter().copied())
    }
}

/// Input state: `(c1 |α1⟩|β1⟩ + c2 |α2⟩|β2⟩) ⊗ |0⟩_B'`.
pub fn make_entangled_input(c1: Complex64, c2: Complex64) -> Result<JointState, QuantumError> {
    let norm = c1.norm_sqr() + c2.norm_sqr();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
        return Err(QuantumError::NonNormalized(norm));
    }
    let mut amps = [Complex64::new(0.0, 0.0); JOINT_DIM];
    amps[basis_index(BinLabel::Bin1, Mode::Photon(BinLabel::Bin1), Mode::Vacuum)] = c1;
    amps[basis_index(BinLabel::Bin2, Mode::Photon(BinLabel::Bin2), Mode::Vacuum)] = c2;
    Ok(JointState { amps })
}

/// Ideal post-transfer state: `|0⟩_B ⊗ (c1 |α1⟩|β'1⟩ + c2 |α2⟩|β'2⟩)`.
pub fn transfer_target(c1: Complex64, c2: Complex64) -> Result<JointState, QuantumError> {
    let norm = c1.norm_sqr() + c2.norm_sqr();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
        return Err(QuantumError::NonNormalized(norm));
    }
    let mut amps = [Complex64::new(0.0, 0.0); JOINT_DIM];
    amps[basis_index(BinLabel::Bin1, Mode::Vacuum, Mode::Photon(BinLabel::Bin1))] = c1;
    amps[basis_index(BinLabel::Bin2, Mode::Vacuum, Mode::Photon(BinLabel::Bin2))] = c2;
    Ok(JointState { amps })
}

/// Complex couplings of the two bins in the transfer Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPair {
    pub g1: Complex64,
    pub g2: Complex64,
}

impl CouplingPair {
    pub fn new(g1: Complex64, g2: Complex64) -> Self {
        Self { g1, g2 }
    }

    /// Both bins share one coupling, the coherent-reservoir case.
    pub fn equal(g: Complex64) -> Self {
        Self { g1: g, g2: g }
    }

    pub fn get(&self, bin: BinLabel) -> Complex64 {
        match bin {
            BinLabel::Bin1 => self.g1,
            BinLabel::Bin2 => self.g2,
        }
    }
}

/// Matrix of `1_A ⊗ Σ_j g_j |0⟩⟨β_j| ⊗ |β'_j⟩⟨0| + h.c.` in the documented basis.
pub fn hamiltonian_matrix(couplings: &CouplingPair) -> DMatrix<Complex64> {
    let mut h = DMatrix::from_element(JOINT_DIM, JOINT_DIM, Complex64::new(0.0, 0.0));
    for alice in BinLabel::ALL {
        for bin in BinLabel::ALL {
            let g = couplings.get(bin);
            let from = basis_index(alice, Mode::Photon(bin), Mode::Vacuum);
            let to = basis_index(alice, Mode::Vacuum, Mode::Photon(bin));
            h[(to, from)] = g;
            h[(from, to)] = g.conj();
        }
    }
    h
}

/// `sin|g| / |g| * g`, with the analytic limit at `g = 0`.
fn transfer_factor(g: Complex64) -> Complex64 {
    let mag = g.norm();
    if mag == 0.0 {
        // sin|g|/|g| -> 1, times g = 0
        return Complex64::new(0.0, 0.0);
    }
    g * (mag.sin() / mag)
}

/// Closed-form `exp(-iH)|state⟩`.
///
/// Each coupled pair `|β_j,0⟩ ↔ |0,β'_j⟩` rotates as a two-level system:
/// the B amplitude picks up `cos|g_j|` and feeds `-i g_j sin|g_j|/|g_j|` into B',
/// and conversely with `g_j*`. Everything else is left untouched.
pub fn evolve_transfer(state: &JointState, couplings: &CouplingPair) -> JointState {
    let mut amps = state.amps;
    let minus_i = Complex64::new(0.0, -1.0);
    for alice in BinLabel::ALL {
        for bin in BinLabel::ALL {
            let g = couplings.get(bin);
            let cos = g.norm().cos();
            let k = transfer_factor(g);
            let u = basis_index(alice, Mode::Photon(bin), Mode::Vacuum);
            let w = basis_index(alice, Mode::Vacuum, Mode::Photon(bin));
            let (au, aw) = (state.amps[u], state.amps[w]);
            amps[u] = au * cos + minus_i * k.conj() * aw;
            amps[w] = aw * cos + minus_i * k * au;
        }
    }
    JointState { amps }
}

/// Result of projecting onto the B-vacuum (transferred) sector.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutcome {
    pub probability: f64,
    pub conditional_state: JointState,
}

pub fn post_select_transfer(state: &JointState) -> Result<TransferOutcome, QuantumError> {
    let probability = state.transferred_weight();
    if probability < EMPTY_SECTOR {
        return Err(QuantumError::EmptySector(probability));
    }
    let scale = 1.0 / probability.sqrt();
    let mut amps = [Complex64::new(0.0, 0.0); JOINT_DIM];
    for (i, amp) in amps.iter_mut().enumerate() {
        if (i / 3) % 3 == 0 {
            *amp = state.amps[i] * scale;
        }
    }
    Ok(TransferOutcome {
        probability,
        conditional_state: JointState { amps },
    })
}

/// Transfer probability `sin²|g|` for equal couplings.
pub fn transfer_success_probability(g: Complex64) -> f64 {
    g.norm().sin().powi(2)
}

/// `|⟨target|conditional⟩|²` against the ideal transferred state for `(c1, c2)`.
pub fn transfer_fidelity(
    outcome: &TransferOutcome,
    c1: Complex64,
    c2: Complex64,
) -> Result<f64, QuantumError> {
    if outcome.probability < EMPTY_SECTOR {
        return Err(QuantumError::EmptySector(outcome.probability));
    }
    let target = transfer_target(c1, c2)?;
    Ok(target.inner(&outcome.conditional_state).norm_sqr().min(1.0))
}

/// Two-photon time-bin state over `|s_A s_B⟩, |s_A l_B⟩, |l_A s_B⟩, |l_A l_B⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBinPairState {
    amps: [Complex64; 4],
}

impl TimeBinPairState {
    pub const SS: usize = 0;
    pub const SL: usize = 1;
    pub const LS: usize = 2;
    pub const LL: usize = 3;

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn overlap(&self, other: &TimeBinPairState) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// `(|s_A s_B⟩ + e^{i(φ_A+φ_B)} |l_A l_B⟩) / √2`.
pub fn post_selected_timebin_state(phi_a: f64, phi_b: f64) -> TimeBinPairState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = [Complex64::new(0.0, 0.0); 4];
    amps[TimeBinPairState::SS] = Complex64::new(h, 0.0);
    amps[TimeBinPairState::LL] = Complex64::from_polar(h, phi_a + phi_b);
    TimeBinPairState { amps }
}

/// Per emitted pair, probability of a central-peak coincidence at the monitored
/// ports of two lossless Michelson analyzers: `(1 + V cos φ) / 8`.
pub fn coincidence_probability(phi_sum: f64, visibility: f64) -> Result<f64, QuantumError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(QuantumError::VisibilityRange(visibility));
    }
    Ok(0.125 * (1.0 + visibility * phi_sum.cos()))
}

/// Probability of each distinguishable side peak (`s_A l_B` or `l_A s_B`).
pub const SIDE_PEAK_PROBABILITY: f64 = 0.0625;

/// Contrast `(p_max - p_min) / (p_max + p_min)`.
pub fn visibility(p_max: f64, p_min: f64) -> Result<f64, QuantumError> {
    if p_max + p_min == 0.0 {
        return Err(QuantumError::Degenerate);
    }
    if p_min < 0.0 || p_max < p_min || !p_max.is_finite() {
        return Err(QuantumError::InvalidContrast { p_max, p_min });
    }
    Ok((p_max - p_min) / (p_max + p_min))
}
