//! Dense pure-state simulation for small qubit registers.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so a register
//! labelled `(A, T, B)` stores `|a t b>` at index `4a + 2t + b`.
//!
//! Global phase is never tracked. All observable contracts are phrased over
//! probabilities and post-measurement states up to a global phase.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Amplitude = Complex64;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 8;

/// Tolerance for algebraic identities (normalization, unitarity).
pub const TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("a Bell measurement needs two distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("register of {0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("register needs at least one qubit")]
    Empty,
    #[error("amplitude vector of length {len} is not 2^{num_qubits}")]
    LengthMismatch { len: usize, num_qubits: usize },
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("projectors overlap on qubit {0}")]
    OverlappingProjectors(usize),
    #[error("projection left a degenerate state (norm^2 = {0:e})")]
    Degenerate(f64),
}

/// Role tag carried by each qubit of a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Alice,
    Trent,
    Bob,
    Eve,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Alice => "A",
            Label::Trent => "T",
            Label::Bob => "B",
            Label::Eve => "E",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateName {
    I,
    H,
    X,
    /// X first, then H (operator product `H * X`).
    HX,
}

/// A single-qubit unitary stored as a row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate1Q {
    pub name: GateName,
    pub matrix: [[Complex64; 2]; 2],
}

impl Gate1Q {
    pub fn identity() -> Self {
        Self {
            name: GateName::I,
            matrix: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self {
            name: GateName::H,
            matrix: [[h, h], [h, -h]],
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            name: GateName::X,
            matrix: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    /// Bit flip followed by Hadamard.
    pub fn hadamard_after_x() -> Self {
        let m = mat2_mul(&Self::hadamard().matrix, &Self::pauli_x().matrix);
        Self {
            name: GateName::HX,
            matrix: m,
        }
    }

    pub fn from_name(name: GateName) -> Self {
        match name {
            GateName::I => Self::identity(),
            GateName::H => Self::hadamard(),
            GateName::X => Self::pauli_x(),
            GateName::HX => Self::hadamard_after_x(),
        }
    }

    /// Largest entry of `U U† - I` in absolute value.
    pub fn unitarity_deviation(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    acc += m[r][k] * m[c][k].conj();
                }
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }
}

fn mat2_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Row-major 4x4 matrix acting on an ordered qubit pair `(first, second)`,
/// with `first` as the more significant bit of the local index.
pub type Matrix4 = [[Complex64; 4]; 4];

pub fn unitarity_deviation4(m: &Matrix4) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += m[r][k] * m[c][k].conj();
            }
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((acc - target).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZOutcome {
    Zero,
    One,
}

impl ZOutcome {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            ZOutcome::One
        } else {
            ZOutcome::Zero
        }
    }

    pub fn bit(self) -> bool {
        self == ZOutcome::One
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XOutcome {
    Plus,
    Minus,
}

impl XOutcome {
    pub const ALL: [XOutcome; 2] = [XOutcome::Plus, XOutcome::Minus];

    /// `plus -> 0`, `minus -> 1`.
    pub fn bit(self) -> bool {
        self == XOutcome::Minus
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            XOutcome::Minus
        } else {
            XOutcome::Plus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// Amplitudes over `|00>, |01>, |10>, |11>`.
    pub fn vector(self) -> [Complex64; 4] {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PhiPlus => [s, ZERO, ZERO, s],
            BellOutcome::PhiMinus => [s, ZERO, ZERO, -s],
            BellOutcome::PsiPlus => [ZERO, s, s, ZERO],
            BellOutcome::PsiMinus => [ZERO, s, -s, ZERO],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

/// A rank-deficient projector that the oracle and the samplers understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    Z { qubit: usize, outcome: ZOutcome },
    X { qubit: usize, outcome: XOutcome },
    Bell { first: usize, second: usize, outcome: BellOutcome },
}

impl Projector {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Projector::Z { qubit, .. } | Projector::X { qubit, .. } => vec![qubit],
            Projector::Bell { first, second, .. } => vec![first, second],
        }
    }
}

/// Normalized amplitude vector over `n <= 8` labelled qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Amplitude>,
    labels: Vec<Label>,
}

impl PureState {
    /// `|0...0>` on the given labels.
    pub fn zeros(labels: &[Label]) -> Result<Self, StateError> {
        check_width(labels.len())?;
        let mut amplitudes = vec![ZERO; 1 << labels.len()];
        amplitudes[0] = ONE;
        Ok(Self {
            amplitudes,
            labels: labels.to_vec(),
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Amplitude>, labels: &[Label]) -> Result<Self, StateError> {
        check_width(labels.len())?;
        if amplitudes.len() != 1 << labels.len() {
            return Err(StateError::LengthMismatch {
                len: amplitudes.len(),
                num_qubits: labels.len(),
            });
        }
        let state = Self {
            amplitudes,
            labels: labels.to_vec(),
        };
        let norm = state.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// The tripartite state `(|000> + |111>)/sqrt(2)` on `(A, T, B)`.
    pub fn ghz3() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut amplitudes = vec![ZERO; 8];
        amplitudes[0] = s;
        amplitudes[7] = s;
        Self {
            amplitudes,
            labels: vec![Label::Alice, Label::Trent, Label::Bob],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Index of the first qubit carrying `label`.
    pub fn qubit_of(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, index: usize) -> Result<(), StateError> {
        if index >= self.num_qubits() {
            return Err(StateError::QubitOutOfRange {
                index,
                num_qubits: self.num_qubits(),
            });
        }
        Ok(())
    }

    fn shift(&self, qubit: usize) -> usize {
        self.num_qubits() - 1 - qubit
    }

    /// Tensor a fresh qubit in `single` (a normalized 2-vector) onto the end of the register.
    pub fn append_qubit(&mut self, label: Label, single: [Complex64; 2]) -> Result<usize, StateError> {
        check_width(self.num_qubits() + 1)?;
        let norm = single[0].norm_sqr() + single[1].norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        let mut next = Vec::with_capacity(self.amplitudes.len() * 2);
        for &a in &self.amplitudes {
            next.push(a * single[0]);
            next.push(a * single[1]);
        }
        self.amplitudes = next;
        self.labels.push(label);
        Ok(self.num_qubits() - 1)
    }

    pub fn apply_gate(&mut self, gate: &Gate1Q, target: usize) -> Result<(), StateError> {
        self.check_qubit(target)?;
        let mask = 1 << self.shift(target);
        let m = &gate.matrix;
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[j];
            self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    /// Apply a 4x4 matrix to the ordered pair `(first, second)`.
    pub fn apply_two_qubit(&mut self, matrix: &Matrix4, first: usize, second: usize) -> Result<(), StateError> {
        self.check_qubit(first)?;
        self.check_qubit(second)?;
        if first == second {
            return Err(StateError::SameQubit(first));
        }
        let m1 = 1 << self.shift(first);
        let m2 = 1 << self.shift(second);
        for base in 0..self.amplitudes.len() {
            if base & (m1 | m2) != 0 {
                continue;
            }
            let idx = [base, base | m2, base | m1, base | m1 | m2];
            let v = idx.map(|i| self.amplitudes[i]);
            for (r, &i) in idx.iter().enumerate() {
                self.amplitudes[i] = (0..4).map(|c| matrix[r][c] * v[c]).sum();
            }
        }
        Ok(())
    }

    /// Project onto `projector` without renormalizing.
    pub fn project(&mut self, projector: &Projector) -> Result<(), StateError> {
        match *projector {
            Projector::Z { qubit, outcome } => {
                self.check_qubit(qubit)?;
                let mask = 1 << self.shift(qubit);
                let keep = if outcome.bit() { mask } else { 0 };
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask != keep {
                        *a = ZERO;
                    }
                }
            }
            Projector::X { qubit, outcome } => {
                let h = Gate1Q::hadamard();
                self.apply_gate(&h, qubit)?;
                self.project(&Projector::Z {
                    qubit,
                    outcome: ZOutcome::from_bit(outcome.bit()),
                })?;
                self.apply_gate(&h, qubit)?;
            }
            Projector::Bell { first, second, outcome } => {
                self.check_qubit(first)?;
                self.check_qubit(second)?;
                if first == second {
                    return Err(StateError::SameQubit(first));
                }
                let bell = outcome.vector();
                let m1 = 1 << self.shift(first);
                let m2 = 1 << self.shift(second);
                for base in 0..self.amplitudes.len() {
                    if base & (m1 | m2) != 0 {
                        continue;
                    }
                    let idx = [base, base | m2, base | m1, base | m1 | m2];
                    let overlap: Complex64 = (0..4).map(|k| bell[k].conj() * self.amplitudes[idx[k]]).sum();
                    for k in 0..4 {
                        self.amplitudes[idx[k]] = overlap * bell[k];
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact Born probability of `projector`.
    pub fn probability_of(&self, projector: &Projector) -> Result<f64, StateError> {
        self.joint_probability(std::slice::from_ref(projector))
    }

    /// Exact probability that every projector in `projectors` fires.
    /// The projectors must act on pairwise disjoint qubits.
    pub fn joint_probability(&self, projectors: &[Projector]) -> Result<f64, StateError> {
        let mut seen = vec![false; self.num_qubits()];
        for p in projectors {
            for q in p.qubits() {
                self.check_qubit(q)?;
                if seen[q] {
                    return Err(StateError::OverlappingProjectors(q));
                }
                seen[q] = true;
            }
        }
        let mut scratch = self.clone();
        for p in projectors {
            scratch.project(p)?;
        }
        Ok(scratch.norm_sqr().clamp(0.0, 1.0))
    }

    fn renormalize(&mut self) -> Result<(), StateError> {
        let n = self.norm_sqr();
        if !(n > TOLERANCE * TOLERANCE) || !n.is_finite() {
            return Err(StateError::Degenerate(n));
        }
        let scale = 1.0 / n.sqrt();
        for a in &mut self.amplitudes {
            *a *= scale;
        }
        Ok(())
    }

    /// Sample one projector from a complete family, collapse and renormalize.
    fn measure_family<R: Rng + ?Sized>(&mut self, family: &[Projector], rng: &mut R) -> Result<usize, StateError> {
        let mut probs = Vec::with_capacity(family.len());
        for p in family {
            probs.push(self.probability_of(p)?);
        }
        let total: f64 = probs.iter().sum();
        let draw = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (k, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            chosen = Some(k);
            if draw < acc {
                break;
            }
        }
        let k = chosen.ok_or(StateError::Degenerate(total))?;
        self.project(&family[k])?;
        self.renormalize()?;
        Ok(k)
    }

    pub fn measure_z<R: Rng + ?Sized>(&mut self, target: usize, rng: &mut R) -> Result<ZOutcome, StateError> {
        self.check_qubit(target)?;
        let family = [ZOutcome::Zero, ZOutcome::One].map(|outcome| Projector::Z { qubit: target, outcome });
        let k = self.measure_family(&family, rng)?;
        Ok(ZOutcome::from_bit(k == 1))
    }

    pub fn measure_x<R: Rng + ?Sized>(&mut self, target: usize, rng: &mut R) -> Result<XOutcome, StateError> {
        self.check_qubit(target)?;
        let family = XOutcome::ALL.map(|outcome| Projector::X { qubit: target, outcome });
        let k = self.measure_family(&family, rng)?;
        Ok(XOutcome::ALL[k])
    }

    pub fn measure_bell<R: Rng + ?Sized>(
        &mut self,
        first: usize,
        second: usize,
        rng: &mut R,
    ) -> Result<BellOutcome, StateError> {
        self.check_qubit(first)?;
        self.check_qubit(second)?;
        if first == second {
            return Err(StateError::SameQubit(first));
        }
        let family = BellOutcome::ALL.map(|outcome| Projector::Bell { first, second, outcome });
        let k = self.measure_family(&family, rng)?;
        Ok(BellOutcome::ALL[k])
    }

    /// `|<self|other>|`, which is 1 exactly when the states agree up to global phase.
    pub fn fidelity_amplitude(&self, other: &PureState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    /// Largest amplitude-wise difference after aligning global phase to `other`.
    pub fn distance_up_to_phase(&self, other: &PureState) -> f64 {
        if self.amplitudes.len() != other.amplitudes.len() {
            return f64::INFINITY;
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}

fn check_width(n: usize) -> Result<(), StateError> {
    if n == 0 {
        return Err(StateError::Empty);
    }
    if n > MAX_QUBITS {
        return Err(StateError::TooManyQubits(n));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Full 2^n x 2^n matrix of a single-qubit gate, built by Kronecker products.
    fn kron_gate(gate: &Gate1Q, target: usize, n: usize) -> Vec<Vec<Complex64>> {
        let dim = 1 << n;
        let mut out = vec![vec![ZERO; dim]; dim];
        for (r, row) in out.iter_mut().enumerate() {
            for (col, cell) in row.iter_mut().enumerate() {
                let mut v = ONE;
                for q in 0..n {
                    let shift = n - 1 - q;
                    let rb = (r >> shift) & 1;
                    let cb = (col >> shift) & 1;
                    v *= if q == target {
                        gate.matrix[rb][cb]
                    } else if rb == cb {
                        ONE
                    } else {
                        ZERO
                    };
                }
                *cell = v;
            }
        }
        out
    }

    #[test]
    fn ghz_amplitudes() {
        let g = PureState::ghz3();
        let s = FRAC_1_SQRT_2;
        for (i, a) in g.amplitudes().iter().enumerate() {
            let want = if i == 0 || i == 7 { s } else { 0.0 };
            assert!((a - c(want)).norm() < TOLERANCE);
        }
        assert_eq!(g.labels(), &[Label::Alice, Label::Trent, Label::Bob]);
    }

    #[test]
    fn hadamard_on_alice_of_ghz() {
        let mut g = PureState::ghz3();
        g.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
        let mut want = [ZERO; 8];
        want[0b000] = c(0.5);
        want[0b100] = c(0.5);
        want[0b011] = c(0.5);
        want[0b111] = c(-0.5);
        for (a, w) in g.amplitudes().iter().zip(want) {
            assert!((a - w).norm() < TOLERANCE);
        }
    }

    #[test]
    fn gate_agrees_with_dense_matrix_on_basis_states() {
        let gates = [Gate1Q::identity(), Gate1Q::hadamard(), Gate1Q::pauli_x(), Gate1Q::hadamard_after_x()];
        let labels = [Label::Alice, Label::Trent, Label::Bob];
        for gate in &gates {
            for target in 0..3 {
                let dense = kron_gate(gate, target, 3);
                for basis in 0..8 {
                    let mut amps = vec![ZERO; 8];
                    amps[basis] = ONE;
                    let mut s = PureState::from_amplitudes(amps, &labels).unwrap();
                    s.apply_gate(gate, target).unwrap();
                    for r in 0..8 {
                        assert!((s.amplitudes()[r] - dense[r][basis]).norm() < TOLERANCE);
                    }
                }
            }
        }
    }

    #[test]
    fn hx_is_x_then_h() {
        let mut a = PureState::zeros(&[Label::Alice]).unwrap();
        a.apply_gate(&Gate1Q::hadamard_after_x(), 0).unwrap();
        let mut b = PureState::zeros(&[Label::Alice]).unwrap();
        b.apply_gate(&Gate1Q::pauli_x(), 0).unwrap();
        b.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
        assert!(a.distance_up_to_phase(&b) < TOLERANCE);
        // H X |0> = H |1> = |->
        assert!((a.amplitudes()[1] - c(-FRAC_1_SQRT_2)).norm() < TOLERANCE);
    }

    #[test]
    fn x_flips_zero() {
        let mut s = PureState::zeros(&[Label::Bob]).unwrap();
        s.apply_gate(&Gate1Q::pauli_x(), 0).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ONE]);
    }

    #[test]
    fn out_of_range_and_same_qubit() {
        let mut g = PureState::ghz3();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            g.apply_gate(&Gate1Q::hadamard(), 3),
            Err(StateError::QubitOutOfRange { index: 3, num_qubits: 3 })
        ));
        assert_eq!(g.measure_bell(1, 1, &mut rng), Err(StateError::SameQubit(1)));
        assert!(g.probability_of(&Projector::Z { qubit: 9, outcome: ZOutcome::Zero }).is_err());
        assert!(PureState::zeros(&[Label::Eve; 9]).is_err());
    }

    #[test]
    fn oracle_examples() {
        let g = PureState::ghz3();
        let p = g.probability_of(&Projector::Z { qubit: 0, outcome: ZOutcome::Zero }).unwrap();
        assert!((p - 0.5).abs() < TOLERANCE);
        let p = g
            .probability_of(&Projector::Bell { first: 0, second: 2, outcome: BellOutcome::PhiPlus })
            .unwrap();
        assert!((p - 0.5).abs() < TOLERANCE);
        let zero = PureState::zeros(&[Label::Alice, Label::Trent, Label::Bob]).unwrap();
        let p = zero
            .probability_of(&Projector::Bell { first: 0, second: 2, outcome: BellOutcome::PsiPlus })
            .unwrap();
        assert!(p.abs() < TOLERANCE);
        let overlap = [
            Projector::Z { qubit: 0, outcome: ZOutcome::Zero },
            Projector::Bell { first: 0, second: 1, outcome: BellOutcome::PhiPlus },
        ];
        assert_eq!(g.joint_probability(&overlap), Err(StateError::OverlappingProjectors(0)));
    }

    #[test]
    fn ghz_collapse_is_correlated() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = PureState::ghz3();
            let a = g.measure_z(0, &mut rng).unwrap();
            let t = g.measure_z(1, &mut rng).unwrap();
            let b = g.measure_z(2, &mut rng).unwrap();
            assert_eq!(a, t);
            assert_eq!(t, b);
            assert!((g.norm_sqr() - 1.0).abs() < TOLERANCE);
        }
    }

    #[test]
    fn eigenstates_measure_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut one = PureState::zeros(&[Label::Alice]).unwrap();
        one.apply_gate(&Gate1Q::pauli_x(), 0).unwrap();
        for _ in 0..20 {
            assert_eq!(one.measure_z(0, &mut rng).unwrap(), ZOutcome::One);
        }
        let mut plus = PureState::zeros(&[Label::Alice]).unwrap();
        plus.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
        for _ in 0..20 {
            assert_eq!(plus.measure_x(0, &mut rng).unwrap(), XOutcome::Plus);
        }
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut phi =
            PureState::from_amplitudes(vec![s, ZERO, ZERO, ZERO, ZERO, ZERO, s, ZERO], &[Label::Alice, Label::Bob, Label::Trent])
                .unwrap();
        for _ in 0..20 {
            assert_eq!(phi.measure_bell(0, 1, &mut rng).unwrap(), BellOutcome::PhiPlus);
        }
    }

    #[test]
    fn born_frequency_of_plus_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut zeros = 0usize;
        let shots = 10_000;
        for _ in 0..shots {
            let mut s = PureState::zeros(&[Label::Alice]).unwrap();
            s.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
            if s.measure_z(0, &mut rng).unwrap() == ZOutcome::Zero {
                zeros += 1;
            }
        }
        let f = zeros as f64 / shots as f64;
        assert!((f - 0.5).abs() < 0.02, "frequency {f}");
    }

    #[test]
    fn x_measurement_matches_basis_change() {
        // measure_x on |0> is H followed by a z measurement; both are uniform.
        let zero = PureState::zeros(&[Label::Trent]).unwrap();
        for outcome in XOutcome::ALL {
            let p = zero.probability_of(&Projector::X { qubit: 0, outcome }).unwrap();
            let mut h = zero.clone();
            h.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
            let q = h
                .probability_of(&Projector::Z { qubit: 0, outcome: ZOutcome::from_bit(outcome.bit()) })
                .unwrap();
            assert!((p - 0.5).abs() < TOLERANCE);
            assert!((p - q).abs() < TOLERANCE);
        }
    }

    #[test]
    fn bell_after_hadamard_is_uniform() {
        let mut g = PureState::ghz3();
        g.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
        for outcome in BellOutcome::ALL {
            let p = g.probability_of(&Projector::Bell { first: 0, second: 2, outcome }).unwrap();
            assert!((p - 0.25).abs() < TOLERANCE);
        }
    }

    #[test]
    fn append_qubit_tensors_on_the_right() {
        let mut g = PureState::ghz3();
        let e = g.append_qubit(Label::Eve, [ONE, ZERO]).unwrap();
        assert_eq!(e, 3);
        assert_eq!(g.amplitudes().len(), 16);
        assert!((g.amplitudes()[0b0000] - c(FRAC_1_SQRT_2)).norm() < TOLERANCE);
        assert!((g.amplitudes()[0b1110] - c(FRAC_1_SQRT_2)).norm() < TOLERANCE);
        assert_eq!(g.qubit_of(Label::Eve), Some(3));
    }

    #[test]
    fn builtin_gates_are_unitary() {
        for name in [GateName::I, GateName::H, GateName::X, GateName::HX] {
            assert!(Gate1Q::from_name(name).unitarity_deviation() < TOLERANCE);
        }
    }
}
