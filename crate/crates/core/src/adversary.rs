//! Eavesdropper models that attach to the quantum channel hooks.
//!
//! Every attack is per-qubit: Eve either measures the transiting qubit and
//! forwards it, or couples it to a fresh single-qubit ancilla that she keeps
//! until the honest parties measure the triple.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Channel, ChannelHook};
use crate::statevector::{unitarity_deviation4, Label, Matrix4, Projector, PureState, StateError, TOLERANCE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A single-qubit state `(a, b) = a|0> + b|1>`.
pub type Qubit = [Complex64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("|alpha|^2 + |beta|^2 = {0}, expected 1")]
    FirstRowNorm(f64),
    #[error("|alpha'|^2 + |beta'|^2 = {0}, expected 1")]
    SecondRowNorm(f64),
    #[error("alpha beta* + alpha'* beta' = {0}, expected 0")]
    CrossTerm(Complex64),
    #[error("ancilla state {0} is not normalized")]
    AncillaNorm(&'static str),
    #[error("the two specified output columns are not orthonormal (overlap {0:e})")]
    NotIsometric(f64),
    #[error("completed map deviates from unitary by {0:e}")]
    NotUnitary(f64),
    #[error("coverage {0} outside [0, 1]")]
    Coverage(f64),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

/// Which standard basis vectors seed the orthonormal completion of `U_AE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Completion {
    #[default]
    Forward,
    Reverse,
}

/// Parse a named single-qubit state: `0`, `1`, `+` or `-`.
pub fn named_qubit(name: &str) -> Result<Qubit, AttackError> {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match name.trim() {
        "0" => Ok([ONE, ZERO]),
        "1" => Ok([ZERO, ONE]),
        "+" => Ok([s, s]),
        "-" => Ok([s, -s]),
        other => Err(AttackError::Unknown {
            what: "ancilla state",
            value: other.to_string(),
        }),
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Parameters of the general entangling map
/// `|0>|E> -> alpha|0>|e00> + beta|1>|e01>`,
/// `|1>|E> -> beta'|0>|e10> + alpha'|1>|e11>`, with `|E> = |0>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub alpha_p: Complex64,
    pub beta_p: Complex64,
    pub e00: Qubit,
    pub e01: Qubit,
    pub e10: Qubit,
    pub e11: Qubit,
}

impl GeneralParams {
    /// The controlled-flip specialization.
    pub fn cnot() -> Self {
        Self {
            alpha: ONE,
            beta: ZERO,
            alpha_p: ONE,
            beta_p: ZERO,
            e00: [ONE, ZERO],
            e01: [ZERO, ONE],
            e10: [ONE, ZERO],
            e11: [ZERO, ONE],
        }
    }
}

/// A validated general attack together with its completed 4x4 unitary on
/// `(channel qubit, ancilla)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralAttack {
    params: GeneralParams,
    unitary: Matrix4,
}

impl GeneralAttack {
    pub fn new(params: GeneralParams, completion: Completion) -> Result<Self, AttackError> {
        let p = &params;
        let n1 = p.alpha.norm_sqr() + p.beta.norm_sqr();
        if (n1 - 1.0).abs() > TOLERANCE {
            return Err(AttackError::FirstRowNorm(n1));
        }
        let n2 = p.alpha_p.norm_sqr() + p.beta_p.norm_sqr();
        if (n2 - 1.0).abs() > TOLERANCE {
            return Err(AttackError::SecondRowNorm(n2));
        }
        let cross = p.alpha * p.beta.conj() + p.alpha_p.conj() * p.beta_p;
        if cross.norm() > TOLERANCE {
            return Err(AttackError::CrossTerm(cross));
        }
        for (name, e) in [("e00", &p.e00), ("e01", &p.e01), ("e10", &p.e10), ("e11", &p.e11)] {
            if (e[0].norm_sqr() + e[1].norm_sqr() - 1.0).abs() > TOLERANCE {
                return Err(AttackError::AncillaNorm(name));
            }
        }
        // Output columns for inputs |0,E> and |1,E>, indexed by |q e>.
        let col0 = [p.alpha * p.e00[0], p.alpha * p.e00[1], p.beta * p.e01[0], p.beta * p.e01[1]];
        let col1 = [p.beta_p * p.e10[0], p.beta_p * p.e10[1], p.alpha_p * p.e11[0], p.alpha_p * p.e11[1]];
        let overlap = inner(&col0, &col1).norm();
        if overlap > TOLERANCE {
            return Err(AttackError::NotIsometric(overlap));
        }
        let mut columns: Vec<[Complex64; 4]> = vec![col0, col1];
        let seeds: [usize; 4] = match completion {
            Completion::Forward => [0, 1, 2, 3],
            Completion::Reverse => [3, 2, 1, 0],
        };
        for seed in seeds {
            if columns.len() == 4 {
                break;
            }
            let mut v = [ZERO; 4];
            v[seed] = ONE;
            for c in &columns {
                let proj = inner(c, &v);
                for k in 0..4 {
                    v[k] -= proj * c[k];
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                columns.push(v.map(|x| x / norm));
            }
        }
        // Inputs with the ancilla in |E> = |0> are |00> (index 0) and |10> (index 2).
        let order = [columns[0], columns[2], columns[1], columns[3]];
        let mut unitary = [[ZERO; 4]; 4];
        for (c, col) in order.iter().enumerate() {
            for r in 0..4 {
                unitary[r][c] = col[r];
            }
        }
        let dev = unitarity_deviation4(&unitary);
        if dev > TOLERANCE {
            return Err(AttackError::NotUnitary(dev));
        }
        Ok(Self { params, unitary })
    }

    pub fn params(&self) -> &GeneralParams {
        &self.params
    }

    pub fn unitary(&self) -> &Matrix4 {
        &self.unitary
    }
}

/// `|q, e> -> |q, e xor q>`.
pub fn cnot_matrix() -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][1] = ONE;
    m[2][3] = ONE;
    m[3][2] = ONE;
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackVariant {
    None,
    InterceptResend { basis: Basis },
    EntangleCnot,
    EntangleGeneral(GeneralAttack),
}

impl AttackVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AttackVariant::None => "none",
            AttackVariant::InterceptResend { .. } => "intercept",
            AttackVariant::EntangleCnot => "entangle-cnot",
            AttackVariant::EntangleGeneral(_) => "entangle-general",
        }
    }
}

/// Immutable adversary configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    pub variant: AttackVariant,
    pub channels: BTreeSet<Channel>,
    pub coverage: f64,
    /// Basis Eve uses when she measures her ancillas.
    pub ancilla_basis: Basis,
}

impl AttackModel {
    pub fn none() -> Self {
        Self {
            variant: AttackVariant::None,
            channels: BTreeSet::new(),
            coverage: 1.0,
            ancilla_basis: Basis::Z,
        }
    }

    pub fn new(variant: AttackVariant, channels: &[Channel], coverage: f64) -> Result<Self, AttackError> {
        if !(0.0..=1.0).contains(&coverage) {
            return Err(AttackError::Coverage(coverage));
        }
        Ok(Self {
            variant,
            channels: channels.iter().copied().collect(),
            coverage,
            ancilla_basis: Basis::Z,
        })
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.variant, AttackVariant::None) && !self.channels.is_empty() && self.coverage > 0.0
    }

    pub fn targets(&self, channel: Channel) -> bool {
        self.channels.contains(&channel)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "z",
            Basis::X => "x",
        })
    }
}

impl FromStr for Basis {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z" => Ok(Basis::Z),
            "x" => Ok(Basis::X),
            _ => Err(AttackError::Unknown {
                what: "basis",
                value: s.to_string(),
            }),
        }
    }
}

/// One observation Eve made on one transiting qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveEntry {
    pub position: usize,
    pub channel: Channel,
    /// Result of an intercept-resend measurement (`true` = 1 or minus).
    pub intercepted: Option<bool>,
    /// Result of measuring the attached ancilla (`true` = 1 or minus).
    pub ancilla: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub entries: Vec<EveEntry>,
}

impl EveRecord {
    pub fn for_channel(&self, channel: Channel) -> impl Iterator<Item = &EveEntry> {
        self.entries.iter().filter(move |e| e.channel == channel)
    }
}

/// Eve measures `qubit` in `basis` and forwards the collapsed qubit.
pub fn attack_intercept_resend<R: Rng + ?Sized>(
    state: &mut PureState,
    qubit: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<bool, StateError> {
    Ok(match basis {
        Basis::Z => state.measure_z(qubit, rng)?.bit(),
        Basis::X => state.measure_x(qubit, rng)?.bit(),
    })
}

/// Append an ancilla in `|0>` and apply the controlled flip. Returns the ancilla index.
pub fn attack_entangle_cnot(state: &mut PureState, qubit: usize) -> Result<usize, StateError> {
    let ancilla = state.append_qubit(Label::Eve, [ONE, ZERO])?;
    state.apply_two_qubit(&cnot_matrix(), qubit, ancilla)?;
    Ok(ancilla)
}

/// Append an ancilla in `|E> = |0>` and apply `U_AE`. Returns the ancilla index.
pub fn attack_entangle_general(state: &mut PureState, qubit: usize, attack: &GeneralAttack) -> Result<usize, StateError> {
    let ancilla = state.append_qubit(Label::Eve, [ONE, ZERO])?;
    state.apply_two_qubit(attack.unitary(), qubit, ancilla)?;
    Ok(ancilla)
}

pub fn eve_measure_ancilla<R: Rng + ?Sized>(
    state: &mut PureState,
    ancilla: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<bool, StateError> {
    attack_intercept_resend(state, ancilla, basis, rng)
}

/// Projector for Eve's ancilla reading `outcome` in `basis`.
pub fn ancilla_projector(ancilla: usize, basis: Basis, outcome: bool) -> Projector {
    match basis {
        Basis::Z => Projector::Z {
            qubit: ancilla,
            outcome: crate::statevector::ZOutcome::from_bit(outcome),
        },
        Basis::X => Projector::X {
            qubit: ancilla,
            outcome: crate::statevector::XOutcome::from_bit(outcome),
        },
    }
}

#[derive(Debug, Clone, Copy)]
struct PendingAncilla {
    qubit: usize,
    entry: usize,
}

/// A session-scoped adversary: the immutable model, its own random stream and
/// everything it observed.
#[derive(Debug, Clone)]
pub struct Eavesdropper {
    model: AttackModel,
    rng: ChaCha8Rng,
    record: EveRecord,
    pending: BTreeMap<usize, Vec<PendingAncilla>>,
}

impl Eavesdropper {
    pub fn new(model: AttackModel, seed: u64) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            record: EveRecord::default(),
            pending: BTreeMap::new(),
        }
    }

    pub fn model(&self) -> &AttackModel {
        &self.model
    }

    pub fn record(&self) -> &EveRecord {
        &self.record
    }

    pub fn into_record(self) -> EveRecord {
        self.record
    }
}

impl ChannelHook for Eavesdropper {
    fn on_transit(
        &mut self,
        channel: Channel,
        position: usize,
        state: &mut PureState,
        qubit: usize,
    ) -> Result<(), StateError> {
        if !self.model.is_active() || !self.model.targets(channel) {
            return Ok(());
        }
        if self.model.coverage < 1.0 && !self.rng.random_bool(self.model.coverage) {
            return Ok(());
        }
        let entry = self.record.entries.len();
        let mut record = EveEntry {
            position,
            channel,
            intercepted: None,
            ancilla: None,
        };
        let ancilla = match self.model.variant {
            AttackVariant::None => return Ok(()),
            AttackVariant::InterceptResend { basis } => {
                record.intercepted = Some(attack_intercept_resend(state, qubit, basis, &mut self.rng)?);
                None
            }
            AttackVariant::EntangleCnot => Some(attack_entangle_cnot(state, qubit)?),
            AttackVariant::EntangleGeneral(ref attack) => Some(attack_entangle_general(state, qubit, attack)?),
        };
        self.record.entries.push(record);
        if let Some(qubit) = ancilla {
            self.pending.entry(position).or_default().push(PendingAncilla { qubit, entry });
        }
        Ok(())
    }

    fn on_measure(&mut self, position: usize, state: &mut PureState) -> Result<(), StateError> {
        let Some(list) = self.pending.remove(&position) else {
            return Ok(());
        };
        for p in list {
            let outcome = eve_measure_ancilla(state, p.qubit, self.model.ancilla_basis, &mut self.rng)?;
            self.record.entries[p.entry].ancilla = Some(outcome);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{Gate1Q, ZOutcome};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn basis_state(index: usize) -> PureState {
        let mut amps = vec![ZERO; 4];
        amps[index] = ONE;
        PureState::from_amplitudes(amps, &[Label::Alice, Label::Eve]).unwrap()
    }

    #[test]
    fn cnot_specialization_matches_on_ancilla_zero_inputs() {
        let general = GeneralAttack::new(GeneralParams::cnot(), Completion::Forward).unwrap();
        for q in 0..2 {
            let mut a = PureState::zeros(&[Label::Alice]).unwrap();
            if q == 1 {
                a.apply_gate(&Gate1Q::pauli_x(), 0).unwrap();
            }
            let mut b = a.clone();
            attack_entangle_cnot(&mut a, 0).unwrap();
            attack_entangle_general(&mut b, 0, &general).unwrap();
            assert!(a.distance_up_to_phase(&b) < TOLERANCE);
        }
    }

    #[test]
    fn cnot_specialization_on_all_basis_inputs() {
        // With the forward completion the CNOT parameters complete to CNOT itself.
        let general = GeneralAttack::new(GeneralParams::cnot(), Completion::Forward).unwrap();
        for index in 0..4 {
            let mut a = basis_state(index);
            let mut b = basis_state(index);
            a.apply_two_qubit(&cnot_matrix(), 0, 1).unwrap();
            b.apply_two_qubit(general.unitary(), 0, 1).unwrap();
            assert!(a.distance_up_to_phase(&b) < TOLERANCE, "input {index}");
        }
    }

    #[test]
    fn degenerate_parameters_leave_qubit_alone() {
        let mut params = GeneralParams::cnot();
        params.e11 = [ONE, ZERO];
        let attack = GeneralAttack::new(params, Completion::Forward).unwrap();
        let mut s = PureState::ghz3();
        s.apply_gate(&Gate1Q::hadamard(), 0).unwrap();
        let before = s.clone();
        let e = attack_entangle_general(&mut s, 0, &attack).unwrap();
        let p = s.probability_of(&ancilla_projector(e, Basis::Z, false)).unwrap();
        assert!((p - 1.0).abs() < TOLERANCE);
        let mut with_ancilla = before.clone();
        with_ancilla.append_qubit(Label::Eve, [ONE, ZERO]).unwrap();
        assert!(s.distance_up_to_phase(&with_ancilla) < TOLERANCE);
    }

    #[test]
    fn constraint_violations_are_rejected() {
        let mut p = GeneralParams::cnot();
        p.alpha = c(0.5);
        assert!(matches!(GeneralAttack::new(p, Completion::Forward), Err(AttackError::FirstRowNorm(_))));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut p = GeneralParams::cnot();
        p.alpha = c(s);
        p.beta = c(s);
        p.alpha_p = c(s);
        p.beta_p = c(s);
        assert!(matches!(GeneralAttack::new(p, Completion::Forward), Err(AttackError::CrossTerm(_))));
        let mut p = GeneralParams::cnot();
        p.e00 = [c(1.0), c(1.0)];
        assert!(matches!(GeneralAttack::new(p, Completion::Forward), Err(AttackError::AncillaNorm("e00"))));
        // Satisfies the stated constraints but maps both inputs onto the same output.
        let mut p = GeneralParams::cnot();
        p.alpha = c(s);
        p.beta = c(s);
        p.alpha_p = c(s);
        p.beta_p = c(-s);
        p.e00 = [ONE, ZERO];
        p.e01 = [ONE, ZERO];
        p.e10 = [ONE, ZERO];
        p.e11 = [ZERO, ONE];
        assert!(matches!(GeneralAttack::new(p, Completion::Forward), Err(AttackError::NotIsometric(_))));
    }

    #[test]
    fn completions_are_unitary_and_agree_on_ancilla_zero() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut p = GeneralParams::cnot();
        p.alpha = c(s);
        p.beta = c(s);
        p.alpha_p = c(s);
        p.beta_p = c(-s);
        p.e00 = [ONE, ZERO];
        p.e10 = [ONE, ZERO];
        p.e01 = [ZERO, ONE];
        p.e11 = [ZERO, ONE];
        let f = GeneralAttack::new(p, Completion::Forward).unwrap();
        let r = GeneralAttack::new(p, Completion::Reverse).unwrap();
        assert!(unitarity_deviation4(f.unitary()) < TOLERANCE);
        assert!(unitarity_deviation4(r.unitary()) < TOLERANCE);
        for row in 0..4 {
            for col in [0, 2] {
                assert!((f.unitary()[row][col] - r.unitary()[row][col]).norm() < TOLERANCE);
            }
        }
    }

    #[test]
    fn intercept_on_eigenstate_does_not_disturb() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = PureState::zeros(&[Label::Alice]).unwrap();
        let before = s.clone();
        assert!(!attack_intercept_resend(&mut s, 0, Basis::Z, &mut rng).unwrap());
        assert_eq!(s, before);
    }

    #[test]
    fn product_ancilla_reads_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = PureState::ghz3();
        let e = s.append_qubit(Label::Eve, [ONE, ZERO]).unwrap();
        for _ in 0..10 {
            assert!(!eve_measure_ancilla(&mut s, e, Basis::Z, &mut rng).unwrap());
        }
    }

    #[test]
    fn hook_respects_channels_and_coverage() {
        let model = AttackModel::new(AttackVariant::EntangleCnot, &[Channel::TrentAlice], 1.0).unwrap();
        let mut eve = Eavesdropper::new(model, 9);
        let mut s = PureState::ghz3();
        eve.on_transit(Channel::TrentBob, 0, &mut s, 2).unwrap();
        assert_eq!(s.num_qubits(), 3);
        eve.on_transit(Channel::TrentAlice, 0, &mut s, 0).unwrap();
        assert_eq!(s.num_qubits(), 4);
        eve.on_measure(0, &mut s).unwrap();
        let entry = eve.record().entries[0];
        // The ancilla copies Alice's z value, which the GHZ correlation shares with Trent.
        let t = s.probability_of(&Projector::Z { qubit: 1, outcome: ZOutcome::from_bit(entry.ancilla.unwrap()) });
        assert!((t.unwrap() - 1.0).abs() < TOLERANCE);

        let none = AttackModel::new(AttackVariant::EntangleCnot, &[Channel::TrentAlice], 0.0).unwrap();
        let mut eve = Eavesdropper::new(none, 9);
        let mut s = PureState::ghz3();
        eve.on_transit(Channel::TrentAlice, 0, &mut s, 0).unwrap();
        assert_eq!(s, PureState::ghz3());
        assert!(eve.record().entries.is_empty());
        assert!(AttackModel::new(AttackVariant::EntangleCnot, &[], 1.5).is_err());
    }

    #[test]
    fn named_qubits() {
        assert_eq!(named_qubit("1").unwrap(), [ZERO, ONE]);
        assert!(named_qubit("2").is_err());
    }
}
