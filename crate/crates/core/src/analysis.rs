//! Exact single-triple probabilities, computed from Born-rule projections
//! rather than sampling.
//!
//! These are the reference values the Monte Carlo harness is compared to:
//! per-check error probabilities under an attack, decoding error in the
//! message phase, and the distributions Eve can observe.

use crate::adversary::{ancilla_projector, cnot_matrix, Basis, GeneralAttack};
use crate::authkeys::unitary_for_key_bit;
use crate::protocol::{message_gate, qdc1_decode, qdc2_decode, trent_publish, ProtocolVariant};
use crate::statevector::{BellOutcome, Label, Matrix4, Projector, PureState, StateError, XOutcome, ZOutcome};

const A: usize = 0;
const T: usize = 1;
const B: usize = 2;

/// A per-qubit attack in a form that can be evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactAttack {
    None,
    /// Measure in the basis and resend.
    Intercept(Basis),
    /// Couple to a fresh `|0>` ancilla with this unitary (qubit, ancilla order).
    Unitary(Matrix4),
}

impl ExactAttack {
    pub fn cnot() -> Self {
        ExactAttack::Unitary(cnot_matrix())
    }

    pub fn general(attack: &GeneralAttack) -> Self {
        ExactAttack::Unitary(*attack.unitary())
    }
}

/// A weighted pure state: one branch of a mixture.
#[derive(Debug, Clone)]
pub struct Branch {
    pub weight: f64,
    pub state: PureState,
}

/// Apply `attack` to `qubit` of every branch. Intercepts split each branch in two.
pub fn apply_exact(branches: Vec<Branch>, qubit: usize, attack: ExactAttack) -> Result<Vec<Branch>, StateError> {
    let mut out = Vec::with_capacity(branches.len() * 2);
    for br in branches {
        match attack {
            ExactAttack::None => out.push(br),
            ExactAttack::Unitary(u) => {
                let mut state = br.state;
                let e = state.append_qubit(Label::Eve, [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)])?;
                state.apply_two_qubit(&u, qubit, e)?;
                out.push(Branch { weight: br.weight, state });
            }
            ExactAttack::Intercept(basis) => {
                for outcome in [false, true] {
                    let projector = ancilla_projector(qubit, basis, outcome);
                    let p = br.state.probability_of(&projector)?;
                    if p <= 0.0 {
                        continue;
                    }
                    let mut state = br.state.clone();
                    state.project(&projector)?;
                    let norm = state.norm_sqr().sqrt();
                    let amps = state.amplitudes().iter().map(|a| a / norm).collect();
                    let state = PureState::from_amplitudes(amps, state.labels())?;
                    out.push(Branch { weight: br.weight * p, state });
                }
            }
        }
    }
    Ok(out)
}

/// Probability that z outcomes of A, T and B disagree on one authentication
/// check position, given both key bits and the attack on each distribution channel.
pub fn auth_check_error(key_a: bool, key_b: bool, on_alice: ExactAttack, on_bob: ExactAttack) -> Result<f64, StateError> {
    let mut s = PureState::ghz3();
    s.apply_gate(&unitary_for_key_bit(key_a), A)?;
    s.apply_gate(&unitary_for_key_bit(key_b), B)?;
    let mut branches = vec![Branch { weight: 1.0, state: s }];
    branches = apply_exact(branches, A, on_alice)?;
    branches = apply_exact(branches, B, on_bob)?;
    let mut ok = 0.0;
    for br in &mut branches {
        br.state.apply_gate(&unitary_for_key_bit(key_a), A)?;
        br.state.apply_gate(&unitary_for_key_bit(key_b), B)?;
        for z in [ZOutcome::Zero, ZOutcome::One] {
            ok += br.weight
                * br.state.joint_probability(&[
                    Projector::Z { qubit: A, outcome: z },
                    Projector::Z { qubit: T, outcome: z },
                    Projector::Z { qubit: B, outcome: z },
                ])?;
        }
    }
    Ok((1.0 - ok).max(0.0))
}

/// Per-check error probability averaged over uniform key bits, with each
/// attacked channel hit independently with probability `coverage`.
pub fn auth_check_error_uniform(on_alice: ExactAttack, on_bob: ExactAttack, coverage: f64) -> Result<f64, StateError> {
    let mut total = 0.0;
    for ka in [false, true] {
        for kb in [false, true] {
            for (hit_a, wa) in [(true, coverage), (false, 1.0 - coverage)] {
                for (hit_b, wb) in [(true, coverage), (false, 1.0 - coverage)] {
                    let w = 0.25 * wa * wb;
                    if w == 0.0 {
                        continue;
                    }
                    let a = if hit_a { on_alice } else { ExactAttack::None };
                    let b = if hit_b { on_bob } else { ExactAttack::None };
                    total += w * auth_check_error(ka, kb, a, b)?;
                }
            }
        }
    }
    Ok(total)
}

/// Probability that at least one of `m` independent checks fails.
pub fn detection_probability(per_check: f64, m: usize) -> f64 {
    1.0 - (1.0 - per_check).powi(m as i32)
}

/// The post-decoding authentication state of one triple (A, T, B, then any ancillas).
pub fn auth_state_after_unitary(key_a: bool, key_b: bool, on_alice: Option<&Matrix4>) -> Result<PureState, StateError> {
    let mut s = PureState::ghz3();
    s.apply_gate(&unitary_for_key_bit(key_a), A)?;
    s.apply_gate(&unitary_for_key_bit(key_b), B)?;
    if let Some(u) = on_alice {
        let e = s.append_qubit(Label::Eve, [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)])?;
        s.apply_two_qubit(u, A, e)?;
    }
    s.apply_gate(&unitary_for_key_bit(key_a), A)?;
    s.apply_gate(&unitary_for_key_bit(key_b), B)?;
    Ok(s)
}

/// One triple after Alice encodes `bit` and the attack hits her qubit in transit.
pub fn message_branches(bit: bool, attack: ExactAttack) -> Result<Vec<Branch>, StateError> {
    let mut s = PureState::ghz3();
    s.apply_gate(&message_gate(bit), A)?;
    apply_exact(vec![Branch { weight: 1.0, state: s }], A, attack)
}

/// Joint distribution of the honest parties' outcomes: `(bell, x, probability)`.
fn honest_outcomes(variant: ProtocolVariant, state: &PureState) -> Result<Vec<(BellOutcome, XOutcome, f64)>, StateError> {
    let (partner, x_qubit) = match variant {
        ProtocolVariant::Qdc1 => (B, T),
        ProtocolVariant::Qdc2 => (T, B),
    };
    let mut out = Vec::with_capacity(8);
    for bell in BellOutcome::ALL {
        for x in XOutcome::ALL {
            let p = state.joint_probability(&[
                Projector::Bell {
                    first: A,
                    second: partner,
                    outcome: bell,
                },
                Projector::X { qubit: x_qubit, outcome: x },
            ])?;
            out.push((bell, x, p));
        }
    }
    Ok(out)
}

fn decode(variant: ProtocolVariant, bell: BellOutcome, x: XOutcome) -> bool {
    match variant {
        ProtocolVariant::Qdc1 => qdc1_decode(bell, x),
        ProtocolVariant::Qdc2 => qdc2_decode(trent_publish(bell), x),
    }
}

/// Probability that Bob decodes the wrong bit, averaged over a uniform bit.
pub fn message_error(variant: ProtocolVariant, attack: ExactAttack) -> Result<f64, StateError> {
    let mut wrong = 0.0;
    for bit in [false, true] {
        for br in message_branches(bit, attack)? {
            for (bell, x, p) in honest_outcomes(variant, &br.state)? {
                if decode(variant, bell, x) != bit {
                    wrong += 0.5 * br.weight * p;
                }
            }
        }
    }
    Ok(wrong)
}

/// What Eve can see for one message position: her own outcome plus the
/// public announcement (Trent's x outcome, or Trent's published bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EveView {
    pub public: bool,
    pub eve: bool,
}

/// Exact distribution of Eve's view given the message bit, for an ancilla attack.
/// Entries are indexed by `2 * public + eve`.
pub fn eve_view_distribution(
    variant: ProtocolVariant,
    bit: bool,
    unitary: &Matrix4,
    basis: Basis,
) -> Result<[f64; 4], StateError> {
    let mut s = PureState::ghz3();
    s.apply_gate(&message_gate(bit), A)?;
    let e = s.append_qubit(Label::Eve, [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)])?;
    s.apply_two_qubit(unitary, A, e)?;
    let mut dist = [0.0; 4];
    for eve in [false, true] {
        let ep = ancilla_projector(e, basis, eve);
        match variant {
            ProtocolVariant::Qdc1 => {
                for x in XOutcome::ALL {
                    let p = s.joint_probability(&[Projector::X { qubit: T, outcome: x }, ep])?;
                    dist[2 * x.bit() as usize + eve as usize] += p;
                }
            }
            ProtocolVariant::Qdc2 => {
                for bell in BellOutcome::ALL {
                    let p = s.joint_probability(&[
                        Projector::Bell {
                            first: A,
                            second: T,
                            outcome: bell,
                        },
                        ep,
                    ])?;
                    dist[2 * trent_publish(bell).0 as usize + eve as usize] += p;
                }
            }
        }
    }
    Ok(dist)
}

/// Marginal of Eve's own outcome from a view distribution.
pub fn eve_marginal(view: &[f64; 4]) -> [f64; 2] {
    [view[0] + view[2], view[1] + view[3]]
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Completion, GeneralParams};
    use crate::statevector::TOLERANCE;

    #[test]
    fn honest_channels_have_no_errors() {
        for ka in [false, true] {
            for kb in [false, true] {
                assert!(auth_check_error(ka, kb, ExactAttack::None, ExactAttack::None).unwrap() < TOLERANCE);
            }
        }
        for v in [ProtocolVariant::Qdc1, ProtocolVariant::Qdc2] {
            assert!(message_error(v, ExactAttack::None).unwrap() < TOLERANCE);
        }
    }

    #[test]
    fn intercept_error_depends_on_key_bit() {
        let z = ExactAttack::Intercept(Basis::Z);
        assert!(auth_check_error(false, false, z, ExactAttack::None).unwrap() < TOLERANCE);
        assert!((auth_check_error(true, false, z, ExactAttack::None).unwrap() - 0.5).abs() < TOLERANCE);
        assert!((auth_check_error_uniform(z, ExactAttack::None, 1.0).unwrap() - 0.25).abs() < TOLERANCE);
    }

    #[test]
    fn cnot_error_depends_on_key_bit() {
        let c = ExactAttack::cnot();
        assert!(auth_check_error(false, true, c, ExactAttack::None).unwrap() < TOLERANCE);
        assert!((auth_check_error(true, true, c, ExactAttack::None).unwrap() - 0.5).abs() < TOLERANCE);
        assert!((auth_check_error_uniform(c, ExactAttack::None, 1.0).unwrap() - 0.25).abs() < TOLERANCE);
        // Both channels: 1 - (3/4)^2.
        assert!((auth_check_error_uniform(c, c, 1.0).unwrap() - 7.0 / 16.0).abs() < TOLERANCE);
        assert!((auth_check_error_uniform(c, ExactAttack::None, 0.5).unwrap() - 0.125).abs() < TOLERANCE);
    }

    #[test]
    fn detection_formula() {
        assert!((detection_probability(0.25, 1) - 0.25).abs() < 1e-12);
        assert!((detection_probability(0.25, 2) - 0.4375).abs() < 1e-12);
        assert!((detection_probability(0.25, 10) - 0.943_686_485_290_527_3).abs() < 1e-12);
    }

    #[test]
    fn cnot_in_message_phase_randomizes_the_bit() {
        for v in [ProtocolVariant::Qdc1, ProtocolVariant::Qdc2] {
            assert!((message_error(v, ExactAttack::cnot()).unwrap() - 0.5).abs() < TOLERANCE);
            let z = message_error(v, ExactAttack::Intercept(Basis::Z)).unwrap();
            assert!((z - 0.5).abs() < TOLERANCE, "{v}: {z}");
        }
    }

    #[test]
    fn eve_view_is_independent_of_the_bit_for_cnot() {
        for v in [ProtocolVariant::Qdc1, ProtocolVariant::Qdc2] {
            let a = GeneralAttack::new(GeneralParams::cnot(), Completion::Forward).unwrap();
            for basis in [Basis::Z, Basis::X] {
                let p0 = eve_view_distribution(v, false, a.unitary(), basis).unwrap();
                let p1 = eve_view_distribution(v, true, a.unitary(), basis).unwrap();
                assert!((p0.iter().sum::<f64>() - 1.0).abs() < TOLERANCE);
                assert!(total_variation(&p0, &p1) < TOLERANCE);
            }
        }
    }
}
