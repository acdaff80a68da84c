use std::sync::Arc;

use ghz_qdc::adversary::{AttackModel, AttackVariant, Basis, Completion, Eavesdropper, GeneralAttack, GeneralParams};
use ghz_qdc::authkeys::{Counter, Sha256Hash, UserIdentity, UserRole};
use ghz_qdc::bits;
use ghz_qdc::channel::{Channel, NoAttack};
use ghz_qdc::ecc::Codec;
use ghz_qdc::harness::{self, MessageSource, RunSpec};
use ghz_qdc::protocol::{run_session, KeyRegistry, MeasurementOrder, ProtocolVariant, SessionConfig};
use ghz_qdc::statevector::{BellOutcome, Label, Projector, PureState, XOutcome, ZOutcome};
use ghz_qdc::transcript::{Transcript, Verdict};
use num_complex::Complex64;
use proptest::prelude::*;

fn registry() -> KeyRegistry {
    KeyRegistry::new(
        Arc::new(Sha256Hash::default()),
        UserIdentity::from_name("alice", UserRole::Alice).unwrap(),
        UserIdentity::from_name("bob", UserRole::Bob).unwrap(),
        Counter::with_default_width(0).unwrap(),
    )
}

fn small_config(variant: ProtocolVariant, seed: u64) -> SessionConfig {
    SessionConfig {
        n_ghz: 96,
        m_auth_check: 16,
        check_fraction_msg: 0.25,
        codec: Codec::Hamming74,
        variant,
        seed,
        ..SessionConfig::default()
    }
}

fn json(report: &harness::RunReport) -> String {
    let mut buf = Vec::new();
    report.write_json(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn cnot_spec(trials: u64) -> RunSpec {
    let attack = AttackModel::new(AttackVariant::EntangleCnot, &[Channel::TrentAlice, Channel::AliceBob], 0.5).unwrap();
    RunSpec::new(
        SessionConfig {
            error_threshold_auth: 1.0,
            error_threshold_msg: 1.0,
            ..small_config(ProtocolVariant::Qdc1, 99)
        },
        attack,
        trials,
        MessageSource::Random { len: 24 },
    )
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let spec = cnot_spec(40);
    assert_eq!(json(&harness::run(&spec).unwrap()), json(&harness::run(&spec).unwrap()));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let spec = cnot_spec(40);
    let with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| json(&harness::run(&spec).unwrap()))
    };
    assert_eq!(with(1), with(4));
}

#[test]
fn seed_changes_the_report() {
    let a = cnot_spec(20);
    let mut b = a.clone();
    b.config.seed += 1;
    assert_ne!(json(&harness::run(&a).unwrap()), json(&harness::run(&b).unwrap()));
}

#[test]
fn zero_coverage_matches_the_honest_run_exactly() {
    for variant in [ProtocolVariant::Qdc1, ProtocolVariant::Qdc2] {
        let config = small_config(variant, 5);
        let message = bits::from_uint(0xabcdef, 24);
        let keys = registry().issue_session(config.n_ghz).unwrap();
        let honest = run_session(&config, &message, &keys, &mut NoAttack).unwrap();
        for variant in [
            AttackVariant::InterceptResend { basis: Basis::Z },
            AttackVariant::EntangleCnot,
        ] {
            let model = AttackModel::new(variant, &Channel::ALL, 0.0).unwrap();
            let mut eve = Eavesdropper::new(model, 77);
            let attacked = run_session(&config, &message, &keys, &mut eve).unwrap();
            assert_eq!(attacked.transcript, honest.transcript);
            assert!(eve.record().entries.is_empty());
        }
    }
}

#[test]
fn completion_choice_does_not_change_statistics() {
    let params = GeneralParams {
        alpha: Complex64::new(0.6, 0.0),
        beta: Complex64::new(0.8, 0.0),
        alpha_p: Complex64::new(0.0, 0.6),
        beta_p: Complex64::new(0.0, -0.8),
        e00: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        e01: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        e10: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        e11: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    };
    let report = |completion| {
        let attack = GeneralAttack::new(params, completion).unwrap();
        let mut spec = cnot_spec(60);
        spec.attack = AttackModel::new(AttackVariant::EntangleGeneral(attack), &[Channel::TrentBob, Channel::AliceBob], 1.0).unwrap();
        harness::run(&spec).unwrap()
    };
    let (f, r) = (report(Completion::Forward), report(Completion::Reverse));
    assert_ne!(
        GeneralAttack::new(params, Completion::Forward).unwrap().unitary(),
        GeneralAttack::new(params, Completion::Reverse).unwrap().unitary()
    );
    assert_eq!(f.aggregate, r.aggregate);
    assert_eq!(f.per_trial, r.per_trial);
}

#[test]
fn detection_grows_with_check_bits() {
    let attack = AttackModel::new(AttackVariant::InterceptResend { basis: Basis::Z }, &[Channel::TrentBob], 1.0).unwrap();
    let spec = RunSpec::new(
        SessionConfig {
            n_ghz: 40,
            m_auth_check: 8,
            seed: 3,
            ..SessionConfig::default()
        },
        attack,
        2000,
        MessageSource::Random { len: 4 },
    );
    let sweep = harness::sweep_detection_curve(&spec, &[1, 2, 4, 8, 16]).unwrap();
    for pair in sweep.rows.windows(2) {
        assert!(pair[1].detection_rate + 0.03 >= pair[0].detection_rate);
        assert!(pair[1].analytic > pair[0].analytic);
    }
    assert!(sweep.rows.iter().all(|r| r.n_ghz == 32 + r.m));
}

#[test]
fn aborted_sessions_never_deliver() {
    let attack = AttackModel::new(AttackVariant::EntangleCnot, &[Channel::TrentAlice], 1.0).unwrap();
    let spec = RunSpec::new(
        SessionConfig {
            m_auth_check: 64,
            seed: 1,
            ..SessionConfig::default()
        },
        attack,
        50,
        MessageSource::Random { len: 32 },
    );
    let r = harness::run(&spec).unwrap();
    assert!(r.aggregate.abort_rate > 0.99);
    for t in &r.per_trial {
        if t.auth_errors > 0 {
            assert_eq!(t.verdict, Verdict::AuthAborted);
            assert_eq!(t.msg_checked, None);
        }
    }
}

#[test]
fn message_phase_projectors_commute() {
    // Joint probabilities do not depend on which party's projector is applied first.
    let mut s = PureState::ghz3();
    s.apply_gate(&ghz_qdc::protocol::message_gate(true), 0).unwrap();
    let e = s
        .append_qubit(Label::Eve, [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
        .unwrap();
    s.apply_two_qubit(&ghz_qdc::adversary::cnot_matrix(), 0, e).unwrap();
    for bell in BellOutcome::ALL {
        for x in XOutcome::ALL {
            for z in [ZOutcome::Zero, ZOutcome::One] {
                let ps = [
                    Projector::Bell {
                        first: 0,
                        second: 2,
                        outcome: bell,
                    },
                    Projector::X { qubit: 1, outcome: x },
                    Projector::Z { qubit: e, outcome: z },
                ];
                let reference = s.joint_probability(&ps).unwrap();
                for order in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                    let permuted = order.map(|i| ps[i]);
                    assert!((s.joint_probability(&permuted).unwrap() - reference).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn transcript_matches_golden_file() {
    let config = SessionConfig {
        n_ghz: 16,
        m_auth_check: 4,
        check_fraction_msg: 0.25,
        seed: 2024,
        ..SessionConfig::default()
    };
    let keys = registry().issue_session(config.n_ghz).unwrap();
    let out = run_session(&config, &bits::from_uint(0b1011_0010, 8), &keys, &mut NoAttack).unwrap();
    let golden = include_str!("golden/honest_qdc1.log");
    assert_eq!(out.transcript.to_log(), golden);
    assert_eq!(Transcript::parse_log(golden).unwrap(), out.transcript);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn honest_sessions_always_deliver(
        seed in any::<u64>(),
        which in 0usize..2,
        codec in 0usize..4,
        order in 0usize..6,
        early in any::<bool>(),
        message in proptest::collection::vec(any::<bool>(), 0..24),
    ) {
        let variant = [ProtocolVariant::Qdc1, ProtocolVariant::Qdc2][which];
        let codec = [Codec::None, Codec::Repetition { r: 3 }, Codec::Repetition { r: 5 }, Codec::Hamming74][codec];
        let config = SessionConfig {
            n_ghz: 200,
            m_auth_check: 20,
            codec,
            variant,
            order: MeasurementOrder::all()[order],
            bob_measures_early: early,
            seed,
            ..SessionConfig::default()
        };
        let keys = registry().issue_session(config.n_ghz).unwrap();
        let out = run_session(&config, &message, &keys, &mut NoAttack).unwrap();
        prop_assert_eq!(out.verdict, Verdict::MessageDelivered);
        let m = out.message.unwrap();
        prop_assert_eq!(m.result.message.as_deref(), Some(&message[..]));
        prop_assert!(out.transcript.validate().is_ok());
        let log = out.transcript.to_log();
        prop_assert_eq!(Transcript::parse_log(&log).unwrap(), out.transcript);
    }

    #[test]
    fn attacked_sessions_keep_valid_transcripts(seed in any::<u64>(), coverage in 0.0f64..=1.0, which in 0usize..3) {
        let variant = [
            AttackVariant::InterceptResend { basis: Basis::Z },
            AttackVariant::InterceptResend { basis: Basis::X },
            AttackVariant::EntangleCnot,
        ][which];
        let config = SessionConfig { error_threshold_auth: 0.3, ..small_config(ProtocolVariant::Qdc2, seed) };
        let model = AttackModel::new(variant, &Channel::ALL, coverage).unwrap();
        let keys = registry().issue_session(config.n_ghz).unwrap();
        let mut eve = Eavesdropper::new(model, seed ^ 1);
        let out = run_session(&config, &bits::from_uint(seed, 16), &keys, &mut eve).unwrap();
        prop_assert!(out.transcript.validate().is_ok());
        prop_assert_eq!(out.transcript.verdict(), Some(out.verdict));
        // Every ancilla Eve attached was eventually measured.
        prop_assert!(eve.record().entries.iter().all(|e| e.intercepted.is_some() || e.ancilla.is_some()));
    }
}
