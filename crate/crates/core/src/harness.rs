//! Monte Carlo driver: runs many independent sessions and aggregates the
//! statistics an eavesdropping analysis needs.
//!
//! Trial `i` of a run with seed `s` uses `mix(s, i)` as its seed. The
//! session, Eve and the random message each draw from their own stream
//! derived from that trial seed, so enabling an attack never perturbs the
//! honest parties' randomness.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackModel, AttackVariant, Basis, EveRecord, Eavesdropper, GeneralParams};
use crate::analysis::{self, ExactAttack};
use crate::authkeys::{blocks_for, Counter, Sha256Hash, UserIdentity, UserRole, DEFAULT_KEY_BLOCK_BITS};
use crate::bits;
use crate::channel::Channel;
use crate::ecc;
use crate::protocol::{run_session, KeyRegistry, ProtocolError, SessionConfig, SessionOutcome};
use crate::transcript::Verdict;

pub const SCHEMA_VERSION: u32 = 1;

const SESSION_STREAM: u64 = 0x5E55_1011;
const EVE_STREAM: u64 = 0x00E7_E000;
const MESSAGE_STREAM: u64 = 0x3E55_A6E0;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed: `splitmix64(a ^ splitmix64(b))`.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run: {0}")]
    Spec(String),
    #[error("trial {trial}: {source}")]
    Trial { trial: u64, source: ProtocolError },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageSource {
    Fixed { bits: Vec<bool> },
    /// A fresh uniformly random message of this length per trial.
    Random { len: usize },
}

impl MessageSource {
    pub fn len(&self) -> usize {
        match self {
            MessageSource::Fixed { bits } => bits.len(),
            MessageSource::Random { len } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    /// `config.seed` is the run seed; per-trial session seeds are derived from it.
    pub config: SessionConfig,
    pub attack: AttackModel,
    pub trials: u64,
    pub message: MessageSource,
    /// Keep one row per trial in the report.
    pub per_trial: bool,
}

impl RunSpec {
    pub fn new(config: SessionConfig, attack: AttackModel, trials: u64, message: MessageSource) -> Self {
        Self {
            config,
            attack,
            trials,
            message,
            per_trial: true,
        }
    }

    /// Reject inconsistent specs; returns advisory warnings otherwise.
    pub fn validate(&self) -> Result<Vec<String>, HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        self.config.validate(self.message.len())?;
        let mut warnings = Vec::new();
        if self.attack.is_active() {
            let used = [Channel::TrentAlice, Channel::TrentBob, self.config.variant.message_channel()];
            for ch in &self.attack.channels {
                if !used.contains(ch) {
                    warnings.push(format!("channel {ch} carries no qubits in {}; the attack there has no effect", self.config.variant));
                }
            }
        }
        let codec = self.config.codec;
        let t = self.config.error_threshold_msg;
        if t > 0.0 && !ecc::check_distance_rule(t, codec.n(), codec.d()) {
            warnings.push(format!(
                "{codec} (n = {}, d = {}) does not satisfy d > 2tn + 1 for the tolerated error rate t = {t}",
                codec.n(),
                codec.d()
            ));
        }
        Ok(warnings)
    }
}

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub verdict: Verdict,
    pub auth_errors: usize,
    pub auth_checked: usize,
    pub msg_errors: Option<usize>,
    pub msg_checked: Option<usize>,
    /// Delivered message equals the input (absent unless delivered).
    pub delivered_correct: Option<bool>,
    pub ecc_corrected: Option<usize>,
}

/// Raw counts from one trial; aggregation only ever sums these.
#[derive(Debug, Clone, Default)]
struct Tally {
    auth_errors: u64,
    auth_checked: u64,
    /// Indexed by Alice's / Bob's key bit.
    auth_errors_by_key_alice: [u64; 2],
    auth_checked_by_key_alice: [u64; 2],
    auth_errors_by_key_bob: [u64; 2],
    auth_checked_by_key_bob: [u64; 2],
    detected: u64,
    aborted: u64,
    msg_errors: u64,
    msg_checked: u64,
    msg_sessions: u64,
    discarded: u64,
    delivered: u64,
    delivered_correct: u64,
    /// `[message bit][eve outcome]` over attacked message-phase qubits.
    eve_message: [[u64; 2]; 2],
    /// `[key bit][eve outcome]` over attacked distribution qubits.
    eve_auth: [[u64; 2]; 2],
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        macro_rules! sum {
            ($($f:ident),*) => { $( self.$f += o.$f; )* };
        }
        sum!(auth_errors, auth_checked, detected, aborted, msg_errors, msg_checked, msg_sessions, discarded, delivered, delivered_correct);
        for b in 0..2 {
            self.auth_errors_by_key_alice[b] += o.auth_errors_by_key_alice[b];
            self.auth_checked_by_key_alice[b] += o.auth_checked_by_key_alice[b];
            self.auth_errors_by_key_bob[b] += o.auth_errors_by_key_bob[b];
            self.auth_checked_by_key_bob[b] += o.auth_checked_by_key_bob[b];
            for e in 0..2 {
                self.eve_message[b][e] += o.eve_message[b][e];
                self.eve_auth[b][e] += o.eve_auth[b][e];
            }
        }
    }
}

/// Eve's outcome distribution conditioned on a classical bit, normalized per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveHistogram {
    /// Number of observations with the conditioning bit equal to 0 and 1.
    pub samples: [u64; 2],
    /// `given_0[o]` = P(Eve reads o | bit 0); absent when there were no samples.
    pub given_0: Option<[f64; 2]>,
    pub given_1: Option<[f64; 2]>,
}

impl EveHistogram {
    fn from_counts(c: [[u64; 2]; 2]) -> Option<Self> {
        let samples = [c[0][0] + c[0][1], c[1][0] + c[1][1]];
        if samples == [0, 0] {
            return None;
        }
        let row = |b: usize| (samples[b] > 0).then(|| [c[b][0] as f64 / samples[b] as f64, c[b][1] as f64 / samples[b] as f64]);
        Some(Self {
            samples,
            given_0: row(0),
            given_1: row(1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auth_check_bits: u64,
    pub auth_error_rate: f64,
    /// Error rate restricted to checks where Alice's (Bob's) key bit was 0 or 1.
    pub auth_error_rate_by_key_alice: [Option<f64>; 2],
    pub auth_error_rate_by_key_bob: [Option<f64>; 2],
    /// Fraction of trials with at least one failed authentication check.
    pub detection_rate: f64,
    pub abort_rate: f64,
    pub message_check_bits: u64,
    pub message_error_rate: Option<f64>,
    pub discard_rate: f64,
    pub delivery_rate: f64,
    /// Fraction of delivered messages equal to the input.
    pub delivery_fidelity: Option<f64>,
    /// Eve's readings on message-phase qubits, conditioned on the bit Alice sent.
    pub eve_given_message_bit: Option<EveHistogram>,
    /// Eve's readings on distribution qubits, conditioned on that user's key bit.
    pub eve_given_key_bit: Option<EveHistogram>,
}

/// Closed-form counterparts of the aggregate rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub auth_error_rate: f64,
    /// `1 - (1 - p)^m` for per-check error `p`.
    pub detection_rate: f64,
    /// Only given when the distribution channels are not attacked.
    pub message_error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEcho {
    pub variant: String,
    pub channels: Vec<Channel>,
    pub coverage: f64,
    pub ancilla_basis: Basis,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intercept_basis: Option<Basis>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<GeneralParams>,
}

impl AttackEcho {
    fn from_model(m: &AttackModel) -> Self {
        let (intercept_basis, params) = match m.variant {
            AttackVariant::InterceptResend { basis } => (Some(basis), None),
            AttackVariant::EntangleGeneral(ref a) => (None, Some(*a.params())),
            _ => (None, None),
        };
        Self {
            variant: m.variant.name().to_string(),
            channels: m.channels.iter().copied().collect(),
            coverage: m.coverage,
            ancilla_basis: m.ancilla_basis,
            intercept_basis,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub seed: u64,
    pub trials: u64,
    pub config: SessionConfig,
    pub message: MessageSource,
    pub attack: AttackEcho,
    pub warnings: Vec<String>,
    pub aggregate: Aggregate,
    pub analytic: Analytic,
    pub verdicts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_trial: Vec<TrialRow>,
}

impl RunReport {
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    /// Per-trial table as CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "trial",
            "seed",
            "verdict",
            "auth_errors",
            "auth_checked",
            "msg_errors",
            "msg_checked",
            "delivered_correct",
            "ecc_corrected",
        ])?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.per_trial {
            out.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.verdict.to_string(),
                r.auth_errors.to_string(),
                r.auth_checked.to_string(),
                opt(r.msg_errors),
                opt(r.msg_checked),
                r.delivered_correct.map(|b| b.to_string()).unwrap_or_default(),
                opt(r.ecc_corrected),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: OutputFormat, w: W) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Json => self.write_json(w),
            OutputFormat::Csv => self.write_csv(w),
        }
    }
}

/// Everything one trial produced, for callers that want more than the report.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trial: u64,
    pub seed: u64,
    pub message: Vec<bool>,
    pub session: SessionOutcome,
    pub eve: EveRecord,
}

fn key_registry(trial: u64, blocks: u64) -> Result<KeyRegistry, ProtocolError> {
    let start = Counter::with_default_width(trial.checked_mul(blocks).ok_or_else(|| ProtocolError::Config("key counter overflow".into()))?)?;
    Ok(KeyRegistry::new(
        Arc::new(Sha256Hash::default()),
        UserIdentity::from_name("alice", UserRole::Alice)?,
        UserIdentity::from_name("bob", UserRole::Bob)?,
        start,
    ))
}

/// Run a single trial of `spec`.
pub fn run_trial(spec: &RunSpec, trial: u64) -> Result<TrialOutput, ProtocolError> {
    let seed = mix(spec.config.seed, trial);
    let message = match &spec.message {
        MessageSource::Fixed { bits } => bits.clone(),
        MessageSource::Random { len } => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, MESSAGE_STREAM));
            (0..*len).map(|_| rng.random::<bool>()).collect()
        }
    };
    let n = spec.config.n_ghz;
    // Each trial consumes its own counter range, so no counter is ever reused in a run.
    let blocks = blocks_for(n, DEFAULT_KEY_BLOCK_BITS) as u64;
    let keys = key_registry(trial, blocks)?.issue_session(n)?;
    let config = SessionConfig {
        seed: mix(seed, SESSION_STREAM),
        ..spec.config.clone()
    };
    let mut eve = Eavesdropper::new(spec.attack.clone(), mix(seed, EVE_STREAM));
    let session = run_session(&config, &message, &keys, &mut eve)?;
    Ok(TrialOutput {
        trial,
        seed,
        message,
        session,
        eve: eve.into_record(),
    })
}

fn tally(spec: &RunSpec, out: &TrialOutput, keys_alice: &[bool], keys_bob: &[bool]) -> (Tally, TrialRow) {
    let s = &out.session;
    let mut t = Tally::default();
    let mut auth_errors = 0;
    for c in &s.auth_checks {
        let e = c.is_error() as u64;
        auth_errors += e as usize;
        t.auth_errors_by_key_alice[c.key_alice as usize] += e;
        t.auth_checked_by_key_alice[c.key_alice as usize] += 1;
        t.auth_errors_by_key_bob[c.key_bob as usize] += e;
        t.auth_checked_by_key_bob[c.key_bob as usize] += 1;
    }
    t.auth_errors = auth_errors as u64;
    t.auth_checked = s.auth_checks.len() as u64;
    t.detected = (auth_errors > 0) as u64;
    t.aborted = (s.verdict == Verdict::AuthAborted) as u64;

    let mut row = TrialRow {
        trial: out.trial,
        seed: out.seed,
        verdict: s.verdict,
        auth_errors,
        auth_checked: s.auth_checks.len(),
        msg_errors: None,
        msg_checked: None,
        delivered_correct: None,
        ecc_corrected: None,
    };

    let mut sent_at = BTreeMap::new();
    if let Some(m) = &s.message {
        t.msg_sessions = 1;
        t.msg_errors = m.result.errors as u64;
        t.msg_checked = m.result.checked as u64;
        row.msg_errors = Some(m.result.errors);
        row.msg_checked = Some(m.result.checked);
        match &m.result.message {
            Some(d) => {
                let ok = *d == out.message;
                t.delivered = 1;
                t.delivered_correct = ok as u64;
                row.delivered_correct = Some(ok);
                row.ecc_corrected = Some(m.result.corrected);
            }
            None => t.discarded = 1,
        }
        for (&p, &b) in m.positions.iter().zip(&m.sent) {
            sent_at.insert(p, b);
        }
    }

    let message_channel = spec.config.variant.message_channel();
    for e in &out.eve.entries {
        let Some(reading) = e.ancilla.or(e.intercepted) else {
            continue;
        };
        match e.channel {
            Channel::TrentAlice => t.eve_auth[keys_alice[e.position] as usize][reading as usize] += 1,
            Channel::TrentBob => t.eve_auth[keys_bob[e.position] as usize][reading as usize] += 1,
            ch if ch == message_channel => {
                if let Some(&b) = sent_at.get(&e.position) {
                    t.eve_message[b as usize][reading as usize] += 1;
                }
            }
            _ => {}
        }
    }
    (t, row)
}

fn rate(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Closed-form reference values for `spec`.
pub fn analytic_reference(spec: &RunSpec) -> Result<Analytic, HarnessError> {
    let attack = &spec.attack;
    let exact = match attack.variant {
        AttackVariant::None => ExactAttack::None,
        AttackVariant::InterceptResend { basis } => ExactAttack::Intercept(basis),
        AttackVariant::EntangleCnot => ExactAttack::cnot(),
        AttackVariant::EntangleGeneral(ref a) => ExactAttack::general(a),
    };
    let on = |ch: Channel| if attack.is_active() && attack.targets(ch) { exact } else { ExactAttack::None };
    let auth = analysis::auth_check_error_uniform(on(Channel::TrentAlice), on(Channel::TrentBob), attack.coverage)
        .map_err(ProtocolError::from)?;
    let distribution_clean = !(attack.is_active() && (attack.targets(Channel::TrentAlice) || attack.targets(Channel::TrentBob)));
    let message = if distribution_clean {
        let hit = analysis::message_error(spec.config.variant, on(spec.config.variant.message_channel()))
            .map_err(ProtocolError::from)?;
        Some(hit * if attack.is_active() { attack.coverage } else { 0.0 })
    } else {
        None
    };
    Ok(Analytic {
        auth_error_rate: auth,
        detection_rate: analysis::detection_probability(auth, spec.config.m_auth_check),
        message_error_rate: message,
    })
}

/// Run all trials, in parallel, and return them in trial order.
pub fn run_trials(spec: &RunSpec) -> Result<Vec<TrialOutput>, HarnessError> {
    spec.validate()?;
    (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, i).map_err(|source| HarnessError::Trial { trial: i, source }))
        .collect()
}

/// Execute `spec` and aggregate. Deterministic in `spec`, independent of thread count.
pub fn run(spec: &RunSpec) -> Result<RunReport, HarnessError> {
    let warnings = spec.validate()?;
    let analytic = analytic_reference(spec)?;
    let n = spec.config.n_ghz;
    let blocks = blocks_for(n, DEFAULT_KEY_BLOCK_BITS) as u64;
    let results: Vec<(Tally, TrialRow)> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let out = run_trial(spec, i).map_err(|source| HarnessError::Trial { trial: i, source })?;
            // Re-derive the keys only for conditioning; they never leave this function.
            let keys = key_registry(i, blocks)?.issue_session(n)?;
            Ok(tally(spec, &out, keys.alice.bits(), keys.bob.bits()))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut total = Tally::default();
    let mut verdicts = BTreeMap::new();
    let mut rows = Vec::with_capacity(if spec.per_trial { results.len() } else { 0 });
    for (t, row) in results {
        total.add(&t);
        *verdicts.entry(row.verdict.to_string()).or_insert(0) += 1;
        if spec.per_trial {
            rows.push(row);
        }
    }
    let trials = spec.trials;
    let frac = |x: u64| x as f64 / trials as f64;
    let aggregate = Aggregate {
        auth_check_bits: total.auth_checked,
        auth_error_rate: rate(total.auth_errors, total.auth_checked).unwrap_or(0.0),
        auth_error_rate_by_key_alice: [0, 1].map(|b| rate(total.auth_errors_by_key_alice[b], total.auth_checked_by_key_alice[b])),
        auth_error_rate_by_key_bob: [0, 1].map(|b| rate(total.auth_errors_by_key_bob[b], total.auth_checked_by_key_bob[b])),
        detection_rate: frac(total.detected),
        abort_rate: frac(total.aborted),
        message_check_bits: total.msg_checked,
        message_error_rate: if total.msg_sessions > 0 {
            Some(rate(total.msg_errors, total.msg_checked).unwrap_or(0.0))
        } else {
            None
        },
        discard_rate: frac(total.discarded),
        delivery_rate: frac(total.delivered),
        delivery_fidelity: rate(total.delivered_correct, total.delivered),
        eve_given_message_bit: EveHistogram::from_counts(total.eve_message),
        eve_given_key_bit: EveHistogram::from_counts(total.eve_auth),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        timestamp: None,
        seed: spec.config.seed,
        trials,
        config: spec.config.clone(),
        message: spec.message.clone(),
        attack: AttackEcho::from_model(&spec.attack),
        warnings,
        aggregate,
        analytic,
        verdicts,
        per_trial: rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n_ghz: usize,
    pub trials: u64,
    pub detection_rate: f64,
    pub analytic: f64,
    pub auth_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub seed: u64,
    pub attack: AttackEcho,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn write<W: Write>(&self, format: OutputFormat, mut w: W) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self)?;
                writeln!(w)?;
            }
            OutputFormat::Csv => {
                let mut out = csv::Writer::from_writer(w);
                for r in &self.rows {
                    out.serialize(r)?;
                }
                out.flush()?;
            }
        }
        Ok(())
    }
}

/// One run per `m`. The number of triples left after authentication is held
/// fixed, so `N` grows with `m`.
pub fn sweep_detection_curve(base: &RunSpec, ms: &[usize]) -> Result<SweepReport, HarnessError> {
    if ms.is_empty() || ms.contains(&0) {
        return Err(HarnessError::Spec("m values must be positive".into()));
    }
    let survivors = base.config.survivors();
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut spec = base.clone();
        spec.per_trial = false;
        spec.config.m_auth_check = m;
        spec.config.n_ghz = survivors + m;
        let report = run(&spec)?;
        rows.push(SweepRow {
            m,
            n_ghz: spec.config.n_ghz,
            trials: spec.trials,
            detection_rate: report.aggregate.detection_rate,
            analytic: report.analytic.detection_rate,
            auth_error_rate: report.aggregate.auth_error_rate,
        });
    }
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        timestamp: None,
        seed: base.config.seed,
        attack: AttackEcho::from_model(&base.attack),
        rows,
    })
}

/// Parse the `--message` argument into a fixed source.
pub fn fixed_message(text: &str) -> Result<MessageSource, bits::ParseError> {
    Ok(MessageSource::Fixed {
        bits: bits::parse_message(text)?,
    })
}
