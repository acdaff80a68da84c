use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ghz_qdc::adversary::{named_qubit, AttackModel, AttackVariant, Basis, Completion, GeneralAttack, GeneralParams};
use ghz_qdc::bits::parse_complex;
use ghz_qdc::channel::Channel;
use ghz_qdc::ecc::Codec;
use ghz_qdc::harness::{self, fixed_message, MessageSource, OutputFormat, RunSpec};
use ghz_qdc::protocol::{MeasurementOrder, ProtocolVariant, SessionConfig};

#[derive(Parser)]
#[command(name = "qdc-sim", version, about = "Monte Carlo simulator for authenticated GHZ direct communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of sessions and report aggregate statistics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Omit the per-trial table from JSON output.
        #[arg(long)]
        summary_only: bool,
        /// Also write the event log of trial 0 to this file.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Detection rate against the number of authentication check bits.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated check-bit counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
        m_values: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "qdc1")]
    protocol: ProtocolVariant,
    #[arg(long, default_value_t = 256)]
    n_ghz: usize,
    #[arg(long, default_value_t = 32)]
    auth_check_bits: usize,
    #[arg(long, default_value_t = 0.25)]
    msg_check_fraction: f64,
    /// Fixed message as a bit string or 0x-prefixed hex.
    #[arg(long, conflicts_with = "message_bits")]
    message: Option<String>,
    /// Length of the random per-trial message when --message is absent.
    #[arg(long, default_value_t = 64)]
    message_bits: usize,
    /// none, repN (odd N) or hamming74.
    #[arg(long, default_value = "none")]
    ecc: Codec,
    /// none, intercept, entangle-cnot or entangle-general.
    #[arg(long, default_value = "none")]
    attack: String,
    #[arg(long, value_delimiter = ',', default_value = "trent-alice")]
    attack_channels: Vec<Channel>,
    #[arg(long, default_value_t = 1.0)]
    attack_coverage: f64,
    /// Basis of the intercept-resend measurement.
    #[arg(long, default_value = "z")]
    intercept_basis: Basis,
    /// Basis Eve measures her ancillas in.
    #[arg(long, default_value = "z")]
    ancilla_basis: Basis,
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    alpha: String,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    beta: String,
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    alpha_p: String,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    beta_p: String,
    /// e00,e01,e10,e11 as named states 0, 1, + or -.
    #[arg(long, default_value = "0,1,0,1", allow_hyphen_values = true)]
    ancilla_states: String,
    #[arg(long, default_value = "forward")]
    completion: String,
    /// Message-phase measurement order of bob, trent and eve.
    #[arg(long, default_value = "bob,trent,eve")]
    order: String,
    /// Second protocol only: Bob measures before Alice encodes.
    #[arg(long)]
    bob_early: bool,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    threshold_auth: f64,
    #[arg(long, default_value_t = 0.0)]
    threshold_msg: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
    /// Leave the timestamp out so identical runs give identical bytes.
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn attack_model(&self) -> Result<AttackModel> {
        let variant = match self.attack.as_str() {
            "none" => AttackVariant::None,
            "intercept" => AttackVariant::InterceptResend {
                basis: self.intercept_basis,
            },
            "entangle-cnot" => AttackVariant::EntangleCnot,
            "entangle-general" => {
                let c = |name: &str, v: &str| parse_complex(v).with_context(|| format!("--{name}"));
                let states: Vec<&str> = self.ancilla_states.split(',').map(str::trim).collect();
                let [e00, e01, e10, e11] = states[..] else {
                    bail!("--ancilla-states needs four comma-separated states, got {:?}", self.ancilla_states);
                };
                let q = |s: &str| named_qubit(s).map_err(|e| anyhow!("--ancilla-states: {e}"));
                let params = GeneralParams {
                    alpha: c("alpha", &self.alpha)?,
                    beta: c("beta", &self.beta)?,
                    alpha_p: c("alpha-p", &self.alpha_p)?,
                    beta_p: c("beta-p", &self.beta_p)?,
                    e00: q(e00)?,
                    e01: q(e01)?,
                    e10: q(e10)?,
                    e11: q(e11)?,
                };
                let completion = match self.completion.as_str() {
                    "forward" => Completion::Forward,
                    "reverse" => Completion::Reverse,
                    other => bail!("unknown completion {other:?}"),
                };
                AttackVariant::EntangleGeneral(GeneralAttack::new(params, completion)?)
            }
            other => bail!("unknown attack {other:?}; expected none, intercept, entangle-cnot or entangle-general"),
        };
        let mut model = AttackModel::new(variant, &self.attack_channels, self.attack_coverage)?;
        model.ancilla_basis = self.ancilla_basis;
        Ok(model)
    }

    fn spec(&self) -> Result<RunSpec> {
        let config = SessionConfig {
            n_ghz: self.n_ghz,
            m_auth_check: self.auth_check_bits,
            check_fraction_msg: self.msg_check_fraction,
            error_threshold_auth: self.threshold_auth,
            error_threshold_msg: self.threshold_msg,
            codec: self.ecc,
            variant: self.protocol,
            order: self.order.parse::<MeasurementOrder>()?,
            bob_measures_early: self.bob_early,
            seed: self.seed,
        };
        let message = match &self.message {
            Some(text) => fixed_message(text).context("--message")?,
            None => MessageSource::Random { len: self.message_bits },
        };
        let spec = RunSpec::new(config, self.attack_model()?, self.trials, message);
        for w in spec.validate()? {
            eprintln!("warning: {w}");
        }
        Ok(spec)
    }

    fn timestamp(&self) -> Option<u64> {
        if self.no_timestamp {
            return None;
        }
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            summary_only,
            transcript,
        } => {
            let mut spec = common.spec()?;
            spec.per_trial = !summary_only || common.format == OutputFormat::Csv;
            if let Some(path) = transcript {
                let first = harness::run_trial(&spec, 0)?;
                std::fs::write(&path, first.session.transcript.to_log())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let mut report = harness::run(&spec)?;
            report.timestamp = common.timestamp();
            let mut out = common.output()?;
            report.write(common.format, &mut out)?;
            out.flush()?;
        }
        Command::Sweep { common, m_values } => {
            let spec = common.spec()?;
            let mut report = harness::sweep_detection_curve(&spec, &m_values)?;
            report.timestamp = common.timestamp();
            let mut out = common.output()?;
            report.write(common.format, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
