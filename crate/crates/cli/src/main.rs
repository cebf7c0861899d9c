use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use channelcert::certify::DistanceMode;
use channelcert::random::{
    epsilon_far_unitary_channel, gaussian_perturbed_depolarizing, GAUSSIAN_EPS_MAX,
};
use channelcert::RngStream;
use channelcert_cli::curve::{complexity_curve, write_curve_csv};
use channelcert_cli::lemmas::verify_lemmas;
use channelcert_cli::{run, summarize, write_csv, CliError, ExperimentConfig, Mode, RunOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "channelcert",
    version,
    about = "Quantum channel identity testing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Falls back to the config, then CHANNELCERT_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Rounds of the depolarizing tester.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveMode {
    Unitary,
    Depolarizing,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    UnitaryMixture,
    GaussianDepolarizing,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Trace,
    Diamond,
}

#[derive(Subcommand)]
enum Command {
    /// Run the unitary identity tester on null and far instances.
    CertifyUnitary {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        distance: Option<DistanceArg>,
        /// Record per-trial wall time (makes output nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Run the depolarizing identity tester on null and far instances.
    CertifyDepolarizing {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        timing: bool,
    },
    /// Check the moment identities and bounds; writes JSON lines.
    VerifyLemmas {
        #[command(flatten)]
        common: Common,
        /// Extra channel file to check (repeatable).
        #[arg(long = "channel")]
        channels: Vec<PathBuf>,
    },
    /// Exact use counts and detection rates across dimensions.
    ComplexityCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "unitary")]
        mode: CurveMode,
    },
    /// Sample one adversarial channel and write it as JSON.
    AdversarialDump {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        d_in: Option<usize>,
        #[arg(long)]
        d_out: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

fn load(common: &Common, default: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => default,
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if common.rounds.is_some() {
        cfg.rounds = common.rounds;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn certify(cfg: &ExperimentConfig, mode: Mode, timing: bool) -> Result<(), CliError> {
    let records = run(cfg, mode, RunOptions { timing })?;
    let mut w = output(cfg)?;
    write_csv(&records, &mut w)?;
    w.flush()?;
    let summaries = summarize(&records);
    let mut failed = Vec::new();
    for s in &summaries {
        eprintln!(
            "{}: {}/{} rejected ({:.4}, 95% CI [{:.4}, {:.4}]){}",
            s.experiment_id,
            s.rejections,
            s.trials,
            s.rejection_rate,
            s.ci95.0,
            s.ci95.1,
            s.requirement
                .as_ref()
                .map(|r| format!(", requires {r}"))
                .unwrap_or_default()
        );
        if !s.holds {
            failed.push(s.experiment_id.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "rate requirement violated in {}",
            failed.join(", ")
        )))
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::CertifyUnitary {
            common,
            distance,
            timing,
        } => {
            let mut cfg = load(&common, ExperimentConfig::unitary_default())?;
            match distance {
                Some(DistanceArg::Trace) => cfg.distance = DistanceMode::Trace,
                Some(DistanceArg::Diamond) => cfg.distance = DistanceMode::Diamond,
                None => {}
            }
            with_threads(common.threads, || certify(&cfg, Mode::Unitary, timing))
        }
        Command::CertifyDepolarizing { common, timing } => {
            let cfg = load(&common, ExperimentConfig::depolarizing_default())?;
            with_threads(common.threads, || certify(&cfg, Mode::Depolarizing, timing))
        }
        Command::VerifyLemmas { common, channels } => {
            let mut cfg = load(&common, ExperimentConfig::lemmas_default())?;
            cfg.channel_files.extend(channels);
            let lines = with_threads(common.threads, || verify_lemmas(&cfg))?;
            let mut w = output(&cfg)?;
            for l in &lines {
                serde_json::to_writer(&mut w, l)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            let failed = lines.iter().filter(|l| !l.holds()).count();
            eprintln!("{} checks, {failed} failed", lines.len());
            if failed > 0 {
                return Err(CliError::Assertion(format!("{failed} checks failed")));
            }
            Ok(())
        }
        Command::ComplexityCurve { common, mode } => {
            let mode = match mode {
                CurveMode::Unitary => Mode::Unitary,
                CurveMode::Depolarizing => Mode::Depolarizing,
            };
            let cfg = load(&common, ExperimentConfig::curve_default(mode))?;
            let points = with_threads(common.threads, || complexity_curve(&cfg, mode))?;
            let mut w = output(&cfg)?;
            write_curve_csv(&points, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::AdversarialDump {
            common,
            family,
            d_in,
            d_out,
            epsilon,
        } => {
            let cfg = load(&common, ExperimentConfig::default())?;
            let (cd_in, cd_out) = cfg.dims.first().copied().unwrap_or((4, 4));
            let (d_in, d_out) = (d_in.unwrap_or(cd_in), d_out.unwrap_or(cd_out));
            let mut rng = RngStream::new(cfg.resolved_seed()?, 0);
            let adv = match family {
                FamilyArg::UnitaryMixture => {
                    if d_in != d_out {
                        return Err(CliError::Config {
                            field: "dims".into(),
                            msg: "unitary mixture needs d_in = d_out".into(),
                        });
                    }
                    let eps = epsilon.or(cfg.epsilons.first().copied()).unwrap_or(0.5);
                    epsilon_far_unitary_channel(d_in, eps, &mut rng)?
                }
                FamilyArg::GaussianDepolarizing => {
                    let eps = epsilon
                        .or(cfg.epsilons.first().copied())
                        .unwrap_or(GAUSSIAN_EPS_MAX);
                    gaussian_perturbed_depolarizing(d_in, d_out, eps, &mut rng, 10_000)?
                }
            };
            let mut w = output(&cfg)?;
            serde_json::to_writer_pretty(&mut w, &adv.to_json())?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(())
        }
    }
}

fn with_threads<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config {
            field: "threads".into(),
            msg: e.to_string(),
        })?;
    pool.install(f)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
