//! Command-line front end for the `bellwigner` simulator.
//!
//! `run` is the whole program; `main` only wires it to the process. Data goes
//! to stdout (or `--out`), diagnostics to stderr. Exit status is 0 on
//! success, 1 when a check fails or output cannot be written, 2 on a usage
//! error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use bellwigner::chsh::{self, classical_enumeration, joint_distribution};
use bellwigner::interpretations::{
    self, agreement_report, grw_exact_probability, grw_linear_probability, grw_simulate,
    FriendScale, GrwParams, PilotWaveOutcome,
};
use bellwigner::observables::{self, verify_algebra, ObservableLabel, ObservableSet};
use bellwigner::states::{self, FriendMapping, StateVector};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{resolve, Format, Overrides, RunConfig, Scale, Setting, SEED_ENV};
use output::Document;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bellwigner",
    version,
    about = "Exact and sampled CHSH statistics for the extended Wigner's-friend experiment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random stream (falls back to $BELLWIGNER_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Measurements per setting pair for sampled runs
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    shots: Option<u64>,
    /// Monte Carlo trials for grw-sim
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Number of particles in the friend
    #[arg(long = "n", global = true)]
    n_particles: Option<f64>,
    /// Measurement duration in seconds
    #[arg(long = "t", global = true)]
    duration_s: Option<f64>,
    /// Localization rate per particle, in 1/s
    #[arg(long = "rate", global = true)]
    rate_per_particle: Option<f64>,
    /// Setting pair for `distribution`: 00, 01, 10 or 11
    #[arg(long, global = true)]
    setting: Option<Setting>,
    /// Friend scale for `agreement` and `branches`
    #[arg(long, global = true, value_enum)]
    scale: Option<Scale>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the document here instead of stdout
    #[arg(long = "out", global = true)]
    output_path: Option<PathBuf>,
    /// Flat JSON object of defaults; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StateName {
    /// The four-photon state of the experiment
    BellWigner,
    /// (|h> + |v>)/sqrt(2)
    Plus,
    /// The plus photon recorded by an aligned friend
    Friend,
    /// The antisymmetric photon pair
    Pair,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact correlators and S for the four-photon state
    ChshExact,
    /// Monte Carlo CHSH run with --shots per setting
    ChshSample,
    /// Maximum of S over simultaneous value assignments
    ClassicalBound,
    /// Joint outcome table for one setting pair
    Distribution,
    /// Check the algebraic identities of the four observables
    VerifyAlgebra,
    /// Linear and Poisson GRW localization probabilities
    GrwProb,
    /// Monte Carlo GRW first-collapse times
    GrwSim,
    /// Branch structure of a photon recorded by a friend
    Branches,
    /// CHSH under the pilot-wave, GRW and many-worlds backends
    Agreement,
    /// Print a state vector
    DumpState {
        #[arg(value_enum, default_value = "bell-wigner")]
        which: StateName,
    },
    /// Print an observable and its spectrum
    DumpObservable {
        #[arg(value_parser = |s: &str| s.parse::<ObservableLabel>())]
        label: ObservableLabel,
    },
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<bellwigner::Error> for Failure {
    fn from(e: bellwigner::Error) -> Self {
        match e {
            bellwigner::Error::InvalidParameter { .. } => Self::Usage(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

fn grw_params(cfg: &RunConfig) -> Result<GrwParams, Failure> {
    Ok(GrwParams::new(
        cfg.n_particles,
        cfg.duration_s,
        cfg.rate_per_particle,
    )?)
}

fn friend_state() -> StateVector {
    states::correlate_friend(&states::plus_photon(), FriendMapping::Aligned).expect("photon input")
}

/// Returns the document and whether every internal check passed.
fn execute(command: &Command, cfg: &RunConfig) -> Result<(Document, bool), Failure> {
    let psi = states::bell_wigner_state();
    let doc = match command {
        Command::ChshExact => Document::Chsh(chsh::chsh_exact(&psi)?),
        Command::ChshSample => {
            if cfg.shots < 2 {
                return Err(Failure::Usage(format!(
                    "--shots must be at least 2, got {}",
                    cfg.shots
                )));
            }
            Document::Chsh(chsh::chsh_sampled(&psi, cfg.shots, cfg.seed)?)
        }
        Command::ClassicalBound => {
            let e = classical_enumeration();
            Document::ClassicalBound {
                max: e.max,
                cases: e.cases,
                maximizers: e.maximizers.len(),
            }
        }
        Command::Distribution => Document::Distribution {
            setting: cfg.setting.to_string(),
            outcomes: joint_distribution(&psi, cfg.setting.alice, cfg.setting.bob)?,
        },
        Command::VerifyAlgebra => {
            let report = verify_algebra(&ObservableSet::standard());
            let ok = report.all_passed;
            return Ok((Document::Algebra(report), ok));
        }
        Command::GrwProb => {
            let p = grw_params(cfg)?;
            Document::GrwProb {
                params: serde_json::to_value(p).expect("serializable"),
                linear: grw_linear_probability(&p),
                exact: grw_exact_probability(&p),
            }
        }
        Command::GrwSim => {
            let p = grw_params(cfg)?;
            let sim = grw_simulate(&p, cfg.trials, cfg.seed)?;
            let exact = grw_exact_probability(&p);
            let sigma = (exact * (1.0 - exact) / sim.trials as f64).sqrt();
            Document::GrwSim(json!({
                "n_particles": p.n_particles,
                "duration_s": p.duration_s,
                "rate_per_particle": p.rate_per_particle,
                "seed": cfg.seed,
                "trials": sim.trials,
                "collapsed_fraction": sim.collapsed_fraction,
                "mean_collapse_time_s": sim.mean_collapse_time_s,
                "exact_probability": exact,
                "binomial_sigma": sigma,
            }))
        }
        Command::Branches => {
            let input = friend_state();
            let scale = FriendScale::of_kind(cfg.scale.into());
            let worlds = interpretations::many_worlds_branches(&input)?;
            let pilot = interpretations::pilot_wave_effective_state(&input, &scale, cfg.seed)?;
            let grw = interpretations::grw_collapse_state(&input, cfg.seed)?;
            let pilot_json = match &pilot {
                PilotWaveOutcome::Kept(s) => json!({"kept": s}),
                PilotWaveOutcome::Collapsed(b) => json!({"collapsed": b}),
            };
            let doc = json!({
                "input": input,
                "scale": scale.kind(),
                "many_worlds": worlds,
                "pilot_wave": pilot_json,
                "grw_collapse": grw,
            });
            let mut rows: Vec<(String, _)> = worlds
                .into_iter()
                .map(|b| ("many_worlds".to_string(), b))
                .collect();
            if let PilotWaveOutcome::Collapsed(b) = pilot {
                rows.push(("pilot_wave".into(), b));
            }
            rows.push(("grw_collapse".into(), grw));
            Document::Branches(doc, rows)
        }
        Command::Agreement => {
            if cfg.shots < 2 {
                return Err(Failure::Usage(format!(
                    "--shots must be at least 2, got {}",
                    cfg.shots
                )));
            }
            let scale = FriendScale::of_kind(cfg.scale.into());
            let report = agreement_report(&psi, &scale, cfg.shots, cfg.seed)?;
            let ok = report.all_equal;
            return Ok((Document::Agreement(report), ok));
        }
        Command::DumpState { which } => Document::State(match which {
            StateName::BellWigner => psi,
            StateName::Plus => states::plus_photon(),
            StateName::Friend => friend_state(),
            StateName::Pair => states::entangled_pair(),
        }),
        Command::DumpObservable { label } => Document::Observable(observables::make(*label)),
    };
    Ok((doc, true))
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        seed: cli.seed,
        shots: cli.shots,
        trials: cli.trials,
        n_particles: cli.n_particles,
        duration_s: cli.duration_s,
        rate_per_particle: cli.rate_per_particle,
        setting: cli.setting,
        scale: cli.scale,
        format: cli.format,
        output_path: cli.output_path.clone(),
    }
}

/// Runs one invocation. `env_seed` stands in for `$BELLWIGNER_SEED`.
pub fn run_with<I, T>(
    args: I,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let cfg = match resolve(env_seed, cli.config.as_deref(), &overrides(&cli)) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let (doc, ok) = match execute(&cli.command, &cfg) {
        Ok(r) => r,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_CHECK_FAILED;
        }
    };
    let text = doc.render(cfg.format);
    let written = match &cfg.output_path {
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write stdout: {e}")),
    };
    if let Err(msg) = written {
        let _ = writeln!(stderr, "error: {msg}");
        return EXIT_CHECK_FAILED;
    }
    if !ok {
        let _ = writeln!(stderr, "error: internal check failed");
        return EXIT_CHECK_FAILED;
    }
    EXIT_OK
}

/// Runs one invocation, reading `$BELLWIGNER_SEED` from the environment.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with(args, env_seed.as_deref(), stdout, stderr)
}
