use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use asq_lab::backends::io::load_vector;
use asq_lab::experiments::{run_experiment, Backend, Experiment, ExperimentConfig, TransportMode};
use asq_lab::net::{party_seed, spawn_tcp_party, PartyEndpoint, Role};

/// Seeded experiments on approximate sample-and-query access.
#[derive(Parser)]
#[command(name = "asq-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative-error estimation of scalars from noisy absolute estimates.
    Relative(RunArgs),
    /// Inner products with sample access to x and a classical y.
    InprodAsym(RunArgs),
    /// Inner products with sample access to both vectors.
    InprodSym(RunArgs),
    /// Real inner products of unit vectors with a known ℓ1 bound.
    InprodReal(RunArgs),
    /// Both inner-product estimators under perturbed sampling.
    Perturbed(RunArgs),
    /// Oversampling bounds of composed linear combinations.
    Lincomb(RunArgs),
    /// Amplitude-magnitude tomography from basis measurements.
    Tomography(RunArgs),
    /// Two-party overlap estimation via Pauli sampling.
    PauliDist(RunArgs),
    /// Column sampling from block-encoded matrices.
    Colsample(RunArgs),
    /// The ℓ2-distribution distance bound on random pairs.
    TvdSweep(RunArgs),
    /// Magic measures of a state, or identity and CDF sweeps.
    MagicReport(RunArgs),
    /// Serve one party of pauli-dist over TCP.
    Party(PartyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Root seed; every trial derives its own stream from it.
    #[arg(long)]
    seed: u64,
    /// Trials per setting.
    #[arg(long)]
    trials: Option<usize>,
    /// Dimensions (comma separated; the largest drawn for lincomb and tvd-sweep).
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    /// Qubits (inprod-real: dimension 4ⁿ; magic-report: largest drawn).
    #[arg(long)]
    qubits: Option<u32>,
    #[arg(long, alias = "eps")]
    epsilon: Option<f64>,
    /// Oversampling factors (comma separated).
    #[arg(long, value_delimiter = ',')]
    phi: Vec<f64>,
    /// ℓ2 perturbation sizes Δ for inprod-real (comma separated).
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// exact or noisy.
    #[arg(long)]
    backend: Option<Backend>,
    /// Scalars for relative (comma separated).
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Failure probability δ.
    #[arg(long)]
    fail_prob: Option<f64>,
    /// Sampler attempts per matrix for colsample.
    #[arg(long)]
    attempts: Option<u64>,
    /// Sampling distance as a fraction of the budget, for perturbed.
    #[arg(long)]
    budget_fraction: Option<f64>,
    /// Largest number of terms for lincomb.
    #[arg(long)]
    max_terms: Option<usize>,
    /// local, tcp or both.
    #[arg(long)]
    transport: Option<TransportMode>,
    /// Address of an external Alice party.
    #[arg(long)]
    alice: Option<String>,
    /// Address of an external Bob party.
    #[arg(long)]
    bob: Option<String>,
    /// Alice's state (JSON) for pauli-dist.
    #[arg(long)]
    psi: Option<PathBuf>,
    /// Bob's state (JSON) for pauli-dist.
    #[arg(long)]
    phi_state: Option<PathBuf>,
    /// State (JSON) for a single magic report.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Run the CDF bound sweep.
    #[arg(long)]
    cdf: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Write rows here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PartyArgs {
    /// alice or bob.
    #[arg(long)]
    role: Role,
    /// host:port to listen on.
    #[arg(long)]
    listen: String,
    /// The party's private state (JSON).
    #[arg(long)]
    state: PathBuf,
    /// Root seed shared with the coordinator.
    #[arg(long)]
    seed: u64,
    /// Stop after this many connections.
    #[arg(long)]
    sessions: Option<u64>,
}

fn set<T: Clone>(target: &mut Vec<T>, v: &[T]) {
    if !v.is_empty() {
        *target = v.to_vec();
    }
}

impl RunArgs {
    fn config(&self, experiment: Experiment) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(experiment, self.seed);
        set(&mut cfg.dims, &self.dim);
        set(&mut cfg.phis, &self.phi);
        set(&mut cfg.deltas, &self.delta);
        set(&mut cfg.values, &self.values);
        cfg.qubits = self.qubits;
        cfg.eps = self.epsilon.unwrap_or(cfg.eps);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.backend = self.backend.unwrap_or(cfg.backend);
        cfg.rho = self.rho.unwrap_or(cfg.rho);
        cfg.fail_prob = self.fail_prob.unwrap_or(cfg.fail_prob);
        cfg.attempts = self.attempts.unwrap_or(cfg.attempts);
        cfg.budget_fraction = self.budget_fraction.unwrap_or(cfg.budget_fraction);
        cfg.max_terms = self.max_terms.unwrap_or(cfg.max_terms);
        cfg.transport = self.transport.unwrap_or(cfg.transport);
        cfg.alice.clone_from(&self.alice);
        cfg.bob.clone_from(&self.bob);
        cfg.psi.clone_from(&self.psi);
        cfg.phi_state.clone_from(&self.phi_state);
        cfg.state.clone_from(&self.state);
        cfg.cdf = self.cdf;
        cfg.threads = self.threads;
        cfg
    }
}

fn run(args: &RunArgs, experiment: Experiment) -> ExitCode {
    let out = match run_experiment(&args.config(experiment)) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("asq-lab {}: {e}", experiment.name());
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let body = match args.format {
        Format::Csv => out.to_csv(),
        Format::Json => out.to_json(),
    };
    let summary = out.summary_line();
    match &args.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("asq-lab: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
            println!("{summary}");
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(body.as_bytes());
            match args.format {
                Format::Csv => {
                    let _ = writeln!(stdout, "# {summary}");
                }
                Format::Json => eprintln!("{summary}"),
            }
        }
    }
    ExitCode::SUCCESS
}

fn party(args: &PartyArgs) -> ExitCode {
    let state = match load_vector(&args.state) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("asq-lab party: {}: {e}", args.state.display());
            return ExitCode::from(1);
        }
    };
    let endpoint = match PartyEndpoint::new(args.role, &state, party_seed(args.seed, args.role)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("asq-lab party: {e}");
            return ExitCode::from(1);
        }
    };
    let listener = match TcpListener::bind(&args.listen) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("asq-lab party: cannot listen on {}: {e}", args.listen);
            return ExitCode::from(1);
        }
    };
    if let Ok(addr) = listener.local_addr() {
        eprintln!("{:?} listening on {addr}", args.role);
    }
    match spawn_tcp_party(Arc::new(endpoint), listener, args.sessions).join() {
        Ok(Ok(stats)) => {
            println!("sessions={} requests={} errors={}", stats.sessions, stats.requests, stats.errors);
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("asq-lab party: {e}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (args, experiment) = match &cli.command {
        Command::Party(p) => return party(p),
        Command::Relative(a) => (a, Experiment::Relative),
        Command::InprodAsym(a) => (a, Experiment::InprodAsym),
        Command::InprodSym(a) => (a, Experiment::InprodSym),
        Command::InprodReal(a) => (a, Experiment::InprodReal),
        Command::Perturbed(a) => (a, Experiment::Perturbed),
        Command::Lincomb(a) => (a, Experiment::Lincomb),
        Command::Tomography(a) => (a, Experiment::Tomography),
        Command::PauliDist(a) => (a, Experiment::PauliDist),
        Command::Colsample(a) => (a, Experiment::Colsample),
        Command::TvdSweep(a) => (a, Experiment::TvdSweep),
        Command::MagicReport(a) => (a, Experiment::MagicReport),
    };
    run(args, experiment)
}
