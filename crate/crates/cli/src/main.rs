use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qds_cli::commands::{self, parse_complex, ModelArgs, ModelKind, TimeGrid, ToleranceFlags};
use qds_cli::CliError;
use qds_core::models::{DropoutVariant, Packet};

/// Quantum dynamical semigroup generators: build, decompose, verify, evolve.
///
/// Exit codes: 0 success, 1 I/O or schema error, 2 validation failure.
#[derive(Parser, Debug)]
#[command(name = "qds", version)]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TolArgs {
    /// Equality tolerance (default 1e-10)
    #[arg(long = "tol-eq", global = true)]
    eq: Option<f64>,
    /// Positive-semidefiniteness tolerance (default 1e-10)
    #[arg(long = "tol-psd", global = true)]
    psd: Option<f64>,
    /// Relative Cholesky pivot rejection threshold (default 1e-12)
    #[arg(long = "tol-pivot", global = true)]
    pivot: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Standard form JSON -> superoperator matrix JSON
    Build { input: PathBuf, output: PathBuf },
    /// Superoperator matrix JSON -> standard form JSON
    Decompose {
        input: PathBuf,
        output: PathBuf,
        /// Reference basis vector index
        #[arg(long, default_value_t = 0)]
        chi: usize,
    },
    /// Check trace annihilation, conditional complete positivity and
    /// sampled pointwise positivity of a generator
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Trajectory CSV from a generator (superoperator or standard form JSON)
    Evolve {
        input: PathBuf,
        #[arg(long)]
        rho0: PathBuf,
        /// t0:t1:n
        #[arg(long, allow_hyphen_values = true)]
        times: String,
        output: PathBuf,
    },
    /// Build a lattice model, optionally evolve a Gaussian packet or run a
    /// grid-refinement table
    Model(ModelCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelName {
    Dropout,
    Sticking,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    Hopping,
    Upwind,
}

#[derive(Args, Debug)]
struct ModelCmd {
    #[arg(long)]
    model: ModelName,
    #[arg(long, value_enum, default_value = "hopping")]
    variant: Variant,
    /// Number of lattice sites
    #[arg(long = "N", default_value_t = 100)]
    sites: usize,
    /// Grid spacing
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Robin coefficient re+imi (sticking model)
    #[arg(long, default_value = "0+1i", allow_hyphen_values = true)]
    w: String,
    /// Packet centre
    #[arg(long, default_value_t = 5.0)]
    x0: f64,
    /// Standard deviation of |psi|^2
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Packet wavenumber (defaults: 0 for dropout, -1 for sticking)
    #[arg(long, allow_hyphen_values = true)]
    k0: Option<f64>,
    /// Number of grid halvings for the convergence table
    #[arg(long)]
    refine: Option<usize>,
    /// Final time of the convergence table
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    t: f64,
    /// Evolve the packet on this time grid (t0:t1:n); requires --csv
    #[arg(long, allow_hyphen_values = true)]
    evolve: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the initial packet density matrix as JSON
    #[arg(long)]
    rho0_out: Option<PathBuf>,
    /// Standard form JSON output
    output: Option<PathBuf>,
}

fn model_args(cmd: ModelCmd) -> Result<ModelArgs, CliError> {
    let kind = match cmd.model {
        ModelName::Dropout => ModelKind::Dropout(match cmd.variant {
            Variant::Hopping => DropoutVariant::Hopping,
            Variant::Upwind => DropoutVariant::Upwind,
        }),
        ModelName::Sticking => ModelKind::Sticking(parse_complex(&cmd.w)?),
    };
    let default_k0 = if matches!(kind, ModelKind::Sticking(_)) { -1.0 } else { 0.0 };
    Ok(ModelArgs {
        kind,
        sites: cmd.sites,
        h: cmd.h,
        packet: Packet {
            x0: cmd.x0,
            sigma: cmd.sigma,
            k0: cmd.k0.unwrap_or(default_k0),
        },
        t_final: cmd.t,
        refine: cmd.refine,
        evolve: cmd.evolve.as_deref().map(TimeGrid::parse).transpose()?,
        csv: cmd.csv,
        out: cmd.output,
        rho0_out: cmd.rho0_out,
    })
}

fn run(cli: Cli) -> Result<String, CliError> {
    let flags = ToleranceFlags {
        eq_tol: cli.tol.eq,
        psd_tol: cli.tol.psd,
        pivot_tol: cli.tol.pivot,
    };
    match cli.command {
        Command::Build { input, output } => commands::build(&input, &output, &flags),
        Command::Decompose { input, output, chi } => commands::decompose(&input, &output, chi, &flags),
        Command::Verify { input, seed, samples } => commands::verify(&input, seed, samples, &flags),
        Command::Evolve {
            input,
            rho0,
            times,
            output,
        } => commands::evolve(&input, &rho0, &TimeGrid::parse(&times)?, &output, &flags),
        Command::Model(cmd) => commands::model(&model_args(cmd)?, &flags),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
