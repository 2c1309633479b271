use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use diffapprox_cli::{emit, execute, CliError, Command, OutputFormat, Overrides, RawConfig};

#[derive(Parser, Debug)]
#[command(
    name = "diffapprox",
    version,
    about = "Queue and diffusion experiments for load-balancing networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides `master_seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Number of replicas (overrides `M`).
    #[arg(long, global = true, value_name = "M")]
    replicas: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Number of grid intervals on [0, T] (overrides `grid_points`).
    #[arg(long, global = true, value_name = "K")]
    grid: Option<usize>,

    /// Euler step (overrides `h`).
    #[arg(long, global = true, value_name = "H")]
    step: Option<f64>,

    #[arg(long, global = true, value_name = "a,b,c", value_delimiter = ',')]
    n_list: Option<Vec<u64>>,

    #[arg(long, global = true, value_name = "G")]
    gamma: Option<f64>,

    #[arg(long, global = true, value_name = "e1,e2,...", value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Scaled queue paths per replica, or summarized by grid point.
    SimulateQueue,
    /// Euler-Maruyama paths of the limit SDE (alternative scaling with --gamma).
    SimulateSde,
    /// Deterministic fluid path.
    Fluid,
    /// KS distance between queue and SDE terminal laws for each n in n_list.
    Compare,
    /// Fraction of time near the switching set over the eps ladder.
    Occupation,
    /// Martingale-problem residuals over the polynomial test family.
    MartingaleCheck,
    /// Krylov ratio over the eps ladder.
    KrylovCheck,
    /// Terminal integrals of the routing vector for queue and SDE.
    Functional,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::SimulateQueue => Command::SimulateQueue,
            Sub::SimulateSde => Command::SimulateSde,
            Sub::Fluid => Command::Fluid,
            Sub::Compare => Command::Compare,
            Sub::Occupation => Command::Occupation,
            Sub::MartingaleCheck => Command::MartingaleCheck,
            Sub::KrylovCheck => Command::KrylovCheck,
            Sub::Functional => Command::Functional,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DIFFAPPROX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "DIFFAPPROX_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("missing required flag --config".into()))?;
    let over = Overrides {
        seed: cli.seed,
        replicas: cli.replicas,
        out: cli.out,
        format: cli.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }),
        grid_points: cli.grid,
        step: cli.step,
        n_list: cli.n_list,
        gamma: cli.gamma,
        eps_ladder: cli.eps_ladder,
    };
    let cfg = RawConfig::from_path(&path)?.resolve(over)?;
    let text = execute(cli.command.into(), &cfg)?;
    emit(&cfg, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diffapprox: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
