use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitforge::minimize::MinimizeOptions;
use orbitforge_cli::commands::{self, SolveOverrides};
use orbitforge_cli::config::{self, P12Problem, Problem, Resolution, Thresholds};
use orbitforge_cli::{init_threads, CliError, Config, OrbitFile, Status};

/// Action-minimizing periodic orbits of the n-body problem.
#[derive(Parser)]
#[command(name = "orbitforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the action of a configured problem and write the best orbit.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        symmetry: Option<String>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long, default_value = "orbit.json")]
        out: PathBuf,
        /// Also write every run's full report, traces included.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate and check an orbit file against the thresholds.
    Verify {
        orbit: PathBuf,
        /// Config file whose [thresholds] table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimized P12 actions over a grid of angles in [0, π/6], as CSV.
    SweepP12 {
        /// Grid of angles, comma separated or repeated.
        #[arg(long, value_delimiter = ',')]
        u: Vec<f64>,
        /// Config file with solver options, resolution and a p12 problem.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averaged action against the parabolic ejection, as CSV.
    MarchalDemo {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Radii, comma separated; a halving ladder when absent.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        period: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Action of an orbit file.
    ActionEval {
        orbit: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sampled trajectories as `<out>.csv` and `<out>.svg`.
    Plot {
        orbit: PathBuf,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// Output prefix; the orbit file name without extension by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn std::io::Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<Status, CliError> {
    init_threads()?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Solve {
            config,
            seed,
            modes,
            samples,
            symmetry,
            u,
            out,
            report,
        } => {
            let mut cfg = Config::load(&config)?;
            SolveOverrides {
                seed,
                modes,
                samples,
                symmetry,
                u,
            }
            .apply(&mut cfg)?;
            commands::solve(&cfg, &out, report.as_deref(), &mut stdout)
        }
        Command::Verify {
            orbit,
            config,
            samples,
            out,
        } => {
            let file = OrbitFile::read(&orbit)?;
            let mut th = match config {
                Some(p) => config::load_thresholds(&p)?,
                None => Thresholds::default(),
            };
            if let Some(s) = samples {
                th.samples = s;
            }
            commands::verify(&file, &th, &mut *sink(&out)?)
        }
        Command::SweepP12 {
            u,
            config,
            period,
            seed,
            out,
        } => {
            let (mut problem, res, mut opts) = match config {
                Some(p) => {
                    let cfg = Config::load(&p)?;
                    let Problem::P12(problem) = cfg.problem else {
                        return Err(CliError::Input(format!("{}: expected a p12 problem", p.display())));
                    };
                    (problem, cfg.resolution, cfg.solver)
                }
                None => (
                    P12Problem {
                        u: 0.0,
                        period: 12.0,
                        push: orbitforge::minimize::P12Options::default().push,
                        noise: orbitforge::minimize::P12Options::default().noise,
                    },
                    Resolution::default(),
                    MinimizeOptions::default(),
                ),
            };
            if let Some(t) = period {
                problem.period = t;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            if !(problem.period.is_finite() && problem.period > 0.0) {
                return Err(CliError::Input(format!(
                    "period must be positive, got {}",
                    problem.period
                )));
            }
            commands::sweep_p12(&u, &problem, &res, &opts, &mut *sink(&out)?)
        }
        Command::MarchalDemo { dim, rho, period, out } => commands::marchal_demo(dim, &rho, period, &mut *sink(&out)?),
        Command::ActionEval { orbit, samples } => {
            commands::action_eval(&OrbitFile::read(&orbit)?, samples, &mut stdout)
        }
        Command::Plot { orbit, samples, out } => {
            let file = OrbitFile::read(&orbit)?;
            let prefix = out.unwrap_or_else(|| orbit.with_extension(""));
            commands::plot(&file, samples, &prefix, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("orbitforge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
