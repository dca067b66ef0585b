use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crawlfv::config::{Config, ConfigError};
use crawlfv::convergence::{fitted_order, poisson_convergence};
use crawlfv::driver::{mass_check, run_simulation, DriverError, OutputMode};
use crawlfv::pressure::{BoundaryMode, PressureError};
use crawlfv::sweep::{run_configured_sweep, SweepError};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "crawlfv", version, about = "Crawling-cell annulus solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write meta.txt, timeseries.csv and snapshots.
    Run { config: PathBuf },
    /// Run the dr × dt × k_on sweep from the config lists and write sweep.csv.
    Sweep { config: PathBuf },
    /// Pressure convergence study against the analytic radial solution.
    PoissonCheck {
        config: PathBuf,
        /// Comma-separated ring counts.
        #[arg(long, default_value = "10,20,40,80", value_delimiter = ',')]
        n_r: Vec<usize>,
    },
    /// Step `mass_check_steps` times and print the largest relative mass drift.
    MassCheck {
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn load(path: &Path) -> Result<Config, ConfigError> {
    Ok(Config::from_file(path)?.with_env_overrides())
}

fn driver_exit(e: &DriverError) -> u8 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_VALIDATION
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let cfg_err = |e: ConfigError| (EXIT_VALIDATION, e.to_string());
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config).map_err(cfg_err)?;
            let out = run_simulation(&cfg, OutputMode::Full).map_err(|e| (driver_exit(&e), e.to_string()))?;
            let r = &out.report;
            match r.t_steady {
                Some(t) => println!("steady state at t = {t:e} (step {})", r.step_steady.unwrap_or(0)),
                None => println!("no steady state before t_max = {:e}", cfg.t_max),
            }
            println!("polarization = {:e}", r.polarization);
            println!("final polarization = {:e}", r.final_polarization);
            println!("max mass drift = {:e}", r.max_mass_drift);
            println!("output written to {}", cfg.output_dir.display());
        }
        Command::Sweep { config } => {
            let cfg = load(&config).map_err(cfg_err)?;
            let records = run_configured_sweep(&cfg).map_err(|e| match e {
                SweepError::Pool(m) => (EXIT_SOLVER, m),
                SweepError::Output(o) => (EXIT_VALIDATION, o.to_string()),
            })?;
            let failed = records.iter().filter(|r| r.status.label() == "failed").count();
            println!(
                "{} records written to {}",
                records.len(),
                crawlfv::output::sweep_path(&cfg.output_dir).display()
            );
            if failed > 0 {
                return Err((EXIT_SOLVER, format!("{failed} sweep points failed")));
            }
        }
        Command::PoissonCheck { config, n_r } => {
            let cfg = load(&config).map_err(cfg_err)?;
            for mode in [BoundaryMode::Paper, BoundaryMode::Face] {
                let rows = poisson_convergence(
                    cfg.r_min,
                    cfg.r_max,
                    cfg.params.k_d,
                    cfg.n_theta,
                    &n_r,
                    mode,
                    cfg.solver,
                    cfg.solver_tol,
                )
                .map_err(|e| match e {
                    PressureError::Solve(_) => (EXIT_SOLVER, e.to_string()),
                    _ => (EXIT_VALIDATION, e.to_string()),
                })?;
                println!("mode {mode}");
                println!("  n_r        dr            linf_error    order");
                for row in &rows {
                    let order = row.order.map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
                    println!("  {:<10} {:<13.6e} {:<13.6e} {}", row.n_r, row.dr, row.error, order);
                }
                if let Some(o) = fitted_order(&rows) {
                    println!("  fitted order {o:.3}");
                }
            }
        }
        Command::MassCheck { config, steps } => {
            let cfg = load(&config).map_err(cfg_err)?;
            let n = steps.unwrap_or(cfg.mass_check_steps);
            let drift = mass_check(&cfg, n).map_err(|e| (driver_exit(&e), e.to_string()))?;
            println!("max relative mass drift over {n} steps = {drift:e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
