use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradflow::timestep::Correction;
use gradflow_cli::commands;
use gradflow_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "gradflow", version, about = "Energy-stable simulations of phase-field gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration, writing trace.csv and optional snapshots.
    Run { config: PathBuf },
    /// Final-time errors over a list of time steps against a fine EOP/CN reference.
    Converge {
        config: PathBuf,
        /// Comma-separated time steps, coarsest first.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        /// Time step of the reference solution.
        #[arg(long)]
        ref_tau: f64,
    },
    /// Run several corrections from the same start and compare their modified energies.
    Compare {
        config: PathBuf,
        /// Comma-separated corrections: baseline, eop, relax:<eta>.
        #[arg(long, value_delimiter = ',', default_value = "baseline,relax:0.5,eop")]
        corrections: Vec<Correction>,
        /// Reference time step (default tau/10).
        #[arg(long)]
        ref_tau: Option<f64>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GRADFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GRADFLOW_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))
}

fn print_run(r: &commands::RunSummary) {
    println!(
        "{}: n = {}, t = {:.6e}, E_mod {:.10e} -> {:.10e}, mass drift {:.3e}, trace {}",
        r.correction,
        r.last.n,
        r.last.t,
        r.first.e_mod,
        r.last.e_mod,
        r.last.mass - r.first.mass,
        r.trace.display()
    );
    if !r.snapshots.is_empty() {
        println!("{} snapshots in {}", r.snapshots.len(), r.trace.parent().unwrap_or(r.trace.as_path()).display());
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            print_run(&commands::run(&cfg)?);
        }
        Command::Converge { config, tau_list, ref_tau } => {
            let cfg = RunConfig::load(&config)?;
            let rows = commands::converge(&cfg, &tau_list, ref_tau)?;
            print!("{}", commands::format_convergence(&rows));
        }
        Command::Compare { config, corrections, ref_tau } => {
            let cfg = RunConfig::load(&config)?;
            let summary = commands::compare(&cfg, &corrections, ref_tau)?;
            for (i, run) in summary.runs.iter().enumerate() {
                print_run(run);
                if let Some(gap) = summary.max_gap.get(i) {
                    println!("  max |E_mod - E_ref| = {gap:.6e}");
                }
            }
            if let Some(joint) = &summary.joint {
                println!("comparison in {}", joint.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gradflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
