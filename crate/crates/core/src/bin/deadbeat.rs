use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use deadbeat::certificates::check_trajectory;
use deadbeat::harness::scenario::LawSpec;
use deadbeat::harness::sweep::write_sweep;
use deadbeat::harness::trace::{read_samples, trajectory_from_samples};
use deadbeat::harness::{preset, run_file, run_sweep, write_outputs, Overrides, ScenarioFile, SweepSpec};
use deadbeat::Result;

/// Simulate and certify finite-time parking of a Dubins vehicle.
#[derive(Parser)]
#[command(name = "deadbeat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Integration step, overriding every scenario.
    #[arg(long, global = true)]
    step: Option<f64>,

    /// Cutoff distance, overriding every scenario.
    #[arg(long, global = true)]
    cutoff: Option<f64>,

    /// Directory for CSV, SVG and report files [default: out/<name>].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a scenario file.
    Run { file: PathBuf },
    /// Run a grid sweep.
    Sweep { file: PathBuf },
    /// Run a shipped figure preset (fig1 .. fig5).
    Preset { name: String },
    /// Certify a recorded trace against a law.
    Check {
        csv: PathBuf,
        /// Law as `kind,key=value,...`, e.g. `thm1,c1=1.01,c2=5,v=0.5`.
        #[arg(long)]
        law: String,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn run_scenarios(file: &ScenarioFile, overrides: &Overrides, dir: &Path) -> Result<bool> {
    let outcomes = run_file(file, overrides)?;
    for o in &outcomes {
        print!("{}", o.report_text());
    }
    for p in write_outputs(file, &outcomes, dir)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcomes.iter().all(|o| o.report.overall))
}

fn execute(cli: Cli) -> Result<bool> {
    let overrides = Overrides {
        step: cli.step,
        cutoff_rho: cli.cutoff,
    };
    let out = |name: String| cli.out_dir.clone().unwrap_or_else(|| Path::new("out").join(name));
    match cli.command {
        Command::Run { file } => {
            let f = ScenarioFile::load(&file)?;
            run_scenarios(&f, &overrides, &out(stem(&file)))
        }
        Command::Preset { name } => {
            let f = preset(&name)?;
            run_scenarios(&f, &overrides, &out(name))
        }
        Command::Sweep { file } => {
            let spec = SweepSpec::load(&file)?;
            eprintln!("grid points: {}", spec.grid.len());
            let summary = run_sweep(&spec, &overrides, cli.workers)?;
            print!("{}", summary.to_text());
            let dir = out(stem(&file));
            write_sweep(&summary, &dir)?;
            eprintln!("wrote {}", dir.join("summary.csv").display());
            Ok(summary.all_passed())
        }
        Command::Check { csv, law } => {
            let samples = read_samples(&csv)?;
            let Some(first) = samples.first() else {
                return Err(deadbeat::Error::Domain(format!("{} has no samples", csv.display())));
            };
            let cutoff = cli.cutoff.unwrap_or_else(|| samples.last().map_or(0.0, |s| s.state.rho));
            let law = LawSpec::parse_inline(&law)?.resolve(&first.state, cutoff)?;
            let traj = trajectory_from_samples(samples, &law, cutoff)?;
            let report = check_trajectory(&traj, &law)?;
            print!("{report}");
            Ok(report.overall)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
