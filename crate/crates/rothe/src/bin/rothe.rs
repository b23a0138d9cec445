use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rothe::config::{self, RunConfig};
use rothe::core::analysis::ErrorVariant;
use rothe::core::elements::ElementFamily;
use rothe::core::experiments::ExperimentKind;
use rothe::error::exit;
use rothe::{ledger, mesh_io, run, verify, HarnessError};

/// Rothe-Galerkin solver for the unsteady p-Navier-Stokes equations.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the mesh of the configured level.
    Mesh(Common),
    /// Run one experiment and write its run directory.
    Solve(Common),
    /// Run levels `--from..=--to` and write convergence.csv.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        from: usize,
        #[arg(long, default_value_t = 4)]
        to: usize,
    },
    /// Run the invariant suite and write verify.csv.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; without it the defaults of `--experiment` apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment used when no config file is given.
    #[arg(long, default_value = "singular")]
    experiment: String,
    #[arg(long)]
    level: Option<usize>,
    /// mini | taylor_hood | crouzeix_raviart
    #[arg(long)]
    family: Option<String>,
    /// squared | as_written
    #[arg(long)]
    error_variant: Option<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(msg: String) -> HarnessError {
    HarnessError::Config { line: 0, msg }
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, PathBuf), HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => config::load(path)?,
            None => {
                let kind = ExperimentKind::parse(&self.experiment).ok_or_else(|| config_error(format!("unknown experiment `{}`", self.experiment)))?;
                RunConfig::defaults(kind)
            }
        };
        let e = &mut cfg.experiment;
        if let Some(level) = self.level {
            e.level = level;
        }
        if let Some(f) = &self.family {
            e.family = ElementFamily::parse(f).ok_or_else(|| config_error(format!("unknown family `{f}`")))?;
        }
        if let Some(v) = &self.error_variant {
            e.error_variant = ErrorVariant::parse(v).ok_or_else(|| config_error(format!("unknown error variant `{v}`")))?;
        }
        if let Some(out) = &self.out {
            e.output = out.display().to_string();
        }
        e.validate().map_err(HarnessError::Invalid)?;
        let out = PathBuf::from(&e.output);
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Mesh(common) => {
            let (cfg, out) = common.resolve()?;
            let mesh = cfg.experiment.mesh().map_err(HarnessError::Invalid)?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            let path = out.join("mesh.txt");
            ledger::write_text(&path, &mesh_io::to_string(&mesh))?;
            println!("{} cells, {} vertices, h = {:.4e} -> {}", mesh.num_cells(), mesh.num_vertices(), mesh.h_max(), path.display());
            Ok(exit::SUCCESS)
        }
        Command::Solve(common) => {
            let (cfg, out) = common.resolve()?;
            let summary = run::run_experiment(&cfg, &out)?;
            let traj = &summary.outcome.trajectory;
            let its: usize = traj.stats.iter().map(|s| s.iterations).sum();
            println!("{} steps, {its} Newton iterations -> {}", traj.states.len() - 1, out.display());
            if let Some(r) = &summary.report {
                print!("{}", r.to_csv());
            }
            Ok(exit::SUCCESS)
        }
        Command::Convergence { common, from, to } => {
            let (cfg, out) = common.resolve()?;
            let mut progress = |r: &rothe::core::analysis::ConvergenceReport| {
                if let Some(row) = r.rows.last() {
                    eprintln!("level {}: e_L2 = {:.4e}, e_F = {:.4e}", row.n, row.e_l2, row.e_f);
                }
            };
            match run::convergence_sweep(&cfg, from, to, &out, &mut progress) {
                Ok(report) => {
                    print!("{}", report.to_csv());
                    Ok(exit::SUCCESS)
                }
                Err(fail) => {
                    print!("{}", fail.partial.to_csv());
                    Err(fail.error)
                }
            }
        }
        Command::Verify(common) => {
            let (cfg, out) = common.resolve()?;
            let report = verify::verify(&cfg.experiment);
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            ledger::write_text(&out.join("verify.csv"), &report.to_csv())?;
            for c in &report.checks {
                println!("{:<32} {:<4} {:.3e} (bound {:.1e})", c.name, if c.passed { "ok" } else { "FAIL" }, c.value, c.tolerance);
            }
            println!("{:.1} s", report.seconds);
            Ok(if report.passed() { exit::SUCCESS } else { exit::OTHER })
        }
    }
}
