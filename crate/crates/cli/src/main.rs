use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dsmcf::io::driver::is_config_error;
use dsmcf::io::{emit_report, execute, load_config, save_trajectory, ExperimentKind};

/// Mean curvature flow of spacelike graphs in de Sitter space.
#[derive(Parser)]
#[command(name = "dsmcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow and save the trajectory.
    Simulate(Common),
    /// Run the oracle suite on a state.
    Verify(Common),
    /// Pinned-disk barrier experiment.
    Barrier(Common),
    /// Flattening of a perturbed slice.
    Flatness(Common),
    /// Rescaled convergence table.
    Rescale(Common),
    /// Grid-refinement order studies.
    Refine(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized oracle sampling (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Simulate(c) => (ExperimentKind::Simulate, c),
        Command::Verify(c) => (ExperimentKind::Verify, c),
        Command::Barrier(c) => (ExperimentKind::Barrier, c),
        Command::Flatness(c) => (ExperimentKind::Flatness, c),
        Command::Rescale(c) => (ExperimentKind::Rescale, c),
        Command::Refine(c) => (ExperimentKind::Refine, c),
    };
    match run(kind, &common) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

fn run(kind: ExperimentKind, common: &Common) -> anyhow::Result<u8> {
    let mut cfg = match load_config(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error in {}: {e}", common.config.display());
            return Ok(EXIT_CONFIG);
        }
    };
    if cfg.kind != kind && !common.quiet {
        eprintln!(
            "note: config kind `{}` replaced by subcommand `{}`",
            cfg.kind.name(),
            kind.name()
        );
    }
    cfg.kind = kind;
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            return Ok(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            return Ok(EXIT_FAIL);
        }
    };
    let report = &outcome.report;
    let written = emit_report(report, &cfg.output)
        .with_context(|| format!("writing report to {}", cfg.output.display()))?;
    if let Some(traj) = &outcome.trajectory {
        let path = cfg.output.join("trajectory.snap");
        save_trajectory(traj, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = report.summary();
    if !common.quiet {
        for check in &report.checks {
            let mark = if check.pass() { "PASS" } else { "FAIL" };
            println!("{mark} {}", check.name());
        }
        if let Some(note) = &summary.note {
            println!("{note}");
        }
        for note in &report.notes {
            println!("note: {note}");
        }
        println!(
            "{}/{} checks passed in {:.2} s; report in {}",
            summary.passed,
            summary.checks,
            report.wall_clock_seconds,
            written[0].display()
        );
    }
    Ok(if summary.all_pass { 0 } else { EXIT_FAIL })
}
