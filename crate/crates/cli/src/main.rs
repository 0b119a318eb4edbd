use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sensel::exec::with_workers;
use sensel::harness::{
    is_failure, run_dynamic_suite, run_robust_suite, verify_file, write_outputs, ScenarioConfig, SuiteOutput,
};
use sensel::scene::{prism_scene, NoiseParams, SceneGenerator, TargetLayout};

/// Sensor selection experiments for hybrid TOA/RSS positioning.
#[derive(Parser)]
#[command(name = "select", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SELECT_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-target selection (greedy selectors, exhaustive optimum).
    Dynamic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Worst-case selection over the target grid.
    Robust {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute every value in a records CSV from its scenes sidecar.
    Verify { csv: PathBuf },
    /// Write a scene as JSON, usable as an `explicit` scene source.
    GenScene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 14)]
        m_max: usize,
        #[arg(long, default_value_t = 4.0)]
        d_s: f64,
        #[arg(long, default_value_t = 14.0)]
        d_max: f64,
        #[arg(long, default_value_t = 152)]
        g: usize,
        #[arg(long, value_enum, default_value_t = Layout::Random)]
        mode: Layout,
        /// Build a prism of this many sides instead of a random layout.
        #[arg(long)]
        prism_sides: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        half_height: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Random,
    Even,
}

fn run_suite(config: &Path, out: &Path, workers: Option<usize>, robust: bool) -> Result<ExitCode> {
    let cfg = ScenarioConfig::load(config)?;
    let output: SuiteOutput = with_workers(workers, || if robust { run_robust_suite(&cfg) } else { run_dynamic_suite(&cfg) })
        .with_context(|| format!("running {}", cfg.id))?;
    write_outputs(out, &output).with_context(|| format!("writing {}", out.display()))?;
    let failures = output.records.iter().filter(|r| is_failure(r)).count();
    let skipped = output.summary.error_rows - failures;
    println!("{} rows written to {} ({skipped} skipped, {failures} failed)", output.records.len(), out.display());
    Ok(if failures > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Dynamic { config, out } => run_suite(&config, &out, cli.workers, false),
        Command::Robust { config, out } => run_suite(&config, &out, cli.workers, true),
        Command::Verify { csv } => {
            let report = verify_file(&csv).with_context(|| format!("verifying {}", csv.display()))?;
            for m in &report.mismatches {
                println!("row {}: {} stored {:?}, recomputed {:?}", m.row, m.column, m.stored, m.recomputed);
            }
            for (row, msg) in &report.invalid {
                println!("row {row}: {msg}");
            }
            println!(
                "{} rows checked, {} skipped, {} mismatches, {} invalid",
                report.checked,
                report.skipped,
                report.mismatches.len(),
                report.invalid.len()
            );
            Ok(if report.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::GenScene { seed, m_max, d_s, d_max, g, mode, prism_sides, half_height, out } => {
            let scene = match prism_sides {
                Some(sides) => prism_scene(sides, half_height, d_s, d_max, g, &NoiseParams::default())?,
                None => {
                    let mode = match mode {
                        Layout::Random => TargetLayout::Random,
                        Layout::Even => TargetLayout::Even,
                    };
                    SceneGenerator { seed, m_max, d_s, d_max, g, mode, noise: NoiseParams::default() }.generate()?
                }
            };
            std::fs::write(&out, serde_json::to_string_pretty(&scene)? + "\n")
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
