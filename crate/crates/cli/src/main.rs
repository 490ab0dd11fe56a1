//! `zrange`: batch driver for the zero-range interaction studies.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use config::{Command, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "zrange", version, about = "Zero-range interaction studies with CSV and JSON reports")]
struct Cli {
    /// Study to run.
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_path`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid nodes (overrides `grid.n`).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Outer grid radius (overrides `grid.r_max`).
    #[arg(long)]
    rmax: Option<f64>,
    /// Grid doublings (overrides `grid.refine`).
    #[arg(long)]
    refine: Option<u32>,
}

fn write_atomically(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    let overrides = Overrides { grid_n: cli.grid_n, r_max: cli.rmax, refine: cli.refine };
    let prepared = RunConfig::load(&cli.config).and_then(|mut c| {
        c.apply(cli.command, &overrides)?;
        c.validate()?;
        Ok(c)
    });
    let config = match prepared {
        Ok(c) => c,
        Err(e) => {
            eprintln!("zrange: {}: {e}", cli.config.display());
            return Ok(ExitCode::from(2));
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let study = commands::run(&config);
    let csv = study.to_csv()?;
    let mut summary = serde_json::to_vec_pretty(&study.summary(&config))?;
    summary.push(b'\n');

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let name = config.command().name();
    write_atomically(&out.join(format!("{name}.csv")), &csv)?;
    write_atomically(&out.join(format!("{name}.summary.json")), &summary)?;

    let [ok, flagged, error] = study.status_counts();
    eprintln!("zrange {name}: {ok} ok, {flagged} flagged, {error} error -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("zrange: {e:#}");
            ExitCode::FAILURE
        }
    }
}
