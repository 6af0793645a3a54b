use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nls_lab::experiments::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

const DEFAULTS: &str = "\
Configuration files are TOML. Defaults for optional keys:
  simulate:  lambda = 1, s = 0.5, l2 = 1, seed = 0, dealias = true, frames = 16
  drift1d/drift2d:  l2 = 1, energy unset, checkpoints = 16, reconcile = false;
             lambda = { rule = \"auto\" } or { rule = \"explicit\", values = [...] }
  counting:  lambdas = [1,2,4,8,16,32,64], n1_list = [8,16,32,64,128,256],
             n2_list = powers of two up to n1/separation, separation = 4, w = 1
  bilinear:  eps = 0.1, separation = 4, trials = 50, seed = 0, max_pairs = 3e6;
             without --config the 1D grid lambdas = [8,16,32,64],
             n1_list = [16,32,64,128], n2_list = [2,4] is used
Each run writes its CSV files and a manifest.json into --out.";

#[derive(Parser)]
#[command(name = "nls-lab", version, about = "Batch experiments for the periodic L2-critical NLS", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `runs/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the seed list of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolve random data and record mass and energy.
    Simulate,
    /// Drift of the second modified energy for the 1D quintic problem.
    Drift1d,
    /// Drift of the first modified energy for the 2D cubic problem.
    Drift2d,
    /// Sweep of the 1D resonant-set count.
    Counting,
    /// Sweep of the bilinear Strichartz ratio.
    Bilinear,
    /// Fast sanity checks of every module; nonzero exit on failure.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Drift1d => "drift1d",
            Command::Drift2d => "drift2d",
            Command::Counting => "counting",
            Command::Bilinear => "bilinear",
            Command::Selftest => "selftest",
        }
    }
}

const DEFAULT_BILINEAR: &str = "constant = \"one_d\"\nlambdas = [8, 16, 32, 64]\nn1_list = [16, 32, 64, 128]\nn2_list = [2, 4]\n";

fn read_config(path: Option<&Path>, command: &str) -> Result<Option<String>> {
    match path {
        Some(p) => Ok(Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)),
        None if matches!(command, "simulate" | "drift1d" | "drift2d") => {
            bail!("`{command}` needs --config PATH")
        }
        None => Ok(None),
    }
}

fn finish<C: Serialize>(
    out: &Path,
    command: &str,
    config: C,
    start: Instant,
    outputs: Vec<String>,
    summary: serde_json::Value,
) -> Result<()> {
    let mut m = RunManifest::new(command, config, start.elapsed().as_secs_f64(), outputs);
    m.summary = Some(summary);
    m.write(&out.join("manifest.json"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    let name = cli.command.name();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let text = read_config(cli.config.as_deref(), name)?;
    let start = Instant::now();
    match cli.command {
        Command::Simulate => {
            let mut cfg = SimulationConfig::from_toml_str(text.as_deref().unwrap_or_default())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let rows = run_simulation(&cfg)?;
            write_simulation_csv(&rows, &out.join("simulation.csv"))?;
            let last = rows.last().expect("at least the initial frame");
            println!("mass drift {:.3e}, energy drift {:.3e}", last.rel_mass_drift, last.rel_energy_drift);
            let summary = serde_json::json!({
                "rel_mass_drift": last.rel_mass_drift,
                "rel_energy_drift": last.rel_energy_drift,
            });
            finish(&out, name, cfg, start, vec!["simulation.csv".into()], summary)?;
        }
        Command::Drift1d | Command::Drift2d => {
            let mut cfg = ExperimentConfig::from_toml_str(text.as_deref().unwrap_or_default())?;
            if let Some(s) = cli.seed {
                cfg.seeds = vec![s];
            }
            let outcome = if matches!(cli.command, Command::Drift1d) { run_drift_1d(&cfg)? } else { run_drift_2d(&cfg)? };
            outcome.write_csv(&out.join("drift.csv"))?;
            let mut outputs = vec!["drift.csv".to_string()];
            if !outcome.reconciliation.is_empty() {
                let mut w = csv::Writer::from_path(out.join("reconciliation.csv"))?;
                w.write_record(["n", "seed", "tr1", "tr2", "tr2_sampled", "tr2_std_error", "direct", "rel_error"])?;
                for (n, seed, r) in &outcome.reconciliation {
                    w.write_record(
                        [*n, *seed as f64, r.tr1, r.tr2, r.tr2_sampled, r.tr2_std_error, r.direct, r.rel_error]
                            .map(|v| v.to_string()),
                    )?;
                }
                w.flush()?;
                outputs.push("reconciliation.csv".into());
            }
            for (n, d) in &outcome.drift_by_n {
                println!("N = {n}: drift {d:.3e}");
            }
            match &outcome.slope {
                Some(f) => println!("slope {:.3} (95% CI [{:.3}, {:.3}])", f.slope, f.ci_low, f.ci_high),
                None => println!("slope {}", outcome.slope_flag()),
            }
            if outcome.failures > 0 {
                eprintln!("{} cell(s) failed; see the status column", outcome.failures);
            }
            let summary = serde_json::json!({
                "drift_by_n": outcome.drift_by_n,
                "slope": outcome.slope,
                "slope_status": outcome.slope_flag(),
                "failures": outcome.failures,
            });
            finish(&out, name, cfg, start, outputs, summary)?;
        }
        Command::Counting => {
            let cfg = match &text {
                Some(t) => CountingSweepConfig::from_toml_str(t)?,
                None => CountingSweepConfig::default(),
            };
            let outcome = run_counting(&cfg)?;
            outcome.write_csv(&out.join("counting.csv"))?;
            println!("{} cells, max count / (1 + λ/N₁) = {:.3}", outcome.rows.len(), outcome.max_ratio);
            let summary = serde_json::json!({ "cells": outcome.rows.len(), "max_ratio": outcome.max_ratio });
            finish(&out, name, cfg, start, vec!["counting.csv".into()], summary)?;
        }
        Command::Bilinear => {
            let mut cfg = BilinearSweepConfig::from_toml_str(text.as_deref().unwrap_or(DEFAULT_BILINEAR))?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let outcome = run_bilinear(&cfg)?;
            outcome.write_csv(&out.join("bilinear.csv"))?;
            println!(
                "{} measured, {} skipped, max ratio {:.4}",
                outcome.measured, outcome.skipped, outcome.max_ratio
            );
            let summary = serde_json::json!({
                "measured": outcome.measured,
                "skipped": outcome.skipped,
                "max_ratio": outcome.max_ratio,
            });
            finish(&out, name, cfg, start, vec!["bilinear.csv".into()], summary)?;
        }
        Command::Selftest => {
            let report = run_selftest();
            for e in &report.entries {
                println!("{:<12} {}", e.name, if e.passed { "ok".to_string() } else { format!("FAILED: {}", e.detail) });
            }
            std::fs::write(out.join("selftest.json"), serde_json::to_string_pretty(&report)?)?;
            let summary = serde_json::json!({ "passed": report.passed() });
            finish(&out, name, serde_json::Value::Null, start, vec!["selftest.json".into()], summary)?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() {
    match run(Cli::parse()) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
