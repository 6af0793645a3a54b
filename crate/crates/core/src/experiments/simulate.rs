use super::{bad, write_rows};
use crate::error::Result;
use crate::field::random;
use crate::lattice::TorusLattice;
use crate::solver::{energy, evolve, mass, SolverConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A single solver run from random `H^s` data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub dim: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Sobolev index of the initial profile.
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_frames")]
    pub frames: usize,
}

fn default_name() -> String {
    "simulate".into()
}
fn one() -> f64 {
    1.0
}
fn default_s() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_frames() -> usize {
    16
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(bad("dim", format!("must be 1 or 2, got {}", self.dim)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(bad("lambda", "must be positive"));
        }
        if self.m < 4 || self.m % 2 != 0 {
            return Err(bad("m", format!("must be even and at least 4, got {}", self.m)));
        }
        if !(self.dt > 0.0) {
            return Err(bad("dt", "must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(bad("t_end", "must be positive"));
        }
        if !(self.s > 0.0) {
            return Err(bad("s", "must be positive"));
        }
        if !(self.l2 > 0.0) {
            return Err(bad("l2", "must be positive"));
        }
        if self.frames == 0 {
            return Err(bad("frames", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub dim: usize,
    pub lambda: f64,
    pub m: usize,
    pub dt: f64,
    pub seed: u64,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub rel_mass_drift: f64,
    pub rel_energy_drift: f64,
}

const SIMULATION_HEADER: [&str; 10] =
    ["dim", "lambda", "m", "dt", "seed", "time", "mass", "energy", "rel_mass_drift", "rel_energy_drift"];

pub fn write_simulation_csv(rows: &[SimulationRecord], path: &Path) -> Result<()> {
    write_rows(path, &SIMULATION_HEADER, rows)
}

/// Conservation monitors at `frames` evenly spaced times (plus the start).
/// The frame count must divide the number of steps.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<Vec<SimulationRecord>> {
    cfg.validate()?;
    let l = TorusLattice::new(cfg.dim, cfg.lambda, cfg.m)?;
    let u0 = random::hs_profile(l, cfg.s, cfg.l2, cfg.seed);
    let base = SolverConfig::new(cfg.dt, cfg.t_end).dealiased(cfg.dealias);
    base.validate()?;
    let steps = base.steps();
    if steps % cfg.frames != 0 {
        return Err(bad("frames", format!("{} frames do not divide the {steps} solver steps", cfg.frames)));
    }
    let traj = evolve(&u0, &base.recording_every(steps / cfg.frames))?;
    let (m0, e0) = (mass(&u0), energy(&u0));
    Ok(traj
        .frames()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let (m, e) = (mass(u), energy(u));
            SimulationRecord {
                dim: cfg.dim,
                lambda: cfg.lambda,
                m: cfg.m,
                dt: cfg.dt,
                seed: cfg.seed,
                time: traj.time(i),
                mass: m,
                energy: e,
                rel_mass_drift: (m - m0).abs() / m0,
                rel_energy_drift: (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE),
            }
        })
        .collect())
}
