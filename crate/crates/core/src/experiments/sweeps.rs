use super::{bad, write_rows};
use crate::counting::max_count_1d;
use crate::error::Result;
use crate::strichartz::{bilinear_trial, trial_pairs, BilinearConstant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Grid for the 1D resonant-set count `sup_{k,τ} #S` against `1 + λ/N₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingSweepConfig {
    #[serde(default = "default_counting_name")]
    pub name: String,
    #[serde(default = "default_count_lambdas")]
    pub lambdas: Vec<i64>,
    #[serde(default = "default_count_n1")]
    pub n1_list: Vec<i64>,
    /// Explicit `N₂` values; by default every power of two with `N₂ ≤ N₁/separation`.
    #[serde(default)]
    pub n2_list: Option<Vec<i64>>,
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Half-width of the phase window.
    #[serde(default = "default_w")]
    pub w: f64,
}

fn default_counting_name() -> String {
    "counting".into()
}
fn default_count_lambdas() -> Vec<i64> {
    vec![1, 2, 4, 8, 16, 32, 64]
}
fn default_count_n1() -> Vec<i64> {
    vec![8, 16, 32, 64, 128, 256]
}
fn default_separation() -> f64 {
    4.0
}
fn default_w() -> f64 {
    1.0
}

impl Default for CountingSweepConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// Powers of two `n` with `1 ≤ n` and `sep·n ≤ n1`.
fn dyadic_below(n1: f64, sep: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut n = 1.0;
    while sep * n <= n1 {
        out.push(n);
        n *= 2.0;
    }
    out
}

impl CountingSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.iter().any(|&l| l < 1) {
            return Err(bad("lambdas", "periods must be at least 1"));
        }
        if self.n1_list.iter().any(|&n| n < 1) {
            return Err(bad("n1_list", "entries must be at least 1"));
        }
        if !(self.separation > 2.0) {
            return Err(bad("separation", "must exceed 2 so that N₁ > 2N₂"));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(bad("w", "must be positive"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `(λ, N₁, N₂)` in output order.
    pub fn cells(&self) -> Vec<(i64, i64, i64)> {
        let mut out = Vec::new();
        for &l in &self.lambdas {
            for &n1 in &self.n1_list {
                let n2s: Vec<i64> = match &self.n2_list {
                    Some(v) => v.iter().copied().filter(|&n2| self.separation * n2 as f64 <= n1 as f64).collect(),
                    None => dyadic_below(n1 as f64, self.separation).into_iter().map(|n| n as i64).collect(),
                };
                out.extend(n2s.into_iter().map(|n2| (l, n1, n2)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingRow {
    pub lambda: i64,
    pub n1: i64,
    pub n2: i64,
    pub w: f64,
    pub count: u64,
    /// `1 + λ/N₁`.
    pub bound: f64,
    pub ratio: f64,
    pub k: f64,
    pub tau: f64,
}

const COUNTING_HEADER: [&str; 9] = ["lambda", "n1", "n2", "w", "count", "bound", "ratio", "k", "tau"];

#[derive(Clone, Debug, Serialize)]
pub struct CountingOutcome {
    pub rows: Vec<CountingRow>,
    /// Largest `count / (1 + λ/N₁)` over the grid.
    pub max_ratio: f64,
}

impl CountingOutcome {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &COUNTING_HEADER, &self.rows)
    }
}

pub fn run_counting(cfg: &CountingSweepConfig) -> Result<CountingOutcome> {
    cfg.validate()?;
    let rows: Vec<CountingRow> = cfg
        .cells()
        .par_iter()
        .map(|&(l, n1, n2)| {
            let m = max_count_1d(l, n1, n2, cfg.w)?;
            let bound = 1.0 + l as f64 / n1 as f64;
            Ok(CountingRow { lambda: l, n1, n2, w: cfg.w, count: m.count, bound, ratio: m.count as f64 / bound, k: m.k, tau: m.tau })
        })
        .collect::<Result<_>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CountingOutcome { rows, max_ratio })
}

/// Which constant the bilinear sweep normalizes by.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantChoice {
    OneD,
    TwoDAnyPeriod,
    TwoDLargePeriod,
}

/// Grid for the bilinear bench. Cells whose pair count exceeds `max_pairs`
/// are reported with a `skipped` status instead of being measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearSweepConfig {
    #[serde(default = "default_bilinear_name")]
    pub name: String,
    pub constant: ConstantChoice,
    /// `ε` of the any-period 2D constant.
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub lambdas: Vec<f64>,
    pub n1_list: Vec<f64>,
    /// Explicit `N₂` values; by default every power of two with `N₂ ≤ N₁/separation`.
    #[serde(default)]
    pub n2_list: Option<Vec<f64>>,
    /// Minimum `N₁/N₂`; 1 admits comparable frequencies.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: f64,
}

fn default_bilinear_name() -> String {
    "bilinear".into()
}
fn default_eps() -> f64 {
    0.1
}
fn default_trials() -> usize {
    50
}
fn default_max_pairs() -> f64 {
    3e6
}

impl BilinearSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.iter().any(|&l| !(l >= 1.0 && l.is_finite())) {
            return Err(bad("lambdas", "periods must be at least 1"));
        }
        if self.n1_list.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return Err(bad("n1_list", "entries must be positive"));
        }
        if let Some(v) = &self.n2_list {
            if v.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
                return Err(bad("n2_list", "entries must be positive"));
            }
        }
        if !(self.separation >= 1.0) {
            return Err(bad("separation", "must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(bad("eps", "must be positive"));
        }
        if !(self.max_pairs > 0.0) {
            return Err(bad("max_pairs", "must be positive"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn constant(&self) -> BilinearConstant {
        match self.constant {
            ConstantChoice::OneD => BilinearConstant::OneD,
            ConstantChoice::TwoDAnyPeriod => BilinearConstant::TwoDAnyPeriod { eps: self.eps },
            ConstantChoice::TwoDLargePeriod => BilinearConstant::TwoDLargePeriod,
        }
    }

    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &l in &self.lambdas {
            for &n1 in &self.n1_list {
                let n2s: Vec<f64> = match &self.n2_list {
                    Some(v) => v.iter().copied().filter(|&n2| self.separation * n2 <= n1).collect(),
                    None => dyadic_below(n1, self.separation),
                };
                out.extend(n2s.into_iter().map(|n2| (l, n1, n2)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearRow {
    pub d: usize,
    pub lambda: f64,
    pub n1: f64,
    pub n2: f64,
    pub trials: usize,
    pub b_max: f64,
    pub reference: f64,
    pub constant: f64,
    pub ratio: f64,
    pub status: String,
}

const BILINEAR_HEADER: [&str; 10] =
    ["d", "lambda", "n1", "n2", "trials", "b_max", "reference", "constant", "ratio", "status"];

#[derive(Clone, Debug, Serialize)]
pub struct BilinearOutcome {
    pub rows: Vec<BilinearRow>,
    /// Largest ratio over the measured cells.
    pub max_ratio: f64,
    pub measured: usize,
    pub skipped: usize,
}

impl BilinearOutcome {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &BILINEAR_HEADER, &self.rows)
    }
}

pub fn run_bilinear(cfg: &BilinearSweepConfig) -> Result<BilinearOutcome> {
    cfg.validate()?;
    let constant = cfg.constant();
    let d = constant.dim();
    let rows: Vec<BilinearRow> = cfg
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, &(l, n1, n2))| {
            let pairs = trial_pairs(d, l, n1, n2);
            let skipped = |status: String| BilinearRow {
                d,
                lambda: l,
                n1,
                n2,
                trials: cfg.trials,
                b_max: f64::NAN,
                reference: f64::NAN,
                constant: constant.value(l, n1, n2),
                ratio: f64::NAN,
                status,
            };
            if pairs > cfg.max_pairs {
                return skipped(format!("skipped: {pairs:.3e} pairs exceed the budget"));
            }
            match bilinear_trial(constant, l, n1, n2, cfg.trials, cfg.seed.wrapping_add(1_000_003 * i as u64)) {
                Ok(t) => BilinearRow {
                    d,
                    lambda: l,
                    n1,
                    n2,
                    trials: cfg.trials,
                    b_max: t.b_max,
                    reference: t.reference,
                    constant: t.constant,
                    ratio: t.ratio,
                    status: "ok".into(),
                },
                Err(e) => skipped(format!("failed: {e}")),
            }
        })
        .collect();
    let ok = rows.iter().filter(|r| r.status == "ok");
    let max_ratio = ok.clone().map(|r| r.ratio).fold(0.0, f64::max);
    let measured = ok.count();
    Ok(BilinearOutcome { skipped: rows.len() - measured, rows, max_ratio, measured })
}
