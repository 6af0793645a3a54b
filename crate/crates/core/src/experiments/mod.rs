//! Batch experiments behind the command line tool: configuration, the λ–N
//! coupling, drift runs, counting and bilinear sweeps, slope fits and run
//! manifests.

mod drift;
mod selftest;
mod simulate;
mod sweeps;

pub use simulate::{run_simulation, write_simulation_csv, SimulationConfig, SimulationRecord};
pub use selftest::{run_selftest, SelftestEntry, SelftestReport};
pub use drift::{initial_data, run_drift_1d, run_drift_2d, DriftOutcome, DriftRecord};
pub use sweeps::{
    run_bilinear, run_counting, BilinearOutcome, BilinearRow, BilinearSweepConfig, ConstantChoice, CountingOutcome, CountingRow,
    CountingSweepConfig,
};

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::path::Path;

/// How the torus period is tied to the threshold `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = round(N^{(1−s)/s})`, with data rescaled from the unit torus.
    Auto,
    /// One period per entry of the `N` list, or a single period for all of them;
    /// data is generated directly on the torus of that period.
    Explicit { values: Vec<f64> },
}

/// `round(N^{(1−s)/s})`, at least 1.
pub fn auto_lambda(n: f64, s: f64) -> f64 {
    n.powf((1.0 - s) / s).round().max(1.0)
}

/// Configuration of a drift experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dim: usize,
    pub s: f64,
    pub n_list: Vec<f64>,
    pub lambda: LambdaRule,
    /// Grid points per axis.
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seeds: Vec<u64>,
    /// `L²` norm of the initial data.
    #[serde(default = "default_l2")]
    pub l2: f64,
    /// When set, the initial data of each threshold is rescaled in amplitude so
    /// that `E¹(u₀)` equals this value; overrides `l2`.
    #[serde(default)]
    pub energy: Option<f64>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Reconcile the 2D increment with its two-term decomposition at the final time.
    #[serde(default)]
    pub reconcile: bool,
}

fn default_l2() -> f64 {
    1.0
}

fn default_checkpoints() -> usize {
    16
}

fn bad(field: &str, reason: impl Into<String>) -> LabError {
    LabError::Config { field: field.into(), reason: reason.into() }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(bad("dim", format!("must be 1 or 2, got {}", self.dim)));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(bad("s", format!("must lie in (0, 1), got {}", self.s)));
        }
        if let Some(n) = self.n_list.iter().find(|n| !(**n >= 1.0 && n.is_finite())) {
            return Err(bad("n_list", format!("entries must be at least 1, got {n}")));
        }
        if let LambdaRule::Explicit { values } = &self.lambda {
            if values.len() != 1 && values.len() != self.n_list.len() {
                return Err(bad("lambda.values", "give one period or one per entry of n_list"));
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(bad("lambda.values", "periods must be positive"));
            }
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
        if self.seeds.is_empty() {
            return Err(bad("seeds", "at least one seed is required"));
        }
        if !(self.l2 > 0.0) {
            return Err(bad("l2", "must be positive"));
        }
        if let Some(e) = self.energy {
            if !(e > 0.0 && e.is_finite()) {
                return Err(bad("energy", "must be positive"));
            }
        }
        if self.checkpoints == 0 {
            return Err(bad("checkpoints", "must be at least 1"));
        }
        Ok(())
    }

    /// Period used for the `i`-th threshold.
    pub fn lambda_for(&self, i: usize) -> f64 {
        match &self.lambda {
            LambdaRule::Auto => auto_lambda(self.n_list[i], self.s),
            LambdaRule::Explicit { values } => {
                if values.len() == 1 {
                    values[0]
                } else {
                    values[i]
                }
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope (Student t with `n − 2` degrees of freedom).
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Log-log fit; `None` with fewer than three usable (positive) points.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
    Some(SlopeFit { slope, intercept, ci_low: slope - t * se, ci_high: slope + t * se, points: n })
}

/// Writes the header even when there are no rows.
pub(crate) fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON record written next to every run's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: String,
    pub config: C,
    pub crate_version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &str, config: C, wall_time_seconds: f64, outputs: Vec<String>) -> Self {
        RunManifest {
            command: command.into(),
            config,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds,
            outputs,
            summary: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_lambda_regimes() {
        // 1D regime: λ ≥ N exactly when s < 1/2
        for n in [16.0, 32.0, 64.0, 128.0] {
            assert!(auto_lambda(n, 0.45) >= n);
            assert!(auto_lambda(n, 0.6) <= n);
            let l = auto_lambda(n, 0.7);
            assert_eq!(l, n.powf(3.0 / 7.0).round());
            assert!(l <= n);
        }
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [16.0, 32.0, 64.0, 128.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.ci_high - f.ci_low < 1e-9);
        assert!(fit_loglog(&xs[..2], &ys[..2]).is_none());
    }

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"
            name = "d1"
            dim = 1
            s = 0.45
            n_list = [16, 32]
            m = 16
            dt = 1e-4
            t_end = 0.01
            seeds = [1]
            [lambda]
            rule = "explicit"
            values = [0.0625]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.lambda_for(1), 0.0625);
        assert_eq!(cfg.checkpoints, 16);
        let err = ExperimentConfig::from_toml_str(&text.replace("s = 0.45", "s = 1.5")).unwrap_err();
        assert!(matches!(err, LabError::Config { ref field, .. } if field == "s"));
        let err = ExperimentConfig::from_toml_str(&text.replace("m = 16", "m = 15")).unwrap_err();
        assert!(matches!(err, LabError::Config { ref field, .. } if field == "m"));
    }
}
