//! Split-step integrator for `i u_t + Δu − |u|^{4/d} u = 0` on `T^d_λ`, the
//! L²-preserving rescaling `T^d → T^d_λ`, conserved quantities and the
//! lifespan exponent arithmetic of the rescaling argument.

use crate::error::{domain, LabError, Result};
use crate::field::{SpaceTimeField, SpectralField};
use crate::lattice::TorusLattice;
use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Time discretization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Half linear step, full nonlinear phase rotation, half linear step.
    #[default]
    StrangSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Integrate the band-projected system (alias-free products, Runge-Kutta
    /// nonlinear substep). Without it the exact phase rotation is collocated on
    /// the storage grid, which keeps the mass exact.
    #[serde(default)]
    pub dealias: bool,
    /// Drop the nonlinear substep (free evolution through the same stepping path).
    #[serde(default)]
    pub linear_only: bool,
    /// Store one frame every `record_every` steps; must divide the step count.
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SolverConfig { dt, t_end, scheme: Scheme::StrangSplit, dealias: false, linear_only: false, record_every: 1 }
    }

    pub fn dealiased(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn recording_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LabError::Config { field: "dt".into(), reason: format!("must be positive, got {}", self.dt) });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(LabError::Config {
                field: "t_end".into(),
                reason: format!("must be nonnegative, got {}", self.t_end),
            });
        }
        if self.record_every == 0 {
            return Err(LabError::Config { field: "record_every".into(), reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// Number of steps; `t_end` is hit to within `dt/2`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Refinement of the rotation grid in dealiased mode: the cubic (2D) or
/// quintic (1D) phase products stay alias-free on the band.
pub fn dealias_factor(dim: usize) -> usize {
    if dim == 1 {
        3
    } else {
        2
    }
}

/// One-trajectory stepper. Steps may be negative, which runs the scheme backwards.
#[derive(Clone, Debug)]
pub struct Stepper {
    dealias: bool,
    linear_only: bool,
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Self {
        Stepper { dealias: cfg.dealias, linear_only: cfg.linear_only }
    }

    /// Nonlinear substep over `h`. Collocated mode applies the exact phase
    /// rotation `u ← e^{−i|u|^{4/d} h} u` on the storage grid. Dealiased mode
    /// integrates the band-projected equation `v_t = −iP(|v|^{4/d} v)` with one
    /// classical Runge-Kutta step, the products evaluated alias-free on a refined grid.
    pub fn nonlinear_phase(&self, u: &SpectralField, h: f64) -> SpectralField {
        let l = *u.lattice();
        let half_power = 2 / l.dim() as i32;
        if !self.dealias {
            let mut grid = u.to_grid();
            for v in grid.iter_mut() {
                let a = v.norm_sqr().powi(half_power);
                *v *= Complex64::from_polar(1.0, -a * h);
            }
            return SpectralField::from_grid(l, &grid).expect("grid size matches");
        }
        let factor = dealias_factor(l.dim());
        let rhs = |v: &SpectralField| -> SpectralField {
            let mut grid = v.padded_grid(factor);
            for z in grid.iter_mut() {
                *z *= Complex64::new(0.0, -z.norm_sqr().powi(half_power));
            }
            let mut out = SpectralField::truncated_from_padded(l, factor, &grid);
            out.zero_nyquist();
            out
        };
        let axpy = |a: &SpectralField, c: f64, b: &SpectralField| -> SpectralField {
            a.add(&b.scaled(Complex64::new(c, 0.0))).expect("same lattice")
        };
        let k1 = rhs(u);
        let k2 = rhs(&axpy(u, h / 2.0, &k1));
        let k3 = rhs(&axpy(u, h / 2.0, &k2));
        let k4 = rhs(&axpy(u, h, &k3));
        let mut out = u.clone();
        for (j, c) in out.coeffs_mut().iter_mut().enumerate() {
            *c += (k1.coeffs()[j] + 2.0 * k2.coeffs()[j] + 2.0 * k3.coeffs()[j] + k4.coeffs()[j]) * (h / 6.0);
        }
        out
    }

    pub fn step(&self, u: &SpectralField, h: f64) -> SpectralField {
        let half = u.propagate_linear(h / 2.0);
        if self.linear_only {
            return half.propagate_linear(h / 2.0);
        }
        self.nonlinear_phase(&half, h).propagate_linear(h / 2.0)
    }
}

fn check_finite(u: &SpectralField, time: f64) -> Result<()> {
    if u.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(LabError::Integration { time, reason: "non-finite Fourier coefficient".into() })
    }
}

/// Integrates from `t = 0` to `cfg.t_end`, returning recorded frames.
pub fn evolve(u0: &SpectralField, cfg: &SolverConfig) -> Result<SpaceTimeField> {
    cfg.validate()?;
    check_finite(u0, 0.0)?;
    let steps = cfg.steps();
    if steps % cfg.record_every != 0 {
        return domain(format!(
            "record_every = {} must divide the step count {steps} to keep frames equispaced",
            cfg.record_every
        ));
    }
    let stepper = Stepper::new(cfg);
    let mut frames = vec![u0.clone()];
    let mut u = u0.clone();
    for i in 1..=steps {
        u = stepper.step(&u, cfg.dt);
        check_finite(&u, i as f64 * cfg.dt)?;
        if i % cfg.record_every == 0 {
            frames.push(u.clone());
        }
    }
    SpaceTimeField::new(frames, 0.0, cfg.dt * cfg.record_every as f64)
}

/// Final state only; steps with signed `dt` (negative runs backwards).
pub fn advance(u0: &SpectralField, cfg: &SolverConfig, dt: f64, steps: usize) -> Result<SpectralField> {
    let stepper = Stepper::new(cfg);
    let mut u = u0.clone();
    for i in 1..=steps {
        u = stepper.step(&u, dt);
        check_finite(&u, i as f64 * dt)?;
    }
    Ok(u)
}

/// `‖u‖²_{L²}`.
pub fn mass(u: &SpectralField) -> f64 {
    u.l2_norm().powi(2)
}

/// `E(u) = ½‖∇u‖²_{L²} + d/(2(d+2)) ∫|u|^{2+4/d}`.
pub fn energy(u: &SpectralField) -> f64 {
    let d = u.lattice().dim() as f64;
    0.5 * u.gradient_norm_sq() + d / (2.0 * (d + 2.0)) * u.lp_integral(2.0 + 4.0 / d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ConservationReport {
    pub fn from_trajectory(u: &SpaceTimeField) -> Self {
        ConservationReport {
            times: u.times().collect(),
            mass: u.frames().iter().map(mass).collect(),
            energy: u.frames().iter().map(energy).collect(),
        }
    }

    /// `max_t |M(t) − M(0)| / M(0)`.
    pub fn relative_mass_drift(&self) -> f64 {
        relative_drift(&self.mass)
    }

    /// `max_t |E(t) − E(0)| / |E(0)|`.
    pub fn relative_energy_drift(&self) -> f64 {
        relative_drift(&self.energy)
    }
}

fn relative_drift(v: &[f64]) -> f64 {
    let Some(&first) = v.first() else { return 0.0 };
    let scale = first.abs().max(f64::MIN_POSITIVE);
    v.iter().map(|x| (x - first).abs()).fold(0.0, f64::max) / scale
}

/// `u^λ(x) = λ^{-d/2} u(x/λ)`: same indices on the λ-times longer torus,
/// coefficients scaled by `λ^{d/2}`.
pub fn rescale(u: &SpectralField, lambda: f64) -> Result<SpectralField> {
    let l = *u.lattice();
    rescale_to(u, lambda, l.grid_size())
}

/// As [`rescale`], storing the result with bandlimit `m`; fails if the support does not fit.
pub fn rescale_to(u: &SpectralField, lambda: f64, m: usize) -> Result<SpectralField> {
    if !(lambda.is_finite() && lambda >= 1.0) {
        return domain(format!("rescaling factor must be at least 1, got {lambda}"));
    }
    let l = *u.lattice();
    let target = TorusLattice::new(l.dim(), l.lambda() * lambda, m)?;
    let amp = lambda.powf(l.dim() as f64 / 2.0);
    let mut out = SpectralField::zeros(target);
    for (s, c) in u.coeffs().iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let n = l.index_at(s);
        if !target.in_band(n) {
            return domain(format!("index {n} exceeds the bandlimit M = {m} of the rescaled lattice"));
        }
        out.set_coeff(n, c * amp)?;
    }
    Ok(out)
}

/// Affine function of `1/s` with rational coefficients, `a + b/s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InverseAffine {
    pub constant: Ratio<i64>,
    pub inv_s: Ratio<i64>,
}

impl InverseAffine {
    pub fn eval(&self, s: f64) -> f64 {
        let f = |r: Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
        f(self.constant) + f(self.inv_s) / s
    }

    /// The unique `s` where the exponent vanishes.
    pub fn root(&self) -> Option<Ratio<i64>> {
        if *self.constant.numer() == 0 {
            None
        } else {
            Some(-self.inv_s / self.constant)
        }
    }

    /// Exponent in closed form `(p s − q) / (r s)` as `(p, q, r)` in lowest terms.
    pub fn as_fraction(&self) -> (Ratio<i64>, Ratio<i64>, i64) {
        let lcm = num_integer::lcm(*self.constant.denom(), *self.inv_s.denom());
        let r = Ratio::from_integer(lcm);
        (self.constant * r, -self.inv_s * r, lcm)
    }
}

/// Exponent of `N` in the rescaling `λ ∼ N^{(1−s)/s}`: `(1 − s)/s = −1 + 1/s`.
pub fn rescaling_exponent() -> InverseAffine {
    InverseAffine { constant: Ratio::from_integer(-1), inv_s: Ratio::from_integer(1) }
}

/// Exponent of `N` in the lifespan `N^g / λ²` reached on the original torus,
/// where the modified energy survives `N^g` unit steps on the rescaled torus:
/// `g = 5/2` in 1D and `g = 1` in 2D.
pub fn lifespan_exponent(dim: usize) -> Result<InverseAffine> {
    let growth = match dim {
        1 => Ratio::new(5, 2),
        2 => Ratio::from_integer(1),
        _ => return domain(format!("dimension must be 1 or 2, got {dim}")),
    };
    let lam = rescaling_exponent();
    let two = Ratio::from_integer(2);
    Ok(InverseAffine { constant: growth - two * lam.constant, inv_s: -two * lam.inv_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random;
    use crate::lattice::FrequencyIndex;
    use std::f64::consts::PI;

    #[test]
    fn zero_data_stays_zero() {
        let l = TorusLattice::new(1, 2.0, 16).unwrap();
        let u = evolve(&SpectralField::zeros(l), &SolverConfig::new(0.01, 0.1)).unwrap();
        assert_eq!(u.len(), 11);
        assert!(u.frames().iter().all(|f| f.max_coeff() == 0.0));
    }

    #[test]
    fn plane_wave_phase() {
        let lambda = 1.5;
        let a = 0.8;
        let l = TorusLattice::new(1, lambda, 16).unwrap();
        let n = FrequencyIndex::new1(1);
        let u0 = SpectralField::point_mass(l, n, Complex64::new(a * lambda, 0.0)).unwrap();
        let cfg = SolverConfig::new(1e-3, 1.0).recording_every(1000);
        let u = evolve(&u0, &cfg).unwrap();
        let last = u.frames().last().unwrap();
        let theta = -((2.0 * PI / lambda).powi(2) + a.powi(4));
        let expected = Complex64::from_polar(a * lambda, theta);
        assert!((last.coeff(n) - expected).norm() / (a * lambda) < 1e-6);
    }

    #[test]
    fn rejects_bad_config() {
        let l = TorusLattice::new(1, 1.0, 8).unwrap();
        let u0 = SpectralField::zeros(l);
        assert!(evolve(&u0, &SolverConfig::new(0.0, 1.0)).is_err());
        assert!(evolve(&u0, &SolverConfig::new(0.1, -1.0)).is_err());
        assert!(evolve(&u0, &SolverConfig::new(0.1, 1.0).recording_every(3)).is_err());
    }

    #[test]
    fn blow_up_reports_time() {
        let l = TorusLattice::new(1, 1.0, 8).unwrap();
        let mut u0 = SpectralField::zeros(l);
        u0.set_coeff(FrequencyIndex::ZERO, Complex64::new(f64::NAN, 0.0)).unwrap();
        assert!(matches!(evolve(&u0, &SolverConfig::new(0.1, 1.0)), Err(LabError::Integration { .. })));
    }

    #[test]
    fn energy_examples() {
        let l = TorusLattice::new(1, 1.0, 16).unwrap();
        assert_eq!(energy(&SpectralField::zeros(l)), 0.0);
        let pw = SpectralField::point_mass(l, FrequencyIndex::new1(1), Complex64::new(1.0, 0.0)).unwrap();
        assert!((energy(&pw) - (2.0 * PI * PI + 1.0 / 6.0)).abs() < 1e-12);
        let f = random::band(TorusLattice::new(2, 3.0, 16).unwrap(), 2.0, 1.0, 8);
        let g = f.translated([0.37, 1.1]);
        assert!((energy(&f) - energy(&g)).abs() < 1e-12 * energy(&f));
    }

    #[test]
    fn rescale_examples() {
        let l = TorusLattice::new(1, 1.0, 32).unwrap();
        let u = random::band(l, 15.0, 1.0, 3);
        assert_eq!(rescale(&u, 1.0).unwrap(), u);
        let r = rescale(&u, 7.0).unwrap();
        assert!((r.l2_norm() - u.l2_norm()).abs() < 1e-12);
        let s = 0.6;
        let ratio = r.homogeneous_sobolev_norm(s) / u.homogeneous_sobolev_norm(s);
        assert!((ratio - 7f64.powf(-s)).abs() < 1e-12);
        assert!(rescale(&u, 0.5).is_err());
        assert!(rescale_to(&u, 2.0, 8).is_err());
    }

    #[test]
    fn lifespan_bookkeeping() {
        let one = lifespan_exponent(1).unwrap();
        assert_eq!(one.as_fraction(), (Ratio::from_integer(9), Ratio::from_integer(4), 2));
        assert_eq!(one.root(), Some(Ratio::new(4, 9)));
        let two = lifespan_exponent(2).unwrap();
        assert_eq!(two.as_fraction(), (Ratio::from_integer(3), Ratio::from_integer(2), 1));
        assert_eq!(two.root(), Some(Ratio::new(2, 3)));
        for s in [0.45, 0.5, 0.7, 0.9] {
            assert!((one.eval(s) - (9.0 * s - 4.0) / (2.0 * s)).abs() < 1e-14);
            assert!((two.eval(s) - (3.0 * s - 2.0) / s).abs() < 1e-14);
        }
        assert!(lifespan_exponent(3).is_err());
    }
}
