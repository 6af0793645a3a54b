//! Band-limited fields on `T^d_λ`, Fourier transforms, Sobolev and space-time
//! norms, and the free Schrödinger propagator.
//!
//! Transform pair:
//! `f̂(k) = ∫_{[0,λ]^d} e^{−2πik·x} f(x) dx` and `f(x) = ∫ e^{2πik·x} f̂(k) (dk)_λ`.
//! Physical integrals use the rectangle rule with weight `(λ/M)^d`, which is
//! exact for band-limited integrands resolved by the grid.

use crate::error::{domain, Result};
use crate::lattice::{bracket, FrequencyIndex, TorusLattice};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized in-place DFT over a `m^dim` row-major array.
pub(crate) fn fft_nd(data: &mut [Complex64], m: usize, dim: usize, direction: FftDirection) {
    let fft = plan(m, direction);
    if dim == 1 {
        fft.process(data);
        return;
    }
    debug_assert_eq!(data.len(), m * m);
    // rows are contiguous
    fft.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); m];
    for c in 0..m {
        for r in 0..m {
            column[r] = data[r * m + c];
        }
        fft.process(&mut column);
        for r in 0..m {
            data[r * m + c] = column[r];
        }
    }
}

/// Smooth bump: 1 on `[−1,1]`, `exp(1 − 1/(1 − (|t|−1)²))` on `1 ≤ |t| ≤ 2`, 0 outside.
pub fn bump(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a < 2.0 {
        let x = a - 1.0;
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// `∫ |η(t)|^p dt` by composite Simpson on a fine grid.
pub fn bump_lp_norm(p: f64) -> f64 {
    let n = 200_000;
    let h = 4.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let t = -2.0 + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * bump(t).powf(p);
    }
    (acc * h / 3.0).powf(1.0 / p)
}

/// Complex Fourier coefficients `f̂(n/λ)` of a band-limited λ-periodic function,
/// stored over the full window in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: TorusLattice,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(lattice: TorusLattice) -> Self {
        SpectralField { coeffs: vec![Complex64::new(0.0, 0.0); lattice.points()], lattice }
    }

    /// Builds a field from coefficients in storage order.
    pub fn from_coeffs(lattice: TorusLattice, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.points() {
            return domain(format!("expected {} coefficients, got {}", lattice.points(), coeffs.len()));
        }
        Ok(SpectralField { lattice, coeffs })
    }

    /// Builds a field by evaluating `f̂` on every window index.
    pub fn from_fn<F: FnMut(FrequencyIndex) -> Complex64>(lattice: TorusLattice, mut f: F) -> Self {
        let coeffs = (0..lattice.points()).map(|s| f(lattice.index_at(s))).collect();
        SpectralField { lattice, coeffs }
    }

    /// Single coefficient `value` at index `n`, zero elsewhere.
    pub fn point_mass(lattice: TorusLattice, n: FrequencyIndex, value: Complex64) -> Result<Self> {
        let mut f = SpectralField::zeros(lattice);
        let slot = lattice
            .slot(n)
            .ok_or_else(|| crate::LabError::Domain(format!("index {n} outside the window")))?;
        f.coeffs[slot] = value;
        Ok(f)
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `f̂(n)`; zero outside the window.
    pub fn coeff(&self, n: FrequencyIndex) -> Complex64 {
        self.lattice.slot(n).map_or(Complex64::new(0.0, 0.0), |s| self.coeffs[s])
    }

    /// Coefficient of the conjugate function, `(f̄)^(n) = conj(f̂(−n))`.
    pub fn conj_coeff(&self, n: FrequencyIndex) -> Complex64 {
        self.coeff(-n).conj()
    }

    pub fn set_coeff(&mut self, n: FrequencyIndex, value: Complex64) -> Result<()> {
        match self.lattice.slot(n) {
            Some(s) => {
                self.coeffs[s] = value;
                Ok(())
            }
            None => domain(format!("index {n} outside the window")),
        }
    }

    /// Forces every Nyquist coefficient to zero.
    pub fn zero_nyquist(&mut self) {
        let l = self.lattice;
        for (s, c) in self.coeffs.iter_mut().enumerate() {
            if !l.in_band(l.index_at(s)) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Largest Nyquist coefficient modulus.
    pub fn nyquist_mass(&self) -> f64 {
        let l = self.lattice;
        (0..l.points())
            .filter(|&s| !l.in_band(l.index_at(s)))
            .map(|s| self.coeffs[s].norm())
            .fold(0.0, f64::max)
    }

    /// Forward transform of grid samples `f(x_j)`, `x_j = j λ/M`.
    pub fn from_grid(lattice: TorusLattice, values: &[Complex64]) -> Result<Self> {
        if values.len() != lattice.points() {
            return domain(format!(
                "grid has {} samples, lattice expects {}",
                values.len(),
                lattice.points()
            ));
        }
        let mut data = values.to_vec();
        fft_nd(&mut data, lattice.grid_size(), lattice.dim(), FftDirection::Forward);
        let w = lattice.cell_volume();
        data.iter_mut().for_each(|c| *c *= w);
        Ok(SpectralField { lattice, coeffs: data })
    }

    /// Inverse transform: samples of `f` on the `M`-point grid.
    pub fn to_grid(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        fft_nd(&mut data, self.lattice.grid_size(), self.lattice.dim(), FftDirection::Inverse);
        let w = self.lattice.measure();
        data.iter_mut().for_each(|c| *c *= w);
        data
    }

    /// The same function on a lattice with bandlimit `m`: zero-padding when
    /// `m` grows, truncation to the new window when it shrinks.
    pub fn resampled(&self, m: usize) -> Result<Self> {
        let target = self.lattice.with_grid(m)?;
        let mut out = SpectralField::zeros(target);
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            if let Some(t) = target.slot(self.lattice.index_at(s)) {
                out.coeffs[t] = c;
            }
        }
        Ok(out)
    }

    /// Samples on a grid refined by `factor` (spectral interpolation).
    pub fn padded_grid(&self, factor: usize) -> Vec<Complex64> {
        if factor <= 1 {
            return self.to_grid();
        }
        self.resampled(self.lattice.grid_size() * factor)
            .expect("refined lattice is valid")
            .to_grid()
    }

    /// Physical samples → spectrum restricted to the window of `self`'s lattice.
    pub(crate) fn truncated_from_padded(lattice: TorusLattice, factor: usize, values: &[Complex64]) -> Self {
        let fine = lattice.with_grid(lattice.grid_size() * factor).expect("refined lattice is valid");
        let full = SpectralField::from_grid(fine, values).expect("sample count matches");
        full.resampled(lattice.grid_size()).expect("valid lattice")
    }

    /// `‖f‖_{L²} = (λ^{-d} Σ |f̂|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// `‖f‖_{H^s} = (λ^{-d} Σ ⟨k⟩^{2s} |f̂(k)|²)^{1/2}` with `⟨k⟩ = 1 + |k|`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let l = &self.lattice;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = if s == 0.0 { 1.0 } else { bracket(l.k_abs(l.index_at(i))).powf(2.0 * s) };
                w * c.norm_sqr()
            })
            .sum();
        (sum * l.measure()).sqrt()
    }

    /// Homogeneous seminorm `(λ^{-d} Σ |k|^{2s} |f̂(k)|²)^{1/2}`, zero mode excluded.
    pub fn homogeneous_sobolev_norm(&self, s: f64) -> f64 {
        let l = &self.lattice;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| !l.index_at(*i).is_zero())
            .map(|(i, c)| l.k_abs(l.index_at(i)).powf(2.0 * s) * c.norm_sqr())
            .sum();
        (sum * l.measure()).sqrt()
    }

    /// `‖∇f‖²_{L²} = λ^{-d} Σ (2π|k|)² |f̂|²`.
    pub fn gradient_norm_sq(&self) -> f64 {
        let l = &self.lattice;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| 4.0 * PI * PI * l.k_sq(l.index_at(i)) * c.norm_sqr())
            .sum();
        sum * l.measure()
    }

    /// `‖f‖_{L²}` by grid quadrature in physical space.
    pub fn physical_l2_norm(&self) -> f64 {
        let w = self.lattice.cell_volume();
        (self.to_grid().iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// `∫ f ḡ (dk)_λ` on the Fourier side.
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_same(other)?;
        let sum: Complex64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum();
        Ok(sum * self.lattice.measure())
    }

    /// `∫ f ḡ dx` by grid quadrature.
    pub fn physical_inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_same(other)?;
        let (a, b) = (self.to_grid(), other.to_grid());
        let sum: Complex64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        Ok(sum * self.lattice.cell_volume())
    }

    /// `∫ |f|^p dx`, exact for even integer `p` (grid refined by `⌈p/2⌉`).
    pub fn lp_integral(&self, p: f64) -> f64 {
        let factor = lp_pad_factor(p);
        let values = self.padded_grid(factor);
        let w = self.lattice.cell_volume() / (factor as f64).powi(self.lattice.dim() as i32);
        values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * w
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.lattice != other.lattice {
            return domain("fields live on different lattices");
        }
        Ok(())
    }

    /// Free evolution `U_λ(t)`: `f̂(k) ↦ e^{−4π²i|k|²t} f̂(k)`, solving `i u_t + Δu = 0`.
    pub fn propagate_linear(&self, t: f64) -> SpectralField {
        let l = self.lattice;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, -4.0 * PI * PI * l.k_sq(l.index_at(i)) * t))
            .collect();
        SpectralField { lattice: l, coeffs }
    }

    /// Physical translation `f(· − shift)`.
    pub fn translated(&self, shift: [f64; 2]) -> SpectralField {
        let l = self.lattice;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = l.frequency_unchecked(l.index_at(i));
                c * Complex64::from_polar(1.0, -2.0 * PI * (k[0] * shift[0] + k[1] * shift[1]))
            })
            .collect();
        SpectralField { lattice: l, coeffs }
    }

    pub fn scaled(&self, a: Complex64) -> SpectralField {
        SpectralField { lattice: self.lattice, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpectralField { lattice: self.lattice, coeffs })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralField { lattice: self.lattice, coeffs })
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|k|` carrying a nonzero coefficient.
    pub fn support_radius(&self) -> f64 {
        let l = &self.lattice;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(i, _)| l.k_abs(l.index_at(i)))
            .fold(0.0, f64::max)
    }

    /// Product `f · g` with exact band-limited spectrum on a lattice wide
    /// enough to hold it (bandlimit `2M`).
    pub fn product_exact(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let m2 = 2 * self.lattice.grid_size();
        let a = self.resampled(m2)?.to_grid();
        let b = other.resampled(m2)?.to_grid();
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        SpectralField::from_grid(self.lattice.with_grid(m2)?, &prod)
    }

    /// `|f|^{p} f` for even integer `p`, with its exact spectrum on a lattice of
    /// bandlimit `(p + 2) M / 2` rounded up to an even size.
    pub fn power_nonlinearity(&self, p: u32) -> SpectralField {
        let m = self.lattice.grid_size();
        let mut wide = (p as usize + 2) * m / 2;
        if wide % 2 == 1 {
            wide += 1;
        }
        let values = self.resampled(wide).expect("valid").to_grid();
        let prod: Vec<Complex64> = values.iter().map(|v| v * v.norm_sqr().powi(p as i32 / 2)).collect();
        SpectralField::from_grid(self.lattice.with_grid(wide).expect("valid"), &prod).expect("sizes match")
    }
}

pub(crate) fn lp_pad_factor(p: f64) -> usize {
    let half = (p / 2.0).ceil() as usize;
    if (p / 2.0).fract() == 0.0 {
        half.max(1)
    } else {
        half.max(2)
    }
}

/// A real symbol on the frequency window.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyMultiplier {
    lattice: TorusLattice,
    symbol: Vec<f64>,
}

impl FrequencyMultiplier {
    pub fn from_fn<F: Fn(FrequencyIndex) -> f64>(lattice: TorusLattice, f: F) -> Result<Self> {
        let symbol: Vec<f64> = (0..lattice.points()).map(|s| f(lattice.index_at(s))).collect();
        if let Some(bad) = symbol.iter().position(|v| !v.is_finite()) {
            return domain(format!("symbol is not finite at {}", lattice.index_at(bad)));
        }
        Ok(FrequencyMultiplier { lattice, symbol })
    }

    pub fn constant(lattice: TorusLattice, value: f64) -> Self {
        FrequencyMultiplier { lattice, symbol: vec![value; lattice.points()] }
    }

    /// Bessel weight `⟨k⟩^s`.
    pub fn bessel(lattice: TorusLattice, s: f64) -> Self {
        let symbol = (0..lattice.points()).map(|i| bracket(lattice.k_abs(lattice.index_at(i))).powf(s)).collect();
        FrequencyMultiplier { lattice, symbol }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn value(&self, n: FrequencyIndex) -> f64 {
        self.lattice.slot(n).map_or(0.0, |s| self.symbol[s])
    }

    pub fn values(&self) -> &[f64] {
        &self.symbol
    }

    /// Coefficient-wise product `m(k) f̂(k)`.
    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField> {
        if self.lattice != f.lattice {
            return domain("multiplier and field live on different lattices");
        }
        let coeffs = f.coeffs.iter().zip(&self.symbol).map(|(c, m)| c * m).collect();
        Ok(SpectralField { lattice: f.lattice, coeffs })
    }
}

/// Time-sampled sequence of fields on a uniform grid `t_i = t0 + i Δt`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    lattice: TorusLattice,
    t0: f64,
    dt: f64,
    frames: Vec<SpectralField>,
    window: Option<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(frames: Vec<SpectralField>, t0: f64, dt: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return domain("a space-time field needs at least one frame");
        };
        if !(dt > 0.0) {
            return domain("time step must be positive");
        }
        let lattice = *first.lattice();
        if frames.iter().any(|f| *f.lattice() != lattice) {
            return domain("all frames must share one lattice");
        }
        Ok(SpaceTimeField { lattice, t0, dt, frames, window: None })
    }

    /// Free evolution `U(t)φ` sampled at `count` equispaced times starting at `t0`.
    pub fn free_evolution(phi: &SpectralField, t0: f64, dt: f64, count: usize) -> Result<Self> {
        let frames = (0..count).map(|i| phi.propagate_linear(t0 + i as f64 * dt)).collect();
        SpaceTimeField::new(frames, t0, dt)
    }

    /// Free evolution on the standard window `[−2, 2)` with `count` frames and the bump cutoff attached.
    pub fn windowed_free_evolution(phi: &SpectralField, count: usize) -> Result<Self> {
        let dt = 4.0 / count as f64;
        Ok(SpaceTimeField::free_evolution(phi, -2.0, dt, count)?.with_bump_window())
    }

    /// Attaches the bump cutoff `η` sampled on the time grid.
    pub fn with_bump_window(mut self) -> Self {
        self.window = Some(self.times().map(bump).collect());
        self
    }

    pub fn with_window(mut self, window: Vec<f64>) -> Result<Self> {
        if window.len() != self.frames.len() {
            return domain("window length differs from frame count");
        }
        self.window = Some(window);
        Ok(self)
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn frames(&self) -> &[SpectralField] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn window(&self) -> Option<&[f64]> {
        self.window.as_deref()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.frames.len()).map(move |i| self.t0 + i as f64 * self.dt)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    fn weight(&self, i: usize) -> f64 {
        self.window.as_ref().map_or(1.0, |w| w[i])
    }

    /// Windowed discrete surrogate of `‖u‖_{X^{s,b}} = ‖U(−t) u‖_{H^s_x H^b_t}`:
    /// the cutoff `η u` is pulled back by the free flow, transformed in time on
    /// the sample grid and weighted by `⟨k⟩^s ⟨τ⟩^b`. Pulling back first places
    /// the dispersion surface at `τ = 0` exactly, so free solutions are minimal.
    pub fn xsb_norm(&self, s: f64, b: f64) -> Result<f64> {
        let count = self.frames.len();
        if count < 8 {
            return domain(format!("X^(s,b) norm needs at least 8 frames, got {count}"));
        }
        let l = self.lattice;
        let fft = plan(count, FftDirection::Forward);
        let span = count as f64 * self.dt;
        let tau: Vec<f64> = (0..count)
            .map(|q| {
                let qq = if q < count / 2 { q as f64 } else { q as f64 - count as f64 };
                qq / span
            })
            .collect();
        let time_weights: Vec<f64> = tau.iter().map(|t| bracket(*t).powf(2.0 * b)).collect();
        let mut series = vec![Complex64::new(0.0, 0.0); count];
        let mut total = 0.0;
        for slot in 0..l.points() {
            let n = l.index_at(slot);
            let ksq = l.k_sq(n);
            let mut nonzero = false;
            for (i, frame) in self.frames.iter().enumerate() {
                let c = frame.coeffs[slot];
                if c.norm_sqr() > 0.0 {
                    nonzero = true;
                }
                let back = Complex64::from_polar(1.0, 4.0 * PI * PI * ksq * self.time(i));
                series[i] = c * back * self.weight(i);
            }
            if !nonzero {
                continue;
            }
            fft.process(&mut series);
            let spatial = bracket(ksq.sqrt()).powf(2.0 * s);
            let acc: f64 = series.iter().zip(&time_weights).map(|(v, w)| v.norm_sqr() * w).sum();
            // Δt² |DFT|² / span = Δt Σ|·|² at b = 0
            total += spatial * acc * self.dt * self.dt / span;
        }
        Ok((total * l.measure()).sqrt())
    }

    /// `‖u‖_{L^p_t L^p_x}` by quadrature over frames and the (refined) grid,
    /// with the attached window applied.
    pub fn lp_spacetime_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return domain(format!("L^p norm needs p ≥ 1, got {p}"));
        }
        let total: f64 = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| self.weight(i).abs().powf(p) * f.lp_integral(p))
            .sum();
        Ok((total * self.dt).powf(1.0 / p))
    }
}

/// Seeded generator of band-limited test data. Nyquist coefficients are always zero.
pub mod random {
    use super::*;

    fn phase(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
    }

    /// Normalizes to unit `L²`.
    pub fn normalized(mut f: SpectralField) -> SpectralField {
        let n = f.l2_norm();
        if n > 0.0 {
            f.coeffs.iter_mut().for_each(|c| *c /= n);
        }
        f
    }

    /// Generic `H^s` data: `|f̂(n)| ∝ ⟨n/λ⟩^{−s−d/2−0.01}` with uniform random
    /// phases on the band, scaled to the given `L²` norm.
    pub fn hs_profile(lattice: TorusLattice, s: f64, l2: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exponent = -s - lattice.dim() as f64 / 2.0 - 0.01;
        let f = SpectralField::from_fn(lattice, |n| {
            let ph = phase(&mut rng);
            if lattice.in_band(n) {
                ph * bracket(lattice.k_abs(n)).powf(exponent)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        normalized(f).scaled(Complex64::new(l2, 0.0))
    }

    /// Random band-limited field supported on `|k| ≤ kmax` with i.i.d. complex
    /// Gaussian-like coefficients, normalized to the given `L²` norm.
    pub fn band(lattice: TorusLattice, kmax: f64, l2: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SpectralField::from_fn(lattice, |n| {
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            if lattice.in_band(n) && lattice.k_abs(n) <= kmax {
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        normalized(f).scaled(Complex64::new(l2, 0.0))
    }

    /// Smooth data with Gaussian spectral envelope `exp(−|n|²/(2σ²))` in index units.
    pub fn smooth(lattice: TorusLattice, sigma: f64, l2: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SpectralField::from_fn(lattice, |n| {
            let ph = phase(&mut rng);
            let mag: f64 = rng.gen_range(0.5..1.0);
            if lattice.in_band(n) {
                ph * mag * (-(n.norm_sq() as f64) / (2.0 * sigma * sigma)).exp()
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        normalized(f).scaled(Complex64::new(l2, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constant_function_transform() {
        for (dim, lambda) in [(1, 3.0), (2, 1.5)] {
            let l = TorusLattice::new(dim, lambda, 8).unwrap();
            let c = Complex64::new(0.3, -1.2);
            let f = SpectralField::from_grid(l, &vec![c; l.points()]).unwrap();
            let expected = c * lambda.powi(dim as i32);
            assert!((f.coeff(FrequencyIndex::ZERO) - expected).norm() < 1e-13);
            let rest: f64 = l.indices().filter(|n| !n.is_zero()).map(|n| f.coeff(n).norm()).sum();
            assert!(rest < 1e-13);
        }
    }

    #[test]
    fn plane_wave_transform() {
        let lambda = 2.5;
        let l = TorusLattice::new(1, lambda, 16).unwrap();
        let grid: Vec<Complex64> =
            (0..16).map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 * l.spacing()) / lambda)).collect();
        let f = SpectralField::from_grid(l, &grid).unwrap();
        assert!((f.coeff(FrequencyIndex::new1(1)) - Complex64::new(lambda, 0.0)).norm() < 1e-13);
        assert!(f.coeffs().iter().map(|c| c.norm()).sum::<f64>() - lambda < 1e-12);
    }

    #[test]
    fn round_trip_and_shape_errors() {
        let l = TorusLattice::new(2, 1.7, 8).unwrap();
        let f = random::band(l, 10.0, 1.0, 4);
        let g = SpectralField::from_grid(l, &f.to_grid()).unwrap();
        assert!(f.sub(&g).unwrap().l2_norm() < 1e-12 * f.l2_norm());
        assert!(SpectralField::from_grid(l, &[Complex64::new(0.0, 0.0); 7]).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let l = TorusLattice::new(1, 1.0, 16).unwrap();
        let f = random::band(l, 100.0, 2.0, 9);
        assert!(rel(f.sobolev_norm(0.0), f.physical_l2_norm()) < 1e-12);
        assert_eq!(SpectralField::zeros(l).sobolev_norm(1.0), 0.0);
        let p = SpectralField::point_mass(l, FrequencyIndex::new1(3), Complex64::new(1.0, 0.0)).unwrap();
        assert!((p.sobolev_norm(1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn propagator_examples() {
        let l = TorusLattice::new(2, 3.0, 8).unwrap();
        let f = random::band(l, 10.0, 1.0, 2);
        assert_eq!(f.propagate_linear(0.0), f);
        assert!(rel(f.propagate_linear(0.37).l2_norm(), f.l2_norm()) < 1e-12);
        let n = FrequencyIndex::new2(2, -1);
        let p = SpectralField::point_mass(l, n, Complex64::new(1.0, 0.0)).unwrap();
        let t = 0.21;
        let expected = Complex64::from_polar(1.0, -4.0 * PI * PI * (5.0 / 9.0) * t);
        assert!((p.propagate_linear(t).coeff(n) - expected).norm() < 1e-14);
    }

    #[test]
    fn multiplier_examples() {
        let l = TorusLattice::new(1, 2.0, 16).unwrap();
        let f = random::band(l, 100.0, 1.0, 1);
        assert_eq!(FrequencyMultiplier::constant(l, 1.0).apply(&f).unwrap(), f);
        assert_eq!(FrequencyMultiplier::constant(l, 0.0).apply(&f).unwrap().l2_norm(), 0.0);
        let jf = FrequencyMultiplier::bessel(l, 1.0).apply(&f).unwrap();
        assert!(rel(jf.sobolev_norm(0.0), f.sobolev_norm(1.0)) < 1e-13);
        let other = TorusLattice::new(1, 3.0, 16).unwrap();
        assert!(FrequencyMultiplier::constant(other, 1.0).apply(&f).is_err());
    }

    #[test]
    fn xsb_of_free_solution_separates() {
        let l = TorusLattice::new(1, 2.0, 16).unwrap();
        let phi = random::band(l, 3.0, 1.3, 5);
        let u = SpaceTimeField::windowed_free_evolution(&phi, 128).unwrap();
        let v = u.xsb_norm(0.0, 0.0).unwrap();
        let expected = bump_lp_norm(2.0) * phi.l2_norm();
        assert!(rel(v, expected) < 1e-3, "{v} vs {expected}");
        let zero = SpaceTimeField::windowed_free_evolution(&SpectralField::zeros(l), 64).unwrap();
        assert_eq!(zero.xsb_norm(1.0, 0.5).unwrap(), 0.0);
        let short = SpaceTimeField::free_evolution(&phi, 0.0, 0.1, 7).unwrap();
        assert!(short.xsb_norm(0.0, 0.0).is_err());
    }

    #[test]
    fn xsb_at_b_zero_is_framewise_quadrature() {
        let l = TorusLattice::new(1, 1.0, 16).unwrap();
        // a non-free space-time field: frames with unrelated content
        let frames: Vec<_> = (0..32).map(|i| random::band(l, 6.0, 1.0 + 0.1 * i as f64, 100 + i)).collect();
        let u = SpaceTimeField::new(frames, -2.0, 0.125).unwrap().with_bump_window();
        let s = 0.7;
        let direct: f64 = u
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| bump(u.time(i)).powi(2) * f.sobolev_norm(s).powi(2))
            .sum::<f64>()
            * u.dt();
        assert!(rel(u.xsb_norm(s, 0.0).unwrap(), direct.sqrt()) < 1e-12);
    }

    #[test]
    fn lp_examples() {
        let l = TorusLattice::new(1, 1.0, 8).unwrap();
        let c = Complex64::new(0.6, 0.8) * 1.5;
        let f = SpectralField::from_grid(l, &vec![c; 8]).unwrap();
        let u = SpaceTimeField::new(vec![f; 10], 0.0, 0.1).unwrap();
        assert!(rel(u.lp_spacetime_norm(3.0).unwrap(), 1.5) < 1e-12);
        assert!(u.lp_spacetime_norm(0.5).is_err());

        let lam = 2.0;
        let l = TorusLattice::new(1, lam, 16).unwrap();
        let a = 0.7;
        let pw = SpectralField::point_mass(l, FrequencyIndex::new1(1), Complex64::new(a * lam, 0.0)).unwrap();
        let u = SpaceTimeField::free_evolution(&pw, 0.0, 1.0 / 16.0, 16).unwrap();
        // |u| ≡ a on a torus of length λ over a time span of 1
        let expected = a * lam.powf(0.25);
        assert!(rel(u.lp_spacetime_norm(4.0).unwrap(), expected) < 1e-12);

        let phi = random::band(l, 3.0, 1.0, 3);
        let u = SpaceTimeField::windowed_free_evolution(&phi, 64).unwrap();
        let plancherel = (u
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| bump(u.time(i)).powi(2) * f.l2_norm().powi(2))
            .sum::<f64>()
            * u.dt())
        .sqrt();
        assert!(rel(u.lp_spacetime_norm(2.0).unwrap(), plancherel) < 1e-10);
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.3), 1.0);
        assert_eq!(bump(-1.0), 1.0);
        assert_eq!(bump(2.0), 0.0);
        assert!(bump(1.5) > 0.0 && bump(1.5) < 1.0);
        assert!((bump(1.0 + 1e-6) - 1.0).abs() < 1e-9);
    }
}
