//! The rescaled torus `T^d_λ`, its frequency lattice `(1/λ)Z^d` and the
//! normalized counting measure `(dk)_λ = λ^{-d} Σ`.
//!
//! Frequencies are addressed by integer indices `n` (lattice units); the
//! physical frequency is `k = n / λ`. A lattice with bandlimit `M` holds the
//! window `−M/2 ≤ n_i < M/2` per axis. The index `−M/2` is the unpaired
//! Nyquist index: generated fields keep it at zero so that the remaining band
//! `|n_i| < M/2` is closed under negation.

use crate::error::{domain, Result};
use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// Integer frequency index `n ∈ Z^d`. One-dimensional indices keep the second
/// component at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyIndex(pub [i64; 2]);

impl FrequencyIndex {
    pub const ZERO: FrequencyIndex = FrequencyIndex([0, 0]);

    pub fn new1(n: i64) -> Self {
        FrequencyIndex([n, 0])
    }

    pub fn new2(a: i64, b: i64) -> Self {
        FrequencyIndex([a, b])
    }

    /// `|n|²`, exact.
    pub fn norm_sq(self) -> i64 {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }

    /// Euclidean inner product `n·m`, exact.
    pub fn dot(self, other: FrequencyIndex) -> i64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn is_zero(self) -> bool {
        self.0 == [0, 0]
    }
}

impl Add for FrequencyIndex {
    type Output = FrequencyIndex;
    fn add(self, rhs: Self) -> Self {
        FrequencyIndex([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for FrequencyIndex {
    type Output = FrequencyIndex;
    fn sub(self, rhs: Self) -> Self {
        FrequencyIndex([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

impl Neg for FrequencyIndex {
    type Output = FrequencyIndex;
    fn neg(self) -> Self {
        FrequencyIndex([-self.0[0], -self.0[1]])
    }
}

impl std::iter::Sum for FrequencyIndex {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(FrequencyIndex::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for FrequencyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0[0], self.0[1])
    }
}

/// The torus `T^d_λ` discretized with `M` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusLattice {
    dim: usize,
    lambda: f64,
    m: usize,
}

impl TorusLattice {
    pub fn new(dim: usize, lambda: f64, m: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return domain(format!("dimension must be 1 or 2, got {dim}"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return domain(format!("period must be positive, got {lambda}"));
        }
        if m < 4 || m % 2 != 0 {
            return domain(format!("bandlimit must be even and at least 4, got {m}"));
        }
        Ok(TorusLattice { dim, lambda, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Grid points per axis.
    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Total number of grid points (= number of window indices).
    pub fn points(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Largest admissible |n_i| inside the symmetric band.
    pub fn band_max(&self) -> i64 {
        (self.m / 2) as i64 - 1
    }

    /// Number of indices in the symmetric band (Nyquist excluded).
    pub fn band_size(&self) -> usize {
        (self.m - 1).pow(self.dim as u32)
    }

    /// Physical grid spacing `λ / M`.
    pub fn spacing(&self) -> f64 {
        self.lambda / self.m as f64
    }

    /// Quadrature weight `(λ/M)^d` of one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Weight of one lattice point under `(dk)_λ`, i.e. `λ^{-d}`.
    pub fn measure(&self) -> f64 {
        self.lambda.powi(-(self.dim as i32))
    }

    /// Torus volume `λ^d`.
    pub fn volume(&self) -> f64 {
        self.lambda.powi(self.dim as i32)
    }

    /// Same dimension and bandlimit with a different period.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        TorusLattice::new(self.dim, lambda, self.m)
    }

    /// Same dimension and period with a different bandlimit.
    pub fn with_grid(&self, m: usize) -> Result<Self> {
        TorusLattice::new(self.dim, self.lambda, m)
    }

    /// True when every component lies in the symmetric band `|n_i| < M/2`.
    pub fn in_band(&self, n: FrequencyIndex) -> bool {
        let b = self.band_max();
        (0..self.dim).all(|i| n.0[i].abs() <= b) && (self.dim == 2 || n.0[1] == 0)
    }

    /// True when every component lies in the storage window `−M/2 ≤ n_i < M/2`.
    pub fn in_window(&self, n: FrequencyIndex) -> bool {
        let h = (self.m / 2) as i64;
        (0..self.dim).all(|i| n.0[i] >= -h && n.0[i] < h) && (self.dim == 2 || n.0[1] == 0)
    }

    /// True for indices carrying a Nyquist component.
    pub fn is_nyquist(&self, n: FrequencyIndex) -> bool {
        self.in_window(n) && !self.in_band(n)
    }

    fn axis_slot(&self, n: i64) -> usize {
        if n >= 0 {
            n as usize
        } else {
            (n + self.m as i64) as usize
        }
    }

    fn axis_index(&self, i: usize) -> i64 {
        if i < self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Storage offset of a window index (FFT order, row-major in 2D).
    pub fn slot(&self, n: FrequencyIndex) -> Option<usize> {
        if !self.in_window(n) {
            return None;
        }
        Some(match self.dim {
            1 => self.axis_slot(n.0[0]),
            _ => self.axis_slot(n.0[0]) * self.m + self.axis_slot(n.0[1]),
        })
    }

    /// Inverse of [`TorusLattice::slot`].
    pub fn index_at(&self, slot: usize) -> FrequencyIndex {
        match self.dim {
            1 => FrequencyIndex::new1(self.axis_index(slot)),
            _ => FrequencyIndex::new2(self.axis_index(slot / self.m), self.axis_index(slot % self.m)),
        }
    }

    /// All window indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = FrequencyIndex> + '_ {
        (0..self.points()).map(move |s| self.index_at(s))
    }

    /// The symmetric band, sorted lexicographically.
    pub fn band_indices(&self) -> Vec<FrequencyIndex> {
        let b = self.band_max();
        match self.dim {
            1 => (-b..=b).map(FrequencyIndex::new1).collect(),
            _ => (-b..=b)
                .flat_map(|x| (-b..=b).map(move |y| FrequencyIndex::new2(x, y)))
                .collect(),
        }
    }

    /// Physical frequency `k = n / λ`.
    pub fn frequency_of(&self, n: FrequencyIndex) -> Result<[f64; 2]> {
        if !self.in_window(n) {
            return domain(format!("index {n} lies outside the bandlimit window of M = {}", self.m));
        }
        Ok(self.frequency_unchecked(n))
    }

    pub(crate) fn frequency_unchecked(&self, n: FrequencyIndex) -> [f64; 2] {
        [n.0[0] as f64 / self.lambda, n.0[1] as f64 / self.lambda]
    }

    /// `|k|` for index `n`.
    pub fn k_abs(&self, n: FrequencyIndex) -> f64 {
        (n.norm_sq() as f64).sqrt() / self.lambda
    }

    /// `|k|²` for index `n`.
    pub fn k_sq(&self, n: FrequencyIndex) -> f64 {
        n.norm_sq() as f64 / (self.lambda * self.lambda)
    }

    /// `∫ a(k) (dk)_λ = λ^{-d} Σ a(k)` over every window index.
    pub fn measure_integrate<F>(&self, a: F) -> Complex64
    where
        F: Fn(FrequencyIndex) -> Complex64,
    {
        let sum: Complex64 = self.indices().map(a).sum();
        sum * self.measure()
    }
}

/// Japanese bracket `⟨x⟩ = 1 + |x|` used for Sobolev weights.
pub fn bracket(x: f64) -> f64 {
    1.0 + x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_of_constant_symbol() {
        let l = TorusLattice::new(1, 2.0, 8).unwrap();
        let v = l.measure_integrate(|_| Complex64::new(1.0, 0.0));
        assert!((v.re - 4.0).abs() < 1e-15 && v.im == 0.0);
        let z = l.measure_integrate(|_| Complex64::new(0.0, 0.0));
        assert_eq!(z, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn measure_of_point_mass_in_2d() {
        let l = TorusLattice::new(2, 4.0, 8).unwrap();
        let v = l.measure_integrate(|n| if n.is_zero() { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        assert!((v.re - 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn frequency_examples() {
        let l1 = TorusLattice::new(1, 1.0, 8).unwrap();
        assert_eq!(l1.frequency_of(FrequencyIndex::new1(3)).unwrap()[0], 3.0);
        let l2 = TorusLattice::new(2, 4.0, 8).unwrap();
        assert_eq!(l2.frequency_of(FrequencyIndex::new2(2, -1)).unwrap(), [0.5, -0.25]);
        let l3 = TorusLattice::new(1, 2.0, 8).unwrap();
        assert_eq!(l3.frequency_of(FrequencyIndex::ZERO).unwrap(), [0.0, 0.0]);
        assert!(l1.frequency_of(FrequencyIndex::new1(4)).is_err());
        assert!(l1.frequency_of(FrequencyIndex::new1(-4)).is_ok());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TorusLattice::new(3, 1.0, 8).is_err());
        assert!(TorusLattice::new(1, 0.0, 8).is_err());
        assert!(TorusLattice::new(1, 1.0, 6).is_ok());
        assert!(TorusLattice::new(1, 1.0, 7).is_err());
        assert!(TorusLattice::new(1, 1.0, 2).is_err());
    }

    #[test]
    fn slots_round_trip() {
        for l in [TorusLattice::new(1, 3.0, 10).unwrap(), TorusLattice::new(2, 1.5, 6).unwrap()] {
            for s in 0..l.points() {
                assert_eq!(l.slot(l.index_at(s)), Some(s));
            }
            assert_eq!(l.band_indices().len(), l.band_size());
            assert!(l.band_indices().iter().all(|&n| l.in_band(-n)));
        }
    }

    #[test]
    fn halving_measure_when_period_doubles() {
        let a = |_n: FrequencyIndex| Complex64::new(0.7, -0.2);
        for dim in [1, 2] {
            let l = TorusLattice::new(dim, 1.5, 8).unwrap();
            let l2 = l.with_lambda(3.0).unwrap();
            let ratio = l.measure_integrate(a) / l2.measure_integrate(a);
            assert!((ratio.re - 2f64.powi(dim as i32)).abs() < 1e-12);
        }
    }
}
