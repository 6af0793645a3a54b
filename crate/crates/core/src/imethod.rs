//! The smoothing multiplier `m`, the operator `I`, the first modified energy
//! `E¹(u) = E(Iu)` and the two-sided smoothing ratios of `I`.

use crate::error::{domain, LabError, Result};
use crate::field::{FrequencyMultiplier, SpectralField};
use crate::lattice::TorusLattice;
use crate::solver::energy;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IMethodParams {
    /// Threshold frequency `N` (physical units, cycles per unit length).
    pub n: f64,
    /// Regularity `s ∈ (0, 1]`.
    pub s: f64,
}

impl IMethodParams {
    pub fn new(n: f64, s: f64) -> Result<Self> {
        if !(n.is_finite() && n >= 1.0) {
            return Err(LabError::Config { field: "N".into(), reason: format!("must be at least 1, got {n}") });
        }
        // s = 1 is admitted as the degenerate case I = identity
        if !(s > 0.0 && s <= 1.0) {
            return Err(LabError::Config { field: "s".into(), reason: format!("must lie in (0, 1], got {s}") });
        }
        Ok(IMethodParams { n, s })
    }

    /// `m` as a function of `|k|`.
    pub fn m(&self, k_abs: f64) -> f64 {
        if k_abs <= self.n {
            1.0
        } else {
            (k_abs / self.n).powf(self.s - 1.0)
        }
    }
}

/// `m(k) = 1` for `|k| ≤ N`, `(|k|/N)^{s−1}` beyond.
pub fn m_symbol(p: &IMethodParams, l: TorusLattice) -> FrequencyMultiplier {
    FrequencyMultiplier::from_fn(l, |n| p.m(l.k_abs(n))).expect("symbol is finite")
}

/// `(Iu)^(k) = m(k) û(k)`.
pub fn apply_i(p: &IMethodParams, f: &SpectralField) -> SpectralField {
    m_symbol(p, *f.lattice()).apply(f).expect("same lattice")
}

/// `E¹(u) = E(Iu)`.
pub fn first_energy(p: &IMethodParams, f: &SpectralField) -> f64 {
    energy(&apply_i(p, f))
}

/// Returns `r = ‖If‖_{H^{s0+1−s}} / ‖f‖_{H^{s0}}` and `N^{1−s} / r`; the
/// smoothing property states both stay above a configuration-independent constant.
pub fn smoothing_check(p: &IMethodParams, f: &SpectralField, s0: f64) -> Result<(f64, f64)> {
    let base = f.sobolev_norm(s0);
    if base == 0.0 {
        return domain("smoothing ratio of the zero field is undefined");
    }
    let lifted = apply_i(p, f).sobolev_norm(s0 + 1.0 - p.s);
    let r = lifted / base;
    Ok((r, p.n.powf(1.0 - p.s) / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random;
    use crate::lattice::FrequencyIndex;
    use num_complex::Complex64;

    #[test]
    fn symbol_examples() {
        let p = IMethodParams::new(8.0, 0.5).unwrap();
        assert_eq!(p.m(4.0), 1.0);
        assert!((p.m(32.0) - 0.5).abs() < 1e-15);
        let one = IMethodParams::new(8.0, 1.0).unwrap();
        assert_eq!(one.m(1000.0), 1.0);
        assert!(IMethodParams::new(0.5, 0.5).is_err());
        assert!(IMethodParams::new(4.0, 0.0).is_err());
    }

    #[test]
    fn symbol_is_radial_and_monotone() {
        let l = TorusLattice::new(2, 1.0, 32).unwrap();
        let p = IMethodParams::new(4.0, 0.3).unwrap();
        let m = m_symbol(&p, l);
        assert_eq!(m.value(FrequencyIndex::new2(3, 4)), m.value(FrequencyIndex::new2(5, 0)));
        assert_eq!(m.value(FrequencyIndex::new2(-4, 3)), m.value(FrequencyIndex::new2(0, -5)));
        let mut prev = 2.0;
        for j in 0..16 {
            let v = m.value(FrequencyIndex::new2(j, 0));
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn operator_examples() {
        let l = TorusLattice::new(1, 1.0, 128).unwrap();
        let p = IMethodParams::new(8.0, 0.5).unwrap();
        let low = random::band(l, 7.0, 1.0, 3);
        assert_eq!(apply_i(&p, &low), low);
        assert_eq!(first_energy(&p, &low), energy(&low));
        assert_eq!(first_energy(&p, &SpectralField::zeros(l)), 0.0);
        let n = FrequencyIndex::new1(32);
        let pm = SpectralField::point_mass(l, n, Complex64::new(2.0, 0.0)).unwrap();
        assert!((apply_i(&p, &pm).coeff(n).re - 1.0).abs() < 1e-15);
        let rough = random::hs_profile(l, 0.5, 1.0, 4);
        assert!(apply_i(&p, &rough).sobolev_norm(1.0).is_finite());
        assert!(apply_i(&p, &rough).gradient_norm_sq() <= rough.gradient_norm_sq());
    }

    #[test]
    fn smoothing_examples() {
        let l = TorusLattice::new(1, 1.0, 128).unwrap();
        let p = IMethodParams::new(8.0, 0.5).unwrap();
        let n = FrequencyIndex::new1(32);
        let pm = SpectralField::point_mass(l, n, Complex64::new(1.0, 0.0)).unwrap();
        let (r, _) = smoothing_check(&p, &pm, 0.3).unwrap();
        let target = 8f64.powf(0.5);
        assert!(r / target > 0.5 && r / target < 2.0);
        assert!(smoothing_check(&p, &SpectralField::zeros(l), 0.3).is_err());
        let one = IMethodParams::new(8.0, 1.0).unwrap();
        let f = random::hs_profile(l, 0.4, 1.0, 2);
        let (a, b) = smoothing_check(&one, &f, 0.4).unwrap();
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn commutes_with_free_flow() {
        let l = TorusLattice::new(2, 2.0, 16).unwrap();
        let p = IMethodParams::new(1.5, 0.6).unwrap();
        let f = random::hs_profile(l, 0.6, 1.0, 1);
        let a = apply_i(&p, &f.propagate_linear(0.3));
        let b = apply_i(&p, &f).propagate_linear(0.3);
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-14);
    }
}
