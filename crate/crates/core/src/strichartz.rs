//! Empirical linear and bilinear Strichartz estimates on `T^d_λ`.
//!
//! The bilinear quantity `B = ‖η U(t)φ₁ · η U(t)φ₂‖_{L²_{t,x}}` is evaluated in
//! frequency: for each output frequency `k` the pairs `(k₁, k₂)`, `k₁ + k₂ = k`,
//! interact through `H(ν) = ∫ η(t)⁴ e^{−iνt} dt` evaluated at the difference of
//! their phases `Ω = 4π²(|k₁|² + |k₂|²)`, so
//! `B² = λ^{−3d} Σ_k Σ_{p,p'} c_p c̄_{p'} H(Ω_p − Ω_{p'})`.
//! The time integral is done once, in `H`, by quadrature on a fine grid.

use crate::counting::{max_count_1d, max_count_2d};
use crate::error::{domain, Result};
use crate::field::{bump, fft_nd, SpaceTimeField, SpectralField};
use crate::lattice::{FrequencyIndex, TorusLattice};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Phase differences beyond this are dropped; `|H(ν)| / H(0) < 10⁻⁶` there.
pub const PHASE_CUTOFF: f64 = 200.0;

struct WindowTransform {
    step: f64,
    values: Vec<f64>,
}

fn window_transform() -> &'static WindowTransform {
    static TABLE: OnceLock<WindowTransform> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / 512.0;
        let len = 1usize << 21;
        let half = (2.0 / h) as i64;
        let mut data = vec![Complex64::new(0.0, 0.0); len];
        for j in -half..=half {
            let slot = j.rem_euclid(len as i64) as usize;
            data[slot] = Complex64::new(bump(j as f64 * h).powi(4), 0.0);
        }
        fft_nd(&mut data, len, 1, FftDirection::Forward);
        let step = 2.0 * PI / (len as f64 * h);
        let count = (PHASE_CUTOFF / step).ceil() as usize + 2;
        WindowTransform { step, values: data[..count].iter().map(|c| c.re * h).collect() }
    })
}

/// `H(ν) = ∫ η(t)⁴ e^{−iνt} dt` (real and even); zero beyond [`PHASE_CUTOFF`].
pub fn window_transform_at(nu: f64) -> f64 {
    let t = window_transform();
    let x = nu.abs() / t.step;
    let i = x.floor() as usize;
    if i + 1 >= t.values.len() {
        return 0.0;
    }
    let f = x - i as f64;
    t.values[i] * (1.0 - f) + t.values[i + 1] * f
}

/// `Σ_j max_{ν ∈ [(2j−1)W, (2j+1)W]} |H(ν)|` with `W = 4π²w`: the row-sum
/// factor that turns a count of phases per window of half-width `w` into a
/// bound on the interaction matrix.
pub fn window_row_sum(w: f64) -> f64 {
    let big_w = 4.0 * PI * PI * w;
    let t = window_transform();
    let mut total = 0.0;
    let mut j: i64 = 0;
    loop {
        let lo = ((2 * j - 1) as f64 * big_w).max(0.0);
        let hi = (2 * j + 1) as f64 * big_w;
        if lo > PHASE_CUTOFF {
            break;
        }
        let (a, b) = ((lo / t.step).floor() as usize, ((hi / t.step).ceil() as usize).min(t.values.len() - 1));
        let m = t.values[a.min(t.values.len() - 1)..=b].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        total += if j == 0 { m } else { 2.0 * m };
        j += 1;
    }
    total
}

/// `N/2 ≤ |k| ≤ 2N`.
pub fn in_annulus(k_abs: f64, n: f64) -> bool {
    2.0 * k_abs >= n && k_abs <= 2.0 * n
}

/// Coefficient pattern of annulus-localized test data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AnnulusSpectrum {
    /// Uniform random phases, magnitudes uniform in `[0.5, 1]`.
    Random,
    /// Random positive magnitudes, zero phases.
    Positive,
    /// All coefficients equal to one (phases aligned at `t = 0`).
    Aligned,
}

/// Smallest even grid whose band contains the annulus `|k| ≤ 2N` on period `λ`.
pub fn annulus_lattice(dim: usize, lambda: f64, n: f64) -> Result<TorusLattice> {
    let reach = (2.0 * n * lambda).floor() as usize;
    TorusLattice::new(dim, lambda, 2 * reach + 2)
}

/// Unit-`L²` field supported on `N/2 ≤ |k| ≤ 2N`.
pub fn annulus_field(l: TorusLattice, n: f64, kind: AnnulusSpectrum, seed: u64) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut any = false;
    let f = SpectralField::from_fn(l, |idx| {
        if !(l.in_band(idx) && in_annulus(l.k_abs(idx), n)) {
            return Complex64::new(0.0, 0.0);
        }
        any = true;
        match kind {
            AnnulusSpectrum::Random => {
                Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI))
            }
            AnnulusSpectrum::Positive => Complex64::new(rng.gen_range(0.5..1.0), 0.0),
            AnnulusSpectrum::Aligned => Complex64::new(1.0, 0.0),
        }
    });
    if !any {
        return domain(format!("the annulus |k| ∼ {n} misses the band of {l:?}"));
    }
    let norm = f.l2_norm();
    Ok(f.scaled(Complex64::new(1.0 / norm, 0.0)))
}

pub fn random_annulus_field(l: TorusLattice, n: f64, seed: u64) -> Result<SpectralField> {
    annulus_field(l, n, AnnulusSpectrum::Random, seed)
}

fn support(f: &SpectralField) -> Vec<(FrequencyIndex, Complex64)> {
    let l = f.lattice();
    (0..l.points())
        .filter_map(|s| {
            let c = f.coeffs()[s];
            (c.norm_sqr() > 0.0).then(|| (l.index_at(s), c))
        })
        .collect()
}

/// `B = ‖η U(t)φ₁ · η U(t)φ₂‖_{L²_{t,x}}`.
pub fn bilinear_norm(phi1: &SpectralField, phi2: &SpectralField) -> Result<f64> {
    let l = *phi1.lattice();
    if *phi2.lattice() != l {
        return domain("fields live on different lattices");
    }
    let s1 = support(phi1);
    let s2 = support(phi2);
    if s1.is_empty() || s2.is_empty() {
        return Ok(0.0);
    }
    let dim = l.dim();
    let lo = |s: &[(FrequencyIndex, Complex64)], a: usize| s.iter().map(|p| p.0 .0[a]).min().unwrap();
    let hi = |s: &[(FrequencyIndex, Complex64)], a: usize| s.iter().map(|p| p.0 .0[a]).max().unwrap();
    let range: Vec<(i64, i64)> = (0..dim).map(|a| (lo(&s1, a) + lo(&s2, a), hi(&s1, a) + hi(&s2, a))).collect();
    let ks: Vec<FrequencyIndex> = if dim == 1 {
        (range[0].0..=range[0].1).map(FrequencyIndex::new1).collect()
    } else {
        (range[0].0..=range[0].1)
            .flat_map(|a| (range[1].0..=range[1].1).map(move |b| FrequencyIndex::new2(a, b)))
            .collect()
    };
    // phases are 4π²/λ² times the integer level |n₁|² + |n₂|², so pairs are
    // binned by level and only distinct levels interact
    let unit = 4.0 * PI * PI / (l.lambda() * l.lambda());
    let reach = (PHASE_CUTOFF / unit).floor() as usize;
    let h: Vec<f64> = (0..=reach).map(|d| window_transform_at(d as f64 * unit)).collect();
    let total: f64 = ks
        .par_iter()
        .map_init(Vec::new, |pairs: &mut Vec<(i64, Complex64)>, &k| {
            pairs.clear();
            for &(n2, b) in &s2 {
                let n1 = k - n2;
                if !l.in_band(n1) {
                    continue;
                }
                let a = phi1.coeff(n1);
                if a.norm_sqr() > 0.0 {
                    pairs.push((n1.norm_sq() + n2.norm_sq(), a * b));
                }
            }
            if pairs.is_empty() {
                return 0.0;
            }
            pairs.sort_unstable_by_key(|p| p.0);
            let mut w = 0;
            for r in 1..pairs.len() {
                if pairs[r].0 == pairs[w].0 {
                    let c = pairs[r].1;
                    pairs[w].1 += c;
                } else {
                    w += 1;
                    pairs[w] = pairs[r];
                }
            }
            pairs.truncate(w + 1);
            let mut acc = 0.0;
            for p in 0..pairs.len() {
                acc += pairs[p].1.norm_sqr() * h[0];
                for q in p + 1..pairs.len() {
                    let gap = (pairs[q].0 - pairs[p].0) as usize;
                    if gap > reach {
                        break;
                    }
                    acc += 2.0 * (pairs[p].1 * pairs[q].1.conj()).re * h[gap];
                }
            }
            acc
        })
        .sum();
    Ok((total.max(0.0) * l.measure().powi(3)).sqrt())
}

/// Constant `C` that the bilinear estimate is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BilinearConstant {
    /// 1D: `(1/N₁ + 1/λ)^{1/2}` for `N₁ > 1`, else 1.
    OneD,
    /// 2D, any period: `(λN₂)^ε`.
    TwoDAnyPeriod { eps: f64 },
    /// 2D, large period: `(1/λ + N₂/N₁)^{1/2}`.
    TwoDLargePeriod,
}

impl BilinearConstant {
    pub fn value(&self, lambda: f64, n1: f64, n2: f64) -> f64 {
        match *self {
            BilinearConstant::OneD => {
                if n1 <= 1.0 {
                    1.0
                } else {
                    (1.0 / n1 + 1.0 / lambda).sqrt()
                }
            }
            BilinearConstant::TwoDAnyPeriod { eps } => (lambda * n2).powf(eps),
            BilinearConstant::TwoDLargePeriod => (1.0 / lambda + n2 / n1).sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BilinearConstant::OneD => 1,
            _ => 2,
        }
    }
}

/// Worst case of `B` over random trials plus one aligned-phase trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearTrial {
    pub d: usize,
    pub lambda: f64,
    pub n1: f64,
    pub n2: f64,
    /// Random trials; the aligned trial comes on top.
    pub trials: usize,
    pub b_max: f64,
    /// `B` of the aligned trial.
    pub b_aligned: f64,
    pub reference: f64,
    pub constant: f64,
    pub ratio: f64,
}

/// Estimated pair count `#supp φ₁ · #supp φ₂` of one trial.
pub fn trial_pairs(dim: usize, lambda: f64, n1: f64, n2: f64) -> f64 {
    let count = |n: f64| {
        let (a, b) = (0.5 * n * lambda, 2.0 * n * lambda);
        if dim == 1 {
            2.0 * (b - a + 1.0)
        } else {
            PI * (b * b - a * a) + 2.0 * PI * b
        }
    };
    count(n1) * count(n2)
}

/// Measures `B / (C·‖φ₁‖‖φ₂‖)`. Comparable frequencies (`N₁ < 4N₂`) are
/// admitted so the separation hypothesis can be probed.
pub fn bilinear_trial(
    constant: BilinearConstant,
    lambda: f64,
    n1: f64,
    n2: f64,
    trials: usize,
    seed: u64,
) -> Result<BilinearTrial> {
    let dim = constant.dim();
    if !(lambda >= 1.0) {
        return domain(format!("λ must be at least 1, got {lambda}"));
    }
    if !(n1 > 0.0 && n2 > 0.0 && n1 >= n2) {
        return domain(format!("need N₁ ≥ N₂ > 0, got N₁ = {n1}, N₂ = {n2}"));
    }
    let l = annulus_lattice(dim, lambda, n1)?;
    let run = |kind: AnnulusSpectrum, s: u64| -> Result<(f64, f64)> {
        let p1 = annulus_field(l, n1, kind, s)?;
        let p2 = annulus_field(l, n2, kind, s ^ 0x9e37_79b9_7f4a_7c15)?;
        Ok((bilinear_norm(&p1, &p2)?, p1.l2_norm() * p2.l2_norm()))
    };
    let random: Vec<(f64, f64)> = (0..trials as u64)
        .map(|t| run(AnnulusSpectrum::Random, seed.wrapping_add(t)))
        .collect::<Result<_>>()?;
    let (b_aligned, ref_aligned) = run(AnnulusSpectrum::Aligned, seed)?;
    let reference = random.iter().map(|r| r.1).fold(ref_aligned, f64::max);
    let b_max = random.iter().map(|r| r.0).fold(b_aligned, f64::max);
    let c = constant.value(lambda, n1, n2);
    Ok(BilinearTrial {
        d: dim,
        lambda,
        n1,
        n2,
        trials,
        b_max,
        b_aligned,
        reference,
        constant: c,
        ratio: b_max / (c * reference),
    })
}

/// `B / (C·‖φ₁‖‖φ₂‖)` of a measured trial.
pub fn bilinear_ratio(trial: &BilinearTrial) -> f64 {
    trial.ratio
}

/// Bound on `B / (‖φ₁‖‖φ₂‖)` from the counting route:
/// `(κ(w) · λ^{−d} · sup_{k,τ} #S)^{1/2}` with `κ` from [`window_row_sum`].
/// Requires integer `λ`, `N₁`, `N₂` in 1D.
pub fn counting_bound(dim: usize, lambda: i64, n1: f64, n2: f64, w: f64) -> Result<f64> {
    let count = if dim == 1 {
        max_count_1d(lambda, n1 as i64, n2 as i64, w)?.count
    } else {
        max_count_2d(lambda, n1, n2, w)?.count
    };
    Ok((window_row_sum(w) * count as f64 / (lambda as f64).powi(dim as i32)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearRatio {
    pub p: f64,
    pub s_weight: f64,
    pub b: f64,
    pub lambda: f64,
    pub max_ratio: f64,
    pub frames: usize,
}

/// Frame count resolving the time oscillation of `|U(t)φ|^p` on `l`.
fn frames_for(l: &TorusLattice, p: f64) -> usize {
    let kmax = l.band_max() as f64 / l.lambda() * (l.dim() as f64).sqrt();
    let omega = 4.0 * PI * PI * kmax * kmax;
    let rate = 0.5 * p * omega + 60.0;
    let need = (2.0 * 4.0 * rate / PI).ceil() as usize;
    need.max(128).next_power_of_two()
}

/// Largest `‖ηU(t)φ‖_{L^p_{t,x}} / ‖ηU(t)φ‖_{X^{s,b}}` over random band-limited `φ`.
pub fn linear_strichartz_ratio(l: TorusLattice, p: f64, s_weight: f64, b: f64, trials: usize, seed: u64) -> Result<LinearRatio> {
    let pmax = if l.dim() == 1 { 6.0 } else { 4.0 };
    if !(2.0..=pmax).contains(&p) {
        return domain(format!("p = {p} is outside [2, {pmax}] for d = {}", l.dim()));
    }
    let frames = frames_for(&l, p);
    let kmax = l.band_max() as f64 / l.lambda();
    let mut max_ratio: f64 = 0.0;
    for t in 0..trials.max(1) as u64 {
        let phi = crate::field::random::band(l, kmax, 1.0, seed.wrapping_add(t));
        let u = SpaceTimeField::windowed_free_evolution(&phi, frames)?;
        max_ratio = max_ratio.max(u.lp_spacetime_norm(p)? / u.xsb_norm(s_weight, b)?);
    }
    Ok(LinearRatio { p, s_weight, b, lambda: l.lambda(), max_ratio, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::bump_lp_norm;

    #[test]
    fn window_transform_matches_quadrature() {
        assert!((window_transform_at(0.0) - bump_lp_norm(4.0).powi(4)).abs() < 1e-9);
        let direct = |nu: f64| {
            let n = 40_000;
            let h = 4.0 / n as f64;
            (0..=n).map(|i| -2.0 + i as f64 * h).map(|t| bump(t).powi(4) * (nu * t).cos()).sum::<f64>() * h
        };
        for nu in [0.7, 3.0, 11.5, 40.0] {
            assert!((window_transform_at(nu) - direct(nu)).abs() < 1e-6, "{nu}");
        }
        assert!(window_transform_at(PHASE_CUTOFF).abs() < 1e-6 * window_transform_at(0.0));
    }

    #[test]
    fn annulus_data() {
        let l = annulus_lattice(1, 4.0, 8.0).unwrap();
        let f = random_annulus_field(l, 8.0, 1).unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        for s in 0..l.points() {
            let n = l.index_at(s);
            if !in_annulus(l.k_abs(n), 8.0) {
                assert_eq!(f.coeff(n), Complex64::new(0.0, 0.0));
            }
        }
        assert_eq!(f, random_annulus_field(l, 8.0, 1).unwrap());
        assert!(random_annulus_field(l, 1000.0, 1).is_err());
        let pos = annulus_field(l, 8.0, AnnulusSpectrum::Positive, 2).unwrap();
        assert!(pos.coeffs().iter().all(|c| c.re >= 0.0 && c.im == 0.0));
    }

    #[test]
    fn bilinear_matches_time_quadrature() {
        // direct ∫ η⁴ ‖u₁u₂‖² dt on a fine time grid
        let l = annulus_lattice(1, 2.0, 2.0).unwrap();
        let p1 = random_annulus_field(l, 2.0, 3).unwrap();
        let p2 = random_annulus_field(l, 0.5, 4).unwrap();
        let n = 200_000;
        let h = 4.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = -2.0 + i as f64 * h;
            let w = bump(t).powi(4);
            if w == 0.0 {
                continue;
            }
            let prod = p1.propagate_linear(t).product_exact(&p2.propagate_linear(t)).unwrap();
            acc += w * prod.l2_norm().powi(2) * h;
        }
        let b = bilinear_norm(&p1, &p2).unwrap();
        assert!((b - acc.sqrt()).abs() < 1e-6 * b, "{b} vs {}", acc.sqrt());
        assert_eq!(bilinear_norm(&p1, &SpectralField::zeros(l)).unwrap(), 0.0);
    }

    #[test]
    fn constants() {
        assert_eq!(BilinearConstant::OneD.value(8.0, 0.5, 0.1), 1.0);
        assert!((BilinearConstant::OneD.value(4.0, 4.0, 1.0) - (0.5f64).sqrt()).abs() < 1e-15);
        assert!((BilinearConstant::TwoDLargePeriod.value(8.0, 16.0, 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(BilinearConstant::TwoDAnyPeriod { eps: 0.1 }.value(1.0, 4.0, 1.0), 1.0);
    }

    #[test]
    fn small_frequency_branch_and_consistency() {
        let t = bilinear_trial(BilinearConstant::OneD, 8.0, 1.0, 0.25, 3, 7).unwrap();
        assert_eq!(t.constant, 1.0);
        assert!(t.ratio.is_finite() && t.ratio > 0.0);
        let t = bilinear_trial(BilinearConstant::OneD, 4.0, 8.0, 1.0, 5, 11).unwrap();
        let bound = counting_bound(1, 4, 8.0, 1.0, 1.0).unwrap();
        assert!(t.b_max <= bound * t.reference * (1.0 + 1e-6));
    }

    #[test]
    fn linear_ratio_at_p2_is_one() {
        let l = TorusLattice::new(1, 2.0, 16).unwrap();
        let r = linear_strichartz_ratio(l, 2.0, 0.0, 0.0, 2, 1).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-10);
        assert!(linear_strichartz_ratio(l, 7.0, 0.0, 0.5, 1, 1).is_err());
        let l2 = TorusLattice::new(2, 2.0, 8).unwrap();
        assert!(linear_strichartz_ratio(l2, 6.0, 0.0, 0.5, 1, 1).is_err());
    }
}
