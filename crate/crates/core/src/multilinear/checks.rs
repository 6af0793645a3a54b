//! Numerical checks of the differentiation law, the increment identity for
//! `E²` and the two-term decomposition of the `E¹` increment in 2D, all along
//! solver trajectories.

use super::energy::energy_rate;
use super::energy::second_energy;
use super::{lambda_slots, Band, MultilinearSymbol};
use crate::error::{domain, Result};
use crate::field::{SpaceTimeField, SpectralField};
use crate::imethod::{apply_i, first_energy, IMethodParams};
use crate::lattice::FrequencyIndex;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DifferentiationReport {
    pub times: Vec<f64>,
    /// Fourth-order centered difference of `Λ_n(M; u(t))`.
    pub finite_difference: Vec<Complex64>,
    /// Right side of the differentiation law.
    pub predicted: Vec<Complex64>,
    pub max_abs_error: f64,
    /// `max |difference − predicted| / max |predicted|`.
    pub max_rel_error: f64,
}

fn nonlinear_power(dim: usize) -> u32 {
    if dim == 1 {
        4
    } else {
        2
    }
}

/// Compares `d/dt Λ_n(M; u)` (centered differences over recorded frames)
/// with `iΛ_n(M Σ(−1)^j ξ_j²) + i Σ_j (−1)^j Λ_n(M; …, N_j, …)`, where slot `j`
/// carries the band projection of the nonlinearity (`|u|^{4/d}u` in odd slots,
/// its conjugate in even ones). The second group is the elongated form
/// `Λ_{n+4}(X_j^4(M))` (`Λ_{n+2}(X_j^2(M))` in 2D) contracted along the merged block. Pass
/// `nonlinear = false` for free trajectories.
pub fn differentiation_check(
    m: &MultilinearSymbol,
    trajectory: &SpaceTimeField,
    nonlinear: bool,
) -> Result<DifferentiationReport> {
    let frames = trajectory.frames();
    if frames.len() < 5 {
        return domain("differentiation check needs at least five frames");
    }
    let l = *trajectory.lattice();
    let band = Band::new(l);
    let n = m.arity();
    let xi_sq = 4.0 * PI * PI / (l.lambda() * l.lambda());
    let inner = m.clone();
    let dispersive = MultilinearSymbol::new(n, move |k| {
        let w: f64 = k
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let v = xi_sq * q.norm_sq() as f64;
                // 1-based (−1)^j
                if j % 2 == 0 {
                    -v
                } else {
                    v
                }
            })
            .sum();
        Some(inner.eval(k)? * w)
    })?;
    let lam = |f: &SpectralField| -> Result<Complex64> {
        Ok(lambda_slots(&band, m, &band.alternating(f, n))?.value)
    };
    let i = Complex64::new(0.0, 1.0);
    let mut report = DifferentiationReport::default();
    let values: Vec<Complex64> = frames.iter().map(lam).collect::<Result<_>>()?;
    for t in 2..frames.len() - 2 {
        let u = &frames[t];
        // fourth-order centered stencil
        let fd = (values[t - 2] - values[t + 2] + 8.0 * (values[t + 1] - values[t - 1])) / (12.0 * trajectory.dt());
        let slots = band.alternating(u, n);
        let mut rhs = i * lambda_slots(&band, &dispersive, &slots)?.value;
        if nonlinear {
            let wide = u.power_nonlinearity(nonlinear_power(l.dim()));
            let (np, nc) = (band.plain(&wide), band.conjugated(&wide));
            for j in 0..n {
                let mut s = slots.clone();
                s[j] = if j % 2 == 0 { np.clone() } else { nc.clone() };
                let v = lambda_slots(&band, m, &s)?.value;
                rhs += if j % 2 == 0 { -i * v } else { i * v };
            }
        }
        report.times.push(trajectory.time(t));
        report.finite_difference.push(fd);
        report.predicted.push(rhs);
    }
    let scale = report.predicted.iter().map(|v| v.norm()).fold(0.0, f64::max);
    report.max_abs_error = report
        .finite_difference
        .iter()
        .zip(&report.predicted)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.max_rel_error = if scale > 0.0 { report.max_abs_error / scale } else { report.max_abs_error };
    Ok(report)
}

fn frame_at(trajectory: &SpaceTimeField, t: f64) -> Result<usize> {
    let x = (t - trajectory.t0()) / trajectory.dt();
    let i = x.round();
    if (x - i).abs() > 1e-6 || i < 0.0 || i as usize >= trajectory.len() {
        return domain(format!("time {t} is not a recorded frame"));
    }
    Ok(i as usize)
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IncrementReport {
    pub e2_start: f64,
    pub e2_end: f64,
    /// `E²(u(T+δ)) − E²(u(T))`.
    pub lhs: f64,
    /// `∫ Re(−iΛ₁₀(M10; u)) dt`.
    pub ten_wave: f64,
    /// `∫ Re((i/6)Λ₆(numerator · 1_excluded)) dt`.
    pub resonant: f64,
    pub rhs: f64,
    pub abs_discrepancy: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub rel_discrepancy: f64,
    /// Largest `|Im|` of the integrand relative to its modulus.
    pub imag_residue: f64,
    pub quadrature_nodes: usize,
}

/// Increment identity for `E²` over `[T, T+δ]`: the difference of `E²` at the
/// two end frames against the trapezoid integral of the ten-wave form (plus the
/// resonant remainder) over every recorded frame in between.
pub fn increment_check(p: &IMethodParams, trajectory: &SpaceTimeField, t: f64, delta: f64) -> Result<IncrementReport> {
    if trajectory.lattice().dim() != 1 {
        return domain("increment check is defined for the one-dimensional problem");
    }
    if delta < 0.0 {
        return domain("δ must be nonnegative");
    }
    let i0 = frame_at(trajectory, t)?;
    let i1 = frame_at(trajectory, t + delta)?;
    let frames = &trajectory.frames()[i0..=i1];
    let e2_start = second_energy(p, &frames[0])?.value;
    let e2_end = second_energy(p, &frames[frames.len() - 1])?.value;
    let mut ten = Vec::with_capacity(frames.len());
    let mut res = Vec::with_capacity(frames.len());
    let mut imag_residue: f64 = 0.0;
    if i1 > i0 {
        for f in frames {
            let (a, b) = energy_rate(p, f)?;
            let total = a + b;
            if total.norm() > 0.0 {
                imag_residue = imag_residue.max(total.im.abs() / total.norm());
            }
            ten.push(a.re);
            res.push(b.re);
        }
    }
    let h = trajectory.dt();
    let ten_wave = trapezoid(&ten, h);
    let resonant = trapezoid(&res, h);
    let lhs = e2_end - e2_start;
    let rhs = ten_wave + resonant;
    let abs = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    Ok(IncrementReport {
        e2_start,
        e2_end,
        lhs,
        ten_wave,
        resonant,
        rhs,
        abs_discrepancy: abs,
        rel_discrepancy: if scale > 0.0 { abs / scale } else { 0.0 },
        imag_residue,
        quadrature_nodes: frames.len(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrReport {
    /// Dispersive contribution.
    pub tr1: f64,
    /// Nonlinear contribution, exact over the band.
    pub tr2: f64,
    /// Monte Carlo estimate of the nonlinear contribution as a six-wave form.
    pub tr2_sampled: f64,
    pub tr2_std_error: f64,
    /// `E¹(u(t)) − E¹(u(0))`.
    pub direct: f64,
    /// `|Tr₁ + Tr₂ − direct| / |direct|`.
    pub rel_error: f64,
}

/// Decomposition of `E¹(u(t)) − E¹(u(0))` for the 2D cubic problem. Along the
/// band-projected flow, with `v = Iu` and `w = v_t`,
/// `d/dt E¹ = Re λ^{-3d} Σ_{Γ₄} σ · conj(ŵ(−k₁)) v̂(k₂) conj(v̂(−k₃)) v̂(k₄)`
/// with `σ = 1 − m(k₂+k₃+k₄) / (m₂m₃m₄)`. The linear part of `w` gives `Tr₁`, the
/// nonlinear part `Tr₂`; both are integrated over the recorded frames.
/// `draws` controls the sampled six-wave estimate of `Tr₂`.
pub fn tr_decomposition_2d(
    p: &IMethodParams,
    trajectory: &SpaceTimeField,
    t: f64,
    draws: usize,
    seed: u64,
) -> Result<TrReport> {
    let l = *trajectory.lattice();
    if l.dim() != 2 {
        return domain("the decomposition check is defined for the two-dimensional problem");
    }
    let i1 = frame_at(trajectory, t)?;
    let i0 = frame_at(trajectory, trajectory.t0())?;
    let frames = &trajectory.frames()[i0..=i1];
    let band = Band::new(l);
    let m: Vec<f64> = band.indices().iter().map(|&n| p.m(l.k_abs(n))).collect();
    let xi_sq: Vec<f64> = band.indices().iter().map(|&n| 4.0 * PI * PI * l.k_sq(n)).collect();
    let scale = l.measure().powi(3);
    let i = Complex64::new(0.0, 1.0);
    let mut r1 = Vec::with_capacity(frames.len());
    let mut r2 = Vec::with_capacity(frames.len());
    for u in frames {
        let v = apply_i(p, u);
        let (vp, vc) = (band.plain(&v), band.conjugated(&v));
        let wide = u.power_nonlinearity(2);
        let nc = band.conjugated(&wide);
        let a1: Vec<Complex64> = (0..band.len()).map(|q| i * xi_sq[q] * vc[q]).collect();
        let a2: Vec<Complex64> = (0..band.len()).map(|q| i * m[q] * nc[q]).collect();
        let (s1, s2) = band.fold_exhaustive(
            4,
            || (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            |acc, pos, _| {
                let sigma = 1.0 - m[pos[0]] / (m[pos[1]] * m[pos[2]] * m[pos[3]]);
                if sigma == 0.0 {
                    return;
                }
                let rest = vp[pos[1]] * vc[pos[2]] * vp[pos[3]] * sigma;
                acc.0 += a1[pos[0]] * rest;
                acc.1 += a2[pos[0]] * rest;
            },
            |x, y| (x.0 + y.0, x.1 + y.1),
        )?;
        r1.push((s1 * scale).re);
        r2.push((s2 * scale).re);
    }
    let h = trajectory.dt();
    let tr1 = trapezoid(&r1, h);
    let tr2 = trapezoid(&r2, h);
    let (tr2_sampled, tr2_std_error) = sampled_tr2(p, frames, &band, h, draws, seed);
    let direct = first_energy(p, &frames[frames.len() - 1]) - first_energy(p, &frames[0]);
    let err = (tr1 + tr2 - direct).abs();
    Ok(TrReport {
        tr1,
        tr2,
        tr2_sampled,
        tr2_std_error,
        direct,
        rel_error: if direct != 0.0 { err / direct.abs() } else { err },
    })
}

/// `Tr₂ = ∫ Re λ^{-5d} Σ_{Γ₆} i m(a+b+c) σ(k₂,k₃,k₄) ū^(a) û(b) ū^(c) v̂(k₂) v̄^(k₃) v̂(k₄) dt`,
/// estimated by drawing a frame (with trapezoid weights) and a uniform tuple.
fn sampled_tr2(
    p: &IMethodParams,
    frames: &[SpectralField],
    band: &Band,
    h: f64,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    if draws == 0 || frames.len() < 2 {
        return (0.0, 0.0);
    }
    let l = *band.lattice();
    let weights: Vec<f64> = (0..frames.len())
        .map(|q| if q == 0 || q == frames.len() - 1 { 0.5 * h } else { h })
        .collect();
    let total_weight: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bl = band.len();
    let volume = (bl as f64).powi(5) * l.measure().powi(5) * total_weight;
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mv = |n: FrequencyIndex| p.m(l.k_abs(n));
    // per-frame data is rebuilt lazily as draws land on frames
    let mut cache: Vec<Option<(SpectralField, SpectralField)>> = vec![None; frames.len()];
    for _ in 0..draws {
        let r = rng.gen_range(0.0..total_weight);
        let fi = cumulative.partition_point(|&c| c < r).min(frames.len() - 1);
        let mut k = [FrequencyIndex::ZERO; 6];
        let mut s = FrequencyIndex::ZERO;
        for slot in k.iter_mut().take(5) {
            *slot = band.index(rng.gen_range(0..bl));
            s = s + *slot;
        }
        if band.position(-s).is_none() {
            continue;
        }
        k[5] = -s;
        let k1 = k[0] + k[1] + k[2];
        if band.position(k1).is_none() {
            continue;
        }
        let (u, v) = cache[fi].get_or_insert_with(|| (frames[fi].clone(), apply_i(p, &frames[fi])));
        let sigma = 1.0 - mv(k1) / (mv(k[3]) * mv(k[4]) * mv(k[5]));
        let val = Complex64::new(0.0, mv(k1) * sigma)
            * u.conj_coeff(k[0])
            * u.coeff(k[1])
            * u.conj_coeff(k[2])
            * v.coeff(k[3])
            * v.conj_coeff(k[4])
            * v.coeff(k[5]);
        sum += val.re;
        sq += val.re * val.re;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    (mean * volume, (var / n).sqrt() * volume)
}
