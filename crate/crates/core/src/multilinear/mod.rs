//! Multilinear forms on the hyperplanes `Γ_n = {k_1 + … + k_n = 0}`.
//!
//! `Λ_n(M; f_1, …, f_n) = λ^{-d(n−1)} Σ_{Γ_n} M(k) Π f̂_j(k_j)`, the sum running
//! over the symmetric band. `Λ_n(M; f)` uses `f` in odd slots and `f̄` in even
//! slots, with `(f̄)^(k) = conj(f̂(−k))`. With this normalization
//! `Λ_n(1; f) = ∫ |f|^n`.

mod checks;
mod energy;

pub use checks::{
    differentiation_check, increment_check, tr_decomposition_2d, DifferentiationReport, IncrementReport,
    TrReport,
};
pub use energy::{
    energy_rate, m10_fast, m10_symbol, m10_symmetrized, m6_bound, m6_eval, m6_symbol, perturbation_gap, second_energy,
    second_energy_sampled, EnergyEstimate, M6Bound, M6Value, ResonanceEntry, ResonanceLog, ResonanceTag,
};

use crate::error::{domain, LabError, Result};
use crate::field::SpectralField;
use crate::lattice::{FrequencyIndex, TorusLattice};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Largest number of tuples an exhaustive sweep may visit.
pub const EXHAUSTIVE_BUDGET: u128 = 100_000_000;

type Evaluator = dyn Fn(&[FrequencyIndex]) -> Option<f64> + Send + Sync;

/// A real function of `n` frequency indices on `Γ_n`. `None` marks an
/// excluded point of the domain.
#[derive(Clone)]
pub struct MultilinearSymbol {
    arity: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for MultilinearSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultilinearSymbol(arity = {})", self.arity)
    }
}

impl MultilinearSymbol {
    pub fn new<F>(arity: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[FrequencyIndex]) -> Option<f64> + Send + Sync + 'static,
    {
        if arity < 2 || arity % 2 != 0 {
            return domain(format!("arity must be even and at least 2, got {arity}"));
        }
        Ok(MultilinearSymbol { arity, eval: Arc::new(eval) })
    }

    pub fn constant(arity: usize, value: f64) -> Result<Self> {
        MultilinearSymbol::new(arity, move |_| Some(value))
    }

    /// `Π_j a(k_j)` for a single-frequency factor `a`.
    pub fn product<F>(arity: usize, factor: F) -> Result<Self>
    where
        F: Fn(FrequencyIndex) -> f64 + Send + Sync + 'static,
    {
        MultilinearSymbol::new(arity, move |k| Some(k.iter().map(|&n| factor(n)).product()))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Value at a tuple; `None` for excluded points.
    pub fn eval(&self, tuple: &[FrequencyIndex]) -> Option<f64> {
        debug_assert_eq!(tuple.len(), self.arity);
        (self.eval)(tuple)
    }

    /// Pointwise product with another symbol of the same arity.
    pub fn times(&self, other: &MultilinearSymbol) -> Result<Self> {
        if other.arity != self.arity {
            return domain("arity mismatch in symbol product");
        }
        let (a, b) = (self.eval.clone(), other.eval.clone());
        MultilinearSymbol::new(self.arity, move |k| Some(a(k)? * b(k)?))
    }

    /// Linear combination `Σ c_i M_i` of symbols of one arity.
    pub fn combination(terms: Vec<(f64, MultilinearSymbol)>) -> Result<Self> {
        let Some(arity) = terms.first().map(|t| t.1.arity) else {
            return domain("empty combination");
        };
        if terms.iter().any(|t| t.1.arity != arity) {
            return domain("arity mismatch in symbol combination");
        }
        MultilinearSymbol::new(arity, move |k| {
            let mut acc = 0.0;
            for (c, m) in &terms {
                acc += c * m.eval(k)?;
            }
            Some(acc)
        })
    }
}

/// Elongation `X_j^l(M)`: argument `j` (1-based) is replaced by the sum of
/// arguments `j, …, j+l`, raising the arity by `l`.
pub fn elongate(m: &MultilinearSymbol, j: usize, l: usize) -> Result<MultilinearSymbol> {
    if j == 0 || j > m.arity {
        return domain(format!("slot {j} outside 1..={}", m.arity));
    }
    if l == 0 || l % 2 != 0 {
        return domain(format!("elongation length must be even and positive, got {l}"));
    }
    let inner = m.clone();
    let n = m.arity;
    MultilinearSymbol::new(n + l, move |k| {
        let mut args = Vec::with_capacity(n);
        args.extend_from_slice(&k[..j - 1]);
        args.push(k[j - 1..j + l].iter().copied().sum());
        args.extend_from_slice(&k[j + l..]);
        inner.eval(&args)
    })
}

/// The symmetric band of a lattice with O(1) position lookup.
#[derive(Clone, Debug)]
pub struct Band {
    lattice: TorusLattice,
    indices: Vec<FrequencyIndex>,
    half: i64,
}

impl Band {
    pub fn new(lattice: TorusLattice) -> Self {
        Band { indices: lattice.band_indices(), half: lattice.band_max(), lattice }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, pos: usize) -> FrequencyIndex {
        self.indices[pos]
    }

    pub fn indices(&self) -> &[FrequencyIndex] {
        &self.indices
    }

    pub fn position(&self, n: FrequencyIndex) -> Option<usize> {
        let b = self.half;
        let w = 2 * b + 1;
        if n.0[0].abs() > b {
            return None;
        }
        if self.lattice.dim() == 1 {
            return (n.0[1] == 0).then_some((n.0[0] + b) as usize);
        }
        if n.0[1].abs() > b {
            return None;
        }
        Some(((n.0[0] + b) * w + n.0[1] + b) as usize)
    }

    /// Coefficients of `f` on the band.
    pub fn plain(&self, f: &SpectralField) -> Vec<Complex64> {
        self.indices.iter().map(|&n| f.coeff(n)).collect()
    }

    /// Coefficients of `f̄` on the band.
    pub fn conjugated(&self, f: &SpectralField) -> Vec<Complex64> {
        self.indices.iter().map(|&n| f.conj_coeff(n)).collect()
    }

    /// Band arrays for the alternating pattern `f, f̄, f, …` of length `n`.
    pub fn alternating(&self, f: &SpectralField, n: usize) -> Vec<Vec<Complex64>> {
        let (p, c) = (self.plain(f), self.conjugated(f));
        (0..n).map(|j| if j % 2 == 0 { p.clone() } else { c.clone() }).collect()
    }

    /// Number of `Γ_n` tuples in the band, by iterated convolution of the band indicator.
    pub fn gamma_count(&self, n: usize) -> u128 {
        let dim = self.lattice.dim();
        let b = self.half;
        // counts of partial sums, offset by k·b per axis
        let mut span = 0i64;
        let mut counts: Vec<u128> = vec![1];
        let side = |span: i64| (2 * span + 1) as usize;
        for _ in 0..n - 1 {
            let new_span = span + b;
            let ns = side(new_span);
            let mut next = vec![0u128; ns.pow(dim as u32)];
            let os = side(span);
            for (i, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let (x, y) = if dim == 1 { (i as i64 - span, 0) } else { ((i / os) as i64 - span, (i % os) as i64 - span) };
                for &k in &self.indices {
                    let (sx, sy) = (x + k.0[0] + new_span, y + k.0[1] + new_span);
                    let idx = if dim == 1 { sx as usize } else { sx as usize * ns + sy as usize };
                    next[idx] += c;
                }
            }
            counts = next;
            span = new_span;
        }
        // the last index must cancel a sum that lies in the band
        let s = side(span);
        counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (x, y) = if dim == 1 { (*i as i64 - span, 0) } else { ((i / s) as i64 - span, (i % s) as i64 - span) };
                x.abs() <= b && y.abs() <= b
            })
            .map(|(_, &c)| c)
            .sum()
    }

    fn check_budget(&self, n: usize) -> Result<()> {
        let requested = (self.len() as u128).pow(n as u32 - 1);
        if requested > EXHAUSTIVE_BUDGET {
            return Err(LabError::Budget { requested, limit: EXHAUSTIVE_BUDGET });
        }
        Ok(())
    }

    /// Parallel fold over every `Γ_n` tuple of band positions. Work is split on
    /// the first one or two positions; partial results are combined in a fixed
    /// order so the outcome does not depend on scheduling.
    pub fn fold_exhaustive<T, I, F, C>(&self, n: usize, init: I, visit: F, combine: C) -> Result<T>
    where
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, &[usize], &[FrequencyIndex]) + Sync,
        C: Fn(T, T) -> T,
    {
        if n < 2 {
            return domain("arity must be at least 2");
        }
        self.check_budget(n)?;
        let bl = self.len();
        let split = if n >= 4 { 2 } else { 1 };
        let chunks = bl.pow(split as u32);
        let parts: Vec<T> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let mut pos = vec![0usize; n];
                let mut idx = vec![FrequencyIndex::ZERO; n];
                if split == 2 {
                    pos[0] = c / bl;
                    pos[1] = c % bl;
                } else {
                    pos[0] = c;
                }
                for s in 0..split {
                    idx[s] = self.indices[pos[s]];
                }
                let free = n - 1 - split;
                let mut odo = vec![0usize; free];
                loop {
                    let mut sum = FrequencyIndex::ZERO;
                    for s in 0..split {
                        sum = sum + idx[s];
                    }
                    for (f, &o) in odo.iter().enumerate() {
                        pos[split + f] = o;
                        idx[split + f] = self.indices[o];
                        sum = sum + idx[split + f];
                    }
                    if let Some(last) = self.position(-sum) {
                        pos[n - 1] = last;
                        idx[n - 1] = self.indices[last];
                        visit(&mut acc, &pos, &idx);
                    }
                    let mut f = 0;
                    loop {
                        if f == free {
                            return acc;
                        }
                        odo[f] += 1;
                        if odo[f] < bl {
                            break;
                        }
                        odo[f] = 0;
                        f += 1;
                    }
                }
            })
            .collect();
        let mut it = parts.into_iter();
        let first = it.next().expect("band is nonempty");
        Ok(it.fold(first, combine))
    }

    /// Uniform sample of `Γ_n` by rejection: the first `n−1` positions are drawn
    /// uniformly and the tuple is kept when the closing index lies in the band.
    /// Returns the accepted tuples (as positions) and the number of draws.
    pub fn sample(&self, n: usize, draws: usize, seed: u64) -> (Vec<Vec<usize>>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for _ in 0..draws {
            let mut pos = Vec::with_capacity(n);
            let mut sum = FrequencyIndex::ZERO;
            for _ in 0..n - 1 {
                let p = rng.gen_range(0..self.len());
                sum = sum + self.indices[p];
                pos.push(p);
            }
            if let Some(last) = self.position(-sum) {
                pos.push(last);
                out.push(pos);
            }
        }
        (out, draws)
    }
}

/// How `Γ_n` is traversed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaMode {
    Exhaustive,
    Sample { draws: usize, seed: u64 },
}

/// Tuples of `Γ_n` on the band, as a stream. Exhaustive mode refuses when the
/// sweep would exceed [`EXHAUSTIVE_BUDGET`].
pub fn gamma_n_enumerate(
    l: TorusLattice,
    n: usize,
    mode: GammaMode,
) -> Result<Box<dyn Iterator<Item = Vec<FrequencyIndex>>>> {
    if n < 2 {
        return domain("arity must be at least 2");
    }
    let band = Band::new(l);
    match mode {
        GammaMode::Exhaustive => {
            band.check_budget(n)?;
            let bl = band.len();
            let mut odo = vec![0usize; n - 1];
            let mut done = false;
            Ok(Box::new(std::iter::from_fn(move || loop {
                if done {
                    return None;
                }
                let tuple: Vec<FrequencyIndex> = odo.iter().map(|&p| band.index(p)).collect();
                let mut f = n - 2;
                loop {
                    odo[f] += 1;
                    if odo[f] < bl {
                        break;
                    }
                    odo[f] = 0;
                    if f == 0 {
                        done = true;
                        break;
                    }
                    f -= 1;
                }
                let sum: FrequencyIndex = tuple.iter().copied().sum();
                if band.position(-sum).is_some() {
                    let mut t = tuple;
                    t.push(-sum);
                    return Some(t);
                }
            })))
        }
        GammaMode::Sample { draws, seed } => {
            let (tuples, _) = band.sample(n, draws, seed);
            Ok(Box::new(tuples.into_iter().map(move |p| p.iter().map(|&q| band.index(q)).collect())))
        }
    }
}

/// Result of a `Γ_n` sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GammaSum {
    pub value: Complex64,
    /// Tuples where the symbol was excluded and skipped.
    pub excluded: u64,
    /// Standard error of a sampled estimate, zero when exhaustive.
    pub std_error: f64,
}

impl GammaSum {
    fn merge(self, other: GammaSum) -> GammaSum {
        GammaSum {
            value: self.value + other.value,
            excluded: self.excluded + other.excluded,
            std_error: (self.std_error.powi(2) + other.std_error.powi(2)).sqrt(),
        }
    }
}

/// `Λ_n(M; f_1, …, f_n)` with slots given as band arrays (see [`Band::plain`],
/// [`Band::conjugated`]).
pub fn lambda_slots(band: &Band, symbol: &MultilinearSymbol, slots: &[Vec<Complex64>]) -> Result<GammaSum> {
    let n = symbol.arity();
    if slots.len() != n || slots.iter().any(|s| s.len() != band.len()) {
        return domain("slot arrays do not match the symbol arity or the band");
    }
    let scale = band.lattice().measure().powi(n as i32 - 1);
    let sum = band.fold_exhaustive(
        n,
        GammaSum::default,
        |acc, pos, idx| {
            let mut prod = slots[0][pos[0]];
            for j in 1..n {
                prod *= slots[j][pos[j]];
            }
            if prod == Complex64::new(0.0, 0.0) {
                return;
            }
            match symbol.eval(idx) {
                Some(v) => acc.value += prod * v,
                None => acc.excluded += 1,
            }
        },
        GammaSum::merge,
    )?;
    Ok(GammaSum { value: sum.value * scale, ..sum })
}

/// `Λ_n(M; f) = Λ_n(M; f, f̄, …, f, f̄)`, exhaustive over the band.
pub fn lambda_n(symbol: &MultilinearSymbol, f: &SpectralField) -> Result<GammaSum> {
    let band = Band::new(*f.lattice());
    let slots = band.alternating(f, symbol.arity());
    lambda_slots(&band, symbol, &slots)
}

/// Monte Carlo estimate of `Λ_n(M; f)` from `draws` uniform draws of the first
/// `n − 1` band positions.
pub fn lambda_n_sampled(symbol: &MultilinearSymbol, f: &SpectralField, draws: usize, seed: u64) -> Result<GammaSum> {
    let band = Band::new(*f.lattice());
    let slots = band.alternating(f, symbol.arity());
    lambda_slots_sampled(&band, symbol, &slots, draws, seed)
}

pub fn lambda_slots_sampled(
    band: &Band,
    symbol: &MultilinearSymbol,
    slots: &[Vec<Complex64>],
    draws: usize,
    seed: u64,
) -> Result<GammaSum> {
    let n = symbol.arity();
    if slots.len() != n || draws == 0 {
        return domain("slot arrays do not match the symbol arity, or no draws requested");
    }
    let (tuples, total) = band.sample(n, draws, seed);
    let volume = (band.len() as f64).powi(n as i32 - 1);
    let scale = band.lattice().measure().powi(n as i32 - 1) * volume;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut sq = 0.0;
    let mut excluded = 0;
    let mut idx = vec![FrequencyIndex::ZERO; n];
    for pos in &tuples {
        for j in 0..n {
            idx[j] = band.index(pos[j]);
        }
        let Some(v) = symbol.eval(&idx) else {
            excluded += 1;
            continue;
        };
        let mut prod = Complex64::new(v, 0.0);
        for j in 0..n {
            prod *= slots[j][pos[j]];
        }
        mean += prod;
        sq += prod.norm_sqr();
    }
    // rejected draws contribute zero
    let t = total as f64;
    let m = mean / t;
    let var = (sq / t - m.norm_sqr()).max(0.0);
    Ok(GammaSum { value: m * scale, excluded, std_error: (var / t).sqrt() * scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random;

    #[test]
    fn gamma2_small_band() {
        let l = TorusLattice::new(1, 1.0, 4).unwrap();
        let tuples: Vec<_> = gamma_n_enumerate(l, 2, GammaMode::Exhaustive).unwrap().collect();
        assert_eq!(tuples.len(), 3);
        assert!(tuples.iter().all(|t| t[0] == -t[1]));
        for l in [TorusLattice::new(1, 2.0, 10).unwrap(), TorusLattice::new(2, 1.0, 6).unwrap()] {
            let c = gamma_n_enumerate(l, 2, GammaMode::Exhaustive).unwrap().count();
            assert_eq!(c, l.band_size());
        }
    }

    #[test]
    fn gamma_counts_agree() {
        for l in [TorusLattice::new(1, 1.0, 8).unwrap(), TorusLattice::new(2, 1.0, 6).unwrap()] {
            let band = Band::new(l);
            for n in [2, 4] {
                let listed = gamma_n_enumerate(l, n, GammaMode::Exhaustive).unwrap().count() as u128;
                let folded = band.fold_exhaustive(n, || 0u128, |a, _, _| *a += 1, |a, b| a + b).unwrap();
                assert_eq!(listed, band.gamma_count(n));
                assert_eq!(folded, listed);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_and_budget_enforced() {
        let l = TorusLattice::new(1, 1.0, 16).unwrap();
        let a: Vec<_> = gamma_n_enumerate(l, 6, GammaMode::Sample { draws: 500, seed: 3 }).unwrap().collect();
        let b: Vec<_> = gamma_n_enumerate(l, 6, GammaMode::Sample { draws: 500, seed: 3 }).unwrap().collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| t.iter().copied().sum::<FrequencyIndex>().is_zero()));
        let big = TorusLattice::new(2, 1.0, 16).unwrap();
        assert!(matches!(
            gamma_n_enumerate(big, 6, GammaMode::Exhaustive).err(),
            Some(LabError::Budget { .. })
        ));
    }

    #[test]
    fn constant_symbol_gives_lp_integrals() {
        let l = TorusLattice::new(1, 2.0, 8).unwrap();
        let f = random::band(l, 10.0, 1.0, 1);
        let l2 = lambda_n(&MultilinearSymbol::constant(2, 1.0).unwrap(), &f).unwrap();
        assert!((l2.value.re - f.sobolev_norm(0.0).powi(2)).abs() < 1e-13);
        let l6 = lambda_n(&MultilinearSymbol::constant(6, 1.0).unwrap(), &f).unwrap();
        assert!((l6.value.re - f.lp_integral(6.0)).abs() < 1e-12 * f.lp_integral(6.0));
        assert!(l6.value.im.abs() < 1e-12);
        let z = lambda_n(&MultilinearSymbol::constant(4, 1.0).unwrap(), &SpectralField::zeros(l)).unwrap();
        assert_eq!(z.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn elongation_examples() {
        let one = MultilinearSymbol::constant(2, 1.0).unwrap();
        let e = elongate(&one, 1, 4).unwrap();
        assert_eq!(e.arity(), 6);
        let t: Vec<_> = [1, -2, 3, 0, 1, -3].iter().map(|&n| FrequencyIndex::new1(n)).collect();
        assert_eq!(e.eval(&t), Some(1.0));
        let m6 = MultilinearSymbol::constant(6, 2.0).unwrap();
        assert_eq!(elongate(&m6, 3, 4).unwrap().arity(), 10);
        let kk = MultilinearSymbol::new(2, |k| Some((k[0].0[0] * k[1].0[0]) as f64)).unwrap();
        let e = elongate(&kk, 1, 4).unwrap();
        let expected = ((1 - 2 + 3 + 0 + 1) * -3) as f64;
        assert_eq!(e.eval(&t), Some(expected));
        assert!(elongate(&kk, 3, 4).is_err());
        assert!(elongate(&kk, 1, 3).is_err());
    }

    #[test]
    fn sampled_estimate_is_consistent() {
        let l = TorusLattice::new(1, 1.0, 8).unwrap();
        let f = random::band(l, 10.0, 1.0, 5);
        let one = MultilinearSymbol::constant(4, 1.0).unwrap();
        let exact = lambda_n(&one, &f).unwrap().value;
        let est = lambda_n_sampled(&one, &f, 200_000, 9).unwrap();
        assert!((est.value - exact).norm() < 5.0 * est.std_error + 1e-12);
    }
}
