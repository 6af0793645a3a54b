//! The six-wave symbol, the second modified energy and the ten-wave symbol
//! governing its increment (one dimension, quintic nonlinearity).
//!
//! Kinetic factors use angular frequencies `ξ = 2πk`, so that the quadratic
//! term of `E²` is `½‖∂ₓ I f‖²`. The six-wave symbol is a ratio of quadratic
//! forms and does not see the `2π`.

use super::{Band, GammaSum, MultilinearSymbol};
use crate::error::{domain, Result};
use crate::field::SpectralField;
use crate::imethod::{apply_i, IMethodParams};
use crate::lattice::{FrequencyIndex, TorusLattice};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

const RESONANCE_TOL: f64 = 1e-10;

/// Value of the six-wave symbol at one tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum M6Value {
    /// Nonresonant tuple: numerator over denominator.
    Regular(f64),
    /// Resonant tuple whose numerator cancels too; the value is `Π m_j`.
    Fallback(f64),
    /// Resonant tuple with nonzero numerator, outside the domain of definition.
    /// Carries the numerator in index units `Σ ± m_j² |n_j|²`.
    Excluded { numerator: f64 },
}

impl M6Value {
    /// The value used inside forms; excluded tuples contribute zero.
    pub fn value_or_zero(self) -> f64 {
        match self {
            M6Value::Regular(v) | M6Value::Fallback(v) => v,
            M6Value::Excluded { .. } => 0.0,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            M6Value::Regular(v) | M6Value::Fallback(v) => Some(v),
            M6Value::Excluded { .. } => None,
        }
    }
}

/// `M6 = Σ (−1)^{j+1} m_j² k_j² / Σ (−1)^{j+1} k_j²`. The denominator is
/// decided in exact integer arithmetic on indices.
pub fn m6_eval(p: &IMethodParams, l: &TorusLattice, tuple: &[FrequencyIndex]) -> Result<M6Value> {
    if tuple.len() != 6 {
        return domain(format!("six-wave symbol takes 6 arguments, got {}", tuple.len()));
    }
    if !tuple.iter().copied().sum::<FrequencyIndex>().is_zero() {
        return domain("tuple does not lie on the hyperplane");
    }
    let m: Vec<f64> = tuple.iter().map(|&n| p.m(l.k_abs(n))).collect();
    let nsq: Vec<i64> = tuple.iter().map(|n| n.norm_sq()).collect();
    Ok(m6_core(&m, &nsq))
}

fn m6_core(m: &[f64], nsq: &[i64]) -> M6Value {
    let mut den = 0i64;
    let mut num = 0.0;
    let mut scale = 0.0;
    for j in 0..6 {
        let w = m[j] * m[j] * nsq[j] as f64;
        scale += w;
        if j % 2 == 0 {
            den += nsq[j];
            num += w;
        } else {
            den -= nsq[j];
            num -= w;
        }
    }
    if den != 0 {
        return M6Value::Regular(num / den as f64);
    }
    if num.abs() <= RESONANCE_TOL * scale {
        M6Value::Fallback(m.iter().product())
    } else {
        M6Value::Excluded { numerator: num }
    }
}

/// Per-position tables for fast evaluation on a band.
struct M6Table {
    m: Vec<f64>,
    nsq: Vec<i64>,
}

impl M6Table {
    fn new(p: &IMethodParams, band: &Band) -> Self {
        let l = band.lattice();
        M6Table {
            m: band.indices().iter().map(|&n| p.m(l.k_abs(n))).collect(),
            nsq: band.indices().iter().map(|n| n.norm_sq()).collect(),
        }
    }

    fn eval(&self, pos: &[usize]) -> M6Value {
        let m = [self.m[pos[0]], self.m[pos[1]], self.m[pos[2]], self.m[pos[3]], self.m[pos[4]], self.m[pos[5]]];
        let n = [
            self.nsq[pos[0]],
            self.nsq[pos[1]],
            self.nsq[pos[2]],
            self.nsq[pos[3]],
            self.nsq[pos[4]],
            self.nsq[pos[5]],
        ];
        m6_core(&m, &n)
    }

    fn product(&self, pos: &[usize]) -> f64 {
        pos.iter().map(|&q| self.m[q]).product()
    }
}

/// The six-wave symbol as a [`MultilinearSymbol`]; excluded tuples evaluate to `None`.
pub fn m6_symbol(p: &IMethodParams, l: TorusLattice) -> MultilinearSymbol {
    let p = *p;
    MultilinearSymbol::new(6, move |k| m6_eval(&p, &l, k).ok().and_then(M6Value::value)).expect("arity 6")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceTag {
    NumeratorZero,
    NumeratorNonzero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceEntry {
    pub tuple: [FrequencyIndex; 6],
    /// `Σ ± m_j² |n_j|²` (index units; not an integer unless `m ≡ 1` on the tuple).
    pub numerator: f64,
    pub denominator: i64,
    pub tag: ResonanceTag,
}

/// Resonant `Γ₆` tuples of a band, where the six-wave denominator vanishes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResonanceLog {
    pub entries: Vec<ResonanceEntry>,
}

impl ResonanceLog {
    /// Sweeps the band exhaustively.
    pub fn scan(p: &IMethodParams, l: TorusLattice) -> Result<Self> {
        let band = Band::new(l);
        let table = M6Table::new(p, &band);
        let entries = band.fold_exhaustive(
            6,
            Vec::new,
            |acc: &mut Vec<ResonanceEntry>, pos, idx| {
                let tag = match table.eval(pos) {
                    M6Value::Regular(_) => return,
                    M6Value::Fallback(_) => ResonanceTag::NumeratorZero,
                    M6Value::Excluded { .. } => ResonanceTag::NumeratorNonzero,
                };
                let numerator = (0..6)
                    .map(|j| {
                        let w = table.m[pos[j]].powi(2) * table.nsq[pos[j]] as f64;
                        if j % 2 == 0 {
                            w
                        } else {
                            -w
                        }
                    })
                    .sum();
                acc.push(ResonanceEntry {
                    tuple: [idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]],
                    numerator,
                    denominator: 0,
                    tag,
                });
            },
            |mut a, b| {
                a.extend(b);
                a
            },
        )?;
        Ok(ResonanceLog { entries })
    }

    pub fn count(&self, tag: ResonanceTag) -> usize {
        self.entries.iter().filter(|e| e.tag == tag).count()
    }

    /// CSV with columns `n1..n6, numerator_int, denominator_int, tag`; 2D
    /// indices are written as `x:y`.
    pub fn write_csv<W: Write>(&self, dim: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n1", "n2", "n3", "n4", "n5", "n6", "numerator_int", "denominator_int", "tag"])?;
        for e in &self.entries {
            let mut rec: Vec<String> = e
                .tuple
                .iter()
                .map(|n| if dim == 1 { n.0[0].to_string() } else { format!("{}:{}", n.0[0], n.0[1]) })
                .collect();
            rec.push(format!("{}", e.numerator));
            rec.push(e.denominator.to_string());
            rec.push(match e.tag {
                ResonanceTag::NumeratorZero => "numerator_zero".into(),
                ResonanceTag::NumeratorNonzero => "numerator_nonzero".into(),
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, dim: usize, path: &Path) -> Result<()> {
        self.write_csv(dim, std::fs::File::create(path)?)
    }
}

/// A modified-energy evaluation with its bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// `½‖∂ₓ I f‖²`.
    pub kinetic: f64,
    /// `(1/6) Re Λ₆(M6; f)`.
    pub potential: f64,
    /// `|Im Λ₆| / max(|Λ₆|, tiny)`.
    pub imag_residue: f64,
    /// Nonzero-numerator resonant tuples that were skipped.
    pub excluded: u64,
    pub std_error: f64,
    pub sampled: bool,
}

fn require_1d(f: &SpectralField) -> Result<()> {
    if f.lattice().dim() != 1 {
        return domain("the second modified energy is defined for the one-dimensional quintic problem");
    }
    Ok(())
}

fn assemble(p: &IMethodParams, f: &SpectralField, six: GammaSum, sampled: bool) -> EnergyEstimate {
    let kinetic = 0.5 * apply_i(p, f).gradient_norm_sq();
    let potential = six.value.re / 6.0;
    EnergyEstimate {
        value: kinetic + potential,
        kinetic,
        potential,
        imag_residue: six.value.im.abs() / six.value.norm().max(f64::MIN_POSITIVE),
        excluded: six.excluded,
        std_error: six.std_error / 6.0,
        sampled,
    }
}

/// `E²(f) = −½Λ₂(m₁ξ₁m₂ξ₂) + (1/6)Λ₆(M6)`, exhaustive over `Γ₆`.
pub fn second_energy(p: &IMethodParams, f: &SpectralField) -> Result<EnergyEstimate> {
    require_1d(f)?;
    let band = Band::new(*f.lattice());
    let table = M6Table::new(p, &band);
    let slots = band.alternating(f, 6);
    let six = six_wave_sum(&band, &slots, |pos| table.eval(pos).value())?;
    Ok(assemble(p, f, six, false))
}

/// Monte Carlo variant of [`second_energy`] for bands too large to sweep.
pub fn second_energy_sampled(p: &IMethodParams, f: &SpectralField, draws: usize, seed: u64) -> Result<EnergyEstimate> {
    require_1d(f)?;
    let band = Band::new(*f.lattice());
    let symbol = m6_symbol(p, *f.lattice());
    let slots = band.alternating(f, 6);
    let six = super::lambda_slots_sampled(&band, &symbol, &slots, draws, seed)?;
    Ok(assemble(p, f, six, true))
}

fn six_wave_sum<F>(band: &Band, slots: &[Vec<Complex64>], symbol: F) -> Result<GammaSum>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    let scale = band.lattice().measure().powi(5);
    let sum = band.fold_exhaustive(
        6,
        GammaSum::default,
        |acc, pos, _| {
            let prod = slots[0][pos[0]]
                * slots[1][pos[1]]
                * slots[2][pos[2]]
                * slots[3][pos[3]]
                * slots[4][pos[4]]
                * slots[5][pos[5]];
            if prod == Complex64::new(0.0, 0.0) {
                return;
            }
            match symbol(pos) {
                Some(v) => acc.value += prod * v,
                None => acc.excluded += 1,
            }
        },
        GammaSum::merge,
    )?;
    Ok(GammaSum { value: sum.value * scale, ..sum })
}

/// `E²(f) − E¹(f) = (1/6)Λ₆(M6 − Π m_j)`, summed directly so the small
/// difference does not suffer cancellation. Excluded tuples count with `M6 = 0`.
pub fn perturbation_gap(p: &IMethodParams, f: &SpectralField) -> Result<GammaSum> {
    require_1d(f)?;
    let band = Band::new(*f.lattice());
    let table = M6Table::new(p, &band);
    let slots = band.alternating(f, 6);
    let sum = six_wave_sum(&band, &slots, |pos| Some(table.eval(pos).value_or_zero() - table.product(pos)))?;
    Ok(GammaSum { value: sum.value / 6.0, ..sum })
}

/// Time derivative of `E²` along the band-projected flow
/// `u_t = iΔu − iP(|u|⁴u)`, split as `(ten_wave, resonant)`:
/// `ten_wave = −iΛ₁₀(M10; u)` is evaluated by contracting each elongated
/// block of five slots into the spectrum of `P(|u|⁴u)`, and
/// `resonant = (i/6)Λ₆(numerator · 1_excluded)` collects the resonant tuples
/// the six-wave symbol cannot absorb.
pub fn energy_rate(p: &IMethodParams, u: &SpectralField) -> Result<(Complex64, Complex64)> {
    require_1d(u)?;
    let l = *u.lattice();
    let band = Band::new(l);
    let table = M6Table::new(p, &band);
    let a = band.alternating(u, 6);
    let wide = u.power_nonlinearity(4);
    let (bp, bc) = (band.plain(&wide), band.conjugated(&wide));
    let xi_sq = (2.0 * PI / l.lambda()).powi(2);
    let (ten, res) = band.fold_exhaustive(
        6,
        || (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        |acc, pos, _| {
            let v: [Complex64; 6] = std::array::from_fn(|j| a[j][pos[j]]);
            match table.eval(pos) {
                M6Value::Excluded { numerator } => {
                    acc.1 += v.iter().product::<Complex64>() * numerator * xi_sq;
                }
                val => {
                    let m6 = val.value_or_zero();
                    // Σ_j (−1)^{j} (Π_{i≠j} v_i) b_j with 1-based j
                    let mut prefix = [Complex64::new(1.0, 0.0); 7];
                    for j in 0..6 {
                        prefix[j + 1] = prefix[j] * v[j];
                    }
                    let mut suffix = Complex64::new(1.0, 0.0);
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in (0..6).rev() {
                        let b = if j % 2 == 0 { bp[pos[j]] } else { bc[pos[j]] };
                        let term = prefix[j] * suffix * b;
                        if j % 2 == 0 {
                            s -= term;
                        } else {
                            s += term;
                        }
                        suffix *= v[j];
                    }
                    acc.0 += s * m6;
                }
            }
        },
        |x, y| (x.0 + y.0, x.1 + y.1),
    )?;
    let scale = l.measure().powi(5);
    let i6 = Complex64::new(0.0, 1.0 / 6.0);
    Ok((ten * scale * i6, res * scale * i6))
}

/// Arguments of `X_{j+1}^4(M6)` at a ten-tuple (0-based `j`).
fn elongated_args(k: &[FrequencyIndex], j: usize) -> [FrequencyIndex; 6] {
    let mut args = [FrequencyIndex::ZERO; 6];
    for (t, slot) in args.iter_mut().enumerate() {
        *slot = if t < j {
            k[t]
        } else if t == j {
            k[j..j + 5].iter().copied().sum()
        } else {
            k[t + 4]
        };
    }
    args
}

/// `(1/6) Σ_j (−1)^{j+1} X_j^4(M6)` at one tuple, without symmetrization.
/// `band` restricts every merged argument to the symmetric band of that
/// half-width (the contribution is dropped otherwise), which is the symbol
/// seen by the band-projected flow.
pub fn m10_fast(p: &IMethodParams, l: &TorusLattice, k: &[FrequencyIndex], band: Option<i64>) -> Result<f64> {
    if k.len() != 10 {
        return domain(format!("ten-wave symbol takes 10 arguments, got {}", k.len()));
    }
    let mut acc = 0.0;
    for j in 0..6 {
        let args = elongated_args(k, j);
        if let Some(b) = band {
            if args[j].0[0].abs() > b || args[j].0[1].abs() > b {
                continue;
            }
        }
        let v = m6_eval(p, l, &args)?.value_or_zero();
        acc += if j % 2 == 0 { v } else { -v };
    }
    Ok(acc / 6.0)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// The ten-wave symbol averaged over all permutations of the odd slots and of
/// the even slots (14400 arrangements).
pub fn m10_symmetrized(p: &IMethodParams, l: &TorusLattice, k: &[FrequencyIndex]) -> Result<f64> {
    if k.len() != 10 {
        return domain(format!("ten-wave symbol takes 10 arguments, got {}", k.len()));
    }
    let odd = permutations(&[0, 2, 4, 6, 8]);
    let even = permutations(&[1, 3, 5, 7, 9]);
    let mut acc = 0.0;
    let mut arranged = [FrequencyIndex::ZERO; 10];
    for po in &odd {
        for pe in &even {
            for t in 0..5 {
                arranged[2 * t] = k[po[t]];
                arranged[2 * t + 1] = k[pe[t]];
            }
            acc += m10_fast(p, l, &arranged, None)?;
        }
    }
    Ok(acc / (odd.len() * even.len()) as f64)
}

/// The ten-wave symbol (unsymmetrized form) as a [`MultilinearSymbol`].
pub fn m10_symbol(p: &IMethodParams, l: TorusLattice) -> MultilinearSymbol {
    let p = *p;
    MultilinearSymbol::new(10, move |k| m10_fast(&p, &l, k, None).ok()).expect("arity 10")
}

/// Random point of `Γ_n` with indices in `[−r, r]`.
fn random_tuple(n: usize, r: i64, rng: &mut ChaCha8Rng) -> Option<Vec<FrequencyIndex>> {
    let mut t: Vec<FrequencyIndex> = (0..n - 1).map(|_| FrequencyIndex::new1(rng.gen_range(-r..=r))).collect();
    let s: FrequencyIndex = t.iter().copied().sum();
    if s.0[0].abs() > r {
        return None;
    }
    t.push(-s);
    Some(t)
}

/// Largest `|M6|` found over the defined tuples of a probe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct M6Bound {
    pub max_abs: f64,
    /// A tuple attaining `max_abs`, as indices.
    pub argmax: Vec<i64>,
    pub exhaustive: u64,
    pub sampled: u64,
    pub excluded: u64,
}

impl M6Bound {
    fn offer(&mut self, v: M6Value, tuple: impl FnOnce() -> Vec<i64>) {
        match v.value() {
            Some(x) if x.abs() > self.max_abs => {
                self.max_abs = x.abs();
                self.argmax = tuple();
            }
            Some(_) => {}
            None => self.excluded += 1,
        }
    }

    fn merge(mut self, other: M6Bound) -> M6Bound {
        if other.max_abs > self.max_abs {
            self.max_abs = other.max_abs;
            self.argmax = other.argmax;
        }
        self.exhaustive += other.exhaustive;
        self.sampled += other.sampled;
        self.excluded += other.excluded;
        self
    }
}

/// `max |M6|` over all of `Γ₆` on the band of `l` (1D) and over `draws`
/// uniform tuples with indices in `[−radius, radius]`.
pub fn m6_bound(p: &IMethodParams, l: TorusLattice, draws: usize, radius: i64, seed: u64) -> Result<M6Bound> {
    if l.dim() != 1 {
        return domain("the six-wave probe is defined for the one-dimensional problem");
    }
    if radius < 1 {
        return domain("sampling radius must be at least 1");
    }
    let band = Band::new(l);
    let table = M6Table::new(p, &band);
    let empty = || M6Bound { max_abs: 0.0, argmax: Vec::new(), exhaustive: 0, sampled: 0, excluded: 0 };
    let exhaustive = band.fold_exhaustive(
        6,
        empty,
        |acc, pos, idx| {
            acc.exhaustive += 1;
            acc.offer(table.eval(pos), || idx.iter().map(|n| n.0[0]).collect());
        },
        M6Bound::merge,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = empty();
    for _ in 0..draws {
        let Some(t) = random_tuple(6, radius, &mut rng) else { continue };
        sampled.sampled += 1;
        sampled.offer(m6_eval(p, &l, &t)?, || t.iter().map(|n| n.0[0]).collect());
    }
    Ok(exhaustive.merge(sampled))
}
