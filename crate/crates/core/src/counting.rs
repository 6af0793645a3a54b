//! Exact lattice-point kernels: Pick's identity, lattice points on short
//! circular arcs, lattice counts in dilated convex domains, and enumerators for
//! the resonant sets that control the bilinear Strichartz constants.
//!
//! Annuli follow one dyadic convention throughout: `|k| ∼ A` means `A/2 ≤ |k| ≤ 2A`.
//! Membership tests run in integer arithmetic; for the 1D and 2D sets the
//! period `λ` is an integer, so `(1/λ)Z` scales to `Z`.

use crate::error::{domain, Result};
use num_integer::{Integer, Roots};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

type Point = (i64, i64);

fn cross(o: Point, a: Point, b: Point) -> i128 {
    (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a).signum();
    let d2 = cross(c, d, b).signum();
    let d3 = cross(a, b, c).signum();
    let d4 = cross(a, b, d).signum();
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Simple lattice polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LatticePolygon {
    vertices: Vec<Point>,
}

impl LatticePolygon {
    /// Validates simplicity and orients the vertices counterclockwise.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return domain(format!("a polygon needs at least 3 vertices, got {n}"));
        }
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a == b {
                return domain("repeated consecutive vertex");
            }
            for j in i + 1..n {
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // neighbours share exactly one endpoint and must not fold back
                    let (shared, far_a, far_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    if cross(shared, far_a, far_b) == 0 && on_segment(far_a, shared, far_b)
                        || cross(shared, far_a, far_b) == 0 && on_segment(far_b, shared, far_a)
                    {
                        return domain("adjacent edges overlap");
                    }
                } else if segments_touch(a, b, c, d) {
                    return domain(format!("edges {i} and {j} intersect"));
                }
            }
        }
        let twice = twice_signed_area(&vertices);
        if twice == 0 {
            return domain("polygon has zero area");
        }
        if twice < 0 {
            vertices.reverse();
        }
        Ok(LatticePolygon { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Random star-shaped polygon around the origin with `n` vertices inside the
    /// disk of the given radius; retries until the rounded vertices form a simple polygon.
    pub fn random_star(n: usize, radius: i64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
            angles.sort_by(f64::total_cmp);
            let pts: Vec<Point> = angles
                .iter()
                .map(|&t| {
                    let r = rng.gen_range(0.25..1.0) * radius as f64;
                    ((r * t.cos()).round() as i64, (r * t.sin()).round() as i64)
                })
                .collect();
            if let Ok(p) = LatticePolygon::new(pts) {
                return p;
            }
        }
    }

    /// Point location: `Some(true)` inside, `Some(false)` on the boundary, `None` outside.
    pub fn locate(&self, p: Point) -> Option<bool> {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            if on_segment(p, a, b) {
                return Some(false);
            }
            // half-open crossing rule
            if (a.1 > p.1) != (b.1 > p.1) {
                let c = cross(a, b, p);
                let upward = b.1 > a.1;
                if (c > 0) == upward {
                    inside = !inside;
                }
            }
        }
        inside.then_some(true)
    }
}

fn twice_signed_area(v: &[Point]) -> i128 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.0 as i128 * b.1 as i128 - b.0 as i128 * a.1 as i128
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PickReport {
    /// Lattice points strictly inside (direct enumeration).
    pub interior: u64,
    /// Lattice points on the edges.
    pub boundary: u64,
    /// `I + E/2 − 1`.
    pub pick_area: Ratio<i64>,
    /// Shoelace formula.
    pub shoelace_area: Ratio<i64>,
}

impl PickReport {
    pub fn holds(&self) -> bool {
        self.pick_area == self.shoelace_area
    }
}

/// Both sides of Pick's identity; the interior count is obtained by scanning
/// the bounding box, independently of the area.
pub fn pick_area(p: &LatticePolygon) -> PickReport {
    let v = p.vertices();
    let n = v.len();
    let boundary: u64 = (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            (b.0 - a.0).abs().gcd(&(b.1 - a.1).abs()) as u64
        })
        .sum();
    let (x0, x1) = (v.iter().map(|q| q.0).min().unwrap(), v.iter().map(|q| q.0).max().unwrap());
    let (y0, y1) = (v.iter().map(|q| q.1).min().unwrap(), v.iter().map(|q| q.1).max().unwrap());
    let mut interior = 0u64;
    for x in x0..=x1 {
        for y in y0..=y1 {
            if p.locate((x, y)) == Some(true) {
                interior += 1;
            }
        }
    }
    let twice = twice_signed_area(v) as i64;
    PickReport {
        interior,
        boundary,
        pick_area: Ratio::from_integer(interior as i64) + Ratio::new(boundary as i64, 2) - 1,
        shoelace_area: Ratio::new(twice.abs(), 2),
    }
}

/// Angular interval `[start, start + width]` in radians, counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcInterval {
    pub start: f64,
    pub width: f64,
}

impl ArcInterval {
    pub const FULL: ArcInterval = ArcInterval { start: 0.0, width: 2.0 * PI };

    pub fn contains(&self, angle: f64) -> bool {
        if self.width >= 2.0 * PI {
            return true;
        }
        let off = (angle - self.start).rem_euclid(2.0 * PI);
        off <= self.width + 1e-12 || off >= 2.0 * PI - 1e-12
    }
}

/// Lattice points on the circle `|z − center|² = r_sq` whose angle about the
/// center lies in `arc`. Circle membership is exact in rational arithmetic.
pub fn arc_lattice_points(r_sq: Ratio<i64>, center: (Ratio<i64>, Ratio<i64>), arc: ArcInterval) -> Vec<Point> {
    let r_sq = Ratio::new(*r_sq.numer() as i128, *r_sq.denom() as i128);
    let cx = Ratio::new(*center.0.numer() as i128, *center.0.denom() as i128);
    let cy = Ratio::new(*center.1.numer() as i128, *center.1.denom() as i128);
    if r_sq <= Ratio::from_integer(0) {
        return Vec::new();
    }
    let r = (*r_sq.numer() as f64 / *r_sq.denom() as f64).sqrt();
    let (fx, fy) = (ratio_f64(cx), ratio_f64(cy));
    let mut out = Vec::new();
    for x in (fx - r).floor() as i64 - 1..=(fx + r).ceil() as i64 + 1 {
        let dx = Ratio::from_integer(x as i128) - cx;
        let rest = r_sq - dx * dx;
        if rest < Ratio::from_integer(0) {
            continue;
        }
        let root = ratio_f64(rest).sqrt();
        let mut ys: Vec<i64> = Vec::new();
        for guess in [fy - root, fy + root] {
            for y in guess.round() as i64 - 1..=guess.round() as i64 + 1 {
                let dy = Ratio::from_integer(y as i128) - cy;
                if dy * dy == rest && !ys.contains(&y) {
                    ys.push(y);
                }
            }
        }
        for y in ys {
            if arc.contains((y as f64 - fy).atan2(x as f64 - fx)) {
                out.push((x, y));
            }
        }
    }
    out.sort_by(|a, b| angle_of(*a).total_cmp(&angle_of(*b)));
    out
}

fn ratio_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn angle_of(p: Point) -> f64 {
    (p.1 as f64).atan2(p.0 as f64).rem_euclid(2.0 * PI)
}

/// All lattice points on `x² + y² = r_sq`, sorted by angle.
pub fn circle_points(r_sq: i64) -> Vec<Point> {
    let mut out = Vec::new();
    if r_sq < 0 {
        return out;
    }
    let r = r_sq.sqrt();
    for x in -r..=r {
        let rest = r_sq - x * x;
        let y = rest.sqrt();
        if y * y == rest {
            out.push((x, y));
            if y != 0 {
                out.push((x, -y));
            }
        }
    }
    out.sort_by(|a, b| angle_of(*a).total_cmp(&angle_of(*b)));
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ArcLemmaReport {
    pub circles: u64,
    /// Circles carrying at least three lattice points.
    pub circles_with_triples: u64,
    pub triples: u64,
    /// `(R², three consecutive points)` spanning an arc shorter than `(3R/4)^{1/3}`.
    pub violations: Vec<(i64, [Point; 3])>,
    /// Smallest ratio of a triple's arc length to `(3R/4)^{1/3}`.
    pub min_margin: f64,
}

/// Every arc containing three lattice points contains three consecutive ones,
/// so it suffices to check the arcs spanned by consecutive triples on each
/// circle `x² + y² = R²`, `min_r_sq ≤ R² ≤ max_r_sq`.
pub fn verify_arc_lemma(min_r_sq: i64, max_r_sq: i64) -> ArcLemmaReport {
    let per: Vec<ArcLemmaReport> = (min_r_sq.max(1)..=max_r_sq)
        .into_par_iter()
        .map(|r_sq| {
            let pts = circle_points(r_sq);
            let mut rep = ArcLemmaReport { circles: 1, min_margin: f64::INFINITY, ..Default::default() };
            let n = pts.len();
            if n < 3 {
                return rep;
            }
            rep.circles_with_triples = 1;
            let r = (r_sq as f64).sqrt();
            let limit = (0.75 * r).cbrt();
            for i in 0..n {
                let (a, c) = (pts[i], pts[(i + 2) % n]);
                let span = (angle_of(c) - angle_of(a)).rem_euclid(2.0 * PI);
                let margin = r * span / limit;
                rep.triples += 1;
                rep.min_margin = rep.min_margin.min(margin);
                if margin < 1.0 {
                    rep.violations.push((r_sq, [a, pts[(i + 1) % n], c]));
                }
            }
            rep
        })
        .collect();
    per.into_iter().fold(ArcLemmaReport { min_margin: f64::INFINITY, ..Default::default() }, |mut acc, r| {
        acc.circles += r.circles;
        acc.circles_with_triples += r.circles_with_triples;
        acc.triples += r.triples;
        acc.violations.extend(r.violations);
        acc.min_margin = acc.min_margin.min(r.min_margin);
        acc
    })
}

/// Planar domain dilated by `λ` in [`gauss_count`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ConvexDomain {
    /// Closed disk of radius `r` about the origin.
    Disk { r: f64 },
    /// Closed annular sector `inner ≤ |z| ≤ outer`, `0 ≤ arg z ≤ angle`, with
    /// `angle ∈ [0, π]`. Convex when `inner = 0`.
    Sector { inner: f64, outer: f64, angle: f64 },
}

impl ConvexDomain {
    pub fn area(&self) -> f64 {
        match *self {
            ConvexDomain::Disk { r } => PI * r * r,
            ConvexDomain::Sector { inner, outer, angle } => 0.5 * angle * (outer * outer - inner * inner),
        }
    }
}

/// Largest `x ≥ 0` with `x² ≤ bound` (float bound, exact integer check).
fn floor_sqrt(bound: f64) -> Option<i64> {
    if bound < 0.0 {
        return None;
    }
    let mut x = bound.sqrt().floor() as i64;
    while (x * x) as f64 > bound {
        x -= 1;
    }
    while ((x + 1) * (x + 1)) as f64 <= bound {
        x += 1;
    }
    Some(x)
}

/// `#(Z² ∩ λK)` by row-wise interval counting.
pub fn gauss_count(k: ConvexDomain, lambda: f64) -> Result<u64> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return domain(format!("dilation must be at least 1, got {lambda}"));
    }
    match k {
        ConvexDomain::Disk { r } => {
            if !(r >= 0.0) {
                return domain("radius must be nonnegative");
            }
            let rho = (lambda * r).powi(2);
            let ymax = floor_sqrt(rho).unwrap_or(-1);
            Ok((-ymax..=ymax).map(|y| 2 * floor_sqrt(rho - (y * y) as f64).unwrap() as u64 + 1).sum())
        }
        ConvexDomain::Sector { inner, outer, angle } => {
            if !(0.0 <= inner && inner <= outer) {
                return domain("sector radii must satisfy 0 ≤ inner ≤ outer");
            }
            if !(0.0..=PI).contains(&angle) {
                return domain(format!("sector angle must lie in [0, π], got {angle}"));
            }
            let (ri, ro) = ((lambda * inner).powi(2), (lambda * outer).powi(2));
            let (s, c) = angle.sin_cos();
            let tol = 1e-9 * lambda * outer.max(1.0);
            let ymax = floor_sqrt(ro).unwrap_or(-1);
            let mut total = 0u64;
            for y in 0..=ymax {
                let xo = floor_sqrt(ro - (y * y) as f64).unwrap();
                // x·sinθ − y·cosθ ≥ 0 bounds x from below (or is independent of x)
                let lo = if s > tol {
                    ((y as f64 * c - tol) / s).ceil() as i64
                } else if y == 0 || -(y as f64) * c >= -tol {
                    i64::MIN
                } else {
                    continue;
                };
                let lo = lo.max(-xo);
                if y == 0 && angle < PI - 1e-12 {
                    // the lower ray is the nonnegative x axis
                    let lo0 = lo.max(0);
                    total += count_outside_inner(lo0, xo, 0, ri);
                } else {
                    total += count_outside_inner(lo, xo, y, ri);
                }
            }
            Ok(total)
        }
    }
}

/// Integers `x ∈ [lo, hi]` with `x² + y² ≥ inner_sq`.
fn count_outside_inner(lo: i64, hi: i64, y: i64, inner_sq: f64) -> u64 {
    if lo > hi {
        return 0;
    }
    let all = (hi - lo + 1) as u64;
    let rest = inner_sq - (y * y) as f64;
    if rest <= 0.0 {
        return all;
    }
    // excluded: x² < rest
    let mut e = floor_sqrt(rest).unwrap();
    if (e * e) as f64 == rest {
        e -= 1;
    }
    if e < 0 {
        return all;
    }
    let (a, b) = (lo.max(-e), hi.min(e));
    all - if a <= b { (b - a + 1) as u64 } else { 0 }
}

/// One query for the 1D resonant set
/// `S = {k₁ ∈ (1/λ)Z : |k₁| ∼ N₁, |k − k₁| ∼ N₂, |k² − 2k₁(k − k₁) − τ| ≤ w}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountingQuery1D {
    pub lambda: i64,
    pub n1: i64,
    pub n2: i64,
    /// `λk`, an integer.
    pub k_scaled: i64,
    pub tau: f64,
    pub w: f64,
}

impl CountingQuery1D {
    pub fn new(lambda: i64, n1: i64, n2: i64, k_scaled: i64, tau: f64, w: f64) -> Result<Self> {
        check_scales(lambda, n1, n2, w)?;
        Ok(CountingQuery1D { lambda, n1, n2, k_scaled, tau, w })
    }
}

fn check_scales(lambda: i64, n1: i64, n2: i64, w: f64) -> Result<()> {
    if lambda < 1 {
        return domain(format!("λ must be at least 1, got {lambda}"));
    }
    if !(n2 >= 1 && n1 > 2 * n2) {
        return domain(format!("need N₁ > 2N₂ ≥ 2, got N₁ = {n1}, N₂ = {n2}"));
    }
    if !(w > 0.0 && w.is_finite()) {
        return domain("window half-width must be positive");
    }
    Ok(())
}

/// `j = λk₁` values in the two annuli for a given `K = λk`.
fn annulus_members(lambda: i64, n1: i64, n2: i64, big_k: i64) -> impl Iterator<Item = i64> {
    let (a_lo, a_hi) = (lambda * n1, 2 * lambda * n1);
    let (b_lo, b_hi) = (lambda * n2, 2 * lambda * n2);
    // dyadic convention: 2|j| ≥ λN₁ and |j| ≤ 2λN₁, same for K − j with N₂
    let in_a = move |j: i64| 2 * j.abs() >= a_lo && j.abs() <= a_hi;
    let in_b = move |j: i64| 2 * (big_k - j).abs() >= b_lo && (big_k - j).abs() <= b_hi;
    (big_k - b_hi..=big_k + b_hi).filter(move |&j| in_a(j) && in_b(j))
}

/// `λ²(k² − 2k₁(k − k₁))` with `K = λk`, `j = λk₁`.
fn phase_scaled(big_k: i64, j: i64) -> i64 {
    big_k * big_k - 2 * j * (big_k - j)
}

/// Members of `S`, returned as `λk₁`.
pub fn enumerate_s_1d(q: &CountingQuery1D) -> Vec<i64> {
    let l2 = (q.lambda * q.lambda) as f64;
    let (lo, hi) = (((q.tau - q.w) * l2).ceil() as i64, ((q.tau + q.w) * l2).floor() as i64);
    annulus_members(q.lambda, q.n1, q.n2, q.k_scaled)
        .filter(|&j| (lo..=hi).contains(&phase_scaled(q.k_scaled, j)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxCount1D {
    pub lambda: i64,
    pub n1: i64,
    pub n2: i64,
    pub w: f64,
    /// `sup_{k, τ} #S`.
    pub count: u64,
    /// A maximizing `k` and `τ`.
    pub k: f64,
    pub tau: f64,
}

/// `sup_{k, τ} #S` over all `k ∈ (1/λ)Z` and real `τ`: for each `k` the phases
/// of the admissible `k₁` are merged in increasing order (they are monotone in
/// `|k₁ − k/2|`) and scanned with a window of width `2w`.
pub fn max_count_1d(lambda: i64, n1: i64, n2: i64, w: f64) -> Result<MaxCount1D> {
    check_scales(lambda, n1, n2, w)?;
    let width = (2.0 * w * (lambda * lambda) as f64).floor() as i64;
    let kmax = 2 * lambda * (n1 + n2);
    // (k, k₁) → (−k, −k₁) preserves S, so k ≥ 0 suffices
    let best = (0..=kmax)
        .into_par_iter()
        .map(|big_k| {
            let members: Vec<i64> = annulus_members(lambda, n1, n2, big_k).collect();
            let phases = merge_by_phase(&members, big_k);
            if phases.is_empty() {
                return (0u64, big_k, 0i64);
            }
            let mut best = (0u64, big_k, phases[0]);
            let mut hi = 0;
            for lo in 0..phases.len() {
                while hi < phases.len() && phases[hi] - phases[lo] <= width {
                    hi += 1;
                }
                let c = (hi - lo) as u64;
                if c > best.0 {
                    best = (c, big_k, phases[lo]);
                }
            }
            best
        })
        .reduce(|| (0, 0, 0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let l2 = (lambda * lambda) as f64;
    Ok(MaxCount1D {
        lambda,
        n1,
        n2,
        w,
        count: best.0,
        k: best.1 as f64 / lambda as f64,
        tau: (best.2 as f64 + width as f64 / 2.0) / l2,
    })
}

/// Phases of sorted members in increasing order. The phase is
/// `2(j − K/2)² + K²/2`, increasing in `|2j − K|`, so members on each side of
/// `K/2` are already monotone and only need a merge.
fn merge_by_phase(members: &[i64], big_k: i64) -> Vec<i64> {
    let split = members.partition_point(|&j| 2 * j < big_k);
    let left: Vec<i64> = members[..split].iter().rev().map(|&j| phase_scaled(big_k, j)).collect();
    let right: Vec<i64> = members[split..].iter().map(|&j| phase_scaled(big_k, j)).collect();
    let mut out = Vec::with_capacity(members.len());
    let (mut a, mut b) = (0, 0);
    while a < left.len() || b < right.len() {
        if b == right.len() || (a < left.len() && left[a] <= right[b]) {
            out.push(left[a]);
            a += 1;
        } else {
            out.push(right[b]);
            b += 1;
        }
    }
    out
}

/// `(λ^{−d} · max count)^{1/2}` over a sweep.
pub fn sup_count_m(counts: &[u64], lambda: f64, dim: usize) -> Result<f64> {
    let Some(&max) = counts.iter().max() else {
        return domain("empty sweep");
    };
    Ok((max as f64 / lambda.powi(dim as i32)).sqrt())
}

/// One query for the 2D set
/// `A^λ = {(x, y) ∈ Z² : |x² + y² + 2λ(ax + by)| ≤ cλ², x² + y² ≤ (k₂λN₂)²}`
/// with `w = (a, b)`, `|w| ∼ N₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountingQuery2D {
    pub lambda: i64,
    pub n1: f64,
    pub n2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k2: f64,
}

impl CountingQuery2D {
    /// `w` must lie on `Z²/(2λ)`, the lattice of `z₀ − k/2` for `z₀, k ∈ Z²/λ`.
    pub fn new(lambda: i64, n1: f64, n2: f64, w: (f64, f64), c: f64, k2: f64) -> Result<Self> {
        if lambda < 1 {
            return domain(format!("λ must be at least 1, got {lambda}"));
        }
        if !(n2 >= 1.0 && n1 > 2.0 * n2) {
            return domain(format!("need N₁ > 2N₂ ≥ 2, got N₁ = {n1}, N₂ = {n2}"));
        }
        let norm = w.0.hypot(w.1);
        if !(n1 / 2.0 <= norm && norm <= 2.0 * n1) {
            return domain(format!("|w| = {norm} is not comparable to N₁ = {n1}"));
        }
        for v in [w.0, w.1] {
            let s = 2.0 * lambda as f64 * v;
            if (s - s.round()).abs() > 1e-9 {
                return domain("w must lie on Z²/(2λ)");
            }
        }
        if !(c > 0.0 && k2 > 0.0) {
            return domain("window constants must be positive");
        }
        Ok(CountingQuery2D { lambda, n1, n2, a: w.0, b: w.1, c, k2 })
    }

    /// Nearest point of `Z²/(2λ)` to `w`.
    pub fn snap(lambda: i64, w: (f64, f64)) -> (f64, f64) {
        let s = 2.0 * lambda as f64;
        ((w.0 * s).round() / s, (w.1 * s).round() / s)
    }

    fn integer_coefficients(&self) -> (i64, i64) {
        let s = 2.0 * self.lambda as f64;
        ((self.a * s).round() as i64, (self.b * s).round() as i64)
    }

    /// Visits the disk `x² + y² ≤ (k₂λN₂)²` row by row with the integer level
    /// `x² + y² + 2λ(ax + by)`.
    fn for_each_level<F: FnMut(i64)>(&self, mut f: F) {
        let (ca, cb) = self.integer_coefficients();
        let rho = (self.k2 * self.lambda as f64 * self.n2).powi(2);
        let ymax = floor_sqrt(rho).unwrap_or(-1);
        for y in -ymax..=ymax {
            let xm = floor_sqrt(rho - (y * y) as f64).unwrap();
            for x in -xm..=xm {
                f(x * x + y * y + ca * x + cb * y);
            }
        }
    }

    fn level_bound(&self) -> i64 {
        (self.c * (self.lambda * self.lambda) as f64).floor() as i64
    }
}

/// `#A^λ`.
pub fn enumerate_a_lambda_2d(q: &CountingQuery2D) -> u64 {
    let bound = q.level_bound();
    let mut count = 0;
    q.for_each_level(|v| {
        if v.abs() <= bound {
            count += 1;
        }
    });
    count
}

/// Largest number of points of the disk on a single circle
/// `x² + y² + 2λ(ax + by) = n`, `|n| ≤ cλ²`.
pub fn max_points_on_circle_2d(q: &CountingQuery2D) -> u64 {
    let bound = q.level_bound();
    let mut hist = std::collections::HashMap::new();
    q.for_each_level(|v| {
        if v.abs() <= bound {
            *hist.entry(v).or_insert(0u64) += 1;
        }
    });
    hist.values().copied().max().unwrap_or(0)
}

/// Sweep row for the 2D set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Count2DRow {
    pub lambda: i64,
    pub n1: f64,
    pub n2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub count: u64,
    pub max_on_circle: u64,
}

/// `#A^λ` over `directions` equally spaced directions of `w` and the radii
/// `N₁/2, N₁, 2N₁` (snapped to the admissible lattice, at least one axis-aligned).
pub fn sweep_a_lambda_2d(lambda: i64, n1: f64, n2: f64, c: f64, directions: usize) -> Result<Vec<Count2DRow>> {
    let mut queries = Vec::new();
    for &r in &[0.5 * n1, n1, 2.0 * n1] {
        for d in 0..directions.max(1) {
            let t = 2.0 * PI * d as f64 / directions.max(1) as f64;
            let w = CountingQuery2D::snap(lambda, (r * t.cos(), r * t.sin()));
            if let Ok(q) = CountingQuery2D::new(lambda, n1, n2, w, c, 1.0) {
                queries.push(q);
            }
        }
    }
    if queries.is_empty() {
        return domain("no admissible w in the sweep");
    }
    Ok(queries
        .par_iter()
        .map(|q| Count2DRow {
            lambda,
            n1,
            n2,
            a: q.a,
            b: q.b,
            c,
            count: enumerate_a_lambda_2d(q),
            max_on_circle: max_points_on_circle_2d(q),
        })
        .collect())
}

/// `sup_{k, τ} #S` for the 2D set
/// `S = {k₁ ∈ Z²/λ : |k₁| ∼ N₁, |k − k₁| ∼ N₂, ||k₁|² + |k − k₁|² − τ| ≤ w}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxCount2D {
    pub lambda: i64,
    pub n1: f64,
    pub n2: f64,
    pub w: f64,
    pub count: u64,
    /// A maximizing `k` (up to the symmetries of `Z²`).
    pub k: (f64, f64),
}

/// Direct scan over all `k` in one octant (the set is invariant under the
/// symmetries of the square) with a sliding window over the sorted phases.
/// Only `N₁ ≥ N₂ > 0` is required, so comparable frequencies are allowed.
pub fn max_count_2d(lambda: i64, n1: f64, n2: f64, w: f64) -> Result<MaxCount2D> {
    if lambda < 1 {
        return domain(format!("λ must be at least 1, got {lambda}"));
    }
    if !(n2 > 0.0 && n1 >= n2) {
        return domain(format!("need N₁ ≥ N₂ > 0, got N₁ = {n1}, N₂ = {n2}"));
    }
    if !(w > 0.0 && w.is_finite()) {
        return domain("window half-width must be positive");
    }
    let lf = lambda as f64;
    let width = (2.0 * w * lf * lf).floor() as i64;
    let in_annulus = |j: (i64, i64), n: f64| {
        let r = ((j.0 * j.0 + j.1 * j.1) as f64).sqrt();
        2.0 * r >= lf * n && r <= 2.0 * lf * n
    };
    let r2 = (2.0 * lf * n2).floor() as i64;
    let kmax = (2.0 * lf * (n1 + n2)).floor() as i64;
    let best = (0..=kmax)
        .into_par_iter()
        .map_init(Vec::new, |phases: &mut Vec<i64>, kx| {
            let mut best = (0u64, (kx, 0i64));
            for ky in 0..=kx {
                phases.clear();
                for y in -r2..=r2 {
                    for x in -r2..=r2 {
                        let j = (kx - x, ky - y);
                        if in_annulus((x, y), n2) && in_annulus(j, n1) {
                            phases.push(j.0 * j.0 + j.1 * j.1 + x * x + y * y);
                        }
                    }
                }
                phases.sort_unstable();
                let mut hi = 0;
                for lo in 0..phases.len() {
                    while hi < phases.len() && phases[hi] - phases[lo] <= width {
                        hi += 1;
                    }
                    if (hi - lo) as u64 > best.0 {
                        best = ((hi - lo) as u64, (kx, ky));
                    }
                }
            }
            best
        })
        .reduce(|| (0, (0, 0)), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(MaxCount2D { lambda, n1, n2, w, count: best.0, k: (best.1 .0 as f64 / lf, best.1 .1 as f64 / lf) })
}
