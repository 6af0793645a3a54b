use super::{auto_lambda, run_counting, run_drift_1d, CountingSweepConfig, ExperimentConfig, LambdaRule};
use crate::counting::*;
use crate::field::{bump_lp_norm, random, FrequencyMultiplier, SpaceTimeField, SpectralField};
use crate::imethod::{apply_i, first_energy, m_symbol, smoothing_check, IMethodParams};
use crate::lattice::{bracket, FrequencyIndex, TorusLattice};
use crate::multilinear::*;
use crate::solver::{energy, evolve, rescale, SolverConfig};
use crate::strichartz::{bilinear_norm, linear_strichartz_ratio, random_annulus_field};
use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub entries: Vec<SelftestEntry>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SelftestEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Check {
    let scale = a.abs().max(b.abs()).max(1.0);
    ensure((a - b).abs() <= tol * scale, format!("{what}: {a} vs {b}"))
}

trait Lift<T> {
    fn lift(self) -> std::result::Result<T, String>;
}

impl<T> Lift<T> for crate::Result<T> {
    fn lift(self) -> std::result::Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn lattice_checks() -> Check {
    let l = TorusLattice::new(1, 2.0, 8).lift()?;
    close(l.measure_integrate(|_| Complex64::new(1.0, 0.0)).re, 4.0, 1e-15, "constant integrand")?;
    ensure(l.measure_integrate(|_| zero()) == zero(), "zero integrand")?;
    let l2 = TorusLattice::new(2, 4.0, 8).lift()?;
    let point = l2.measure_integrate(|n| if n.is_zero() { Complex64::new(1.0, 0.0) } else { zero() });
    close(point.re, 1.0 / 16.0, 1e-15, "point mass")?;
    let one = TorusLattice::new(1, 1.0, 8).lift()?;
    ensure(one.frequency_of(FrequencyIndex::new1(3)).lift()?[0] == 3.0, "λ = 1 frequency")?;
    ensure(l2.frequency_of(FrequencyIndex::new2(2, -1)).lift()? == [0.5, -0.25], "division")?;
    ensure(l.frequency_of(FrequencyIndex::new1(0)).lift()?[0] == 0.0, "zero frequency")
}

fn field_checks() -> Check {
    let l = TorusLattice::new(2, 2.0, 8).lift()?;
    let c = Complex64::new(0.5, -0.25);
    let f = SpectralField::from_grid(l, &vec![c; l.points()]).lift()?;
    close(f.coeff(FrequencyIndex::new2(0, 0)).re, c.re * 4.0, 1e-12, "constant transform")?;
    ensure(f.coeffs().iter().skip(1).all(|v| v.norm() < 1e-12), "constant has one mode")?;
    let g = random::band(l, 1.5, 1.0, 3);
    let back = SpectralField::from_grid(l, &g.to_grid()).lift()?;
    ensure(back.sub(&g).lift()?.l2_norm() < 1e-12, "round trip")?;
    close(g.sobolev_norm(0.0), g.l2_norm(), 1e-12, "s = 0 Sobolev")?;
    ensure(SpectralField::zeros(l).sobolev_norm(1.0) == 0.0, "zero Sobolev")?;
    let one = TorusLattice::new(1, 1.0, 8).lift()?;
    let pm = SpectralField::point_mass(one, FrequencyIndex::new1(3), Complex64::new(1.0, 0.0)).lift()?;
    close(pm.sobolev_norm(1.0), bracket(3.0), 1e-12, "point mass Sobolev")?;
    ensure(g.propagate_linear(0.0) == g, "t = 0 propagation")?;
    close(g.propagate_linear(0.37).l2_norm(), g.l2_norm(), 1e-12, "unitarity")?;
    let l1 = TorusLattice::new(1, 2.0, 16).lift()?;
    let phi = random::band(l1, 3.0, 1.0, 5);
    let u = SpaceTimeField::windowed_free_evolution(&phi, 256).lift()?;
    close(u.xsb_norm(0.0, 0.0).lift()?, bump_lp_norm(2.0) * phi.l2_norm(), 1e-3, "X^(0,0) of free flow")?;
    close(u.lp_spacetime_norm(2.0).lift()?, u.xsb_norm(0.0, 0.0).lift()?, 1e-10, "L² routes")?;
    let zf = SpaceTimeField::windowed_free_evolution(&SpectralField::zeros(l1), 16).lift()?;
    ensure(zf.xsb_norm(1.0, 0.5).lift()? == 0.0, "zero X^(s,b)")?;
    let unit = TorusLattice::new(1, 1.0, 8).lift()?;
    let cst = SpectralField::from_grid(unit, &vec![c; 8]).lift()?;
    let frames = SpaceTimeField::new(vec![cst; 16], 0.0, 1.0 / 16.0).lift()?;
    close(frames.lp_spacetime_norm(4.0).lift()?, c.norm(), 1e-12, "constant L^p")?;
    ensure(FrequencyMultiplier::constant(l, 1.0).apply(&g).lift()? == g, "identity multiplier")?;
    ensure(FrequencyMultiplier::constant(l, 0.0).apply(&g).lift()?.l2_norm() == 0.0, "zero multiplier")?;
    let lifted = FrequencyMultiplier::bessel(l, 1.0).apply(&g).lift()?;
    close(lifted.sobolev_norm(0.0), g.sobolev_norm(1.0), 1e-12, "Bessel multiplier")
}

fn solver_checks() -> Check {
    let l = TorusLattice::new(1, 1.0, 16).lift()?;
    let z = evolve(&SpectralField::zeros(l), &SolverConfig::new(1e-3, 0.01)).lift()?;
    ensure(z.frames().iter().all(|f| f.l2_norm() == 0.0), "zero trajectory")?;
    ensure(energy(&SpectralField::zeros(l)) == 0.0, "zero energy")?;
    let f = random::band(l, 4.0, 1.0, 2);
    close(energy(&f.translated([0.31, 0.0])), energy(&f), 1e-12, "translation invariance")?;
    ensure(rescale(&f, 1.0).lift()?.sub(&f).lift()?.l2_norm() < 1e-14, "λ = 1 rescaling")
}

fn imethod_checks() -> Check {
    let l = TorusLattice::new(1, 2.0, 32).lift()?;
    let f = random::band(l, 2.5, 1.0, 7);
    let full = IMethodParams::new(4.0, 1.0).lift()?;
    ensure(m_symbol(&full, l).values().iter().all(|&m| m == 1.0), "s = 1 symbol")?;
    let p = IMethodParams::new(3.0, 0.5).lift()?;
    ensure(apply_i(&p, &f) == f, "I fixes low data")?;
    ensure(apply_i(&p, &random::band(l, 7.0, 1.0, 1)).sobolev_norm(1.0).is_finite(), "finite H¹")?;
    close(first_energy(&p, &f), energy(&f), 1e-15, "E¹ on low data")?;
    ensure(first_energy(&p, &SpectralField::zeros(l)) == 0.0, "zero E¹")?;
    let (r, q) = smoothing_check(&p, &f, 0.5).lift()?;
    ensure(r.is_finite() && q.is_finite(), "finite smoothing pair")?;
    let (r, q) = smoothing_check(&full, &random::band(l, 7.0, 1.0, 1), 0.5).lift()?;
    close(r, 1.0, 1e-12, "s = 1 ratio")?;
    close(q, 1.0, 1e-12, "s = 1 quotient")
}

fn multilinear_checks() -> Check {
    let l = TorusLattice::new(1, 1.0, 8).lift()?;
    let band = Band::new(l);
    ensure(band.gamma_count(2) == band.len() as u128, "Γ₂ count")?;
    let (a, _) = band.sample(6, 100, 9);
    let (b, _) = band.sample(6, 100, 9);
    ensure(a == b, "reproducible sampling")?;
    let one = MultilinearSymbol::constant(2, 1.0).lift()?;
    ensure(lambda_n(&one, &SpectralField::zeros(l)).lift()?.value == zero(), "zero form")?;
    let six = elongate(&one, 1, 4).lift()?;
    ensure(six.arity() == 6, "elongated arity")?;
    let tuple: Vec<FrequencyIndex> = [1, -2, 0, 3, -1, -1].iter().map(|&n| FrequencyIndex::new1(n)).collect();
    ensure(six.eval(&tuple) == Some(1.0), "constant elongation")?;
    let p6 = m6_symbol(&IMethodParams::new(2.0, 0.5).lift()?, l);
    ensure(elongate(&p6, 3, 4).lift()?.arity() == 10, "arity bookkeeping")?;
    let p = IMethodParams::new(8.0, 0.5).lift()?;
    ensure(m6_eval(&p, &l, &tuple).lift()? == M6Value::Regular(1.0), "low tuple")?;
    let k = 3;
    let cancel: Vec<FrequencyIndex> = (0..6).map(|j| FrequencyIndex::new1(if j % 2 == 0 { k } else { -k })).collect();
    let q = IMethodParams::new(2.0, 0.5).lift()?;
    let expect = q.m(k as f64).powi(6);
    ensure(m6_eval(&q, &l, &cancel).lift()? == M6Value::Fallback(expect), "full cancellation")?;
    let low = random::band(l, 1.5, 1.0, 4);
    let e2 = second_energy(&p, &low).lift()?.value;
    close(e2, first_energy(&p, &low), 1e-12, "E² on low data")?;
    close(e2, energy(&low), 1e-12, "E on low data")?;
    ensure(second_energy(&p, &SpectralField::zeros(l)).lift()?.value == 0.0, "zero E²")?;
    let wide = random::band(l, 3.5, 1.0, 4);
    let sym = m6_symbol(&q, l);
    for t in gamma_n_enumerate(l, 6, GammaMode::Sample { draws: 200, seed: 1 }).lift()? {
        if let Some(v) = sym.eval(&t) {
            ensure(v.is_finite(), "real finite M6")?;
        }
    }
    let mut cfg = SolverConfig::new(1e-3, 0.01);
    cfg.linear_only = true;
    let traj = evolve(&wide, &cfg).lift()?;
    let d = differentiation_check(&one, &traj, false).lift()?;
    ensure(d.max_rel_error <= 1e-6, format!("linear differentiation error {}", d.max_rel_error))?;
    let zt = evolve(&SpectralField::zeros(l), &cfg).lift()?;
    let dz = differentiation_check(&one, &zt, false).lift()?;
    ensure(dz.max_abs_error == 0.0, "zero differentiation")?;
    let short = evolve(&low.scaled(Complex64::new(0.3, 0.0)), &SolverConfig::new(1e-3, 0.01).dealiased(true)).lift()?;
    let inc = increment_check(&p, &short, 0.0, 0.0).lift()?;
    ensure(inc.lhs == 0.0 && inc.rhs == 0.0, "δ = 0 increment")?;
    let inc = increment_check(&p, &short, 0.0, 0.01).lift()?;
    ensure(inc.rhs.abs() <= 1e-8 && inc.lhs.abs() <= 1e-8, "low-data increment")?;
    let l2 = TorusLattice::new(2, 1.0, 8).lift()?;
    let low2 = random::band(l2, 1.5, 1.0, 2);
    let p2 = IMethodParams::new(8.0, 0.7).lift()?;
    let traj2 = evolve(&low2, &SolverConfig::new(1e-3, 0.01).dealiased(true)).lift()?;
    let tr = tr_decomposition_2d(&p2, &traj2, 0.01, 100, 1).lift()?;
    ensure(tr.tr1.abs() < 1e-12 && tr.tr2.abs() < 1e-12, "Case I symbol vanishes")?;
    let tr0 = tr_decomposition_2d(&p2, &traj2, 0.0, 100, 1).lift()?;
    ensure(tr0.tr1 == 0.0 && tr0.tr2 == 0.0 && tr0.direct == 0.0, "t = 0 decomposition")
}

fn counting_checks() -> Check {
    let t = pick_area(&LatticePolygon::new(vec![(0, 0), (1, 0), (0, 1)]).lift()?);
    ensure((t.interior, t.boundary) == (0, 3) && t.holds(), "unit triangle")?;
    let empty = ArcInterval { start: 0.3, width: 0.0 };
    ensure(arc_lattice_points(Ratio::from_integer(25), (Ratio::from_integer(0), Ratio::from_integer(0)), empty).is_empty(), "empty arc")?;
    let lam = 64.0;
    let thin = gauss_count(ConvexDomain::Sector { inner: 0.0, outer: 1.0, angle: 0.0 }, lam).lift()?;
    ensure((thin as f64) <= 2.0 * lam + 2.0, "degenerate sector")?;
    let q = CountingQuery1D::new(4, 16, 2, 10, 1e9, 1.0).lift()?;
    ensure(enumerate_s_1d(&q).is_empty(), "unattainable τ")?;
    close(sup_count_m(&[9], 4.0, 1).lift()?, 1.5, 1e-15, "single-query sweep")?;
    let w = CountingQuery2D::snap(4, (8.0, 0.0));
    let a = CountingQuery2D::new(4, 8.0, 2.0, w, 1.0, 0.1).lift()?;
    ensure(enumerate_a_lambda_2d(&a) <= 1, "forced-empty N₂ window")?;
    let mut last = 0;
    for c in [0.5, 1.0, 2.0, 4.0] {
        let n = enumerate_a_lambda_2d(&CountingQuery2D::new(4, 8.0, 2.0, w, c, 1.0).lift()?);
        ensure(n >= last, "monotone in c")?;
        last = n;
    }
    Ok(())
}

fn strichartz_checks() -> Check {
    let l = crate::strichartz::annulus_lattice(1, 4.0, 4.0).lift()?;
    let f = random_annulus_field(l, 4.0, 1).lift()?;
    close(f.l2_norm(), 1.0, 1e-12, "unit norm")?;
    ensure(f == random_annulus_field(l, 4.0, 1).lift()?, "reproducible annulus data")?;
    ensure(bilinear_norm(&f, &SpectralField::zeros(l)).lift()? == 0.0, "zero partner")?;
    let r = linear_strichartz_ratio(TorusLattice::new(1, 2.0, 16).lift()?, 2.0, 0.0, 0.0, 1, 1).lift()?;
    close(r.max_ratio, 1.0, 1e-10, "p = 2 ratio")
}

fn experiment_checks() -> Check {
    let base = ExperimentConfig {
        name: "selftest".into(),
        dim: 1,
        s: 0.45,
        n_list: vec![16.0],
        lambda: LambdaRule::Explicit { values: vec![1.0] },
        m: 8,
        dt: 2.5e-4,
        t_end: 0.016,
        seeds: vec![1],
        l2: 0.1,
        energy: None,
        checkpoints: 16,
        reconcile: false,
    };
    let out = run_drift_1d(&base).lift()?;
    ensure(out.slope.is_none() && out.slope_flag().starts_with("undefined"), "single threshold flagged")?;
    let worst = out.records.iter().filter_map(|r| r.drift2).fold(0.0, f64::max);
    ensure(worst <= 1e-8, format!("low-data drift {worst}"))?;
    ensure((1..=4096).all(|n| auto_lambda(n as f64, 0.7) <= n as f64), "2D coupling λ ≤ N")?;
    let grid = CountingSweepConfig { lambdas: vec![1, 4], n1_list: vec![8, 16], ..Default::default() };
    ensure(run_counting(&grid).lift()?.rows == run_counting(&grid).lift()?.rows, "deterministic counting")?;
    let none = CountingSweepConfig { lambdas: vec![], ..Default::default() };
    ensure(run_counting(&none).lift()?.rows.is_empty(), "empty sweep")
}

/// Runs the fast sanity examples of every module.
pub fn run_selftest() -> SelftestReport {
    let checks: [(&str, fn() -> Check); 8] = [
        ("lattice", lattice_checks),
        ("field", field_checks),
        ("solver", solver_checks),
        ("imethod", imethod_checks),
        ("multilinear", multilinear_checks),
        ("counting", counting_checks),
        ("strichartz", strichartz_checks),
        ("experiments", experiment_checks),
    ];
    let entries = checks
        .iter()
        .map(|(name, f)| {
            let r = f();
            SelftestEntry {
                name: name.to_string(),
                passed: r.is_ok(),
                detail: r.err().unwrap_or_else(|| "ok".into()),
            }
        })
        .collect();
    SelftestReport { entries }
}
