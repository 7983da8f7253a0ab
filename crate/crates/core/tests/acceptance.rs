//! End-to-end checks of the worked examples. Prints one line per criterion
//! and exits with status 1 if any of them fails.

use std::time::{Duration, Instant};

use lldlab::analysis::{self, AnalysisInput, AnalysisOptions, LogDerivSpec};
use lldlab::dirichlet::{self, Atom, AtomicMeasure, DirichletSeries, MERGE_TOL};
use lldlab::divisor::{gamma_divisor, sinh_divisor, zeta_divisor, Classification, Divisor, DivisorPoint};
use lldlab::hadamard::{self, TailBoundMode, TruncatedDivisor, TruncationSpec};
use lldlab::newtoncramer::{self, ClassifyInputs, PnParams, PnSpec, RhsSource};
use lldlab::specfun;
use lldlab::testfn::TestFunction;
use lldlab::vertline::{self, LineFunction};
use lldlab::{Complex64, LabError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;
const M_MAX: u32 = 6;
const T_MAX: f64 = 65_536.0;
const ZETA_T_MAX: f64 = 1024.0;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn trunc(n: usize) -> TruncationSpec {
    TruncationSpec::new(n, 1e-9, TailBoundMode::FromTailModel).unwrap()
}

fn within(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

fn comb_atoms(start: f64, mass: f64, count: usize) -> AtomicMeasure {
    let atoms = (1..=count).map(|m| Atom { freq: start * m as f64, mass: c(mass, 0.0) }).collect();
    AtomicMeasure::from_unsorted(atoms, start * count as f64, MERGE_TOL)
}

fn convergence_exponents() -> Outcome {
    let t0 = Instant::now();
    let got = [
        sinh_divisor().convergence_exponent(),
        gamma_divisor().convergence_exponent(),
        zeta_divisor().convergence_exponent(),
        hadamard::sharp_example_divisor().convergence_exponent(),
    ];
    let elapsed = t0.elapsed();
    let got: Vec<Option<u32>> = got.into_iter().map(|r| r.ok()).collect();
    let ok = got == [Some(2), Some(2), Some(2), Some(1)] && within(elapsed, 1.0);
    outcome(ok, format!("sinh, Gamma, zeta, sharp = {got:?} in {elapsed:.2?}"))
}

fn multinomial_coefficients() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let mut lambdas: Vec<f64> = Vec::new();
        while lambdas.len() < n {
            let l = rng.random_range(0.5..3.0);
            if lambdas.iter().all(|x: &f64| (x - l).abs() > 0.05) {
                lambdas.push(l);
            }
        }
        lambdas.sort_by(f64::total_cmp);
        let coeffs: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..0.5), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let f = DirichletSeries::new(lambdas.clone(), coeffs, 0.0).unwrap();
        let t = 6.0 * lambdas[0];
        let a = dirichlet::log_atoms(&f, t, MERGE_TOL).unwrap();
        let b = dirichlet::series_log_oracle(&f, t).unwrap();
        worst = worst.max(a.max_relative_difference(&b, MERGE_TOL, 1e-300));
    }
    let comb = dirichlet::log_atoms(&DirichletSeries::one_minus_exp(), 20.5, MERGE_TOL).unwrap();
    let comb_err = (1..=20)
        .map(|k| match comb.atoms.iter().find(|a| (a.freq - k as f64).abs() < 1e-9) {
            Some(a) => (a.mass - 1.0 / k as f64).norm(),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    let ok = worst <= 1e-10 && comb_err <= 1e-12 && within(elapsed, 10.0);
    outcome(ok, format!("random max rel diff {worst:.1e}, 1 - e^-s max |b_k - 1/k| {comb_err:.1e}, {elapsed:.2?}"))
}

fn roundtrip() -> Outcome {
    let cases = [
        DirichletSeries::one_minus_exp(),
        DirichletSeries::new(vec![0.7, 1.3], vec![c(0.4, -0.2), c(-0.3, 0.1)], 0.0).unwrap(),
        DirichletSeries::new(vec![1.0, 2.5, 4.0], vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.25, 0.25)], 0.0).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for f in &cases {
        let re = f.abscissa() + 5.0;
        let samples: Vec<Complex64> = (0..10).map(|j| c(re, -9.0 + 2.0 * j as f64)).collect();
        worst = worst.max(dirichlet::roundtrip_check(f, 12.0, &samples).unwrap());
    }
    outcome(worst <= 1e-8, format!("max |exp(-sum atoms) - f| = {worst:.1e} over 3 series x 10 points"))
}

fn pn_comb() -> Outcome {
    let t0 = Instant::now();
    // 1 - e^{-s} = 2 e^{-s/2} sinh(s/2): discrepancy 1/2, divisor 2 pi i Z
    let spec = PnSpec {
        divisor: Divisor::vertical_lattice(2.0 * std::f64::consts::PI, 1).unwrap(),
        origin_multiplicity: 1,
        d: None,
        known_discrepancy: Some(vec![c(0.5, 0.0)]),
        rhs: RhsSource::Atoms { origin: Vec::new(), atoms: comb_atoms(1.0, 1.0, 40) },
    };
    let phi = TestFunction::bump(2.5, 0.9).unwrap();
    let params = PnParams { tau: None, trunc: trunc(100_000), tol: 1e-10 };
    let r = newtoncramer::verify_poisson_newton(&spec, &phi, &params);
    let elapsed = t0.elapsed();
    match r {
        Ok(r) => {
            let want = phi.eval(2.0, 0) + phi.eval(3.0, 0);
            let err = (r.lhs - want).norm();
            outcome(err < 1e-5 && within(elapsed, 30.0), format!("|<W,phi> - phi(2) - phi(3)| = {err:.1e} in {elapsed:.2?}"))
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn sinh_spec(a: f64, b: f64) -> PnSpec {
    // e^{a s + b s^2} sinh s: L^{-1}(a + 2 b s + coth s) = (1 + a) delta + 2 b delta' + sum 2 delta_{2m}
    let mut origin = vec![c(1.0 + a, 0.0)];
    if b != 0.0 {
        origin.push(c(2.0 * b, 0.0));
    }
    PnSpec {
        divisor: sinh_divisor(),
        origin_multiplicity: 1,
        d: None,
        known_discrepancy: None,
        rhs: RhsSource::Atoms { origin, atoms: comb_atoms(2.0, 2.0, 40) },
    }
}

fn pn_sinh() -> Outcome {
    let phi = TestFunction::bump(2.0, 0.5).unwrap();
    let params = PnParams { tau: None, trunc: trunc(100_000), tol: 1e-10 };
    match newtoncramer::verify_poisson_newton(&sinh_spec(0.0, 0.0), &phi, &params) {
        Ok(r) => outcome(r.residual < 1e-5, format!("residual {:.1e} after translation by tau = {}", r.residual, r.tau)),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn vertical_orders() -> Outcome {
    let cases: [(&str, LineFunction, [f64; 2], f64); 3] = [
        ("sinh", LineFunction::coth(), [0.5, 2.0], T_MAX),
        ("Gamma", LineFunction::digamma(), [1.0, 3.0], T_MAX),
        ("zeta", LineFunction::zeta(), [1.5, 3.0], ZETA_T_MAX),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, g, cs, t_max) in cases {
        let t0 = Instant::now();
        let r = vertline::vertical_order_estimate(&g, &cs, M_MAX, t_max, TOL);
        let elapsed = t0.elapsed();
        match r {
            Ok(vo) => {
                let good = vo.m0 == Some(2) && !vo.c_dependence && within(elapsed, 60.0);
                ok &= good;
                parts.push(format!("{name} m0 = {:?} per line {:?} ({elapsed:.1?})", vo.m0, vo.per_line));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name} error: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn binet() -> Outcome {
    let gamma = specfun::EULER_GAMMA;
    let e1 = (specfun::digamma(c(1.0, 0.0)).unwrap().psi + gamma).norm();
    let e2 = (specfun::digamma(c(0.5, 0.0)).unwrap().psi + gamma + 2.0 * 2f64.ln()).norm();
    let e3 = (specfun::bernoulli_integral() - 1.0 / 24.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut valid_violations = 0;
    let mut worst = (0.0, c(0.0, 0.0));
    for _ in 0..1000 {
        let s = c(rng.random_range(0.5..20.0), rng.random_range(-20.0..20.0));
        let r = specfun::digamma(s).unwrap();
        if !r.bound_ok {
            violations += 1;
        }
        if r.phi_prime.norm() > r.valid_bound {
            valid_violations += 1;
        }
        let ratio = r.phi_prime.norm() / r.bound;
        if ratio > worst.0 {
            worst = (ratio, s);
        }
    }
    let ok = e1 < 1e-10 && e2 < 1e-10 && e3 < 1e-10 && violations == 0;
    outcome(
        ok,
        format!(
            "psi(1) err {e1:.1e}, psi(1/2) err {e2:.1e}, integral err {e3:.1e}; |phi'| <= 1/(24 Re s) fails at {violations}/1000 \
             (worst ratio {:.3} at {}), |phi'| <= 1/(12 (Re s)^2) fails at {valid_violations}/1000",
            worst.0, worst.1
        ),
    )
}

fn extraction() -> Outcome {
    let params = PnParams { tau: None, trunc: trunc(200_000), tol: 1e-10 };
    let mut ok = true;
    let mut parts = Vec::new();
    for a in [0.5, 2.0] {
        match newtoncramer::extract_discrepancy(&sinh_spec(a, 0.0), 3, 1.0, &params) {
            Ok(p) => {
                let err = p.coeffs.first().map_or(f64::INFINITY, |c0| (c0 + a).norm());
                ok &= err < 1e-5;
                parts.push(format!("a = {a}: |c0 + a| = {err:.1e}"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("a = {a}: {e}"));
            }
        }
    }
    let (a, b) = (0.7, -0.4);
    match newtoncramer::extract_discrepancy(&sinh_spec(a, b), 4, 1.0, &params) {
        Ok(p) => {
            let get = |j: usize| p.coeffs.get(j).copied().unwrap_or_default();
            let err = (get(0) + a).norm().max((get(1) + 2.0 * b).norm());
            ok &= p.coeffs.len() >= 2 && err < 1e-4;
            parts.push(format!("quadratic: max err {err:.1e}"));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("quadratic: {e}"));
        }
    }
    match newtoncramer::extract_discrepancy(&sinh_spec(0.0, 0.0), 3, 1.0, &params) {
        Ok(p) => {
            let m = p.coeffs.iter().map(|x| x.norm()).fold(p.trimmed_max, f64::max);
            ok &= m < 1e-5;
            parts.push(format!("sinh: max |c_l| {m:.1e}"));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("sinh: {e}"));
        }
    }
    outcome(ok, parts.join("; "))
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut prop2_ok = true;
    let mut worst_m0 = 0;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let sigma1: f64 = rng.random_range(-3.0..1.0);
        let points: Vec<DivisorPoint> = (0..n)
            .map(|_| {
                let rho = c(sigma1 - rng.random_range(0.0..4.0), rng.random_range(-30.0..30.0));
                let mult = [-2, -1, 1, 2, 3][rng.random_range(0..5)];
                DivisorPoint::new(rho, mult).unwrap()
            })
            .collect();
        let div = Divisor::explicit(points).unwrap();
        let d = div.convergence_exponent().unwrap();
        let s1 = div.sigma1(100).unwrap().value;
        let td = TruncatedDivisor::new(&div, d, s1, &trunc(100));
        let g = LineFunction::hadamard(td, s1);
        match vertline::vertical_order_estimate(&g, &[s1 + 0.5, s1 + 2.0], M_MAX, T_MAX, TOL) {
            Ok(vo) => match vo.m0 {
                Some(m) if m <= d + 1 => worst_m0 = worst_m0.max(m),
                _ => prop2_ok = false,
            },
            Err(_) => prop2_ok = false,
        }
    }
    let mut mono_ok = true;
    let mut pairs = Vec::new();
    for (name, g) in [("coth", LineFunction::coth()), ("digamma", LineFunction::digamma())] {
        for (c0, c1) in [(0.5, 2.0), (1.0, 4.0)] {
            match vertline::c_monotonicity_check(&g, 2, c0, c1, T_MAX, TOL) {
                Ok(m) => {
                    mono_ok &= m.holds;
                    pairs.push(format!("{name} ({c0},{c1}) {:.4} <= {:.4}", m.lhs, m.rhs));
                }
                Err(e) => {
                    mono_ok = false;
                    pairs.push(format!("{name} ({c0},{c1}) {e}"));
                }
            }
        }
    }
    outcome(
        prop2_ok && mono_ok,
        format!("m0(f_H) <= d + 1 on 20 finite divisors: {prop2_ok} (max m0 {worst_m0}); monotonicity: {}", pairs.join(", ")),
    )
}

fn sharpness() -> Outcome {
    let lower = (5..=30).all(|k| hadamard::sharp_ratio(k, 1.0, 0.0).map(|r| r.lower_bound_check).unwrap_or(false));
    let growth: Vec<f64> = [100, 150, 200].iter().map(|&k| hadamard::sharp_ratio(k, 1.0, 0.1).unwrap().ratio_log).collect();
    let increasing = growth.windows(2).all(|w| w[1] > w[0]);
    let flat: Vec<f64> = (1..=300).map(|k| hadamard::sharp_ratio(k, 1.0, 0.0).unwrap().ratio_log).collect();
    let head = flat[..150].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = flat[150..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounded = flat.iter().all(|x| x.is_finite()) && tail <= head;
    outcome(
        lower && increasing && bounded,
        format!(
            "lower bound k = 5..30: {lower}; ratio_log at eps 0.1 for k = 100, 150, 200: {growth:.3?}; \
             eps 0 max log ratio k <= 150: {head:.3}, 150 < k <= 300: {tail:.3}"
        ),
    )
}

fn input(div: Divisor, logderiv: LogDerivSpec, dirichlet: bool, cs: [f64; 2]) -> AnalysisInput {
    AnalysisInput { name: None, divisor: div, logderiv, is_dirichlet: dirichlet, cs: Some(cs.to_vec()), extraction: None }
}

fn classification() -> Outcome {
    let cases = [
        ("sinh", input(sinh_divisor(), LogDerivSpec::Coth, false, [0.5, 2.0]), T_MAX),
        ("Gamma", input(gamma_divisor(), LogDerivSpec::Digamma, false, [1.0, 3.0]), T_MAX),
        ("zeta", input(zeta_divisor(), LogDerivSpec::Zeta, true, [1.5, 3.0]), ZETA_T_MAX),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, inp, t_max) in cases {
        let opts = AnalysisOptions { t_max, ..Default::default() };
        match analysis::analyze(&inp, &opts) {
            Ok(r) => {
                let m0_ok = r.m0_estimate.is_some_and(|m| m <= r.d);
                ok &= m0_ok && r.classification == Classification::HadamardType;
                parts.push(format!("{name}: {:?} (m0 {:?}, d {}, rule {:?})", r.classification, r.m0_estimate, r.d, r.rule));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let rejected = newtoncramer::classify(&ClassifyInputs {
        d: 1,
        m0_estimate: Some(1),
        gw_estimate: None,
        gw_residual_ok: false,
        is_dirichlet: true,
    });
    let reject_ok = match &rejected {
        Err(e @ LabError::DirichletExponentTooSmall { d: 1 }) => e.to_string().contains("convergence exponent at least 2"),
        _ => false,
    };
    ok &= reject_ok;
    parts.push(format!("Dirichlet with d = 1 rejected: {reject_ok}"));
    outcome(ok, parts.join("; "))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("convergence exponents", convergence_exponents),
        ("multinomial coefficients", multinomial_coefficients),
        ("logarithm roundtrip", roundtrip),
        ("Poisson-Newton comb", pn_comb),
        ("Poisson-Newton sinh", pn_sinh),
        ("vertical orders", vertical_orders),
        ("Binet suite", binet),
        ("discrepancy extraction", extraction),
        ("property suite", properties),
        ("sharpness", sharpness),
        ("classification", classification),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        let tag = if o.ok { "PASS" } else { "FAIL" };
        if !o.ok {
            failed += 1;
        }
        println!("{tag} criterion {:>2} {name}: {} [{:.1?}]", i + 1, o.detail, t0.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
