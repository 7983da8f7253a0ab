//! The distribution `W(f) = D^d L_d` of a divisor, its pairing with test
//! functions, the inverse Laplace transform of `f'/f` paired along vertical
//! lines, and the recovery of the discrepancy polynomial from the identity
//! `W(f) = sum_l c_l delta_0^(l) + L^-1(f'/f)`.

use crate::dirichlet::AtomicMeasure;
use crate::divisor::{Classification, ClassificationRule, Divisor, DivisorPoint};
use crate::error::{LabError, Result};
use crate::hadamard::{TailBoundMode, TruncationSpec};
use crate::par;
use crate::quad;
use crate::sum::ComplexSum;
use crate::testfn::TestFunction;
use crate::vertline::LineFunction;
use num_complex::Complex64;
use serde::Serialize;

/// Default left translation applied before pairing, added to `max(sigma1, 0)`.
pub const DEFAULT_TAU_MARGIN: f64 = 0.3;
/// Largest number of divisor points integrated by quadrature in [`pair_w`].
pub const MAX_HEAD_POINTS: usize = 20_000;
const MAX_PANELS: usize = 16_384;
const MIN_PANELS: usize = 64;
/// Phase advance allowed per 16-point panel.
const PHASE_PER_PANEL: f64 = 6.0;
/// Laplace cutoff for the vertical-line pairing.
const MAX_LINE_U: f64 = 8192.0;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationUsed {
    /// Points summed (all of them contribute through closed forms).
    pub points: usize,
    /// Points whose oscillatory part was integrated by quadrature.
    pub quadrature_points: usize,
    pub radius: f64,
    pub exhausted: bool,
    pub panels: usize,
    /// False when no tail estimate was available or requested.
    pub tail_bounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingResult {
    pub value: Complex64,
    pub abs_error_est: f64,
    pub truncation_used: Option<TruncationUsed>,
}

impl PairingResult {
    fn exact(value: Complex64) -> Self {
        Self { value, abs_error_est: 0.0, truncation_used: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdValue {
    pub value: Complex64,
    /// `2 sum_tail |n| |rho|^-d`; `None` when no tail model applies.
    pub tail_bound: Option<f64>,
    /// Set when some point has `Re rho > 0`, so `|exp(rho t)| <= 1` fails.
    pub heuristic: bool,
}

/// `L_d(t) = sum n rho^-d (exp(rho t) - 1)` for `t >= 0`, zero for `t < 0`.
pub fn l_d_eval(div: &Divisor, d: u32, t: f64, trunc: &TruncationSpec) -> Result<LdValue> {
    if d == 0 {
        return Err(LabError::InvalidParameter("L_d needs d >= 1".into()));
    }
    if t <= 0.0 || div.is_empty() {
        return Ok(LdValue { value: czero(), tail_bound: Some(0.0), heuristic: false });
    }
    let tr = div.truncate(trunc.max_points);
    let parts = par::map_chunks(&tr.points, par::BLOCK, |chunk| {
        let mut s = ComplexSum::new();
        for p in chunk {
            let z = p.rho * t;
            s.add(p.mult as f64 * (z.exp_m1_c()) * p.rho.powi(-(d as i32)));
        }
        s
    });
    let mut total = ComplexSum::new();
    for s in &parts {
        total.merge(s);
    }
    let heuristic = tr.points.iter().any(|p| p.rho.re > 0.0);
    let tail_bound = if tr.exhausted {
        Some(0.0)
    } else if trunc.tail_bound_mode == TailBoundMode::None {
        None
    } else {
        div.tail_abs_sum(d, tr.radius, 0.0).map(|s| 2.0 * s)
    };
    Ok(LdValue { value: total.sum(), tail_bound, heuristic })
}

trait ExpM1 {
    fn exp_m1_c(self) -> Complex64;
}

impl ExpM1 for Complex64 {
    // exp(z) - 1 without cancellation for small |z|
    fn exp_m1_c(self) -> Complex64 {
        if self.norm() < 1e-3 {
            let mut term = self;
            let mut acc = self;
            for k in 2..8 {
                term = term * self / k as f64;
                acc += term;
            }
            acc
        } else {
            self.exp() - 1.0
        }
    }
}

/// `sum_i W_i exp(rho t_i)` over composite Gauss nodes, by Horner in
/// `exp(rho h)` along each node column.
struct OscillatoryRule {
    lo: f64,
    h: f64,
    offsets: Vec<f64>,
    // columns[j][p] = weight * phi^(d)(t_{p,j})
    columns: Vec<Vec<f64>>,
}

impl OscillatoryRule {
    fn new(phi: &TestFunction, order: u32, lo: f64, hi: f64, panels: usize) -> Self {
        let (x, w) = quad::gauss_legendre(16);
        let h = (hi - lo) / panels as f64;
        let offsets: Vec<f64> = x.iter().map(|xi| 0.5 * h * (1.0 + xi)).collect();
        let columns = (0..16)
            .map(|j| {
                (0..panels)
                    .map(|p| 0.5 * h * w[j] * phi.eval(lo + p as f64 * h + offsets[j], order))
                    .collect()
            })
            .collect();
        Self { lo, h, offsets, columns }
    }

    fn abs_weight(&self) -> f64 {
        self.columns.iter().flatten().map(|w| w.abs()).sum()
    }

    fn apply(&self, rho: Complex64) -> Complex64 {
        let g = (rho * self.h).exp();
        let mut out = czero();
        for (off, col) in self.offsets.iter().zip(&self.columns) {
            let mut acc = czero();
            for &f in col.iter().rev() {
                acc = acc * g + f;
            }
            out += (rho * (self.lo + off)).exp() * acc;
        }
        out
    }
}

fn growth_factor(p: &DivisorPoint, b: f64) -> f64 {
    if p.rho.re > 0.0 {
        (p.rho.re * b).exp()
    } else {
        1.0
    }
}

/// `<W, phi> = (-1)^d int_0^inf L_d(t) phi^(d)(t) dt`.
///
/// Each point contributes `(-1)^d n rho^-d (int e^{rho t} phi^(d) - int phi^(d))`.
/// The second integral is `-phi^(d-1)(t0)` with `t0 = max(a, 0)`. The first is
/// integrated by quadrature for the innermost points; for the rest it is
/// replaced by its integration-by-parts expansion at `t0`, whose remainder is
/// bounded by `|rho|^{-D+d} int |phi^(D)|`.
pub fn pair_w(div: &Divisor, d: u32, phi: &TestFunction, trunc: &TruncationSpec) -> Result<PairingResult> {
    if d == 0 {
        return Err(LabError::InvalidParameter("pairing with W needs d >= 1".into()));
    }
    let big_d = phi.max_derivative_order();
    if big_d < d + 1 {
        return Err(LabError::InvalidParameter(format!(
            "test function has derivatives up to {big_d}, pairing needs more than d = {d}"
        )));
    }
    let (a, b) = phi.support();
    let lo = a.max(0.0);
    if b <= lo || div.is_empty() {
        return Ok(PairingResult::exact(czero()));
    }
    let tr = div.truncate(trunc.max_points);
    let pts = &tr.points;
    let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
    let k = big_d - d;

    // boundary data at t0 (all zero when the support starts at a >= 0)
    let at_origin = a < 0.0;
    let prev = if at_origin { phi.eval(0.0, d - 1) } else { 0.0 };
    let boundary: Vec<f64> = (0..k).map(|i| if at_origin { phi.eval(0.0, d + i) } else { 0.0 }).collect();
    let m_top = {
        let nodes = quad::composite_nodes(lo, b, 512);
        nodes.iter().map(|&(t, w)| w * phi.eval(t, big_d).abs()).sum::<f64>()
    };
    let m_d = quad::composite_nodes(lo, b, 512).iter().map(|&(t, w)| w * phi.eval(t, d).abs()).sum::<f64>();

    // remainder weight of each point if its oscillatory part is expanded
    let rem: Vec<f64> = pts
        .iter()
        .map(|p| p.mult.unsigned_abs() as f64 * p.rho.norm().powi(-(big_d as i32)) * growth_factor(p, b) * m_top)
        .collect();
    let mut suffix = vec![0.0; pts.len() + 1];
    for i in (0..pts.len()).rev() {
        suffix[i] = suffix[i + 1] + rem[i];
    }
    let tail_model_on = trunc.tail_bound_mode == TailBoundMode::FromTailModel;
    let tail_top = if tr.exhausted {
        Some(0.0)
    } else if tail_model_on {
        div.tail_abs_sum(big_d, tr.radius, 0.0).map(|s| s * m_top)
    } else {
        None
    };
    let target = 0.1 * trunc.abs_tol;
    let len = b - lo;
    let cap = pts.len().min(MAX_HEAD_POINTS);
    let head = suffix[..=cap].iter().position(|&r| r + tail_top.unwrap_or(0.0) <= target).unwrap_or(cap);
    let omega = pts[..head].iter().map(|p| p.rho.im.abs()).fold(0.0, f64::max);
    let panels = ((len * omega / PHASE_PER_PANEL).ceil() as usize).clamp(MIN_PANELS, MAX_PANELS);

    let head_sum = |panels: usize| -> Complex64 {
        let rule = OscillatoryRule::new(phi, d, lo, b, panels);
        let parts = par::map_chunks(&pts[..head], 64, |chunk| {
            let mut s = ComplexSum::new();
            for p in chunk {
                s.add(p.mult as f64 * p.rho.powi(-(d as i32)) * rule.apply(p.rho));
            }
            s
        });
        let mut total = ComplexSum::new();
        for s in &parts {
            total.merge(s);
        }
        total.sum()
    };
    let (q1, q2) = if head > 0 { (head_sum(panels), head_sum(2 * panels)) } else { (czero(), czero()) };

    // -int phi^(d) = phi^(d-1)(t0) for every enumerated point
    let closed = par::map_chunks(&pts[..], par::BLOCK, |chunk| {
        let mut s = ComplexSum::new();
        if prev != 0.0 {
            for p in chunk {
                s.add(p.mult as f64 * prev * p.rho.inv().powi(d as i32));
            }
        }
        s
    });
    let mut closed_sum = ComplexSum::new();
    for s in &closed {
        closed_sum.merge(s);
    }
    let mut expansion = ComplexSum::new();
    if at_origin && boundary.iter().any(|&v| v != 0.0) {
        let parts = par::map_chunks(&pts[head..], par::BLOCK, |chunk| {
            let mut s = ComplexSum::new();
            for p in chunk {
                let inv = p.rho.inv();
                let mut series = czero();
                let mut pw = inv;
                for (i, &v) in boundary.iter().enumerate() {
                    let sg = if i % 2 == 0 { -1.0 } else { 1.0 };
                    series += sg * v * pw;
                    pw *= inv;
                }
                s.add(p.mult as f64 * inv.powi(d as i32) * series);
            }
            s
        });
        for s in &parts {
            expansion.merge(s);
        }
    }
    let value = sign * (q2 + expansion.sum() + closed_sum.sum());

    let quad_err = (q1 - q2).norm();
    let rem_err = suffix[head];
    let (tail_err, tail_bounded) = if tr.exhausted {
        (0.0, true)
    } else if !tail_model_on {
        (0.0, false)
    } else {
        match div.tail_abs_sum(d, tr.radius, 0.0) {
            Some(s) if s.is_finite() => {
                let r = tr.radius;
                let expansion_size: f64 =
                    boundary.iter().enumerate().map(|(i, v)| v.abs() * r.powi(-(i as i32) - 1)).sum();
                let refined = s * (prev.abs() + expansion_size) + tail_top.unwrap_or(f64::INFINITY);
                (refined.min(2.0 * s * m_d), true)
            }
            _ => (f64::INFINITY, false),
        }
    };
    Ok(PairingResult {
        value,
        abs_error_est: quad_err + rem_err + tail_err,
        truncation_used: Some(TruncationUsed {
            points: pts.len(),
            quadrature_points: head,
            radius: tr.radius,
            exhausted: tr.exhausted,
            panels: 2 * panels,
            tail_bounded,
        }),
    })
}

/// `sum mass phi(freq)` over the atoms.
pub fn pair_atoms(mu: &AtomicMeasure, phi: &TestFunction) -> Complex64 {
    let (a, b) = phi.support();
    let mut s = ComplexSum::new();
    for at in mu.atoms.iter().filter(|at| at.freq > a && at.freq < b) {
        s.add(at.mass * phi.eval(at.freq, 0));
    }
    s.sum()
}

/// `sum_l coeffs[l] (-1)^l phi^(l)(0)`: the action of `sum_l c_l delta_0^(l)`.
pub fn pair_origin(coeffs: &[Complex64], phi: &TestFunction) -> Complex64 {
    let (a, b) = phi.support();
    if !(a < 0.0 && b > 0.0) {
        return czero();
    }
    coeffs
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let sg = if l % 2 == 0 { 1.0 } else { -1.0 };
            c * sg * phi.eval(0.0, l as u32)
        })
        .sum()
}

/// `(1/2 pi) int F(c + iu) Phi(c + iu) du` with `Phi(s) = int phi(t) e^{st} dt`,
/// written as `(-s)^-n int phi^(n)(t) e^{st} dt`. The `u` range doubles until
/// the newest band is negligible; on failure `n` is raised up to 8.
pub fn pair_inverse_laplace_line(
    g: &LineFunction,
    c: f64,
    phi: &TestFunction,
    n: u32,
    tol: f64,
) -> Result<PairingResult> {
    if !(c > g.valid_half_plane) {
        return Err(LabError::InvalidParameter(format!(
            "line Re s = {c} is not right of the validity half-plane Re s > {}",
            g.valid_half_plane
        )));
    }
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let max_n = phi.max_derivative_order().min(8);
    if n > max_n {
        return Err(LabError::InvalidParameter(format!("division order {n} exceeds {max_n}")));
    }
    let mut last_failure = None;
    for order in n..=max_n {
        match line_pairing_once(g, c, phi, order, tol) {
            Ok(r) => return Ok(r),
            Err(e @ LabError::PairingNotConverged(_)) => last_failure = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_failure.expect("at least one attempt"))
}

fn line_pairing_once(g: &LineFunction, c: f64, phi: &TestFunction, n: u32, tol: f64) -> Result<PairingResult> {
    let (a, b) = phi.support();
    let len = b - a;
    let tmax = a.abs().max(b.abs()).max(1.0);
    let hu = (PHASE_PER_PANEL / tmax).min(1.0);
    let growth = (c * a).exp().max((c * b).exp());
    // returns the band integral, the largest |F Phi| on its outermost panel
    // and a rounding bound for the Laplace transform sums
    let band = |u1: f64, u2: f64| -> Result<(Complex64, f64, f64)> {
        let t_panels = ((len * u2 / PHASE_PER_PANEL).ceil() as usize).max(MIN_PANELS);
        let rule = OscillatoryRule::new(phi, n, a, b, t_panels);
        let mass = rule.abs_weight() * growth * f64::EPSILON * 16.0;
        let u_panels = (((u2 - u1) / hu).ceil() as usize).max(1);
        let edge = u2 - (u2 - u1) / u_panels as f64;
        let mut unodes: Vec<(f64, f64)> = Vec::with_capacity(2 * 16 * u_panels);
        for (u, w) in quad::composite_nodes(u1, u2, u_panels) {
            unodes.push((u, w));
            unodes.push((-u, w));
        }
        let vals = par::map_chunks(&unodes, 64, |chunk| -> Result<(ComplexSum, f64, f64)> {
            let mut s = ComplexSum::new();
            let mut env: f64 = 0.0;
            let mut rnd = 0.0;
            for &(u, w) in chunk {
                let sv = Complex64::new(c, u);
                let lap = rule.apply(sv);
                let big_phi = if n == 0 { lap } else { lap * (-sv).powi(-(n as i32)) };
                let fv = g.eval(sv)?;
                let v = fv * big_phi;
                rnd += w * fv.norm() * mass * sv.norm().powi(-(n as i32));
                if u.abs() >= edge {
                    env = env.max(v.norm());
                }
                s.add(w * v);
            }
            Ok((s, env, rnd))
        });
        let mut total = ComplexSum::new();
        let mut env: f64 = 0.0;
        let mut rnd = 0.0;
        for v in vals {
            let (s, e, r) = v?;
            total.merge(&s);
            env = env.max(e);
            rnd += r;
        }
        let scale = 1.0 / (2.0 * std::f64::consts::PI);
        Ok((total.sum() * scale, env * scale, rnd * scale))
    };
    let mut u = 16.0;
    let (mut value, _, mut rounding) = band(0.0, u)?;
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    while u < MAX_LINE_U {
        let (piece, env, rnd) = band(u, 2.0 * u)?;
        value += piece;
        rounding += rnd;
        if rounding > tol * value.norm().max(1.0) {
            return Err(LabError::PairingNotConverged(format!(
                "vertical-line pairing with n = {n}: rounding bound {rounding:.3e} exceeds the tolerance"
            )));
        }
        u *= 2.0;
        last = piece.norm().max(env * u);
        if last <= tol * value.norm().max(1.0) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(PairingResult { value, abs_error_est: 2.0 * last + rounding, truncation_used: None });
            }
        } else {
            quiet = 0;
        }
    }
    Err(LabError::PairingNotConverged(format!(
        "vertical-line pairing with n = {n}: band [{}, {u}] still contributes {last:.3e}",
        u / 2.0
    )))
}

/// Where the inverse Laplace transform of `f'/f` comes from.
#[derive(Debug, Clone)]
pub enum RhsSource {
    /// `sum_l origin[l] delta_0^(l)` plus point masses at positive frequencies.
    Atoms { origin: Vec<Complex64>, atoms: AtomicMeasure },
    /// `f'/f` itself, paired along `Re s = c`.
    Line { function: LineFunction, c: f64 },
}

impl RhsSource {
    pub fn pair(&self, phi: &TestFunction, tol: f64) -> Result<PairingResult> {
        match self {
            RhsSource::Atoms { origin, atoms } => {
                Ok(PairingResult::exact(pair_origin(origin, phi) + pair_atoms(atoms, phi)))
            }
            RhsSource::Line { function, c } => pair_inverse_laplace_line(function, *c, phi, 0, tol),
        }
    }
}

/// Input to [`verify_poisson_newton`] and [`extract_discrepancy`].
#[derive(Debug, Clone)]
pub struct PnSpec {
    /// Divisor without the origin.
    pub divisor: Divisor,
    /// Order of the zero (positive) or pole (negative) at the origin.
    pub origin_multiplicity: i64,
    /// Convergence exponent; computed from the divisor when `None`.
    pub d: Option<u32>,
    /// Coefficients `c_0, c_1, ...` of `P_f`; zero when `None`.
    pub known_discrepancy: Option<Vec<Complex64>>,
    pub rhs: RhsSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PnParams {
    /// Translation `g(s) = f(s + tau)`; `max(sigma1, 0) + 0.3` when `None`.
    pub tau: Option<f64>,
    pub trunc: TruncationSpec,
    pub tol: f64,
}

impl Default for PnParams {
    fn default() -> Self {
        Self { tau: None, trunc: TruncationSpec::default(), tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PnReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub abs_error_est: f64,
    pub tau: f64,
    pub d: u32,
    /// Discrepancy coefficients of the translated function used on the
    /// right-hand side.
    pub c_coeffs: Vec<Complex64>,
    pub truncation: Option<TruncationUsed>,
}

struct Translated {
    divisor: Divisor,
    tau: f64,
    d: u32,
}

fn translated(spec: &PnSpec, tau: Option<f64>) -> Result<Translated> {
    let d = match spec.d {
        Some(d) => d,
        None if spec.divisor.is_empty() => 1,
        None => spec.divisor.convergence_exponent()?,
    }
    .max(1);
    let sigma1 = if spec.divisor.is_empty() { 0.0 } else { spec.divisor.sigma1(10_000)?.value };
    let tau = tau.unwrap_or(sigma1.max(0.0) + DEFAULT_TAU_MARGIN);
    if !tau.is_finite() || tau < 0.0 {
        return Err(LabError::InvalidParameter(format!("translation must be finite and >= 0, got {tau}")));
    }
    if spec.origin_multiplicity != 0 && tau == 0.0 {
        return Err(LabError::ZeroInDivisor);
    }
    let mut parts = Vec::new();
    if !spec.divisor.is_empty() {
        parts.push(spec.divisor.translate(-tau)?);
    }
    if spec.origin_multiplicity != 0 {
        parts.push(Divisor::explicit(vec![DivisorPoint::new(
            Complex64::new(-tau, 0.0),
            spec.origin_multiplicity,
        )?])?);
    }
    let divisor = match parts.len() {
        0 => Divisor::explicit(Vec::new())?,
        1 => parts.pop().expect("one part"),
        _ => Divisor::union(parts)?,
    };
    Ok(Translated { divisor, tau, d })
}

/// Coefficients of `B(s)` in `P_g(s) = P_f(s + tau) - B(s)`, where
/// `g(s) = f(s + tau)`, with an error bound for each.
fn shift_correction(spec: &PnSpec, d: u32, tau: f64, trunc: &TruncationSpec) -> (Vec<Complex64>, Vec<f64>) {
    if d < 2 || tau == 0.0 {
        return (Vec::new(), Vec::new());
    }
    let deg = (d - 2) as usize;
    let n0 = spec.origin_multiplicity as f64;
    let tr = spec.divisor.truncate(trunc.max_points);
    let mut coeffs = Vec::with_capacity(deg + 1);
    let mut errs = Vec::with_capacity(deg + 1);
    let tail = if spec.divisor.is_empty() || tr.exhausted {
        Some(0.0)
    } else {
        spec.divisor.tail_abs_sum(d, tr.radius, 0.0)
    };
    for j in 0..=deg {
        let jj = j as u32;
        let parts = par::map_chunks(&tr.points, par::BLOCK, |chunk| {
            let mut s = ComplexSum::new();
            for p in chunk {
                let inv = p.rho.inv();
                let mut head = czero();
                for l in jj..=(d - 2) {
                    head += binomial(l, jj) * tau.powi((l - jj) as i32) * inv.powi(l as i32 + 1);
                }
                s.add(p.mult as f64 * (head - (p.rho - tau).powi(-(jj as i32) - 1)));
            }
            s
        });
        let mut total = ComplexSum::new();
        for s in &parts {
            total.merge(s);
        }
        let origin = -n0 * (-tau).powi(-(jj as i32) - 1);
        coeffs.push(total.sum() + origin);
        let bound = 2.0 * binomial(d - 1, jj) * tau.powi((d - 1 - jj) as i32);
        errs.push(tail.map_or(f64::INFINITY, |t| bound * t));
    }
    (coeffs, errs)
}

fn add_poly(a: &[Complex64], b: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() + sign * b.get(i).copied().unwrap_or_default())
        .collect()
}

/// Coefficients of `x -> p(x + shift)`.
fn recenter(p: &[Complex64], shift: f64) -> Vec<Complex64> {
    (0..p.len())
        .map(|m| {
            (m..p.len())
                .map(|j| p[j] * binomial(j as u32, m as u32) * shift.powi((j - m) as i32))
                .sum()
        })
        .collect()
}

fn recenter_err(e: &[f64], shift: f64) -> Vec<f64> {
    (0..e.len())
        .map(|m| (m..e.len()).map(|j| e[j] * binomial(j as u32, m as u32) * shift.abs().powi((j - m) as i32)).sum())
        .collect()
}

/// Checks `<W(g), e^{tau t} phi> = sum c^g_l (-1)^l (e^{tau t} phi)^(l)(0) + <L^-1(f'/f), phi>`
/// for the translate `g(s) = f(s + tau)`, whose divisor avoids the origin and
/// lies in `Re rho < 0`.
pub fn verify_poisson_newton(spec: &PnSpec, phi: &TestFunction, params: &PnParams) -> Result<PnReport> {
    let t = translated(spec, params.tau)?;
    let psi = phi.clone().times_exp(t.tau);
    let lhs = pair_w(&t.divisor, t.d, &psi, &params.trunc)?;
    let known = spec.known_discrepancy.clone().unwrap_or_default();
    let (b_coeffs, b_errs) = shift_correction(spec, t.d, t.tau, &params.trunc);
    let c_g = add_poly(&recenter(&known, t.tau), &b_coeffs, -1.0);
    let delta_part = pair_origin(&c_g, &psi);
    let delta_err: f64 = {
        let (a, b) = psi.support();
        if a < 0.0 && b > 0.0 {
            b_errs.iter().enumerate().map(|(l, e)| e * psi.eval(0.0, l as u32).abs()).sum()
        } else {
            0.0
        }
    };
    let source = spec.rhs.pair(phi, params.tol)?;
    let rhs = delta_part + source.value;
    Ok(PnReport {
        lhs: lhs.value,
        rhs,
        residual: (lhs.value - rhs).norm(),
        abs_error_est: lhs.abs_error_est + delta_err + source.abs_error_est,
        tau: t.tau,
        d: t.d,
        c_coeffs: c_g,
        truncation: lhs.truncation_used,
    })
}

/// Recovered `P_f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyPolynomial {
    /// `c_0 .. c_{gW-1}` after trimming.
    pub coeffs: Vec<Complex64>,
    pub gw: u32,
    /// Propagated error bound of each untrimmed coefficient.
    pub errors: Vec<f64>,
    /// Largest propagated error over the extracted coefficients.
    pub residual: f64,
    /// Largest modulus among trimmed coefficients.
    pub trimmed_max: f64,
    pub tau: f64,
}

/// Pairs both sides with `t^j plateau(radius)` on the translated side, reads
/// off `c^g_j = (-1)^j (lhs_j - rhs_j) / j!`, maps back to `P_f` and trims
/// trailing coefficients below ten times their propagated error.
pub fn extract_discrepancy(
    spec: &PnSpec,
    gw_bound: u32,
    radius: f64,
    params: &PnParams,
) -> Result<DiscrepancyPolynomial> {
    if gw_bound > 6 {
        return Err(LabError::InvalidParameter(format!("gW bound at most 6, got {gw_bound}")));
    }
    if let RhsSource::Atoms { atoms, .. } = &spec.rhs {
        if let Some(at) = atoms.atoms.iter().find(|at| at.freq > 0.0 && at.freq <= radius) {
            return Err(LabError::ExtractionInvalid(format!(
                "atom at {} lies inside [0, {radius}]",
                at.freq
            )));
        }
    }
    let t = translated(spec, params.tau)?;
    let terms = gw_bound.max(t.d - 1);
    let base = TestFunction::plateau(radius)?;
    let rows = (0..terms)
        .map(|j| -> Result<(Complex64, f64)> {
            let psi = base.clone().times_power(j);
            let phi = psi.clone().times_exp(-t.tau);
            let lhs = pair_w(&t.divisor, t.d, &psi, &params.trunc)?;
            let rhs = spec.rhs.pair(&phi, params.tol)?;
            let sg = if j % 2 == 0 { 1.0 } else { -1.0 };
            let fj = factorial(j);
            Ok((sg * (lhs.value - rhs.value) / fj, (lhs.abs_error_est + rhs.abs_error_est) / fj))
        })
        .collect::<Result<Vec<_>>>()?;
    let c_g: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    let e_g: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (b_coeffs, b_errs) = shift_correction(spec, t.d, t.tau, &params.trunc);
    let q = add_poly(&c_g, &b_coeffs, 1.0);
    let qe: Vec<f64> =
        (0..q.len()).map(|i| e_g.get(i).copied().unwrap_or(0.0) + b_errs.get(i).copied().unwrap_or(0.0)).collect();
    let mut coeffs = recenter(&q, -t.tau);
    let mut errors = recenter_err(&qe, -t.tau);
    coeffs.truncate(gw_bound as usize);
    errors.truncate(gw_bound as usize);
    let mut trimmed_max: f64 = 0.0;
    while let (Some(c), Some(e)) = (coeffs.last(), errors.last()) {
        if c.norm() < 10.0 * e {
            trimmed_max = trimmed_max.max(c.norm());
            coeffs.pop();
            errors.pop();
        } else {
            break;
        }
    }
    let residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(DiscrepancyPolynomial { gw: coeffs.len() as u32, coeffs, errors, residual, trimmed_max, tau: t.tau })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyInputs {
    pub d: u32,
    pub m0_estimate: Option<u32>,
    pub gw_estimate: Option<u32>,
    /// Whether the extraction behind `gw_estimate` met its residual threshold.
    pub gw_residual_ok: bool,
    pub is_dirichlet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyOutcome {
    pub classification: Classification,
    pub rule: ClassificationRule,
    /// Lower bound for the growth order `o(f)`.
    pub order_lower_bound: u32,
}

pub fn classify(inputs: &ClassifyInputs) -> Result<ClassifyOutcome> {
    let d = inputs.d;
    if inputs.is_dirichlet && d < 2 {
        return Err(LabError::DirichletExponentTooSmall { d });
    }
    let mut order_lower_bound = d.saturating_sub(1);
    if inputs.is_dirichlet {
        order_lower_bound = order_lower_bound.max(1);
    }
    let (classification, rule) = match (inputs.m0_estimate, inputs.gw_estimate) {
        (Some(m0), _) if m0 <= d => (Classification::HadamardType, ClassificationRule::VerticalOrderBound),
        _ if inputs.is_dirichlet => (Classification::HadamardType, ClassificationRule::DirichletSeries),
        (_, Some(gw)) if gw < d => (Classification::HadamardType, ClassificationRule::ExtractedGenus),
        (_, Some(_)) if inputs.gw_residual_ok => (Classification::WeierstrassType, ClassificationRule::ExtractedGenus),
        _ => (Classification::Inconclusive, ClassificationRule::None),
    };
    Ok(ClassifyOutcome { classification, rule, order_lower_bound })
}
