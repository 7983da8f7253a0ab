//! L1 norms of `|s|^-m f'/f(s)` on vertical lines `Re s = c`, the vertical
//! order `m0`, and the monotonicity of those norms in `c`.

use crate::divisor::least_squares_slope;
use crate::error::{LabError, Result};
use crate::hadamard::TruncatedDivisor;
use crate::par;
use crate::quad::{self, Lanes};
use crate::specfun;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type Evaluator = Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>;

/// A logarithmic derivative together with the half-plane where it may be
/// evaluated.
#[derive(Clone)]
pub struct LineFunction {
    pub name: String,
    evaluator: Evaluator,
    /// Evaluation requires `Re s > valid_half_plane`.
    pub valid_half_plane: f64,
}

impl fmt::Debug for LineFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LineFunction")
            .field("name", &self.name)
            .field("valid_half_plane", &self.valid_half_plane)
            .finish()
    }
}

impl LineFunction {
    pub fn new<F>(name: impl Into<String>, valid_half_plane: f64, f: F) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    {
        Self { name: name.into(), evaluator: Arc::new(f), valid_half_plane }
    }

    /// `cosh/sinh`.
    pub fn coth() -> Self {
        Self::new("coth", 0.0, specfun::coth_logderiv)
    }

    /// `Gamma'/Gamma`.
    pub fn digamma() -> Self {
        Self::new("digamma", 0.0, |s| Ok(specfun::digamma(s)?.psi))
    }

    /// `zeta'/zeta`.
    pub fn zeta() -> Self {
        Self::new("zeta", 1.0 + specfun::ZETA_MARGIN, specfun::zeta_logderiv)
    }

    pub fn zero() -> Self {
        Self::new("zero", f64::NEG_INFINITY, |_| Ok(Complex64::new(0.0, 0.0)))
    }

    /// The Hadamard log-derivative over a truncated divisor.
    pub fn hadamard(td: TruncatedDivisor, sigma1: f64) -> Self {
        Self::new("hadamard", sigma1, move |s| td.eval_unchecked(s))
    }

    pub fn dirichlet(f: crate::dirichlet::DirichletSeries) -> Self {
        let a = f.abscissa();
        Self::new("dirichlet", a, move |s| f.log_derivative(s))
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        if !(s.re > self.valid_half_plane) {
            return Err(LabError::OutsideHalfPlane { region: "validity half-plane of the evaluator", s });
        }
        (self.evaluator)(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
}

/// Mean of the integrand over one dyadic window, both signs of `t` added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowLevel {
    pub t_lo: f64,
    pub t_hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineIntegralResult {
    pub c: f64,
    pub m: u32,
    /// `None` when the verdict is divergent.
    pub value: Option<f64>,
    /// Integral over `[-T_max, T_max]` without extrapolation.
    pub truncated_value: f64,
    /// Fitted `beta` with window levels `~ |t|^beta`; `None` for a zero
    /// integrand.
    pub tail_exponent: Option<f64>,
    pub verdict: Verdict,
    pub windows_used: usize,
    pub abs_error_est: f64,
    /// All windows reached the tolerance.
    pub quadrature_converged: bool,
    pub levels: Vec<WindowLevel>,
}

/// `beta < -1 - BETA_MARGIN` is read as integrable.
pub const BETA_MARGIN: f64 = 0.1;
pub const DEFAULT_T_MAX: f64 = 65_536.0;
const MAX_INTERVALS_PER_WINDOW: usize = 200_000;

fn windows(t_max: f64) -> Vec<(f64, f64)> {
    let mut w = vec![(0.0, 1.0)];
    let mut lo = 1.0;
    while lo < t_max {
        let hi = (2.0 * lo).min(t_max);
        w.push((lo, hi));
        lo = hi;
    }
    w
}

/// Integrates `|c+it|^-m |g(c+it)|` for every `m` in `0..=m_max` from the
/// same evaluations of `g`.
pub fn line_l1_norms(g: &LineFunction, c: f64, m_max: u32, t_max: f64, tol: f64) -> Result<Vec<LineIntegralResult>> {
    if !(c > g.valid_half_plane) {
        return Err(LabError::InvalidParameter(format!(
            "line Re s = {c} is not right of the validity abscissa {}",
            g.valid_half_plane
        )));
    }
    if c == 0.0 {
        return Err(LabError::InvalidParameter("the line Re s = 0 is excluded".into()));
    }
    if !(t_max >= 64.0) {
        return Err(LabError::InvalidParameter(format!("T_max must be at least 64, got {t_max}")));
    }
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let lanes = m_max as usize + 1;
    let integrand = |t: f64| -> Result<Lanes> {
        let s = Complex64::new(c, t);
        let v = g.eval(s).map_err(|e| LabError::LineEvaluation { t, reason: e.to_string() })?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(LabError::LineEvaluation { t, reason: format!("non-finite value {v}") });
        }
        let a = v.norm();
        let inv = 1.0 / s.norm();
        let mut out = Vec::with_capacity(lanes);
        let mut w = a;
        for _ in 0..lanes {
            out.push(w);
            w *= inv;
        }
        Ok(Lanes(out))
    };
    // each window on both sides of the real axis
    let win = windows(t_max);
    let jobs: Vec<(f64, f64)> = win.iter().flat_map(|&(a, b)| [(a, b), (-b, -a)]).collect();
    let results = par::map_slice(&jobs, |&(a, b)| {
        quad::adaptive(integrand, a, b, 0.0, tol, MAX_INTERVALS_PER_WINDOW)
    });
    let mut per_window: Vec<(Lanes, Lanes, bool)> = Vec::with_capacity(win.len());
    for pair in results.chunks(2) {
        let (p, n) = match pair {
            [Ok(p), Ok(n)] => (p, n),
            [Err(e), _] | [_, Err(e)] => return Err(e.clone()),
            _ => unreachable!("jobs come in pairs"),
        };
        let mut v = p.value.clone();
        v.0.iter_mut().zip(&n.value.0).for_each(|(a, b)| *a += b);
        let mut e = p.abs_error.clone();
        e.0.iter_mut().zip(&n.abs_error.0).for_each(|(a, b)| *a += b);
        per_window.push((v, e, p.converged && n.converged));
    }
    let all_converged = per_window.iter().all(|w| w.2);

    let mut out = Vec::with_capacity(lanes);
    for m in 0..lanes {
        let truncated_value: f64 = per_window.iter().map(|w| w.0 .0[m]).sum();
        let quad_err: f64 = per_window.iter().map(|w| w.1 .0[m]).sum();
        let levels: Vec<WindowLevel> = win
            .iter()
            .zip(&per_window)
            .map(|(&(lo, hi), w)| WindowLevel { t_lo: lo, t_hi: hi, level: w.0 .0[m] / (hi - lo) })
            .collect();
        // fit over the upper half of the dyadic windows, at least four
        let dyadic = &levels[1..];
        let used = (dyadic.len() / 2).max(4).min(dyadic.len());
        let fit = &dyadic[dyadic.len() - used..];
        let (verdict, tail_exponent, tail, fit_err) = if fit.iter().all(|w| w.level == 0.0) {
            (Verdict::Convergent, None, 0.0, 0.0)
        } else if fit.iter().any(|w| w.level <= 0.0) {
            // levels vanish on part of the fit range: treat as integrable
            // without extrapolation
            (Verdict::Convergent, None, 0.0, 0.0)
        } else {
            let xs: Vec<f64> = fit.iter().map(|w| (w.t_lo * w.t_hi).sqrt().ln()).collect();
            let ys: Vec<f64> = fit.iter().map(|w| w.level.ln()).collect();
            let beta = least_squares_slope(&xs, &ys);
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let my = ys.iter().sum::<f64>() / ys.len() as f64;
            let ln_a = my - beta * mx;
            if beta < -1.0 - BETA_MARGIN {
                let tail = (ln_a + (beta + 1.0) * t_max.ln()).exp() / (-beta - 1.0);
                // disagreement between fit and last window as an error proxy
                let last = fit.last().expect("nonempty");
                let pred = (ln_a + beta * (last.t_lo * last.t_hi).sqrt().ln()).exp();
                let rel = ((pred - last.level) / last.level).abs();
                (Verdict::Convergent, Some(beta), tail, tail * rel.max(0.1))
            } else {
                (Verdict::Divergent, Some(beta), 0.0, 0.0)
            }
        };
        out.push(LineIntegralResult {
            c,
            m: m as u32,
            value: (verdict == Verdict::Convergent).then_some(truncated_value + tail),
            truncated_value,
            tail_exponent,
            verdict,
            windows_used: used,
            abs_error_est: quad_err + fit_err,
            quadrature_converged: all_converged,
            levels,
        });
    }
    Ok(out)
}

/// `int |c+it|^-m |g(c+it)| dt` over the whole line, with an integrability
/// verdict from the fitted tail exponent.
pub fn line_l1_norm(g: &LineFunction, c: f64, m: u32, t_max: f64, tol: f64) -> Result<LineIntegralResult> {
    let mut all = line_l1_norms(g, c, m, t_max, tol)?;
    Ok(all.pop().expect("m_max + 1 lanes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerticalOrder {
    /// `None` means undetermined.
    pub m0: Option<u32>,
    /// Smallest convergent `m` on each line.
    pub per_line: Vec<(f64, Option<u32>)>,
    /// The lines disagree, contradicting c-independence.
    pub c_dependence: bool,
    pub details: Vec<Vec<LineIntegralResult>>,
}

/// Smallest `m <= m_max` whose norm is finite on every line in `cs`.
pub fn vertical_order_estimate(
    g: &LineFunction,
    cs: &[f64],
    m_max: u32,
    t_max: f64,
    tol: f64,
) -> Result<VerticalOrder> {
    let mut distinct: Vec<f64> = cs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(LabError::InvalidParameter("need at least two distinct lines".into()));
    }
    let mut per_line = Vec::with_capacity(cs.len());
    let mut details = Vec::with_capacity(cs.len());
    for &c in cs {
        let r = line_l1_norms(g, c, m_max, t_max, tol)?;
        let first = r.iter().find(|x| x.verdict == Verdict::Convergent).map(|x| x.m);
        per_line.push((c, first));
        details.push(r);
    }
    let first = per_line[0].1;
    let c_dependence = per_line.iter().any(|(_, m)| *m != first);
    let m0 = if c_dependence { None } else { first };
    Ok(VerticalOrder { m0, per_line, c_dependence, details })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monotonicity {
    /// Norm on the line `c'`.
    pub lhs: f64,
    /// Norm on the line `c`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `int |g(c'+iu)| du` with `int |g(c+it)| dt` for
/// `g = s^-m0 f'/f`, `c < c'`.
pub fn c_monotonicity_check(
    g0: &LineFunction,
    m0: u32,
    c: f64,
    c_prime: f64,
    t_max: f64,
    tol: f64,
) -> Result<Monotonicity> {
    if !(g0.valid_half_plane < c && c <= c_prime) {
        return Err(LabError::InvalidParameter(format!(
            "need {} < c <= c' (c = {c}, c' = {c_prime})",
            g0.valid_half_plane
        )));
    }
    let value = |x: f64| -> Result<f64> {
        let r = line_l1_norm(g0, x, m0, t_max, tol)?;
        r.value.ok_or_else(|| {
            LabError::QuadratureNotConverged(format!("norm on Re s = {x} with m = {m0} is not finite"))
        })
    };
    let rhs = value(c)?;
    let lhs = if c_prime == c { rhs } else { value(c_prime)? };
    Ok(Monotonicity { lhs, rhs, holds: lhs <= rhs * (1.0 + tol) })
}
