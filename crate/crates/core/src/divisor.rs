//! Divisors of meromorphic functions: signed point sets enumerated by
//! nondecreasing modulus, with enough tail information to decide the
//! convergence exponent exactly.

use crate::error::{LabError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::iter::Peekable;

/// A zero (`mult > 0`) or pole (`mult < 0`) of a meromorphic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorPoint {
    pub rho: Complex64,
    pub mult: i64,
}

impl DivisorPoint {
    pub fn new(rho: Complex64, mult: i64) -> Result<Self> {
        if mult == 0 {
            return Err(LabError::InvalidParameter("multiplicity must be nonzero".into()));
        }
        if rho == Complex64::new(0.0, 0.0) {
            return Err(LabError::ZeroInDivisor);
        }
        if !(rho.re.is_finite() && rho.im.is_finite()) {
            return Err(LabError::InvalidParameter(format!("non-finite divisor point {rho}")));
        }
        Ok(Self { rho, mult })
    }

    fn key(&self) -> (f64, f64) {
        (self.rho.norm(), self.rho.arg())
    }
}

fn cmp_points(a: &DivisorPoint, b: &DivisorPoint) -> Ordering {
    let (ma, aa) = a.key();
    let (mb, ab) = b.key();
    ma.total_cmp(&mb).then(aa.total_cmp(&ab))
}

/// Asymptotic description of the counting function, `N(r) ~ r^alpha`.
///
/// `boundary_converges` says whether `sum |n| |rho|^-alpha` is finite, which
/// decides the exponent when `alpha` is an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub alpha: f64,
    pub boundary_converges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DivisorKind {
    /// Finitely many points, kept sorted in enumeration order.
    Explicit(Vec<DivisorPoint>),
    /// `shift + i*step*k` for `k` in Z (the `k = 0` point only when
    /// `include_center`).
    VerticalLattice { step: f64, shift: f64, mult: i64, include_center: bool },
    /// `shift - step*n` for integers `n >= start`.
    Arithmetic { shift: f64, step: f64, start: u64, mult: i64 },
    /// Zeros at `shift + i n^2 2^n` with multiplicity `2^n`, `n >= 1`: the
    /// divisor showing the growth exponent of the log-derivative is sharp.
    SharpExample { shift: f64 },
    Union(Vec<Divisor>),
}

/// Largest index of the sharp example whose multiplicity fits in `i64`.
pub const SHARP_EXAMPLE_MAX_INDEX: u32 = 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DivisorJson", into = "DivisorJson")]
pub struct Divisor {
    kind: DivisorKind,
    tail_model: Option<TailModel>,
    declared_sigma1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigma1 {
    pub value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalExponent {
    pub alpha_fit: f64,
    pub d_suggested: u32,
    pub saturated: bool,
    pub radii: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockVerdict {
    Convergent,
    Divergent,
    Unclear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDiagnostic {
    pub block_sums: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: BlockVerdict,
}

/// The enumerated head of a divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub points: Vec<DivisorPoint>,
    /// Modulus of the last enumerated point; every omitted point has
    /// modulus at least this large.
    pub radius: f64,
    /// True when the whole divisor was enumerated.
    pub exhausted: bool,
}

impl Divisor {
    fn from_kind(kind: DivisorKind) -> Self {
        Self { kind, tail_model: None, declared_sigma1: None }
    }

    pub fn explicit(points: Vec<DivisorPoint>) -> Result<Self> {
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            pts.push(DivisorPoint::new(p.rho, p.mult)?);
        }
        pts.sort_by(cmp_points);
        // coalesce repeated locations
        let mut merged: Vec<DivisorPoint> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last_mut() {
                Some(last) if last.rho == p.rho => last.mult += p.mult,
                _ => merged.push(p),
            }
        }
        merged.retain(|p| p.mult != 0);
        Ok(Self::from_kind(DivisorKind::Explicit(merged)))
    }

    /// `i*step*k`, `k != 0`, each with multiplicity `mult`.
    pub fn vertical_lattice(step: f64, mult: i64) -> Result<Self> {
        Self::shifted_lattice(step, 0.0, mult, false)
    }

    pub fn shifted_lattice(step: f64, shift: f64, mult: i64, include_center: bool) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !shift.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "lattice needs finite step > 0 and finite shift, got step {step}, shift {shift}"
            )));
        }
        if mult == 0 {
            return Err(LabError::InvalidParameter("multiplicity must be nonzero".into()));
        }
        if include_center && shift == 0.0 {
            return Err(LabError::ZeroInDivisor);
        }
        Ok(Self::from_kind(DivisorKind::VerticalLattice { step, shift, mult, include_center }))
    }

    /// `-n` for `n >= start`.
    pub fn negative_integers(mult: i64, start: u64) -> Result<Self> {
        Self::arithmetic(0.0, 1.0, start, mult)
    }

    pub fn arithmetic(shift: f64, step: f64, start: u64, mult: i64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !shift.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "progression needs finite step > 0 and finite shift, got step {step}, shift {shift}"
            )));
        }
        if mult == 0 {
            return Err(LabError::InvalidParameter("multiplicity must be nonzero".into()));
        }
        let n_zero = shift / step;
        if n_zero.fract() == 0.0 && n_zero >= start as f64 {
            return Err(LabError::ZeroInDivisor);
        }
        Ok(Self::from_kind(DivisorKind::Arithmetic { shift, step, start, mult }))
    }

    pub fn sharp_example() -> Self {
        Self::from_kind(DivisorKind::SharpExample { shift: 0.0 })
    }

    pub fn union(parts: Vec<Divisor>) -> Result<Self> {
        if parts.is_empty() {
            return Err(LabError::EmptyDivisor);
        }
        Ok(Self::from_kind(DivisorKind::Union(parts)))
    }

    pub fn with_tail_model(mut self, model: TailModel) -> Self {
        self.tail_model = Some(model);
        self
    }

    pub fn with_sigma1(mut self, sigma1: f64) -> Self {
        self.declared_sigma1 = Some(sigma1);
        self
    }

    pub fn kind(&self) -> &DivisorKind {
        &self.kind
    }

    pub fn is_finite(&self) -> bool {
        match &self.kind {
            DivisorKind::Explicit(_) => true,
            DivisorKind::Union(parts) => parts.iter().all(Divisor::is_finite),
            _ => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.kind {
            DivisorKind::Explicit(p) => p.is_empty(),
            DivisorKind::Union(parts) => parts.iter().all(Divisor::is_empty),
            _ => false,
        }
    }

    /// The divisor of `s -> f(s - delta)`: every point moves by `delta`.
    pub fn translate(&self, delta: f64) -> Result<Divisor> {
        let kind = match &self.kind {
            DivisorKind::Explicit(points) => {
                let moved: Vec<DivisorPoint> = points
                    .iter()
                    .map(|p| DivisorPoint { rho: p.rho + delta, mult: p.mult })
                    .collect();
                return Divisor::explicit(moved).map(|d| self.carry_metadata(d, delta));
            }
            DivisorKind::VerticalLattice { step, shift, mult, include_center } => {
                let d = Divisor::shifted_lattice(*step, shift + delta, *mult, *include_center)?;
                return Ok(self.carry_metadata(d, delta));
            }
            DivisorKind::Arithmetic { shift, step, start, mult } => {
                let d = Divisor::arithmetic(shift + delta, *step, *start, *mult)?;
                return Ok(self.carry_metadata(d, delta));
            }
            DivisorKind::SharpExample { shift } => DivisorKind::SharpExample { shift: shift + delta },
            DivisorKind::Union(parts) => DivisorKind::Union(
                parts.iter().map(|p| p.translate(delta)).collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(self.carry_metadata(Divisor::from_kind(kind), delta))
    }

    fn carry_metadata(&self, mut d: Divisor, delta: f64) -> Divisor {
        d.tail_model = self.tail_model;
        d.declared_sigma1 = self.declared_sigma1.map(|s| s + delta);
        d
    }

    /// Points in nondecreasing modulus, ties broken by increasing argument.
    pub fn iter(&self) -> Box<dyn Iterator<Item = DivisorPoint> + '_> {
        match &self.kind {
            DivisorKind::Explicit(points) => Box::new(points.iter().copied()),
            DivisorKind::VerticalLattice { step, shift, mult, include_center } => {
                let (step, shift, mult) = (*step, *shift, *mult);
                let center = include_center.then(|| DivisorPoint { rho: Complex64::new(shift, 0.0), mult });
                Box::new(center.into_iter().chain((1u64..).flat_map(move |k| {
                    let y = step * k as f64;
                    [
                        DivisorPoint { rho: Complex64::new(shift, -y), mult },
                        DivisorPoint { rho: Complex64::new(shift, y), mult },
                    ]
                })))
            }
            DivisorKind::Arithmetic { shift, step, start, mult } => {
                let (shift, step, start, mult) = (*shift, *step, *start, *mult);
                let pivot = (shift / step).floor();
                let point = move |n: u64| DivisorPoint { rho: Complex64::new(shift - step * n as f64, 0.0), mult };
                // n <= pivot: nonnegative values, modulus grows as n decreases.
                let right: Box<dyn Iterator<Item = DivisorPoint>> = if pivot >= start as f64 {
                    let top = pivot as u64;
                    Box::new((start..=top).rev().map(point).filter(|p| p.rho.re != 0.0))
                } else {
                    Box::new(std::iter::empty())
                };
                let first_left = if pivot + 1.0 > start as f64 { (pivot + 1.0) as u64 } else { start };
                let left: Box<dyn Iterator<Item = DivisorPoint>> = Box::new((first_left..).map(point));
                Box::new(MergeIter::new(vec![right, left]))
            }
            DivisorKind::SharpExample { shift } => {
                let shift = *shift;
                Box::new((1..=SHARP_EXAMPLE_MAX_INDEX).map(move |n| {
                    let y = (n as f64).powi(2) * 2f64.powi(n as i32);
                    DivisorPoint { rho: Complex64::new(shift, y), mult: 1i64 << n }
                }))
            }
            DivisorKind::Union(parts) => Box::new(MergeIter::new(parts.iter().map(|p| p.iter()).collect())),
        }
    }

    /// Enumerate at least `max_points` points (all of them if fewer exist),
    /// completing the last modulus shell so symmetric pairs stay together.
    pub fn truncate(&self, max_points: usize) -> Truncation {
        let mut it = self.iter().peekable();
        let mut points: Vec<DivisorPoint> = it.by_ref().take(max_points).collect();
        if let Some(last) = points.last().copied() {
            let r = last.rho.norm();
            while let Some(next) = it.peek() {
                if (next.rho.norm() - r).abs() <= 1e-12 * r.max(1.0) {
                    points.push(*next);
                    it.next();
                } else {
                    break;
                }
            }
        }
        let exhausted = it.peek().is_none() && self.is_finite();
        let radius = points.last().map(|p| p.rho.norm()).unwrap_or(0.0);
        Truncation { points, radius, exhausted }
    }

    /// Supremum of `Re rho`.
    pub fn sigma1(&self, n_points: usize) -> Result<Sigma1> {
        if self.is_empty() {
            return Err(LabError::EmptyDivisor);
        }
        if let Some(v) = self.declared_sigma1 {
            return Ok(Sigma1 { value: v, exact: true });
        }
        Ok(self.sigma1_inner(n_points))
    }

    fn sigma1_inner(&self, n_points: usize) -> Sigma1 {
        match &self.kind {
            DivisorKind::Explicit(points) => {
                let value = points
                    .iter()
                    .take(n_points.max(1))
                    .map(|p| p.rho.re)
                    .fold(f64::NEG_INFINITY, f64::max);
                Sigma1 { value, exact: n_points >= points.len() }
            }
            DivisorKind::VerticalLattice { shift, .. } => Sigma1 { value: *shift, exact: true },
            DivisorKind::Arithmetic { shift, step, start, .. } => {
                Sigma1 { value: shift - step * *start as f64, exact: true }
            }
            DivisorKind::SharpExample { shift } => Sigma1 { value: *shift, exact: true },
            DivisorKind::Union(parts) => parts.iter().filter(|p| !p.is_empty()).fold(
                Sigma1 { value: f64::NEG_INFINITY, exact: true },
                |acc, p| {
                    let s = p.sigma1_inner(n_points);
                    Sigma1 { value: acc.value.max(s.value), exact: acc.exact && s.exact }
                },
            ),
        }
    }

    /// Declared tail model, or the one implied by the kind.
    pub fn tail_model(&self) -> Option<TailModel> {
        if self.tail_model.is_some() {
            return self.tail_model;
        }
        match &self.kind {
            DivisorKind::Explicit(_) => None,
            DivisorKind::VerticalLattice { .. } | DivisorKind::Arithmetic { .. } => {
                Some(TailModel { alpha: 1.0, boundary_converges: false })
            }
            // N(r) ~ r / log^2 r
            DivisorKind::SharpExample { .. } => Some(TailModel { alpha: 1.0, boundary_converges: true }),
            DivisorKind::Union(parts) => {
                let models: Vec<TailModel> = parts.iter().filter_map(Divisor::tail_model).collect();
                if models.is_empty() {
                    return None;
                }
                let alpha = models.iter().map(|m| m.alpha).fold(f64::NEG_INFINITY, f64::max);
                let boundary_converges = models
                    .iter()
                    .filter(|m| m.alpha == alpha)
                    .all(|m| m.boundary_converges);
                Some(TailModel { alpha, boundary_converges })
            }
        }
    }

    /// Least integer `d >= 0` with `sum |n| |rho|^-d` finite.
    pub fn convergence_exponent(&self) -> Result<u32> {
        if self.is_finite() {
            return Ok(0);
        }
        let model = self.tail_model().ok_or(LabError::Undecidable)?;
        if !(model.alpha >= 0.0 && model.alpha.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "tail exponent must be finite and nonnegative, got {}",
                model.alpha
            )));
        }
        let d = if model.alpha.fract() == 0.0 && model.boundary_converges {
            model.alpha as u32
        } else {
            model.alpha.floor() as u32 + 1
        };
        // an infinite divisor never has a summable multiplicity sequence
        Ok(d.max(1))
    }

    /// `sum |n_rho|` over `|rho| <= r`.
    pub fn counting_function(&self, r: f64) -> u64 {
        if r <= 0.0 {
            return 0;
        }
        let slack = 1e-12 * r.max(1.0);
        let mut total: u64 = 0;
        for p in self.iter() {
            if p.rho.norm() > r + slack {
                break;
            }
            total = total.saturating_add(p.mult.unsigned_abs());
        }
        total.saturating_add(self.counting_beyond_cap(r))
    }

    // Sharp-example points past the enumeration cap.
    fn counting_beyond_cap(&self, r: f64) -> u64 {
        match &self.kind {
            DivisorKind::SharpExample { shift } => {
                let mut total: u64 = 0;
                let mut n = SHARP_EXAMPLE_MAX_INDEX + 1;
                loop {
                    let y = (n as f64).powi(2) * 2f64.powi(n as i32);
                    if y.is_infinite() || shift.hypot(y) > r {
                        break;
                    }
                    total = total.saturating_add(if n < 64 { 1u64 << n } else { u64::MAX });
                    n += 1;
                }
                total
            }
            DivisorKind::Union(parts) => parts
                .iter()
                .fold(0u64, |acc, p| acc.saturating_add(p.counting_beyond_cap(r))),
            _ => 0,
        }
    }

    /// Least-squares slope of `log N(r)` against `log r` over dyadic radii
    /// below `r_max`.
    pub fn empirical_exponent(&self, r_max: f64) -> Result<EmpiricalExponent> {
        let total = self.counting_function(r_max);
        if total < 20 {
            return Err(LabError::InsufficientData(format!(
                "{total} points within radius {r_max}, need 20"
            )));
        }
        let mut radii = Vec::new();
        let mut counts = Vec::new();
        let mut r = r_max;
        for _ in 0..16 {
            let n = self.counting_function(r);
            if n < 5 {
                break;
            }
            radii.push(r);
            counts.push(n);
            r *= 0.5;
        }
        if radii.len() < 3 {
            return Err(LabError::InsufficientData(
                "fewer than three dyadic radii with 5 or more points".into(),
            ));
        }
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
        let alpha_fit = least_squares_slope(&xs, &ys);
        let max_modulus = if self.is_finite() {
            let tr = self.truncate(usize::MAX);
            tr.radius
        } else {
            f64::INFINITY
        };
        let saturated = self.is_finite() && max_modulus <= radii[radii.len() / 2];
        let d_suggested = if saturated { 0 } else { alpha_fit.max(0.0).floor() as u32 + 1 };
        radii.reverse();
        counts.reverse();
        Ok(EmpiricalExponent { alpha_fit, d_suggested, saturated, radii, counts })
    }

    /// Upper bound for `sum |n| |rho - center|^-d` over points with
    /// `|rho| >= r`. `None` when no bound is available (for example `r` not
    /// safely beyond `|center|`); infinity when the sum diverges.
    pub fn tail_abs_sum(&self, d: u32, r: f64, center: f64) -> Option<f64> {
        if let DivisorKind::Explicit(points) = &self.kind {
            let s = points
                .iter()
                .filter(|p| p.rho.norm() >= r)
                .map(|p| p.mult.unsigned_abs() as f64 * (p.rho - center).norm().powi(-(d as i32)))
                .sum();
            return Some(s);
        }
        if let DivisorKind::Union(parts) = &self.kind {
            return parts.iter().map(|p| p.tail_abs_sum(d, r, center)).sum();
        }
        if r <= 2.0 * center.abs() || r <= 0.0 {
            return None;
        }
        let raw = self.tail_abs_sum_origin(d, r)?;
        Some(raw * (1.0 - center.abs() / r).powi(-(d as i32)))
    }

    // sum over |rho| >= r of |n| |rho|^-d, for the infinite kinds.
    fn tail_abs_sum_origin(&self, d: u32, r: f64) -> Option<f64> {
        let df = d as f64;
        match &self.kind {
            DivisorKind::VerticalLattice { step, shift, mult, include_center } => {
                if d < 2 {
                    return Some(f64::INFINITY);
                }
                let m = mult.unsigned_abs() as f64;
                let mut s = 0.0;
                if *include_center && shift.abs() >= r {
                    s += m * shift.abs().powf(-df);
                }
                let y = (r * r - shift * shift).max(0.0).sqrt();
                let k0 = (y / step).ceil().max(1.0);
                // |rho_k| >= step*k; sum_{k>=k0} k^-d <= k0^-d + k0^(1-d)/(d-1)
                s += 2.0 * m * step.powf(-df) * (k0.powf(-df) + k0.powf(1.0 - df) / (df - 1.0));
                Some(s)
            }
            DivisorKind::Arithmetic { shift, step, start, mult } => {
                if d < 2 {
                    return Some(f64::INFINITY);
                }
                let m = mult.unsigned_abs() as f64;
                let mut s = 0.0;
                // nonnegative side: finitely many points, summed exactly
                let pivot = (shift / step).floor();
                if pivot >= *start as f64 {
                    let mut n = *start;
                    while (n as f64) <= pivot {
                        let x = shift - step * n as f64;
                        if x >= r {
                            s += m * x.powf(-df);
                        }
                        n += 1;
                    }
                }
                // negative side: |rho_n| = step*n - shift for n >= n1
                let n1 = ((shift + r) / step).ceil().max(*start as f64).max(pivot + 1.0);
                let a = step * n1 - shift;
                if a <= 0.0 {
                    return None;
                }
                s += m * (a.powf(-df) + a.powf(1.0 - df) / (step * (df - 1.0)));
                Some(s)
            }
            DivisorKind::SharpExample { shift: _ } => {
                if d == 0 {
                    return Some(f64::INFINITY);
                }
                // terms 2^n (n^2 2^n)^-d = n^-2d 2^(n(1-d)); r is a lower bound
                // for |rho| so the imaginary part criterion is conservative
                let mut n0 = 1u32;
                while (n0 as f64).powi(2) * 2f64.powi(n0 as i32) < r * 0.999_999 {
                    n0 += 1;
                    if n0 > 2000 {
                        return Some(0.0);
                    }
                }
                let mut s = 0.0;
                let last = n0 + 20_000;
                for n in n0..last {
                    let nf = n as f64;
                    s += (-2.0 * df * nf.ln() + nf * (1.0 - df) * std::f64::consts::LN_2).exp();
                }
                // remaining terms are at most n^-2
                s += 1.0 / (last - 1) as f64;
                Some(s)
            }
            DivisorKind::Explicit(_) | DivisorKind::Union(_) => unreachable!("handled by caller"),
        }
    }

    /// Sums of `|n| |rho|^-d` over dyadic annuli up to `r_max`, with a
    /// verdict from the last five block ratios (threshold 0.9).
    pub fn dyadic_blocks(&self, d: u32, r_max: f64) -> BlockDiagnostic {
        let mut sums: Vec<f64> = Vec::new();
        let mut current_block: Option<i32> = None;
        // only complete annuli
        let r_stop = 2f64.powi(r_max.log2().floor() as i32);
        for p in self.iter() {
            let r = p.rho.norm();
            if r >= r_stop {
                break;
            }
            let j = r.log2().floor() as i32;
            let term = p.mult.unsigned_abs() as f64 * r.powi(-(d as i32));
            match current_block {
                Some(cb) if cb == j => *sums.last_mut().expect("block exists") += term,
                Some(cb) => {
                    sums.extend(std::iter::repeat_n(0.0, (j - cb - 1).max(0) as usize));
                    sums.push(term);
                    current_block = Some(j);
                }
                None => {
                    sums.push(term);
                    current_block = Some(j);
                }
            }
        }
        let ratios: Vec<f64> = sums
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
            .collect();
        let verdict = if ratios.len() < 5 {
            BlockVerdict::Unclear
        } else {
            let tail = &ratios[ratios.len() - 5..];
            if tail.iter().all(|&q| q <= 0.9) {
                BlockVerdict::Convergent
            } else if tail.iter().all(|&q| q > 0.9 && q.is_finite()) {
                BlockVerdict::Divergent
            } else {
                BlockVerdict::Unclear
            }
        };
        BlockDiagnostic { block_sums: sums, ratios, verdict }
    }
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// k-way merge of streams that are each sorted in enumeration order;
/// coincident points are coalesced.
struct MergeIter<'a> {
    streams: Vec<Peekable<Box<dyn Iterator<Item = DivisorPoint> + 'a>>>,
}

impl<'a> MergeIter<'a> {
    fn new(streams: Vec<Box<dyn Iterator<Item = DivisorPoint> + 'a>>) -> Self {
        Self { streams: streams.into_iter().map(Iterator::peekable).collect() }
    }

    fn pop_min(&mut self) -> Option<DivisorPoint> {
        let mut best: Option<(usize, DivisorPoint)> = None;
        for (i, s) in self.streams.iter_mut().enumerate() {
            if let Some(p) = s.peek() {
                if best.as_ref().is_none_or(|(_, q)| cmp_points(p, q) == Ordering::Less) {
                    best = Some((i, *p));
                }
            }
        }
        best.and_then(|(i, _)| self.streams[i].next())
    }
}

impl Iterator for MergeIter<'_> {
    type Item = DivisorPoint;

    fn next(&mut self) -> Option<DivisorPoint> {
        loop {
            let mut p = self.pop_min()?;
            for s in self.streams.iter_mut() {
                while s.peek().is_some_and(|q| q.rho == p.rho) {
                    p.mult += s.next().expect("peeked").mult;
                }
            }
            if p.mult != 0 {
                return Some(p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    HadamardType,
    WeierstrassType,
    Inconclusive,
}

/// Which criterion produced a classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationRule {
    /// `m0 <= d`.
    VerticalOrderBound,
    /// Dirichlet series are always of Hadamard type.
    DirichletSeries,
    /// Extracted Weierstrass genus compared with `d - 1`.
    ExtractedGenus,
    None,
}

/// Summary of one analysed function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub d: u32,
    /// `None` means undetermined.
    pub m0_estimate: Option<u32>,
    /// `None` means unknown.
    pub gw_estimate: Option<u32>,
    pub discrepancy_coeffs: Vec<Complex64>,
    pub classification: Classification,
    pub rule: ClassificationRule,
    /// Hadamard genus `d - 1` (zero for finite divisors).
    pub hadamard_genus: u32,
    pub order_lower_bound: u32,
    pub diagnostics: Vec<Diagnostic>,
    /// Names of the quantities reported.
    pub anchors: Vec<Anchor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub key: String,
    pub value: DiagValue,
}

impl Diagnostic {
    pub fn new(key: impl Into<String>, value: impl Into<DiagValue>) -> Self {
        Self { key: key.into(), value: value.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DiagValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Reals(Vec<f64>),
}

impl From<bool> for DiagValue {
    fn from(v: bool) -> Self {
        DiagValue::Bool(v)
    }
}
impl From<i64> for DiagValue {
    fn from(v: i64) -> Self {
        DiagValue::Int(v)
    }
}
impl From<f64> for DiagValue {
    fn from(v: f64) -> Self {
        DiagValue::Real(v)
    }
}
impl From<&str> for DiagValue {
    fn from(v: &str) -> Self {
        DiagValue::Text(v.to_string())
    }
}
impl From<String> for DiagValue {
    fn from(v: String) -> Self {
        DiagValue::Text(v)
    }
}
impl From<Vec<f64>> for DiagValue {
    fn from(v: Vec<f64>) -> Self {
        DiagValue::Reals(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub quantity: &'static str,
    pub definition: &'static str,
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointJson {
    pub re: f64,
    pub im: f64,
    pub mult: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KindJson {
    Explicit {
        points: Vec<PointJson>,
    },
    VerticalLattice {
        step: f64,
        #[serde(default = "default_mult")]
        mult: i64,
        #[serde(default = "default_true")]
        exclude_zero: bool,
        #[serde(default)]
        shift: f64,
    },
    NegativeIntegers {
        mult: i64,
        #[serde(default = "default_one")]
        start: u64,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default)]
        shift: f64,
    },
    SharpExample {
        #[serde(default)]
        shift: f64,
    },
    Union {
        parts: Vec<DivisorJson>,
    },
}

fn default_true() -> bool {
    true
}
fn default_mult() -> i64 {
    1
}
fn default_one() -> u64 {
    1
}
fn default_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorJson {
    #[serde(flatten)]
    pub kind: KindJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_model: Option<TailModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
}

impl TryFrom<DivisorJson> for Divisor {
    type Error = LabError;

    fn try_from(j: DivisorJson) -> Result<Self> {
        let mut d = match j.kind {
            KindJson::Explicit { points } => Divisor::explicit(
                points
                    .into_iter()
                    .map(|p| DivisorPoint { rho: Complex64::new(p.re, p.im), mult: p.mult })
                    .collect(),
            )?,
            KindJson::VerticalLattice { step, mult, exclude_zero, shift } => {
                Divisor::shifted_lattice(step, shift, mult, !exclude_zero)?
            }
            KindJson::NegativeIntegers { mult, start, step, shift } => {
                Divisor::arithmetic(shift, step, start, mult)?
            }
            KindJson::SharpExample { shift } => {
                if shift == 0.0 {
                    Divisor::sharp_example()
                } else {
                    Divisor::sharp_example().translate(shift)?
                }
            }
            KindJson::Union { parts } => Divisor::union(
                parts.into_iter().map(Divisor::try_from).collect::<Result<Vec<_>>>()?,
            )?,
        };
        d.tail_model = j.tail_model;
        d.declared_sigma1 = j.sigma1;
        Ok(d)
    }
}

impl From<Divisor> for DivisorJson {
    fn from(d: Divisor) -> Self {
        let kind = match d.kind {
            DivisorKind::Explicit(points) => KindJson::Explicit {
                points: points
                    .into_iter()
                    .map(|p| PointJson { re: p.rho.re, im: p.rho.im, mult: p.mult })
                    .collect(),
            },
            DivisorKind::VerticalLattice { step, shift, mult, include_center } => {
                KindJson::VerticalLattice { step, mult, exclude_zero: !include_center, shift }
            }
            DivisorKind::Arithmetic { shift, step, start, mult } => {
                KindJson::NegativeIntegers { mult, start, step, shift }
            }
            DivisorKind::SharpExample { shift } => KindJson::SharpExample { shift },
            DivisorKind::Union(parts) => KindJson::Union { parts: parts.into_iter().map(Into::into).collect() },
        };
        DivisorJson { kind, tail_model: d.tail_model, sigma1: d.declared_sigma1 }
    }
}

/// Divisor of `sinh`: zeros at `pi i k`, `k != 0` (the origin is handled by
/// translation).
pub fn sinh_divisor() -> Divisor {
    Divisor::vertical_lattice(std::f64::consts::PI, 1).expect("valid lattice")
}

/// Divisor of `Gamma` without its pole at the origin: poles at `-n`, `n >= 1`.
pub fn gamma_divisor() -> Divisor {
    Divisor::negative_integers(-1, 1).expect("valid progression")
}

/// Declared divisor of zeta used for the convergence exponent: the pole at 1
/// and the trivial zeros at `-2n`.
pub fn zeta_divisor() -> Divisor {
    let pole = Divisor::explicit(vec![DivisorPoint { rho: Complex64::new(1.0, 0.0), mult: -1 }])
        .expect("valid point");
    let trivial = Divisor::arithmetic(0.0, 2.0, 1, 1).expect("valid progression");
    Divisor::union(vec![pole, trivial]).expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sigma1_examples() {
        let s = sinh_divisor().sigma1(100).unwrap();
        assert_eq!(s, Sigma1 { value: 0.0, exact: true });
        let g = gamma_divisor().sigma1(100).unwrap();
        assert_eq!(g, Sigma1 { value: -1.0, exact: true });
        let e = Divisor::explicit(vec![
            DivisorPoint::new(c(1.0, 2.0), 1).unwrap(),
            DivisorPoint::new(c(1.0, -2.0), 1).unwrap(),
        ])
        .unwrap();
        assert_eq!(e.sigma1(10).unwrap(), Sigma1 { value: 1.0, exact: true });
        let empty = Divisor::explicit(vec![]).unwrap();
        assert_eq!(empty.sigma1(10), Err(LabError::EmptyDivisor));
    }

    #[test]
    fn convergence_exponents() {
        assert_eq!(sinh_divisor().convergence_exponent().unwrap(), 2);
        assert_eq!(Divisor::sharp_example().convergence_exponent().unwrap(), 1);
        assert_eq!(gamma_divisor().convergence_exponent().unwrap(), 2);
        assert_eq!(zeta_divisor().convergence_exponent().unwrap(), 2);
        let finite = Divisor::explicit(vec![DivisorPoint::new(c(-1.0, 0.0), 2).unwrap()]).unwrap();
        assert_eq!(finite.convergence_exponent().unwrap(), 0);
        let declared = sinh_divisor().with_tail_model(TailModel { alpha: 1.5, boundary_converges: false });
        assert_eq!(declared.convergence_exponent().unwrap(), 2);
        let declared = sinh_divisor().with_tail_model(TailModel { alpha: 2.0, boundary_converges: true });
        assert_eq!(declared.convergence_exponent().unwrap(), 2);
        let declared = sinh_divisor().with_tail_model(TailModel { alpha: 0.0, boundary_converges: true });
        assert_eq!(declared.convergence_exponent().unwrap(), 1);
    }

    #[test]
    fn counting_examples() {
        assert_eq!(sinh_divisor().counting_function(10.0), 6);
        assert_eq!(sinh_divisor().counting_function(0.0), 0);
        assert_eq!(Divisor::sharp_example().counting_function(8.0), 2);
        // n = 1, 2: multiplicities 2 + 4
        assert_eq!(Divisor::sharp_example().counting_function(16.0), 6);
    }

    #[test]
    fn zero_rejected() {
        assert_eq!(DivisorPoint::new(c(0.0, 0.0), 1), Err(LabError::ZeroInDivisor));
        assert_eq!(Divisor::negative_integers(-1, 0), Err(LabError::ZeroInDivisor));
        assert_eq!(Divisor::shifted_lattice(1.0, 0.0, 1, true), Err(LabError::ZeroInDivisor));
        assert!(DivisorPoint::new(c(1.0, 0.0), 0).is_err());
    }

    #[test]
    fn enumeration_orders() {
        let pts: Vec<_> = sinh_divisor().iter().take(4).collect();
        assert_eq!(pts[0].rho, c(0.0, -PI));
        assert_eq!(pts[1].rho, c(0.0, PI));
        assert_eq!(pts[2].rho, c(0.0, -2.0 * PI));
        // shifted progression crossing zero: 0.3, -0.7, 1.3? no: 0.3 - n for n >= 0
        let a = Divisor::arithmetic(0.3, 1.0, 0, -1).unwrap();
        let xs: Vec<f64> = a.iter().take(4).map(|p| p.rho.re).collect();
        assert!((xs[0] - 0.3).abs() < 1e-15);
        assert!((xs[1] + 0.7).abs() < 1e-15);
        assert!((xs[2] + 1.7).abs() < 1e-15);
        let z: Vec<_> = zeta_divisor().iter().take(3).collect();
        assert_eq!(z[0], DivisorPoint { rho: c(1.0, 0.0), mult: -1 });
        assert_eq!(z[1], DivisorPoint { rho: c(-2.0, 0.0), mult: 1 });
        assert_eq!(z[2].rho, c(-4.0, 0.0));
        let first = Divisor::sharp_example().iter().next().unwrap();
        assert_eq!(first, DivisorPoint { rho: c(0.0, 2.0), mult: 2 });
    }

    #[test]
    fn union_coalesces() {
        let a = Divisor::explicit(vec![DivisorPoint::new(c(-1.0, 0.0), 1).unwrap()]).unwrap();
        let b = Divisor::explicit(vec![DivisorPoint::new(c(-1.0, 0.0), -1).unwrap()]).unwrap();
        let u = Divisor::union(vec![a, gamma_divisor(), b]).unwrap();
        let first = u.iter().next().unwrap();
        // +1 -1 -1 at -1 leaves a simple pole
        assert_eq!(first, DivisorPoint { rho: c(-1.0, 0.0), mult: -1 });
    }

    #[test]
    fn truncation_completes_shells() {
        let t = sinh_divisor().truncate(3);
        assert_eq!(t.points.len(), 4);
        assert!(!t.exhausted);
        assert!((t.radius - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn empirical_exponent_examples() {
        let e = sinh_divisor().empirical_exponent(1e4).unwrap();
        assert!((0.95..=1.05).contains(&e.alpha_fit), "{}", e.alpha_fit);
        assert_eq!(e.d_suggested, 2);
        let g = gamma_divisor().empirical_exponent(1e4).unwrap();
        assert!((g.alpha_fit - 1.0).abs() < 0.05);
        assert_eq!(g.d_suggested, 2);
        let pts: Vec<DivisorPoint> = (1..=25)
            .map(|k| DivisorPoint::new(c(-1.0, k as f64), 1).unwrap())
            .collect();
        let f = Divisor::explicit(pts).unwrap().empirical_exponent(1e4).unwrap();
        assert!(f.saturated);
        assert!(f.alpha_fit < 0.5);
        assert_eq!(f.d_suggested, 0);
        let small = Divisor::explicit(vec![DivisorPoint::new(c(-1.0, 1.0), 1).unwrap()]).unwrap();
        assert!(matches!(small.empirical_exponent(10.0), Err(LabError::InsufficientData(_))));
    }

    #[test]
    fn tail_sums_bound_partial_sums() {
        // brute-force the lattice tail beyond the truncation radius
        let div = sinh_divisor();
        let tr = div.truncate(1000);
        let bound = div.tail_abs_sum(2, tr.radius, 0.0).unwrap();
        let brute: f64 = div
            .iter()
            .skip(tr.points.len())
            .take(2_000_000)
            .map(|p| p.rho.norm().powi(-2))
            .sum();
        assert!(brute <= bound && bound < 3.0 * brute, "{brute} {bound}");
        assert_eq!(div.tail_abs_sum(1, tr.radius, 0.0), Some(f64::INFINITY));

        let g = gamma_divisor();
        let bound = g.tail_abs_sum(2, 100.0, 0.0).unwrap();
        let brute: f64 = (100..3_000_000).map(|n| (n as f64).powi(-2)).sum();
        assert!(brute <= bound && bound < 1.1 * brute);

        let s = Divisor::sharp_example();
        let bound = s.tail_abs_sum(1, 100.0, 0.0).unwrap();
        // n >= 4 has n^2 2^n >= 100
        let brute: f64 = (4..2000).map(|n| 1.0 / (n as f64).powi(2)).sum();
        assert!(brute <= bound * (1.0 + 1e-12) && bound < 1.1 * brute, "{brute} {bound}");
    }

    #[test]
    fn dyadic_block_verdicts() {
        assert_eq!(sinh_divisor().dyadic_blocks(2, 1e5).verdict, BlockVerdict::Convergent);
        assert_eq!(sinh_divisor().dyadic_blocks(1, 1e5).verdict, BlockVerdict::Divergent);
    }

    #[test]
    fn json_forms() {
        let j = r#"{"kind":"vertical_lattice","step":3.141592653589793,"mult":1,"exclude_zero":true}"#;
        let d: Divisor = serde_json::from_str(j).unwrap();
        assert_eq!(d, sinh_divisor());
        let j = r#"{"kind":"negative_integers","mult":-1,"start":1}"#;
        let d: Divisor = serde_json::from_str(j).unwrap();
        assert_eq!(d, gamma_divisor());
        let j = r#"{"kind":"sharp_example"}"#;
        let d: Divisor = serde_json::from_str(j).unwrap();
        assert_eq!(d.convergence_exponent().unwrap(), 1);
        let j = r#"{"kind":"explicit","points":[{"re":1,"im":2,"mult":1}],"sigma1":1.5}"#;
        let d: Divisor = serde_json::from_str(j).unwrap();
        assert_eq!(d.sigma1(1).unwrap().value, 1.5);
        let j = r#"{"kind":"explicit","points":[{"re":0,"im":0,"mult":1}]}"#;
        assert!(serde_json::from_str::<Divisor>(j).is_err());
        let back = serde_json::to_string(&zeta_divisor()).unwrap();
        let again: Divisor = serde_json::from_str(&back).unwrap();
        assert_eq!(again, zeta_divisor());
    }
}
