//! Quadrature rules: globally adaptive Gauss-Kronrod (7/15) and composite
//! Gauss-Legendre panels.

use crate::error::{LabError, Result};
use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Values that can be integrated: scalars, complex numbers, or several real
/// lanes sharing one set of function evaluations.
pub trait QuadValue: Clone {
    fn zeros_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    /// Component-wise |self - other|.
    fn abs_diff(&self, other: &Self) -> Self;
    /// Component-wise absolute value.
    fn abs(&self) -> Self;
    /// Largest component of `err` relative to `scale`, used to order the
    /// refinement queue.
    fn priority(err: &Self, scale: &Self) -> f64;
    /// True when every component of `err` is within tolerance of `value`.
    fn within(value: &Self, err: &Self, abs_tol: f64, rel_tol: f64) -> bool;
}

impl QuadValue for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn abs_diff(&self, other: &Self) -> Self {
        (self - other).abs()
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn priority(err: &Self, _scale: &Self) -> f64 {
        *err
    }
    fn within(value: &Self, err: &Self, abs_tol: f64, rel_tol: f64) -> bool {
        *err <= abs_tol.max(rel_tol * value.abs())
    }
}

impl QuadValue for Complex64 {
    fn zeros_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn abs_diff(&self, other: &Self) -> Self {
        Complex64::new((self - other).norm(), 0.0)
    }
    fn abs(&self) -> Self {
        Complex64::new(self.norm(), 0.0)
    }
    fn priority(err: &Self, _scale: &Self) -> f64 {
        err.re
    }
    fn within(value: &Self, err: &Self, abs_tol: f64, rel_tol: f64) -> bool {
        err.re <= abs_tol.max(rel_tol * value.norm())
    }
}

/// Several real integrands evaluated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Lanes(pub Vec<f64>);

impl QuadValue for Lanes {
    fn zeros_like(&self) -> Self {
        Lanes(vec![0.0; self.0.len()])
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += w * b;
        }
    }
    fn abs_diff(&self, other: &Self) -> Self {
        Lanes(self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).collect())
    }
    fn abs(&self) -> Self {
        Lanes(self.0.iter().map(|a| a.abs()).collect())
    }
    fn priority(err: &Self, scale: &Self) -> f64 {
        err.0
            .iter()
            .zip(&scale.0)
            .map(|(e, s)| if *s > 0.0 { e / s } else { *e })
            .fold(0.0, f64::max)
    }
    fn within(value: &Self, err: &Self, abs_tol: f64, rel_tol: f64) -> bool {
        value
            .0
            .iter()
            .zip(&err.0)
            .all(|(v, e)| *e <= abs_tol.max(rel_tol * v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<V> {
    pub value: V,
    pub abs_error: V,
    pub evaluations: usize,
    pub intervals: usize,
    pub converged: bool,
}

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    err: V,
    key: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Larger error first; break ties by position so refinement order is
        // deterministic.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// 15-point Kronrod estimate with the embedded 7-point Gauss rule as error
/// estimate.
pub fn gk15<V, F>(f: &F, a: f64, b: f64) -> Result<(V, V)>
where
    V: QuadValue,
    F: Fn(f64) -> Result<V>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = fc.zeros_like();
    let mut gauss = fc.zeros_like();
    kron.add_scaled(&fc, WGK[7]);
    gauss.add_scaled(&fc, WG[3]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kron.add_scaled(&f1, WGK[j]);
        kron.add_scaled(&f2, WGK[j]);
        if j % 2 == 1 {
            gauss.add_scaled(&f1, WG[j / 2]);
            gauss.add_scaled(&f2, WG[j / 2]);
        }
    }
    let mut value = kron.zeros_like();
    value.add_scaled(&kron, half);
    let mut g = gauss.zeros_like();
    g.add_scaled(&gauss, half);
    let err = value.abs_diff(&g);
    Ok((value, err))
}

/// Globally adaptive bisection on `[a, b]`.
///
/// Stops when the summed error estimate satisfies `abs_tol` or `rel_tol`
/// component-wise, or after `max_intervals` segments. Non-convergence is
/// reported through `converged`, not as an error.
pub fn adaptive<V, F>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> Result<V>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(LabError::InvalidParameter(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    let (v0, e0) = gk15(&f, a, b)?;
    let mut total = v0.clone();
    let mut total_err = e0.clone();
    let mut heap = BinaryHeap::new();
    let key = V::priority(&e0, &v0.abs());
    heap.push(Segment { a, b, value: v0, err: e0, key });
    let mut evaluations = 15;
    let mut converged = V::within(&total, &total_err, abs_tol, rel_tol);

    while !converged && heap.len() < max_intervals {
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval collapsed to machine resolution.
            heap.push(seg);
            break;
        }
        let (vl, el) = gk15(&f, seg.a, mid)?;
        let (vr, er) = gk15(&f, mid, seg.b)?;
        evaluations += 30;
        total.add_scaled(&seg.value, -1.0);
        total.add_scaled(&vl, 1.0);
        total.add_scaled(&vr, 1.0);
        total_err.add_scaled(&seg.err, -1.0);
        total_err.add_scaled(&el, 1.0);
        total_err.add_scaled(&er, 1.0);
        let scale = total.abs();
        let kl = V::priority(&el, &scale);
        let kr = V::priority(&er, &scale);
        heap.push(Segment { a: seg.a, b: mid, value: vl, err: el, key: kl });
        heap.push(Segment { a: mid, b: seg.b, value: vr, err: er, key: kr });
        converged = V::within(&total, &total_err, abs_tol, rel_tol);
    }

    // Re-sum in positional order to remove drift from the running updates.
    let mut segs: Vec<Segment<V>> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = total.zeros_like();
    let mut abs_error = total.zeros_like();
    for s in &segs {
        value.add_scaled(&s.value, 1.0);
        abs_error.add_scaled(&s.err, 1.0);
    }
    let converged = converged || V::within(&value, &abs_error, abs_tol, rel_tol);
    Ok(QuadResult {
        value,
        abs_error: abs_error.abs(),
        evaluations,
        intervals: segs.len(),
        converged,
    })
}

/// Convenience wrapper for infallible scalar integrands.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive(|t| Ok(f(t)), a, b, abs_tol, rel_tol, 4000).expect("infallible integrand")
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Composite 16-point Gauss-Legendre rule: `panels` equal panels on `[a, b]`.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gl16();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let c = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(w) {
            out.push((c + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}
