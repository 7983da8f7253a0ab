//! Closed-form references: digamma through Binet's second formula, `coth`,
//! and `zeta'/zeta` on `Re s > 1`.

use crate::error::{LabError, Result};
use crate::quad;
use crate::sum::ComplexSum;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Integration is cut where `exp(-2 pi t) < 1e-18`.
pub fn binet_cutoff() -> f64 {
    18.0 * std::f64::consts::LN_10 / (2.0 * PI)
}

/// `t / (exp(2 pi t) - 1)`, equal to `1/(2 pi)` at the origin.
pub fn binet_weight(t: f64) -> f64 {
    if t.abs() < 1e-300 {
        1.0 / (2.0 * PI)
    } else {
        t / (2.0 * PI * t).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinetResult {
    pub psi: Complex64,
    pub phi_prime: Complex64,
    /// `1 / (24 Re s)`.
    pub bound: f64,
    pub bound_ok: bool,
    /// `1 / (12 (Re s)^2)`.
    pub valid_bound: f64,
    pub abs_error: f64,
}

/// `psi(s) = log s - 1/(2s) + phi'(s)` where `phi'` is the derivative of
/// `phi(s) = 2 int_0^inf arctan(t/s) / (e^{2 pi t}-1) dt`, i.e.
/// `phi'(s) = -2 int_0^inf 1/(s^2+t^2) t/(e^{2 pi t}-1) dt`.
///
/// `bound_ok` tests `|phi'(s)| <= 1/(24 Re s)`, which fails near the origin
/// (at `s = 1`, `|phi'| = 0.077`); `valid_bound` is `1/(12 (Re s)^2)`, which
/// follows from `|s^2 + t^2| >= (Re s)^2`.
pub fn digamma(s: Complex64) -> Result<BinetResult> {
    if !(s.re > 0.0) {
        return Err(LabError::OutsideHalfPlane { region: "right half-plane Re s > 0", s });
    }
    let integrand = |t: f64| -> Result<Complex64> {
        let w = binet_weight(t);
        Ok(w / (s * s + t * t))
    };
    let r = quad::adaptive(integrand, 0.0, binet_cutoff(), 1e-17, 1e-14, 4000)?;
    if !r.converged {
        return Err(LabError::QuadratureNotConverged(format!(
            "Binet integral at s = {s}: error {:e}",
            r.abs_error
        )));
    }
    let phi_prime = -2.0 * r.value;
    let psi = s.ln() - 0.5 / s + phi_prime;
    let bound = 1.0 / (24.0 * s.re);
    let bound_ok = phi_prime.norm() <= bound * (1.0 + 1e-9);
    let valid_bound = 1.0 / (12.0 * s.re * s.re);
    Ok(BinetResult { psi, phi_prime, bound, bound_ok, valid_bound, abs_error: 2.0 * r.abs_error.norm() })
}

/// `int_0^inf t/(e^{2 pi t}-1) dt`, which is `1/24`.
pub fn bernoulli_integral() -> f64 {
    quad::integrate(binet_weight, 0.0, binet_cutoff(), 1e-17, 1e-15).value
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineBound {
    #[serde(rename = "C0")]
    pub c0: f64,
    pub holds: bool,
    /// `|psi(c + iu)| - log |u|` at each sample.
    pub excess: Vec<f64>,
}

/// Smallest `C0` with `|psi(c+iu)| <= log|u| + C0` on the given samples.
/// `holds` requires the excess over the upper half of the samples (by `|u|`)
/// not to exceed the excess over the lower half.
pub fn digamma_line_bound(c: f64, u_samples: &[f64]) -> Result<LineBound> {
    if !(c > 0.0) {
        return Err(LabError::InvalidParameter(format!("c must be positive, got {c}")));
    }
    if let Some(u) = u_samples.iter().find(|u| !(u.abs() >= 1.0)) {
        return Err(LabError::InvalidParameter(format!("samples need |u| >= 1, got {u}")));
    }
    let mut order: Vec<f64> = u_samples.to_vec();
    order.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let excess: Vec<f64> = order
        .iter()
        .map(|&u| Ok(digamma(Complex64::new(c, u))?.psi.norm() - u.abs().ln()))
        .collect::<Result<_>>()?;
    let c0 = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = excess.len() / 2;
    let holds = c0.is_finite()
        && (half == 0
            || excess[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                <= excess[..half].iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1e-9);
    Ok(LineBound { c0, holds, excess })
}

/// `cosh s / sinh s`, through `(1 + e^{-2s}) / (1 - e^{-2s})` on the right.
pub fn coth_logderiv(s: Complex64) -> Result<Complex64> {
    let k = (s.im / PI).round();
    if s.re.abs() < 1e-12 && (s.im - k * PI).abs() < 1e-12 {
        return Err(LabError::Pole(Complex64::new(0.0, k * PI)));
    }
    let one = Complex64::new(1.0, 0.0);
    if s.re >= 0.0 {
        let e = (-2.0 * s).exp();
        Ok((one + e) / (one - e))
    } else {
        let e = (2.0 * s).exp();
        Ok(-(one + e) / (one - e))
    }
}

/// `B_{2j} / (2j)!` for `j = 1..=20`.
const BERNOULLI_OVER_FACTORIAL: [f64; 20] = [
    0.08333333333333333,
    -0.001388888888888889,
    3.306878306878307e-05,
    -8.267195767195768e-07,
    2.08767569878681e-08,
    -5.284190138687493e-10,
    1.3382536530684679e-11,
    -3.3896802963225827e-13,
    8.586062056277845e-15,
    -2.174868698558062e-16,
    5.5090028283602295e-18,
    -1.3954464685812522e-19,
    3.534707039629467e-21,
    -8.953517427037546e-23,
    2.267952452337683e-24,
    -5.744790668872202e-26,
    1.455172475614865e-27,
    -3.6859949406653103e-29,
    9.336734257095045e-31,
    -2.36502241570063e-32,
];

/// Margin kept to the right of the pole at 1.
pub const ZETA_MARGIN: f64 = 0.1;

/// `(zeta(s), zeta'(s))` by Euler-Maclaurin summation, `Re s > 0`, `s != 1`.
pub fn zeta_and_derivative(s: Complex64) -> Result<(Complex64, Complex64)> {
    if !(s.re > 0.0) || s == Complex64::new(1.0, 0.0) {
        return Err(LabError::OutsideHalfPlane { region: "Re s > 0 away from the pole", s });
    }
    let m = BERNOULLI_OVER_FACTORIAL.len();
    let n = (s.norm() / PI).ceil() as usize + 2 * m + 8;
    let nf = n as f64;
    let ln_n = nf.ln();
    let one = Complex64::new(1.0, 0.0);
    let mut z = ComplexSum::new();
    let mut dz = ComplexSum::new();
    for k in 1..n {
        let lk = (k as f64).ln();
        let t = (-s * lk).exp();
        z.add(t);
        dz.add(-t * lk);
    }
    let n_s = (-s * ln_n).exp();
    let sm1 = s - one;
    z.add(n_s * nf / sm1);
    dz.add(n_s * nf * (-ln_n / sm1 - one / (sm1 * sm1)));
    z.add(n_s * 0.5);
    dz.add(-n_s * 0.5 * ln_n);
    // rising products s (s+1) ... (s+2j-2) and their log-derivatives
    let mut poly = s;
    let mut dlog = one / s;
    let mut power = n_s / nf;
    for (j, &b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if j > 0 {
            let a = s + (2 * j - 1) as f64;
            let bb = s + (2 * j) as f64;
            poly = poly * a * bb;
            dlog = dlog + one / a + one / bb;
            power /= nf * nf;
        }
        let term = poly * power * b;
        z.add(term);
        dz.add(term * (dlog - ln_n));
    }
    Ok((z.sum(), dz.sum()))
}

/// `zeta'(s)/zeta(s)` for `Re s > 1 + ZETA_MARGIN`.
pub fn zeta_logderiv(s: Complex64) -> Result<Complex64> {
    if !(s.re > 1.0 + ZETA_MARGIN) {
        return Err(LabError::OutsideHalfPlane { region: "implemented half-plane Re s > 1.1", s });
    }
    let (z, dz) = zeta_and_derivative(s)?;
    Ok(dz / z)
}

/// Von Mangoldt function.
pub fn von_mangoldt(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            return if m == 1 { (p as f64).ln() } else { 0.0 };
        }
        p += 1;
    }
    (m as f64).ln()
}

/// `-sum_{n <= terms} Lambda(n) n^{-s}` and a bound on the omitted tail,
/// `int_N^inf log x x^{-sigma} dx`.
pub fn zeta_logderiv_dirichlet(s: Complex64, terms: u64) -> Result<(Complex64, f64)> {
    let sigma = s.re;
    if !(sigma > 1.0) {
        return Err(LabError::OutsideHalfPlane { region: "half-plane Re s > 1", s });
    }
    let mut acc = ComplexSum::new();
    for n in 2..=terms {
        let l = von_mangoldt(n);
        if l > 0.0 {
            acc.add(-l * (-s * (n as f64).ln()).exp());
        }
    }
    let nf = terms.max(3) as f64;
    let a = sigma - 1.0;
    let tail = nf.powf(-a) * (nf.ln() / a + 1.0 / (a * a));
    Ok((acc.sum(), tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // psi(s) = -gamma + sum_{n>=0} (1/(n+1) - 1/(n+s)), accelerated by
    // shifting up and switching to Stirling's series.
    fn digamma_oracle(mut s: Complex64) -> Complex64 {
        let mut acc = c(0.0, 0.0);
        while s.re < 30.0 {
            acc -= 1.0 / s;
            s += 1.0;
        }
        let inv2 = 1.0 / (s * s);
        let series = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
        acc + s.ln() - 0.5 / s - series
    }

    #[test]
    fn digamma_constants() {
        let r = digamma(c(1.0, 0.0)).unwrap();
        assert!((r.psi.re + EULER_GAMMA).abs() < 1e-10);
        let r = digamma(c(0.5, 0.0)).unwrap();
        assert!((r.psi.re + EULER_GAMMA + 2.0 * 2f64.ln()).abs() < 1e-10);
        let r = digamma(c(2.0, 10.0)).unwrap();
        assert!(r.bound_ok && r.phi_prime.norm() <= 1.0 / 48.0);
        let r1 = digamma(c(1.0, 0.0)).unwrap();
        assert!(!r1.bound_ok && r1.phi_prime.norm() <= r1.valid_bound);
        assert!((r.psi - c(2.313320253770422, 1.4217864258047976)).norm() < 1e-10, "{}", r.psi);
        assert!(digamma(c(0.0, 1.0)).is_err());
    }

    #[test]
    fn digamma_matches_series_oracle() {
        for &s in &[c(0.7, 0.0), c(3.2, -4.5), c(0.5, 40.0), c(12.0, 700.0), c(1.0, 1e4)] {
            let got = digamma(s).unwrap().psi;
            let want = digamma_oracle(s);
            assert!((got - want).norm() < 1e-10 * want.norm().max(1.0), "{s}: {got} {want}");
        }
    }

    #[test]
    fn bernoulli_integral_value() {
        assert!((bernoulli_integral() - 1.0 / 24.0).abs() < 1e-10);
        assert_eq!(binet_weight(0.0), 1.0 / (2.0 * PI));
        // int_10^inf t e^{-2 pi t} dt
        let tail = (10.0 / (2.0 * PI) + 1.0 / (2.0 * PI).powi(2)) * (-20.0 * PI).exp();
        assert!(tail < 1e-20);
    }

    #[test]
    fn line_bound_examples() {
        let us: Vec<f64> = (0..=40).map(|j| 10f64.powf(j as f64 / 10.0)).collect();
        let a = digamma_line_bound(1.0, &us).unwrap();
        assert!(a.holds && a.c0 <= 2.0, "{}", a.c0);
        let b = digamma_line_bound(10.0, &us).unwrap();
        assert!(b.c0.is_finite());
        let one = digamma_line_bound(1.0, &[1.0]).unwrap();
        assert!(one.c0.is_finite() && one.holds);
        assert!(digamma_line_bound(1.0, &[0.5]).is_err());
    }

    #[test]
    fn coth_examples() {
        assert_relative_eq!(coth_logderiv(c(1.0, 0.0)).unwrap().re, 1.0 / 1f64.tanh(), epsilon = 1e-15);
        assert!((coth_logderiv(c(40.0, 3.0)).unwrap() - 1.0).norm() < 1e-30);
        let p = coth_logderiv(c(1.0, PI)).unwrap();
        assert!((p - 1.0 / 1f64.tanh()).norm() < 1e-14);
        assert!(matches!(coth_logderiv(c(0.0, 2.0 * PI)), Err(LabError::Pole(_))));
        let m = coth_logderiv(c(-1.0, 0.3)).unwrap();
        assert!((m + coth_logderiv(c(1.0, -0.3)).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn zeta_values() {
        let v = zeta_logderiv(c(2.0, 0.0)).unwrap();
        assert!((v.re + 0.569_960_993_094_532_8).abs() < 1e-12, "{v}");
        let (z, _) = zeta_and_derivative(c(2.0, 0.0)).unwrap();
        assert!((z.re - PI * PI / 6.0).abs() < 1e-14);
        let far = zeta_logderiv(c(10.0, 0.0)).unwrap();
        assert!(far.norm() < 1e-2);
        assert!(zeta_logderiv(c(1.05, 0.0)).is_err());
        let sup = (-1000..=1000)
            .map(|t| zeta_logderiv(c(1.5, t as f64)).unwrap().norm())
            .fold(0.0, f64::max);
        assert!(sup.is_finite() && sup < 2.0);
    }

    #[test]
    fn zeta_agrees_with_von_mangoldt_sum() {
        for s in [c(3.0, 0.0), c(4.0, 25.0), c(3.5, -300.0)] {
            let (v, tail) = zeta_logderiv_dirichlet(s, 200_000).unwrap();
            let w = zeta_logderiv(s).unwrap();
            assert!((v - w).norm() <= tail + 1e-12, "{s}: {v} {w} {tail}");
        }
    }

    #[test]
    fn zeta_matches_finite_differences() {
        use crate::dirichlet::DirichletSeries;
        let n = 1_000_000usize;
        let z = DirichletSeries::zeta_truncation(n);
        let nf = n as f64;
        for s0 in [2.0, 3.0] {
            let h = 1e-4;
            // partial sum plus the integral estimate of the omitted terms
            let f = |x: f64| {
                let tail = nf.powf(1.0 - x) / (x - 1.0) - 0.5 * nf.powf(-x);
                (z.evaluate(c(x, 0.0)).unwrap().re + tail).ln()
            };
            let fd = (f(s0 + h) - f(s0 - h)) / (2.0 * h);
            let want = zeta_logderiv(c(s0, 0.0)).unwrap().re;
            assert!((fd - want).abs() < 1e-6, "{s0}: {fd} {want}");
        }
    }
}
