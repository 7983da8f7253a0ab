//! Smooth compactly supported test functions with exact derivatives.

use crate::error::{LabError, Result};
use crate::quad;
use std::sync::{Arc, OnceLock};

/// Derivative order available from the bump recurrence.
pub const BUMP_ORDER: u32 = 8;

/// Coefficients (ascending powers of `x`) of `P_n` with
/// `d^n/dx^n exp(1/(x^2-1)) = P_n(x) (x^2-1)^{-2n} exp(1/(x^2-1))`.
fn bump_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for n in 0..BUMP_ORDER as usize {
            let p = &polys[n];
            // P_{n+1} = P_n' q^2 - 4 n x q P_n - 2 x P_n, q = x^2 - 1
            let deg = p.len() + 3;
            let mut next = vec![0.0; deg];
            let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
            // q^2 = x^4 - 2x^2 + 1
            for (i, &c) in dp.iter().enumerate() {
                next[i] += c;
                next[i + 2] -= 2.0 * c;
                next[i + 4] += c;
            }
            // -4n x q P_n = -4n (x^3 - x) P_n
            let nf = n as f64;
            for (i, &c) in p.iter().enumerate() {
                next[i + 3] -= 4.0 * nf * c;
                next[i + 1] += 4.0 * nf * c;
                next[i + 1] -= 2.0 * c;
            }
            while next.len() > 1 && *next.last().expect("nonempty") == 0.0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `n`-th derivative of `exp(x^2/(x^2-1))` on `(-1, 1)`, zero outside.
fn unit_bump(x: f64, n: u32) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let q = x * x - 1.0;
    let p = horner(&bump_polynomials()[n as usize], x);
    if p == 0.0 {
        return 0.0;
    }
    p * (1.0 + 1.0 / q - 2.0 * n as f64 * q.abs().ln()).exp()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug)]
struct PlateauProfile {
    // integral of the unit bump rescaled to (0, 1)
    z: f64,
}

impl PlateauProfile {
    fn get() -> &'static PlateauProfile {
        static P: OnceLock<PlateauProfile> = OnceLock::new();
        P.get_or_init(|| PlateauProfile { z: quad::integrate(|y| unit_bump(2.0 * y - 1.0, 0), 0.0, 1.0, 1e-16, 1e-15).value })
    }

    // S(y) = int_0^y b / Z with b(y) = unit_bump(2y - 1); S^{(n)} = b^{(n-1)} / Z
    fn eval(&self, y: f64, n: u32) -> f64 {
        if n == 0 {
            if y <= 0.0 {
                return 0.0;
            }
            if y >= 1.0 {
                return 1.0;
            }
            let b = |u: f64| unit_bump(2.0 * u - 1.0, 0);
            // integrate the shorter side for accuracy
            if y <= 0.5 {
                quad::integrate(b, 0.0, y, 1e-17, 1e-15).value / self.z
            } else {
                1.0 - quad::integrate(b, y, 1.0, 1e-17, 1e-15).value / self.z
            }
        } else if y <= 0.0 || y >= 1.0 {
            0.0
        } else {
            2f64.powi(n as i32 - 1) * unit_bump(2.0 * y - 1.0, n - 1) / self.z
        }
    }
}

/// A smooth function vanishing with all derivatives outside `support`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `exp(x^2/(x^2-1))`, `x = (t - center)/radius`; equals 1 at the centre.
    Bump { center: f64, radius: f64 },
    /// Equal to 1 on `[-radius/2, radius/2]`, zero outside `(-radius, radius)`.
    Plateau { radius: f64 },
    /// `t^power` times the inner function.
    Monomial { power: u32, inner: Arc<TestFunction> },
    /// `exp(rate t)` times the inner function.
    ExpWeighted { rate: f64, inner: Arc<TestFunction> },
}

impl TestFunction {
    pub fn bump(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(LabError::InvalidParameter(format!("bump needs radius > 0, got {radius}")));
        }
        Ok(TestFunction::Bump { center, radius })
    }

    pub fn plateau(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidParameter(format!("plateau needs radius > 0, got {radius}")));
        }
        Ok(TestFunction::Plateau { radius })
    }

    pub fn times_power(self, power: u32) -> Self {
        if power == 0 {
            self
        } else {
            TestFunction::Monomial { power, inner: Arc::new(self) }
        }
    }

    pub fn times_exp(self, rate: f64) -> Self {
        if rate == 0.0 {
            self
        } else {
            TestFunction::ExpWeighted { rate, inner: Arc::new(self) }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Bump { center, radius } => (center - radius, center + radius),
            TestFunction::Plateau { radius } => (-radius, *radius),
            TestFunction::Monomial { inner, .. } | TestFunction::ExpWeighted { inner, .. } => inner.support(),
        }
    }

    pub fn max_derivative_order(&self) -> u32 {
        BUMP_ORDER
    }

    /// `phi^{(order)}(t)`.
    pub fn eval(&self, t: f64, order: u32) -> f64 {
        assert!(order <= self.max_derivative_order(), "derivative order {order} not available");
        match self {
            TestFunction::Bump { center, radius } => {
                unit_bump((t - center) / radius, order) * radius.powi(-(order as i32))
            }
            TestFunction::Plateau { radius } => {
                let y = 2.0 - 2.0 * t.abs() / radius;
                if order == 0 {
                    return PlateauProfile::get().eval(y, 0);
                }
                let dy = -2.0 * t.signum() / radius;
                PlateauProfile::get().eval(y, order) * dy.powi(order as i32)
            }
            TestFunction::Monomial { power, inner } => {
                // Leibniz: sum_i C(n,i) (t^p)^{(i)} inner^{(n-i)}
                let mut acc = 0.0;
                for i in 0..=order.min(*power) {
                    let falling = (0..i).fold(1.0, |a, k| a * (power - k) as f64);
                    let mono = falling * t.powi((power - i) as i32);
                    acc += binomial(order, i) * mono * inner.eval(t, order - i);
                }
                acc
            }
            TestFunction::ExpWeighted { rate, inner } => {
                let mut acc = 0.0;
                for i in 0..=order {
                    acc += binomial(order, i) * rate.powi((order - i) as i32) * inner.eval(t, i);
                }
                acc * (rate * t).exp()
            }
        }
    }

    /// `int |phi^{(order)}|` by composite Gauss-Legendre.
    pub fn abs_integral(&self, order: u32, panels: usize) -> f64 {
        let (a, b) = self.support();
        quad::composite_nodes(a, b, panels).iter().map(|&(t, w)| w * self.eval(t, order).abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_basics() {
        let f = TestFunction::bump(2.0, 0.4).unwrap();
        assert_eq!(f.eval(2.0, 0), 1.0);
        assert_eq!(f.eval(1.6, 0), 0.0);
        assert_eq!(f.eval(2.4, 0), 0.0);
        assert!(f.eval(2.0, 1).abs() < 1e-15);
        assert!(TestFunction::bump(0.0, 0.0).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let f = TestFunction::bump(0.3, 0.7).unwrap();
        let h = 1e-5;
        for n in 0..BUMP_ORDER {
            for &t in &[0.0, 0.2, 0.55, 0.8, -0.2] {
                let fd = (f.eval(t + h, n) - f.eval(t - h, n)) / (2.0 * h);
                let exact = f.eval(t, n + 1);
                let scale = exact.abs().max(f.eval(t, n).abs()).max(1.0);
                assert!((fd - exact).abs() < 1e-5 * scale, "n={n} t={t}: {fd} {exact}");
            }
        }
    }

    #[test]
    fn bump_integral_two_ways() {
        let f = TestFunction::bump(1.0, 0.5).unwrap();
        let a = quad::integrate(|t| f.eval(t, 0), 0.5, 1.5, 1e-16, 1e-15).value;
        let b: f64 = quad::composite_nodes(0.5, 1.5, 400).iter().map(|&(t, w)| w * f.eval(t, 0)).sum();
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn plateau_basics() {
        let p = TestFunction::plateau(1.0).unwrap();
        assert_eq!(p.eval(0.0, 0), 1.0);
        assert_eq!(p.eval(0.3, 0), 1.0);
        for n in 1..=BUMP_ORDER {
            assert_eq!(p.eval(0.0, n), 0.0);
        }
        assert_eq!(p.eval(1.0, 0), 0.0);
        assert_eq!(p.eval(-1.0, 0), 0.0);
        let mid = p.eval(0.75, 0);
        assert!((mid - 0.5).abs() < 1e-12, "{mid}");
        let h = 1e-5;
        for n in 0..4 {
            for &t in &[0.6, 0.7, -0.85] {
                let fd = (p.eval(t + h, n) - p.eval(t - h, n)) / (2.0 * h);
                let exact = p.eval(t, n + 1);
                assert!((fd - exact).abs() < 1e-4 * exact.abs().max(1.0), "n={n} t={t}: {fd} {exact}");
            }
        }
    }

    #[test]
    fn monomial_derivatives_at_origin() {
        for j in 0..=4u32 {
            let f = TestFunction::plateau(1.0).unwrap().times_power(j);
            for l in 0..=4u32 {
                let want = if l == j { (1..=j).map(|i| i as f64).product::<f64>() } else { 0.0 };
                assert_eq!(f.eval(0.0, l), want, "j={j} l={l}");
            }
        }
    }

    #[test]
    fn exp_weight_leibniz() {
        let f = TestFunction::bump(1.0, 0.5).unwrap().times_exp(0.3);
        let h = 1e-5;
        for n in 0..5 {
            let t = 1.2;
            let fd = (f.eval(t + h, n) - f.eval(t - h, n)) / (2.0 * h);
            assert!((fd - f.eval(t, n + 1)).abs() < 1e-5 * f.eval(t, n + 1).abs().max(1.0));
        }
    }
}
