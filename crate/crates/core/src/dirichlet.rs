//! Dirichlet series `f(s) = 1 + sum a_n exp(-lambda_n s)`, the coefficients
//! of `-log f` over the frequency lattice, and the atomic inverse Laplace
//! transform of `f'/f`.

use crate::error::{LabError, Result};
use crate::par;
use crate::sum::ComplexSum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Default relative tolerance for coalescing equal frequencies.
pub const MERGE_TOL: f64 = 1e-9;

/// Relative slack on frequency cutoffs, so that sums landing on the cutoff
/// survive rounding.
pub const CUTOFF_SLACK: f64 = 1e-12;

/// Upper limit on enumerated lattice vectors.
pub const MAX_LATTICE_VECTORS: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesJson", into = "SeriesJson")]
pub struct DirichletSeries {
    lambdas: Vec<f64>,
    coeffs: Vec<Complex64>,
    abscissa: f64,
}

impl DirichletSeries {
    pub fn new(lambdas: Vec<f64>, coeffs: Vec<Complex64>, abscissa: f64) -> Result<Self> {
        if lambdas.len() != coeffs.len() {
            return Err(LabError::InvalidParameter(format!(
                "{} frequencies but {} coefficients",
                lambdas.len(),
                coeffs.len()
            )));
        }
        if !abscissa.is_finite() {
            return Err(LabError::InvalidParameter("abscissa must be finite".into()));
        }
        if let Some(&l) = lambdas.first() {
            if !(l > 0.0) {
                return Err(LabError::InvalidParameter(format!("frequencies must be positive, got {l}")));
            }
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas.iter().any(|l| !l.is_finite()) {
            return Err(LabError::InvalidParameter("frequencies must be finite and strictly increasing".into()));
        }
        if coeffs.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(LabError::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(Self { lambdas, coeffs, abscissa })
    }

    /// `1 - e^{-s}`.
    pub fn one_minus_exp() -> Self {
        Self::new(vec![1.0], vec![Complex64::new(-1.0, 0.0)], 0.0).expect("valid series")
    }

    /// `sum_{n <= terms} n^{-s}`.
    pub fn zeta_truncation(terms: usize) -> Self {
        let lambdas = (2..=terms).map(|n| (n as f64).ln()).collect();
        let coeffs = vec![Complex64::new(1.0, 0.0); terms.saturating_sub(1)];
        Self::new(lambdas, coeffs, 1.0).expect("valid series")
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|a| *a == Complex64::new(0.0, 0.0))
    }

    fn check(&self, s: Complex64) -> Result<()> {
        if s.re > self.abscissa {
            Ok(())
        } else {
            Err(LabError::OutsideHalfPlane { region: "half-plane of absolute convergence", s })
        }
    }

    fn sum_terms<F>(&self, s: Complex64, weight: F) -> Complex64
    where
        F: Fn(f64, Complex64) -> Complex64 + Sync + Send,
    {
        let idx: Vec<usize> = (0..self.lambdas.len()).collect();
        let blocks = par::map_chunks(&idx, par::BLOCK, |chunk| {
            let mut acc = ComplexSum::new();
            for &n in chunk {
                let l = self.lambdas[n];
                acc.add(weight(l, self.coeffs[n]) * (-l * s).exp());
            }
            acc
        });
        let mut total = ComplexSum::new();
        for b in &blocks {
            total.merge(b);
        }
        total.sum()
    }

    /// `1 + sum a_n exp(-lambda_n s)`.
    pub fn evaluate(&self, s: Complex64) -> Result<Complex64> {
        self.check(s)?;
        Ok(Complex64::new(1.0, 0.0) + self.sum_terms(s, |_, a| a))
    }

    /// `f'(s)`.
    pub fn derivative(&self, s: Complex64) -> Result<Complex64> {
        self.check(s)?;
        Ok(self.sum_terms(s, |l, a| -a * l))
    }

    /// `f'(s)/f(s)`.
    pub fn log_derivative(&self, s: Complex64) -> Result<Complex64> {
        let f = self.evaluate(s)?;
        if f == Complex64::new(0.0, 0.0) {
            return Err(LabError::AtDivisorPoint { rho: s, mult: 1 });
        }
        Ok(self.derivative(s)? / f)
    }

    /// Bound on the part of `-log f(s)` carried by frequencies above `t`,
    /// for `Re s = sigma`; infinite when `sum |a_n| e^{-lambda_n sigma} >= 1`.
    pub fn log_tail_bound(&self, t: f64, sigma: f64) -> f64 {
        let x: f64 = self
            .lambdas
            .iter()
            .zip(&self.coeffs)
            .map(|(l, a)| a.norm() * (-l * sigma).exp())
            .sum();
        if x >= 1.0 {
            return f64::INFINITY;
        }
        if x == 0.0 {
            return 0.0;
        }
        // a product of j terms has frequency at most j * lambda_max, so only
        // powers j >= ceil(t / lambda_max) reach past t; terms of g with
        // lambda_n > t contribute from j = 1.
        let lmax = self.lambdas.iter().copied().filter(|&l| l <= t).fold(0.0, f64::max);
        let beyond: f64 = self
            .lambdas
            .iter()
            .zip(&self.coeffs)
            .filter(|(l, _)| **l > t)
            .map(|(l, a)| a.norm() * (-l * sigma).exp())
            .sum();
        let j0 = if lmax > 0.0 { (t / lmax).floor() as i32 + 1 } else { 1 };
        let powers = x.powi(j0) / (j0 as f64 * (1.0 - x));
        if beyond > 0.0 {
            powers + beyond / (1.0 - x)
        } else {
            powers
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<ComplexJson>,
    pub abscissa: f64,
}

impl TryFrom<SeriesJson> for DirichletSeries {
    type Error = LabError;

    fn try_from(j: SeriesJson) -> Result<Self> {
        DirichletSeries::new(j.lambdas, j.coeffs.iter().map(|c| Complex64::new(c.re, c.im)).collect(), j.abscissa)
    }
}

impl From<DirichletSeries> for SeriesJson {
    fn from(f: DirichletSeries) -> Self {
        SeriesJson {
            lambdas: f.lambdas,
            coeffs: f.coeffs.iter().map(|c| ComplexJson { re: c.re, im: c.im }).collect(),
            abscissa: f.abscissa,
        }
    }
}

/// A lattice point `k` (entries beyond `k.len()` are zero) with its
/// frequency `<lambda, k>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyVector {
    pub k: Vec<u32>,
    pub freq: f64,
}

impl FrequencyVector {
    pub fn norm(&self) -> u32 {
        self.k.iter().sum()
    }
}

struct Frontier {
    freq: f64,
    k: Vec<u32>,
    last: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.freq.total_cmp(&other.freq).then_with(|| other.k.cmp(&self.k))
    }
}

fn dot(lambdas: &[f64], k: &[u32]) -> f64 {
    k.iter().zip(lambdas).map(|(&kj, &l)| kj as f64 * l).sum()
}

/// All `k != 0` with `<lambda, k> <= t` (up to a relative rounding slack of
/// `CUTOFF_SLACK`), in nondecreasing frequency (ties in decreasing
/// lexicographic order of `k`). Equal frequencies are kept as separate vectors.
pub fn lattice_enumerate(lambdas: &[f64], t: f64) -> Result<Vec<FrequencyVector>> {
    let t = t * (1.0 + CUTOFF_SLACK);
    let active: Vec<f64> = lambdas.iter().copied().take_while(|&l| l <= t).collect();
    let dim = active.len();
    let mut heap = BinaryHeap::new();
    for j in 0..dim {
        let mut k = vec![0u32; dim];
        k[j] = 1;
        heap.push(Reverse(Frontier { freq: active[j], k, last: j }));
    }
    let mut out = Vec::new();
    while let Some(Reverse(node)) = heap.pop() {
        for j in node.last..dim {
            let mut k = node.k.clone();
            k[j] += 1;
            let freq = dot(&active, &k);
            if freq <= t {
                heap.push(Reverse(Frontier { freq, k, last: j }));
            } else {
                // later indices have larger lambda
                break;
            }
        }
        out.push(FrequencyVector { k: node.k, freq: node.freq });
        if out.len() > MAX_LATTICE_VECTORS {
            return Err(LabError::InvalidParameter(format!(
                "more than {MAX_LATTICE_VECTORS} lattice vectors below cutoff {t}"
            )));
        }
    }
    Ok(out)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `b_k = (-1)^|k| / |k| * |k|! / prod k_j! * prod a_j^{k_j}`.
pub fn bk_multinomial(k: &FrequencyVector, coeffs: &[Complex64]) -> Complex64 {
    let n = k.norm();
    assert!(n >= 1, "lattice vector must be nonzero");
    let mut prod = Complex64::new(1.0, 0.0);
    for (j, &kj) in k.k.iter().enumerate() {
        if kj > 0 {
            prod *= coeffs[j].powu(kj);
        }
    }
    let multinomial = if n <= 20 {
        // product of binomials, exact in f64 at this size
        let mut m = 1.0f64;
        let mut partial = 0u32;
        for &kj in &k.k {
            for i in 1..=kj {
                m = m * (partial + i) as f64 / i as f64;
            }
            partial += kj;
        }
        m
    } else {
        let ln = ln_factorial(n) - k.k.iter().map(|&kj| ln_factorial(kj)).sum::<f64>();
        ln.exp()
    };
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    prod * (sign * multinomial / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub freq: f64,
    pub mass: Complex64,
}

/// Finite sum of point masses at positive frequencies not above `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub cutoff: f64,
}

impl AtomicMeasure {
    pub fn empty(cutoff: f64) -> Self {
        Self { atoms: Vec::new(), cutoff }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Merge frequencies within `merge_tol` (relative to the group's first
    /// frequency) after sorting; exact-zero masses are dropped.
    pub fn from_unsorted(mut atoms: Vec<Atom>, cutoff: f64, merge_tol: f64) -> Self {
        atoms.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut sums: Vec<ComplexSum> = Vec::new();
        for a in atoms {
            match out.last() {
                Some(last) if a.freq - last.freq <= merge_tol * last.freq.abs() => {
                    sums.last_mut().expect("paired").add(a.mass);
                }
                _ => {
                    out.push(a);
                    let mut s = ComplexSum::new();
                    s.add(a.mass);
                    sums.push(s);
                }
            }
        }
        for (a, s) in out.iter_mut().zip(&sums) {
            a.mass = s.sum();
        }
        out.retain(|a| a.mass != Complex64::new(0.0, 0.0));
        Self { atoms: out, cutoff }
    }

    /// `sum mass exp(-freq s)`, the Laplace transform.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        self.atoms.iter().map(|a| a.mass * (-a.freq * s).exp()).collect::<ComplexSum>().sum()
    }

    /// Each atom `(nu, b)` becomes `(nu, nu b)`.
    pub fn weighted_by_freq(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| Atom { freq: a.freq, mass: a.mass * a.freq }).collect(),
            cutoff: self.cutoff,
        }
    }

    /// Largest mismatch between two measures: frequencies are paired within
    /// `freq_tol` (relative) and unpaired atoms count against zero. Mass
    /// differences are measured relative to `max(|m|, |m'|, floor)`.
    pub fn max_relative_difference(&self, other: &Self, freq_tol: f64, floor: f64) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut worst: f64 = 0.0;
        let rel = |a: Complex64, b: Complex64| (a - b).norm() / a.norm().max(b.norm()).max(floor);
        while i < self.atoms.len() || j < other.atoms.len() {
            let a = self.atoms.get(i);
            let b = other.atoms.get(j);
            match (a, b) {
                (Some(x), Some(y)) if (x.freq - y.freq).abs() <= freq_tol * x.freq.max(y.freq) => {
                    worst = worst.max(rel(x.mass, y.mass));
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x.freq < y.freq => {
                    worst = worst.max(rel(x.mass, Complex64::new(0.0, 0.0)));
                    i += 1;
                }
                (Some(_), Some(y)) | (None, Some(y)) => {
                    worst = worst.max(rel(Complex64::new(0.0, 0.0), y.mass));
                    j += 1;
                }
                (Some(x), None) => {
                    worst = worst.max(rel(x.mass, Complex64::new(0.0, 0.0)));
                    i += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        worst
    }
}

// series restricted to its nonzero coefficients
fn reduced(f: &DirichletSeries) -> (Vec<f64>, Vec<Complex64>) {
    f.lambdas
        .iter()
        .zip(&f.coeffs)
        .filter(|(_, a)| **a != Complex64::new(0.0, 0.0))
        .map(|(l, a)| (*l, *a))
        .unzip()
}

/// Atoms of `-log f = sum_k b_k exp(-<lambda, k> s)` up to frequency `t`.
pub fn log_atoms(f: &DirichletSeries, t: f64, merge_tol: f64) -> Result<AtomicMeasure> {
    let (lambdas, coeffs) = reduced(f);
    let vectors = lattice_enumerate(&lambdas, t)?;
    let atoms = par::map_slice(&vectors, |v| Atom { freq: v.freq, mass: bk_multinomial(v, &coeffs) });
    Ok(AtomicMeasure::from_unsorted(atoms, t, merge_tol))
}

/// Atoms of the inverse Laplace transform of `f'/f`: masses `nu b`.
pub fn inverse_laplace_atoms(f: &DirichletSeries, t: f64, merge_tol: f64) -> Result<AtomicMeasure> {
    Ok(log_atoms(f, t, merge_tol)?.weighted_by_freq())
}

/// Independent route to [`log_atoms`]: `-log(1 + g) = sum_j (-1)^j g^j / j`
/// with products of exponential polynomials truncated at `t`.
pub fn series_log_oracle(f: &DirichletSeries, t: f64) -> Result<AtomicMeasure> {
    let (lambdas, coeffs) = reduced(f);
    let g: Vec<Atom> = lambdas
        .iter()
        .zip(&coeffs)
        .filter(|(l, _)| **l <= t)
        .map(|(&freq, &mass)| Atom { freq, mass })
        .collect();
    if g.is_empty() {
        return Ok(AtomicMeasure::empty(t));
    }
    let lambda1 = g[0].freq;
    let max_power = (t * (1.0 + CUTOFF_SLACK) / lambda1).floor() as u32;
    let mut result: Vec<Atom> = Vec::new();
    let mut power = AtomicMeasure::from_unsorted(g.clone(), t, MERGE_TOL);
    for j in 1..=max_power {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        result.extend(power.atoms.iter().map(|a| Atom { freq: a.freq, mass: a.mass * (sign / j as f64) }));
        if j == max_power {
            break;
        }
        let mut next = Vec::new();
        for a in &power.atoms {
            for b in &g {
                let freq = a.freq + b.freq;
                if freq <= t * (1.0 + CUTOFF_SLACK) {
                    next.push(Atom { freq, mass: a.mass * b.mass });
                }
            }
        }
        if next.len() > MAX_LATTICE_VECTORS {
            return Err(LabError::InvalidParameter("oracle product too large".into()));
        }
        power = AtomicMeasure::from_unsorted(next, t, MERGE_TOL);
        if power.is_empty() {
            break;
        }
    }
    Ok(AtomicMeasure::from_unsorted(result, t, MERGE_TOL))
}

/// `max |exp(-sum b e^{-nu s}) - f(s)|` over `samples`.
pub fn roundtrip_check(f: &DirichletSeries, t: f64, samples: &[Complex64]) -> Result<f64> {
    let atoms = log_atoms(f, t, MERGE_TOL)?;
    let mut worst: f64 = 0.0;
    for &s in samples {
        let direct = f.evaluate(s)?;
        let back = (-atoms.laplace(s)).exp();
        worst = worst.max((back - direct).norm());
    }
    Ok(worst)
}
