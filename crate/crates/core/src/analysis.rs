//! End-to-end analysis of one function: convergence exponent, vertical
//! order, optional discrepancy extraction, and the resulting type.

use crate::dirichlet::{Atom, AtomicMeasure, ComplexJson, DirichletSeries, SeriesJson};
use crate::divisor::{AnalysisReport, Anchor, Diagnostic, Divisor};
use crate::error::{LabError, Result};
use crate::hadamard::{TailBoundMode, TruncatedDivisor, TruncationSpec};
use crate::newtoncramer::{self, ClassifyInputs, DiscrepancyPolynomial, PnParams, PnSpec, RhsSource};
use crate::vertline::{self, LineFunction, VerticalOrder};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Extraction residual accepted as evidence for a Weierstrass genus.
pub const EXTRACTION_RESIDUAL_MAX: f64 = 1e-4;

pub const ANCHOR_D: Anchor = Anchor {
    quantity: "d",
    definition: "convergence exponent: least integer d with sum |n_rho| |rho|^-d finite",
};
pub const ANCHOR_M0: Anchor = Anchor {
    quantity: "m0",
    definition: "vertical order: least m with |s|^-m f'/f integrable on vertical lines right of the divisor",
};
pub const ANCHOR_GW: Anchor = Anchor {
    quantity: "gW",
    definition: "Weierstrass genus: degree of the exponential polynomial Q_f, P_f = -Q_f'",
};
pub const ANCHOR_GH: Anchor = Anchor { quantity: "gH", definition: "Hadamard genus d - 1" };
pub const ANCHOR_TYPE: Anchor = Anchor {
    quantity: "classification",
    definition: "Hadamard type when max(gW, gH) = gH; Weierstrass type when gW > gH",
};
pub const ANCHOR_ORDER: Anchor = Anchor {
    quantity: "order_lower_bound",
    definition: "lower bound for the growth order o(f); Dirichlet series have o >= 1",
};
pub const ANCHOR_PN: Anchor = Anchor {
    quantity: "residual",
    definition: "|<W(f), phi> - sum c_l (-1)^l phi^(l)(0) - <L^-1(f'/f), phi>|",
};
pub const ANCHOR_BK: Anchor = Anchor {
    quantity: "b_k",
    definition: "coefficients of -log f = sum_k b_k exp(-<lambda, k> s)",
};
pub const ANCHOR_SHARP: Anchor = Anchor {
    quantity: "ratio_log",
    definition: "log(|f'/f(s)| / |s|^(1 - eps)) at s = c + i k^2 2^k for zeros i n^2 2^n of multiplicity 2^n",
};
pub const ANCHOR_BINET: Anchor = Anchor {
    quantity: "phi_prime",
    definition: "psi(s) - log s + 1/(2s), from Binet's integral",
};

/// Which log-derivative feeds the vertical-line norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogDerivSpec {
    Coth,
    Digamma,
    Zeta,
    Zero,
    /// The Hadamard log-derivative of the divisor itself.
    Hadamard,
    Dirichlet(SeriesJson),
}

impl LogDerivSpec {
    pub fn line_function(&self, div: &Divisor, trunc: &TruncationSpec) -> Result<LineFunction> {
        Ok(match self {
            LogDerivSpec::Coth => LineFunction::coth(),
            LogDerivSpec::Digamma => LineFunction::digamma(),
            LogDerivSpec::Zeta => LineFunction::zeta(),
            LogDerivSpec::Zero => LineFunction::zero(),
            LogDerivSpec::Hadamard => {
                if div.is_empty() {
                    return Ok(LineFunction::zero());
                }
                let d = div.convergence_exponent()?;
                let sigma1 = div.sigma1(10_000)?.value;
                LineFunction::hadamard(TruncatedDivisor::new(div, d, sigma1, trunc), sigma1)
            }
            LogDerivSpec::Dirichlet(j) => LineFunction::dirichlet(DirichletSeries::try_from(j.clone())?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub freq: f64,
    pub mass: ComplexJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRhsJson {
    pub logderiv: LogDerivSpec,
    pub c: f64,
}

/// Right-hand side of the Poisson-Newton identity: either explicit delta
/// coefficients at the origin plus atoms, or a log-derivative on a line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsJson {
    #[serde(default)]
    pub origin: Vec<ComplexJson>,
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<LineRhsJson>,
}

impl RhsJson {
    pub fn source(&self, div: &Divisor, trunc: &TruncationSpec) -> Result<RhsSource> {
        if let Some(line) = &self.line {
            if !self.origin.is_empty() || !self.atoms.is_empty() {
                return Err(LabError::InvalidParameter("rhs takes either a line or atoms, not both".into()));
            }
            return Ok(RhsSource::Line { function: line.logderiv.line_function(div, trunc)?, c: line.c });
        }
        let cutoff = self.atoms.iter().map(|a| a.freq).fold(0.0, f64::max);
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                if !(a.freq > 0.0 && a.freq.is_finite()) {
                    return Err(LabError::InvalidParameter(format!("atom frequency must be positive, got {}", a.freq)));
                }
                Ok(Atom { freq: a.freq, mass: Complex64::new(a.mass.re, a.mass.im) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RhsSource::Atoms {
            origin: self.origin.iter().map(|c| Complex64::new(c.re, c.im)).collect(),
            atoms: AtomicMeasure::from_unsorted(atoms, cutoff, 1e-12),
        })
    }
}

/// Poisson-Newton input in JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnJson {
    pub divisor: Divisor,
    #[serde(default)]
    pub origin_multiplicity: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_discrepancy: Option<Vec<ComplexJson>>,
    pub rhs: RhsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<BumpJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gw_bound: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpJson {
    pub center: f64,
    pub radius: f64,
}

impl PnJson {
    pub fn spec(&self, trunc: &TruncationSpec) -> Result<PnSpec> {
        Ok(PnSpec {
            divisor: self.divisor.clone(),
            origin_multiplicity: self.origin_multiplicity,
            d: self.d,
            known_discrepancy: self
                .known_discrepancy
                .as_ref()
                .map(|v| v.iter().map(|c| Complex64::new(c.re, c.im)).collect()),
            rhs: self.rhs.source(&self.divisor, trunc)?,
        })
    }
}

/// Input of [`analyze`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub divisor: Divisor,
    pub logderiv: LogDerivSpec,
    #[serde(default)]
    pub is_dirichlet: bool,
    /// Lines for the vertical order; overridden by the options when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ExtractionJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionJson {
    #[serde(default)]
    pub origin_multiplicity: i64,
    pub rhs: RhsJson,
    pub gw_bound: u32,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOptions {
    pub tol: f64,
    pub m_max: u32,
    pub t_max: f64,
    pub cs: Vec<f64>,
    pub trunc: TruncationSpec,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            m_max: 6,
            t_max: vertline::DEFAULT_T_MAX,
            cs: Vec::new(),
            trunc: TruncationSpec::new(100_000, 1e-8, TailBoundMode::FromTailModel).expect("valid"),
        }
    }
}

/// Default lines: `0.5` and `2` to the right of the evaluation half-plane
/// (or of `sigma1`, whichever is further right).
pub fn default_lines(div: &Divisor, g: &LineFunction) -> Result<Vec<f64>> {
    let sigma1 = if div.is_empty() { f64::NEG_INFINITY } else { div.sigma1(10_000)?.value };
    let base = sigma1.max(g.valid_half_plane).max(0.0);
    Ok(vec![base + 0.5, base + 2.0])
}

pub fn vertical_order(input: &AnalysisInput, opts: &AnalysisOptions) -> Result<(VerticalOrder, Vec<f64>)> {
    let g = input.logderiv.line_function(&input.divisor, &opts.trunc)?;
    let cs = if !opts.cs.is_empty() {
        opts.cs.clone()
    } else if let Some(cs) = &input.cs {
        cs.clone()
    } else {
        default_lines(&input.divisor, &g)?
    };
    Ok((vertline::vertical_order_estimate(&g, &cs, opts.m_max, opts.t_max, opts.tol)?, cs))
}

pub fn extraction(input: &AnalysisInput, ex: &ExtractionJson, opts: &AnalysisOptions) -> Result<DiscrepancyPolynomial> {
    let spec = PnSpec {
        divisor: input.divisor.clone(),
        origin_multiplicity: ex.origin_multiplicity,
        d: None,
        known_discrepancy: None,
        rhs: ex.rhs.source(&input.divisor, &opts.trunc)?,
    };
    let params = PnParams { tau: ex.tau, trunc: opts.trunc, tol: opts.tol };
    newtoncramer::extract_discrepancy(&spec, ex.gw_bound, ex.radius, &params)
}

pub fn analyze(input: &AnalysisInput, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let div = &input.divisor;
    let d = if div.is_empty() { 0 } else { div.convergence_exponent()? };
    let mut diagnostics = Vec::new();
    if let Some(name) = &input.name {
        diagnostics.push(Diagnostic::new("name", name.clone()));
    }
    if !div.is_empty() {
        let s1 = div.sigma1(10_000)?;
        diagnostics.push(Diagnostic::new("sigma1", s1.value));
        diagnostics.push(Diagnostic::new("sigma1_exact", s1.exact));
        if let Ok(e) = div.empirical_exponent(1e4) {
            diagnostics.push(Diagnostic::new("empirical_alpha", e.alpha_fit));
        }
    }
    let (vo, cs) = vertical_order(input, opts)?;
    diagnostics.push(Diagnostic::new("lines", cs));
    diagnostics.push(Diagnostic::new("c_dependence", vo.c_dependence));
    for (c, m) in &vo.per_line {
        diagnostics.push(Diagnostic::new(format!("m_first_convergent@c={c}"), m.map_or(-1, i64::from)));
    }
    if let Some(m0) = vo.m0 {
        let betas: Vec<f64> = vo
            .details
            .iter()
            .filter_map(|lanes| lanes.get(m0 as usize).and_then(|r| r.tail_exponent))
            .collect();
        diagnostics.push(Diagnostic::new("tail_exponent_at_m0", betas));
    }
    let (discrepancy_coeffs, gw_estimate, gw_ok) = match &input.extraction {
        Some(ex) => {
            let p = extraction(input, ex, opts)?;
            diagnostics.push(Diagnostic::new("tau", p.tau));
            diagnostics.push(Diagnostic::new("extraction_residual", p.residual));
            diagnostics.push(Diagnostic::new("extraction_trimmed_max", p.trimmed_max));
            let ok = p.residual <= EXTRACTION_RESIDUAL_MAX;
            (p.coeffs, Some(p.gw), ok)
        }
        None => (Vec::new(), None, false),
    };
    let outcome = newtoncramer::classify(&ClassifyInputs {
        d,
        m0_estimate: vo.m0,
        gw_estimate,
        gw_residual_ok: gw_ok,
        is_dirichlet: input.is_dirichlet,
    })?;
    Ok(AnalysisReport {
        d,
        m0_estimate: vo.m0,
        gw_estimate,
        discrepancy_coeffs,
        classification: outcome.classification,
        rule: outcome.rule,
        hadamard_genus: d.saturating_sub(1),
        order_lower_bound: outcome.order_lower_bound,
        diagnostics,
        anchors: vec![ANCHOR_D, ANCHOR_M0, ANCHOR_GW, ANCHOR_GH, ANCHOR_TYPE, ANCHOR_ORDER],
    })
}
