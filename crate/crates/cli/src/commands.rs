use crate::{CliError, Command, Common, GammaArgs, InputArgs, OutFormat, SharpArgs};
use lldlab::analysis::{self, AnalysisInput, AnalysisOptions, PnJson};
use lldlab::dirichlet::{self, AtomicMeasure, DirichletSeries, SeriesJson, MERGE_TOL};
use lldlab::divisor::Anchor;
use lldlab::hadamard::{self, TailBoundMode, TruncationSpec};
use lldlab::newtoncramer::{self, PnParams, PnReport};
use lldlab::specfun;
use lldlab::testfn::TestFunction;
use lldlab::vertline::{LineIntegralResult, VerticalOrder};
use lldlab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::Read;

type CmdResult = Result<String, CliError>;

pub(crate) fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Analyze(a) => analyze(a),
        Command::Bk(a) => bk(a, false),
        Command::Atoms(a) => bk(a, true),
        Command::VerifyPn(a) => verify_pn(a),
        Command::M0(a) => m0(a),
        Command::Discrepancy(a) => discrepancy(a),
        Command::Sharpness(a) => sharpness(a),
        Command::GammaCheck(a) => gamma_check(a),
    }
}

fn validate(c: &Common) -> Result<(), CliError> {
    let positive = [("--tol", c.tol), ("--T", c.t_cut), ("--tmax", c.tmax)];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if c.tmax < 64.0 {
        return Err(CliError::Invalid(format!("--tmax must be at least 64, got {}", c.tmax)));
    }
    if c.mmax > 16 {
        return Err(CliError::Invalid(format!("--mmax must be at most 16, got {}", c.mmax)));
    }
    if let Some(bad) = c.c.iter().find(|x| !x.is_finite()) {
        return Err(CliError::Invalid(format!("--c must be finite, got {bad}")));
    }
    Ok(())
}

fn read_input<T: DeserializeOwned>(src: &str) -> Result<T, CliError> {
    let text = if src.trim_start().starts_with('{') {
        src.to_string()
    } else if src == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(format!("reading stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(src).map_err(|e| CliError::Io(format!("reading {src}: {e}")))?
    };
    serde_json::from_str(&text).map_err(CliError::Json)
}

fn json<T: Serialize>(v: &T) -> CmdResult {
    Ok(serde_json::to_string_pretty(v).expect("reports serialize") + "\n")
}

/// CSV with a leading comment line naming the quantity and its definition.
fn csv_rows(anchor: &Anchor, header: &[&str], rows: &[Vec<String>]) -> CmdResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).expect("utf8");
    Ok(format!("# {}: {}\n{body}", anchor.quantity, anchor.definition))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn options(c: &Common) -> AnalysisOptions {
    AnalysisOptions {
        tol: c.tol,
        m_max: c.mmax,
        t_max: c.tmax,
        cs: c.c.clone(),
        trunc: TruncationSpec { max_points: 100_000, abs_tol: c.tol, tail_bound_mode: TailBoundMode::FromTailModel },
    }
}

fn analyze(a: &InputArgs) -> CmdResult {
    validate(&a.common)?;
    let input: AnalysisInput = read_input(&a.input)?;
    let report = analysis::analyze(&input, &options(&a.common))?;
    match a.common.out {
        OutFormat::Json => json(&report),
        OutFormat::Csv => {
            let opt = |v: Option<u32>| v.map_or_else(String::new, |x| x.to_string());
            let rows = vec![
                vec!["d".into(), report.d.to_string()],
                vec!["m0".into(), opt(report.m0_estimate)],
                vec!["gW".into(), opt(report.gw_estimate)],
                vec!["gH".into(), report.hadamard_genus.to_string()],
                vec!["classification".into(), format!("{:?}", report.classification)],
                vec!["order_lower_bound".into(), report.order_lower_bound.to_string()],
            ];
            csv_rows(&analysis::ANCHOR_TYPE, &["quantity", "value"], &rows)
        }
    }
}

#[derive(Serialize)]
struct AtomsReport {
    cutoff: f64,
    count: usize,
    atoms: Vec<AtomRow>,
    anchors: Vec<Anchor>,
}

#[derive(Serialize)]
struct AtomRow {
    freq: f64,
    mass: Complex64,
}

fn bk(a: &InputArgs, weighted: bool) -> CmdResult {
    validate(&a.common)?;
    let sj: SeriesJson = read_input(&a.input)?;
    let f = DirichletSeries::try_from(sj)?;
    let mu: AtomicMeasure = if weighted {
        dirichlet::inverse_laplace_atoms(&f, a.common.t_cut, MERGE_TOL)?
    } else {
        dirichlet::log_atoms(&f, a.common.t_cut, MERGE_TOL)?
    };
    let report = AtomsReport {
        cutoff: mu.cutoff,
        count: mu.len(),
        atoms: mu.atoms.iter().map(|at| AtomRow { freq: at.freq, mass: at.mass }).collect(),
        anchors: vec![analysis::ANCHOR_BK],
    };
    match a.common.out {
        OutFormat::Json => json(&report),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> =
                report.atoms.iter().map(|r| vec![num(r.freq), num(r.mass.re), num(r.mass.im)]).collect();
            csv_rows(&analysis::ANCHOR_BK, &["freq", "mass_re", "mass_im"], &rows)
        }
    }
}

fn pn_inputs(a: &InputArgs) -> Result<(PnJson, usize), CliError> {
    validate(&a.common)?;
    let p: PnJson = read_input(&a.input)?;
    let max_points = p.max_points.unwrap_or(100_000);
    if max_points == 0 {
        return Err(CliError::Invalid("max_points must be positive".into()));
    }
    Ok((p, max_points))
}

fn trunc(points: usize, tol: f64) -> TruncationSpec {
    TruncationSpec { max_points: points, abs_tol: tol, tail_bound_mode: TailBoundMode::FromTailModel }
}

#[derive(Serialize)]
struct PnRun {
    report: PnReport,
    series: Vec<(usize, f64)>,
    anchors: Vec<Anchor>,
}

fn verify_pn(a: &InputArgs) -> CmdResult {
    let (p, max_points) = pn_inputs(a)?;
    let tf = p.test_function.ok_or_else(|| CliError::Invalid("verify-pn needs a test_function".into()))?;
    let phi = TestFunction::bump(tf.center, tf.radius)?;
    let mut sizes: Vec<usize> = std::iter::successors(Some(100usize), |n| Some(n * 10)).take_while(|&n| n < max_points).collect();
    sizes.push(max_points);
    let mut series = Vec::new();
    let mut last = None;
    for n in sizes {
        let t = trunc(n, a.common.tol);
        let spec = p.spec(&t)?;
        let params = PnParams { tau: p.tau, trunc: t, tol: a.common.tol.min(1e-10) };
        let r = newtoncramer::verify_poisson_newton(&spec, &phi, &params)?;
        series.push((n, r.residual));
        last = Some(r);
    }
    let run = PnRun { report: last.expect("at least one size"), series, anchors: vec![analysis::ANCHOR_PN] };
    match a.common.out {
        OutFormat::Json => json(&run),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> = run.series.iter().map(|(n, r)| vec![n.to_string(), num(*r)]).collect();
            csv_rows(&analysis::ANCHOR_PN, &["truncation", "residual"], &rows)
        }
    }
}

fn discrepancy(a: &InputArgs) -> CmdResult {
    let (p, max_points) = pn_inputs(a)?;
    let t = trunc(max_points, a.common.tol);
    let spec = p.spec(&t)?;
    let params = PnParams { tau: p.tau, trunc: t, tol: a.common.tol.min(1e-10) };
    let poly = newtoncramer::extract_discrepancy(&spec, p.gw_bound.unwrap_or(4), p.radius.unwrap_or(1.0), &params)?;
    #[derive(Serialize)]
    struct Out {
        discrepancy: newtoncramer::DiscrepancyPolynomial,
        anchors: Vec<Anchor>,
    }
    match a.common.out {
        OutFormat::Json => json(&Out { discrepancy: poly, anchors: vec![analysis::ANCHOR_GW] }),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> = poly
                .coeffs
                .iter()
                .zip(&poly.errors)
                .enumerate()
                .map(|(l, (c, e))| vec![l.to_string(), num(c.re), num(c.im), num(*e)])
                .collect();
            csv_rows(&analysis::ANCHOR_GW, &["l", "c_re", "c_im", "error"], &rows)
        }
    }
}

#[derive(Serialize)]
struct M0Report {
    m0: Option<u32>,
    lines: Vec<f64>,
    per_line: Vec<(f64, Option<u32>)>,
    c_dependence: bool,
    norms: Vec<Vec<NormRow>>,
    anchors: Vec<Anchor>,
}

#[derive(Serialize)]
struct NormRow {
    m: u32,
    value: Option<f64>,
    tail_exponent: Option<f64>,
    verdict: lldlab::vertline::Verdict,
}

fn norm_row(r: &LineIntegralResult) -> NormRow {
    NormRow { m: r.m, value: r.value, tail_exponent: r.tail_exponent, verdict: r.verdict }
}

fn m0(a: &InputArgs) -> CmdResult {
    validate(&a.common)?;
    let input: AnalysisInput = read_input(&a.input)?;
    let opts = options(&a.common);
    let (vo, cs): (VerticalOrder, Vec<f64>) = analysis::vertical_order(&input, &opts)?;
    match a.common.out {
        OutFormat::Json => json(&M0Report {
            m0: vo.m0,
            lines: cs,
            per_line: vo.per_line.clone(),
            c_dependence: vo.c_dependence,
            norms: vo.details.iter().map(|lanes| lanes.iter().map(norm_row).collect()).collect(),
            anchors: vec![analysis::ANCHOR_M0],
        }),
        OutFormat::Csv => {
            let g = input.logderiv.line_function(&input.divisor, &opts.trunc)?;
            let m = vo.m0.unwrap_or(opts.m_max);
            let c = cs[0];
            let n = 64;
            let mut rows = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let t = opts.t_max.powf(i as f64 / n as f64);
                let s = Complex64::new(c, t);
                let v = g.eval(s)?.norm() * s.norm().powi(-(m as i32));
                rows.push(vec![num(t), num(v)]);
            }
            csv_rows(&analysis::ANCHOR_M0, &["t", "abs_integrand"], &rows)
        }
    }
}

fn sharpness(a: &SharpArgs) -> CmdResult {
    validate(&a.common)?;
    let c = a.common.c.first().copied().unwrap_or(1.0);
    if !(a.eps >= 0.0 && a.eps < 1.0) {
        return Err(CliError::Invalid(format!("--eps must lie in [0, 1), got {}", a.eps)));
    }
    let result = hadamard::sharp_ratio(a.k, c, a.eps)?;
    let series = (1..=a.k)
        .map(|k| hadamard::sharp_ratio(k, c, a.eps).map(|r| (k, r.ratio_log)))
        .collect::<lldlab::Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Out {
        result: hadamard::SharpRatio,
        series: Vec<(u32, f64)>,
        anchors: Vec<Anchor>,
    }
    match a.common.out {
        OutFormat::Json => json(&Out { result, series, anchors: vec![analysis::ANCHOR_SHARP] }),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> = series.iter().map(|(k, r)| vec![k.to_string(), num(*r)]).collect();
            csv_rows(&analysis::ANCHOR_SHARP, &["k", "ratio_log"], &rows)
        }
    }
}

#[derive(Serialize)]
struct GammaReport {
    psi_1_plus_gamma: f64,
    psi_half_plus_gamma_plus_2ln2: f64,
    bernoulli_integral_minus_1_24: f64,
    seed: u64,
    samples: usize,
    stated_bound_holds: usize,
    valid_bound_holds: usize,
    worst_stated_ratio: f64,
    worst_stated_point: Complex64,
    line_bound: specfun::LineBound,
    anchors: Vec<Anchor>,
}

fn gamma_check(a: &GammaArgs) -> CmdResult {
    validate(&a.common)?;
    let g = specfun::EULER_GAMMA;
    let psi1 = specfun::digamma(Complex64::new(1.0, 0.0))?.psi;
    let psih = specfun::digamma(Complex64::new(0.5, 0.0))?.psi;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let points: Vec<Complex64> =
        (0..a.samples).map(|_| Complex64::new(rng.random_range(0.5..=20.0), rng.random_range(-20.0..=20.0))).collect();
    let mut stated = 0;
    let mut valid = 0;
    let mut worst = (0.0, Complex64::new(0.0, 0.0));
    for &s in &points {
        let r = specfun::digamma(s)?;
        stated += usize::from(r.bound_ok);
        valid += usize::from(r.phi_prime.norm() <= r.valid_bound);
        let ratio = r.phi_prime.norm() / r.bound;
        if ratio > worst.0 {
            worst = (ratio, s);
        }
    }
    let c = a.common.c.first().copied().unwrap_or(1.0);
    let us: Vec<f64> = (0..=12).map(|i| 2f64.powi(i)).collect();
    let report = GammaReport {
        psi_1_plus_gamma: (psi1 + g).norm(),
        psi_half_plus_gamma_plus_2ln2: (psih + g + 2.0 * std::f64::consts::LN_2).norm(),
        bernoulli_integral_minus_1_24: specfun::bernoulli_integral() - 1.0 / 24.0,
        seed: a.common.seed,
        samples: a.samples,
        stated_bound_holds: stated,
        valid_bound_holds: valid,
        worst_stated_ratio: worst.0,
        worst_stated_point: worst.1,
        line_bound: specfun::digamma_line_bound(c, &us)?,
        anchors: vec![analysis::ANCHOR_BINET],
    };
    match a.common.out {
        OutFormat::Json => json(&report),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> =
                us.iter().zip(&report.line_bound.excess).map(|(u, e)| vec![num(*u), num(*e)]).collect();
            csv_rows(&analysis::ANCHOR_BINET, &["u", "abs_psi_minus_log_u"], &rows)
        }
    }
}
