use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use fredholm::boundary::weak_distance_to_delta;
use fredholm::chern::{cocycle_value, cross_validate, SphereTerm, TermJson};
use fredholm::deviation::{deviation_profile_with_cap, DeviationProfile};
use fredholm::function::FunctionJson;
use fredholm::operator::{
    conditional_lower_bound_check, homotopy_projection_check_values, match_commutator_spectrum,
    verify_compression_identity, verify_covariance_identity, verify_pi_identity, BlockTruncation, CrossedElement,
};
use fredholm::scalar::{format_f64, format_rational, rat, rational_to_f64, Rational};
use fredholm::summability::{d_plus_check, decay_exponent_fit, lp_report};
use fredholm::{
    BoundaryPoint, CocycleInput, GroupParams, LocallyConstantFunction, ReducedWord, Truncation, VisualStructure,
};

use crate::config::Settings;
use crate::output::{csv_row, Artifacts};
use crate::InvariantViolation;

pub const PI_TOLERANCE: f64 = 1e-10;
pub const SPECTRUM_TOLERANCE: f64 = 1e-9;
pub const PROJECTION_TOLERANCE: f64 = 1e-12;

pub fn f(x: f64) -> String {
    format_f64(x)
}

pub fn complex(z: Complex64) -> [String; 2] {
    [f(z.re), f(z.im)]
}

pub fn load_function(params: GroupParams, path: &Path) -> anyhow::Result<LocallyConstantFunction> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let json: FunctionJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(LocallyConstantFunction::from_json(params, &json)?)
}

fn params(rank: usize) -> anyhow::Result<GroupParams> {
    Ok(GroupParams::new(rank)?)
}

fn violation(msg: impl Into<String>) -> anyhow::Error {
    InvariantViolation(msg.into()).into()
}

#[derive(Debug, Args)]
pub struct GrowthArgs {
    /// Rank of the free group.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<usize>,
}

pub fn growth(s: &Settings, a: GrowthArgs) -> anyhow::Result<()> {
    let p = params(s.rank(a.n))?;
    let radius = s.radius(a.radius, 3);
    let ball = p.ball_with_cap(radius, s.budget as u128)?;
    let mut spheres = Vec::new();
    let mut csv = String::from("m,sphere,ball,closed_form\n");
    for m in 0..=radius {
        let sphere = ball.iter().filter(|g| g.len() == m).count() as u64;
        let cumulative = ball.iter().filter(|g| g.len() <= m).count() as u64;
        let closed = p.growth_count(m) as u64;
        csv.push_str(&csv_row([m.to_string(), sphere.to_string(), cumulative.to_string(), closed.to_string()]));
        spheres.push(json!({"m": m, "sphere": sphere, "ball": cumulative, "closed_form": closed}));
    }
    let size = ball.len() as u64;
    let closed = p.growth_count(radius) as u64;
    let out = Artifacts::new(&s.out)?;
    out.json(
        "growth",
        &json!({"rank": p.rank(), "radius": radius, "ball_size": size, "closed_form": closed, "spheres": spheres}),
    )?;
    out.csv("growth", &csv)?;
    println!("{size}");
    if size != closed {
        return Err(violation(format!("|B_{radius}| = {size} but the closed form gives {closed}")));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DeviationArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Function file `{"depth": k, "values": {...}}`.
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<usize>,
}

fn profile(s: &Settings, rank: usize, phi: &Option<PathBuf>, radius: usize) -> anyhow::Result<DeviationProfile> {
    let p = params(rank)?;
    let path = s.path(phi.clone(), &s.file.phi, "--phi")?;
    let phi = load_function(p, &path)?;
    Ok(deviation_profile_with_cap(&phi, radius, s.budget as u128)?)
}

pub fn deviation(s: &Settings, a: DeviationArgs) -> anyhow::Result<()> {
    let radius = s.radius(a.radius, 2);
    let prof = profile(s, s.rank(a.n), &a.phi, radius)?;
    let out = Artifacts::new(&s.out)?;
    out.json("deviation", &prof.to_json())?;
    out.csv("deviation", &prof.to_csv())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SummabilityArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, alias = "R")]
    pub radius: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

pub fn summability(s: &Settings, a: SummabilityArgs) -> anyhow::Result<()> {
    let rank = s.rank(a.n);
    let vs = VisualStructure::new(params(rank)?, s.epsilon(a.epsilon)?)?;
    let radius = s.radius(a.radius, 8);
    let prof = profile(s, rank, &a.phi, radius)?;
    let mut reports = Vec::new();
    let mut csv = String::from("p,m,sphere_sum,ratio\n");
    for p in s.p_list(a.p) {
        let r = lp_report(&prof, p, &vs)?;
        csv.push_str(r.to_csv().split_once('\n').map_or("", |x| x.1));
        reports.push(json!({
            "p": f(r.p),
            "sphere_sums": r.sphere_sums.iter().map(|x| f(*x)).collect::<Vec<_>>(),
            "partial_sum": f(r.partial_sum),
            "tail_ratios": r.tail_ratios.iter().map(|x| x.map(f)).collect::<Vec<_>>(),
            "verdict": r.verdict,
            "margin": f(r.margin),
        }));
    }
    let fit = decay_exponent_fit(&prof).ok().map(f);
    let dp = d_plus_check(&prof, &vs);
    let report = json!({
        "rank": rank,
        "epsilon": f(vs.epsilon()),
        "radius": radius,
        "dimension": f(vs.hausdorff_dimension()),
        "threshold": f(fredholm::summability::summability_threshold(&vs)),
        "decay_exponent": fit,
        "d_plus": {
            "comparison_constant": f(dp.comparison_constant),
            "count_constant": f(dp.count_constant),
            "worst_ratio": f(dp.worst_ratio),
            "holds": dp.holds,
        },
        "reports": reports,
    });
    let out = Artifacts::new(&s.out)?;
    out.json("summability", &report)?;
    out.csv("summability", &csv)?;
    if !dp.holds {
        return Err(violation(format!("sorted deviations exceed the D+ envelope by {}", dp.worst_ratio)));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<usize>,
    /// Function level; defaults to depth(φ) + R.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

fn truncation_for(
    s: &Settings,
    rank: usize,
    epsilon: Option<f64>,
    phi: &LocallyConstantFunction,
    radius: usize,
    m: Option<usize>,
) -> anyhow::Result<Truncation> {
    let vs = VisualStructure::new(params(rank)?, s.epsilon(epsilon)?)?;
    let level = s.level(m).unwrap_or((phi.depth() + radius).max(1));
    Ok(Truncation::build(vs, radius, level)?)
}

pub fn spectrum(s: &Settings, a: SpectrumArgs) -> anyhow::Result<()> {
    let rank = s.rank(a.n);
    let path = s.path(a.phi, &s.file.phi, "--phi")?;
    let phi = load_function(params(rank)?, &path)?;
    let t = truncation_for(s, rank, a.epsilon, &phi, s.radius(a.radius, 1), a.m)?;
    let m = match_commutator_spectrum(&phi, &t)?;
    let passed = m.max_error <= SPECTRUM_TOLERANCE && m.residual <= SPECTRUM_TOLERANCE;
    let mut csv = String::from("index,expected,computed\n");
    for (i, c) in m.computed.iter().enumerate() {
        let e = m.expected.get(i).map(|x| f(*x)).unwrap_or_default();
        csv.push_str(&csv_row([i.to_string(), e, f(*c)]));
    }
    let out = Artifacts::new(&s.out)?;
    out.json(
        "spectrum",
        &json!({
            "rank": rank,
            "radius": t.radius(),
            "level": t.level(),
            "dimension": t.dim(),
            "expected": m.expected.iter().map(|x| f(*x)).collect::<Vec<_>>(),
            "computed": m.computed.iter().map(|x| f(*x)).collect::<Vec<_>>(),
            "max_error": f(m.max_error),
            "residual": f(m.residual),
            "tolerance": f(SPECTRUM_TOLERANCE),
            "passed": passed,
        }),
    )?;
    out.csv("spectrum", &csv)?;
    if !passed {
        return Err(violation(format!("singular values off by {} (residual {})", m.max_error, m.residual)));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct OperatorsVerifyArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Also write `P` and `Π(φ)` as CSV and binary dumps.
    #[arg(long)]
    pub dump: bool,
}

/// One named check with its measured error and tolerance.
pub struct Check {
    pub name: String,
    pub value: String,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value: f(value), bound: f(bound), passed: value <= bound }
    }

    pub fn exact(name: impl Into<String>, value: String, expected: String) -> Self {
        let passed = value == expected;
        Check { name: name.into(), value, bound: expected, passed }
    }

    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "value": self.value, "bound": self.bound, "passed": self.passed})
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut csv = String::from("check,value,bound,passed\n");
    for c in checks {
        csv.push_str(&csv_row([c.name.as_str(), &c.value, &c.bound, if c.passed { "true" } else { "false" }]));
    }
    csv
}

pub fn fail_on(checks: &[Check]) -> anyhow::Result<()> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(violation(format!("failed checks: {}", failed.join(", "))))
    }
}

/// The operator identities for one function on one truncation.
pub fn operator_checks(phi: &LocallyConstantFunction, t: &Truncation) -> anyhow::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let p = t.projection_p().matrix;
    let idempotent = fredholm::operator::max_abs(&(&p * &p - &p));
    let selfadjoint = fredholm::operator::max_abs(&(p.adjoint() - &p));
    checks.push(Check::at_most("projection", idempotent.max(selfadjoint), PROJECTION_TOLERANCE));

    let pi = verify_pi_identity(phi, t)?;
    checks.push(Check::at_most("pi_modulus", pi.modulus_error, PI_TOLERANCE));
    checks.push(Check::at_most("pi_compression", pi.compression_error, PI_TOLERANCE));
    let cov = verify_covariance_identity(phi, &phi.conjugate(), t)?;
    checks.push(Check::at_most("pi_covariance", cov, PI_TOLERANCE));

    let spec = match_commutator_spectrum(phi, t)?;
    checks.push(Check::at_most("commutator_spectrum", spec.max_error.max(spec.residual), SPECTRUM_TOLERANCE));
    checks.push(Check::at_most("commutator_norm", spec.computed.first().copied().unwrap_or(0.0), 2.0 * phi.sup_norm() + 1e-12));

    let g = t.params().generator(0, false);
    if t.radius() >= 1 && phi.depth() + t.radius() <= t.level() {
        let a = CrossedElement::new(vec![(phi.clone(), ReducedWord::identity()), (phi.conjugate(), g.clone())]);
        checks.push(Check::at_most("compression_identity", verify_compression_identity(&a, t)?, 1e-12));
    }
    if t.radius() >= 2 && phi.depth() + t.radius() / 2 <= t.level() {
        let a = CrossedElement::new(vec![(phi.clone(), ReducedWord::identity()), (phi.clone(), g)]);
        let rows = conditional_lower_bound_check(&a, t)?;
        let worst = rows.iter().map(|r| r.rhs - r.lhs).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::at_most("conditional_lower_bound", worst, 1e-12));
    }

    // η(s) = cos s + i sin s √ρ with ρ the density of a_*μ.
    let rho = fredholm::boundary::pushforward(&t.params(), &t.params().generator(0, false), t.level())?.density();
    let path = |s: f64| -> Vec<Complex64> {
        rho.iter().map(|r| Complex64::new(s.cos(), s.sin() * rational_to_f64(r).sqrt())).collect()
    };
    let ones = vec![Complex64::new(1.0, 0.0); t.level_dim()];
    let h = homotopy_projection_check_values(t, &ones, &ones)?;
    checks.push(Check::at_most("homotopy_p_of_one", h.p_one_error, PROJECTION_TOLERANCE));
    for (i, (s1, s2)) in [(0.0, std::f64::consts::FRAC_PI_2), (0.25, 0.5)].into_iter().enumerate() {
        let h = homotopy_projection_check_values(t, &path(s1), &path(s2))?;
        checks.push(Check::at_most(format!("homotopy_path_{i}"), h.norm_diff, h.bound + 1e-12));
    }
    Ok(checks)
}

pub fn operators_verify(s: &Settings, a: OperatorsVerifyArgs) -> anyhow::Result<()> {
    let rank = s.rank(a.n);
    let path = s.path(a.phi, &s.file.phi, "--phi")?;
    let phi = load_function(params(rank)?, &path)?;
    let t = truncation_for(s, rank, a.epsilon, &phi, s.radius(a.radius, 2), a.m)?;
    let checks = operator_checks(&phi, &t)?;
    let out = Artifacts::new(&s.out)?;
    out.json(
        "operators",
        &json!({
            "rank": rank,
            "radius": t.radius(),
            "level": t.level(),
            "dimension": t.dim(),
            "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        }),
    )?;
    out.csv("operators", &checks_csv(&checks))?;
    if a.dump {
        let p = t.projection_p();
        let pi = t.pi(&phi);
        out.write("P.csv", p.to_csv().as_bytes())?;
        out.write("Pi.csv", pi.to_csv().as_bytes())?;
        let mut bytes = Vec::new();
        p.write_binary(&mut bytes)?;
        out.write("P.bin", &bytes)?;
        bytes.clear();
        pi.write_binary(&mut bytes)?;
        out.write("Pi.bin", &bytes)?;
    }
    fail_on(&checks)
}

#[derive(Debug, Args)]
pub struct ChernArgs {
    /// Degree of the cocycle (odd).
    #[arg(long)]
    pub n: Option<usize>,
    /// Rank of the free group.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Terms file `{"terms": [{"phi": {...}, "g": "a"}, ...]}`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, alias = "R")]
    pub radius: Option<usize>,
    /// Also cross-validate against the truncated trace at this function level.
    #[arg(long)]
    pub oracle_level: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ChernFile {
    rank: Option<usize>,
    degree: Option<usize>,
    terms: Vec<TermJson>,
}

pub fn chern(s: &Settings, a: ChernArgs) -> anyhow::Result<()> {
    let path = s.path(a.input, &s.file.input, "--input")?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file: ChernFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let rank = a.rank.or(file.rank).unwrap_or_else(|| s.rank(None));
    let p = params(rank)?;
    let degree = a.n.or(file.degree).unwrap_or(file.terms.len().saturating_sub(1));
    let terms = file
        .terms
        .iter()
        .map(|t| Ok((LocallyConstantFunction::from_json(p, &t.phi)?, t.g.clone())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let input = CocycleInput::new(p, degree, terms)?;
    let radius = s.radius(a.radius, 4);
    if p.growth_count(radius) > s.budget as u128 {
        return Err(fredholm::Error::Budget { what: "ball", requested: p.growth_count(radius), cap: s.budget as u128 }.into());
    }
    let value = cocycle_value(&input, radius)?;
    let mut checks = vec![Check {
        name: "sphere_bounds".into(),
        value: value.spheres.iter().filter(|t| !t.within_bound()).count().to_string(),
        bound: "0".into(),
        passed: value.spheres.iter().all(SphereTerm::within_bound),
    }];
    let oracle = match a.oracle_level.or(s.file.level) {
        Some(m) => {
            let t = BlockTruncation::build(p, radius, m)?;
            let cv = cross_validate(&input, &t)?;
            checks.push(Check::at_most("oracle_agreement", cv.difference, cv.tail_bound + cv.window_correction + 1e-10));
            Some(json!({
                "level": m,
                "trace": complex(cv.trace),
                "difference": f(cv.difference),
                "window_correction": f(cv.window_correction),
            }))
        }
        None => None,
    };
    let mut report = serde_json::to_value(value.to_json())?;
    report["rank"] = json!(rank);
    report["degree"] = json!(degree);
    report["oracle"] = json!(oracle);
    report["checks"] = json!(checks.iter().map(Check::to_json).collect::<Vec<_>>());
    let mut csv = String::from("m,re_sum,im_sum,bound\n");
    for t in &value.spheres {
        let [re, im] = t.sum.to_pair();
        csv.push_str(&csv_row([t.m.to_string(), re, im, f(t.bound)]));
    }
    let out = Artifacts::new(&s.out)?;
    out.json("chern", &report)?;
    out.csv("chern", &csv)?;
    fail_on(&checks)
}

#[derive(Debug, Args)]
pub struct FurstenbergArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Eventually periodic boundary point, e.g. `(a)` or `ab(Ba)`.
    #[arg(long, default_value = "(a)")]
    pub omega: String,
    /// Cylinder depth of the weak distance.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub m_max: usize,
}

pub fn furstenberg(s: &Settings, a: FurstenbergArgs) -> anyhow::Result<()> {
    let p = params(s.rank(a.n))?;
    if a.k == 0 {
        bail!("the cylinder depth must be at least 1");
    }
    let omega = BoundaryPoint::parse(&p, &a.omega)?;
    let q = Rational::from_integer((p.branching() as i64).into());
    let mut rows = Vec::new();
    let mut csv = String::from("m,g,distance,bound\n");
    let mut checks = Vec::new();
    for m in 0..=a.m_max {
        let g = omega.prefix(m);
        let d = weak_distance_to_delta(&p, &g, &omega, a.k)?;
        let bound = (m > a.k).then(|| rat(2, 1) * q.pow(-((m - a.k) as i32)));
        if let Some(b) = &bound {
            checks.push(Check::exact(format!("rate_m{m}"), (d <= *b).to_string(), "true".into()));
        }
        let bound = bound.as_ref().map(format_rational);
        csv.push_str(&csv_row([m.to_string(), g.to_string(), format_rational(&d), bound.clone().unwrap_or_default()]));
        rows.push(json!({"m": m, "g": g.to_string(), "distance": format_rational(&d), "bound": bound}));
    }
    let out = Artifacts::new(&s.out)?;
    out.json("furstenberg", &json!({"rank": p.rank(), "omega": omega.to_string(), "k": a.k, "rows": rows}))?;
    out.csv("furstenberg", &csv)?;
    fail_on(&checks)
}
