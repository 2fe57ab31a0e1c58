//! The Connes–Chern cyclic cocycle of the regular Fredholm module.
//!
//! For `n` odd and basic elements `a^i = φ_i g_i`,
//! `Φ(a⁰, …, aⁿ) = Tr((2P − 1)[P, λ(a⁰)] ⋯ [P, λ(aⁿ)])`. Moving the group
//! elements to the right gives `ψ_i = (g₀⋯g_{i−1}).φ_i`; the trace vanishes
//! unless `g₀⋯g_n = 1` and otherwise equals
//!
//! `(−1)^{(n+1)/2} Σ_h [cov(ψ₀,ψ₁*)cov(ψ₂,ψ₃*)⋯ − cov(ψ_n,ψ₀*)cov(ψ₁,ψ₂*)⋯](h)`.
//!
//! Each pairing `⟨1|M_f (1 − P) M_g|1⟩` is `E(fg) − E(f)E(g)`, which is the
//! covariance of `f` with `g*`; for real functions the stars are invisible.
//!
//! The sum over `h` is exact on a ball and the remainder is certified with
//! `|cov(f, g)| ≤ σ(f)σ(g)` and the sphere envelope `σ_G(ψ)(h) ≤
//! K(k)(2n−1)^{−(|h|−k)/2}`, `K(k) = √2‖ψ‖_∞(2n)^{1/2}(2n−1)^{(k−1)/2}`. For a
//! level-`k` function and `|h| = m > k`, `h_*μ` gives mass `1/(2n(2n−1)^{m−k})`
//! to the complement of `[h₁⋯h_k]`, where `ψ` is constant `c`, so
//! `σ² ≤ ∫|ψ − c|² d(h_*μ) ≤ 4‖ψ‖²_∞/(2n(2n−1)^{m−k})`; `K(k)` dominates
//! that constant. For `m ≤ k` the envelope already exceeds `‖ψ‖_∞ ≥ σ`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::Expectations;
use crate::error::{Error, Result};
use crate::function::{FunctionJson, LocallyConstantFunction};
use crate::group::{GroupParams, ReducedWord};
use crate::operator::BlockTruncation;
use crate::scalar::{format_f64, rational_to_f64, GaussRational};

#[derive(Clone, Debug)]
pub struct CocycleInput {
    params: GroupParams,
    degree: usize,
    terms: Vec<(LocallyConstantFunction, ReducedWord)>,
}

impl CocycleInput {
    /// `terms` holds `(φ_i, g_i)` for `i = 0..=degree`.
    pub fn new(params: GroupParams, degree: usize, terms: Vec<(LocallyConstantFunction, ReducedWord)>) -> Result<Self> {
        if degree.is_multiple_of(2) {
            return Err(Error::domain(format!("the cocycle degree must be odd, got {degree}")));
        }
        if terms.len() != degree + 1 {
            return Err(Error::input(format!("degree {degree} needs {} terms, got {}", degree + 1, terms.len())));
        }
        for (phi, g) in &terms {
            if phi.params() != params {
                return Err(Error::input("a function lives on a different free group"));
            }
            params.check_word(g)?;
        }
        Ok(CocycleInput { params, degree, terms })
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[(LocallyConstantFunction, ReducedWord)] {
        &self.terms
    }

    /// Whether `g₀g₁⋯g_n = 1`.
    pub fn product_is_identity(&self) -> bool {
        self.terms.iter().fold(ReducedWord::identity(), |acc, (_, g)| acc.mul(g)).is_identity()
    }

    /// `(aⁿ, a⁰, …, aⁿ⁻¹)`.
    pub fn rotated(&self) -> CocycleInput {
        let mut terms = self.terms.clone();
        terms.rotate_right(1);
        CocycleInput { params: self.params, degree: self.degree, terms }
    }

    /// Multiplies `φ₀` by `c`.
    pub fn scale_first(&self, c: &GaussRational) -> CocycleInput {
        let mut terms = self.terms.clone();
        terms[0].0 = terms[0].0.scale(c);
        CocycleInput { params: self.params, degree: self.degree, terms }
    }

    pub fn to_json(&self) -> CocycleInputJson {
        CocycleInputJson {
            rank: self.params.rank(),
            degree: self.degree,
            terms: self.terms.iter().map(|(phi, g)| TermJson { phi: phi.to_json(), g: g.clone() }).collect(),
        }
    }

    pub fn from_json(json: &CocycleInputJson) -> Result<Self> {
        let params = GroupParams::new(json.rank)?;
        let terms = json
            .terms
            .iter()
            .map(|t| Ok((LocallyConstantFunction::from_json(params, &t.phi)?, t.g.clone())))
            .collect::<Result<Vec<_>>>()?;
        CocycleInput::new(params, json.degree, terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleInputJson {
    pub rank: usize,
    pub degree: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub phi: FunctionJson,
    pub g: ReducedWord,
}

/// `ψ_i = (g₀⋯g_{i−1}).φ_i`.
pub fn shifted_functions(input: &CocycleInput) -> Vec<LocallyConstantFunction> {
    let mut prefix = ReducedWord::identity();
    input
        .terms
        .iter()
        .map(|(phi, g)| {
            let psi = phi.translate(&prefix);
            prefix = prefix.mul(g);
            psi
        })
        .collect()
}

/// The summand of the covariance formula at `h`.
fn formula_term(psi: &[LocallyConstantFunction], h: &ReducedWord, depth: usize) -> GaussRational {
    let params = psi[0].params();
    let ex = Expectations::new(&params, h, depth);
    let n = psi.len() - 1;
    let cov = |i: usize, j: usize| ex.covariance(&psi[i], &psi[j].conjugate());
    let first = (0..=n).step_by(2).fold(GaussRational::one(), |acc, i| &acc * &cov(i, i + 1));
    let second = (1..n).step_by(2).fold(cov(n, 0), |acc, i| &acc * &cov(i, i + 1));
    let value = first - second;
    if n.div_ceil(2) % 2 == 1 {
        -value
    } else {
        value
    }
}

/// Per-sphere bounds of the certificate.
#[derive(Clone, Debug)]
struct Envelope {
    /// `Π_i K_i (2n−1)^{k_i/2}`.
    constant: f64,
    /// `(2n−1)^{1 − (n+1)/2}`.
    ratio: f64,
    branching: f64,
    alphabet: f64,
}

impl Envelope {
    fn new(input: &CocycleInput, psi: &[LocallyConstantFunction]) -> Self {
        let q = input.params.branching() as f64;
        let alphabet = input.params.alphabet_size() as f64;
        let constant = psi
            .iter()
            .map(|f| {
                if f.is_constant() {
                    return 0.0;
                }
                let k = f.depth() as f64;
                let kk = 2f64.sqrt() * f.sup_norm() * alphabet.sqrt() * q.powf((k - 1.0) / 2.0);
                kk * q.powf(k / 2.0)
            })
            .product();
        let ratio = q.powf(1.0 - (input.degree as f64 + 1.0) / 2.0);
        Envelope { constant, ratio, branching: q, alphabet }
    }

    /// Bound on `|Σ_{|h| = m} term(h)|`.
    fn sphere(&self, m: usize) -> f64 {
        2.0 * self.alphabet / self.branching * self.constant * self.ratio.powi(m as i32)
    }

    /// Bound on `Σ_{m > R}`.
    fn tail(&self, radius: usize) -> f64 {
        if self.ratio >= 1.0 {
            return f64::INFINITY;
        }
        if self.constant == 0.0 {
            return 0.0;
        }
        2.0 * self.alphabet / self.branching * self.constant * self.ratio.powi(radius as i32 + 1) / (1.0 - self.ratio)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereTerm {
    pub m: usize,
    pub sum: GaussRational,
    pub bound: f64,
}

impl SphereTerm {
    pub fn within_bound(&self) -> bool {
        self.sum.abs_f64() <= self.bound * (1.0 + 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedValue {
    pub value: Complex64,
    pub radius: usize,
    /// `+∞` when the degree gives no decay.
    pub tail_bound: f64,
    pub exact_partial: GaussRational,
    pub product_is_identity: bool,
    pub certified: bool,
    pub spheres: Vec<SphereTerm>,
}

impl CertifiedValue {
    pub fn to_json(&self) -> CertifiedValueJson {
        CertifiedValueJson {
            value: [format_f64(self.value.re), format_f64(self.value.im)],
            radius: self.radius,
            tail_bound: format_f64(self.tail_bound),
            partial_exact: self.exact_partial.to_pair(),
            product_is_identity: self.product_is_identity,
            certified: self.certified,
            spheres: self
                .spheres
                .iter()
                .map(|s| SphereTermJson { m: s.m, sum: s.sum.to_pair(), bound: format_f64(s.bound) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValueJson {
    pub value: [String; 2],
    pub radius: usize,
    pub tail_bound: String,
    pub partial_exact: [String; 2],
    pub product_is_identity: bool,
    pub certified: bool,
    pub spheres: Vec<SphereTermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTermJson {
    pub m: usize,
    pub sum: [String; 2],
    pub bound: String,
}

/// The covariance formula summed exactly over `B_R`, with a certified tail.
pub fn cocycle_value(input: &CocycleInput, radius: usize) -> Result<CertifiedValue> {
    let certified = input.degree >= 3;
    if !input.product_is_identity() {
        return Ok(CertifiedValue {
            value: Complex64::new(0.0, 0.0),
            radius,
            tail_bound: 0.0,
            exact_partial: GaussRational::zero(),
            product_is_identity: false,
            certified,
            spheres: vec![],
        });
    }
    let psi = shifted_functions(input);
    let depth = psi.iter().map(LocallyConstantFunction::depth).max().unwrap_or(0);
    let envelope = Envelope::new(input, &psi);
    let mut spheres = Vec::with_capacity(radius + 1);
    for m in 0..=radius {
        let sphere = input.params.sphere(m)?;
        let sum: GaussRational = sphere.par_iter().map(|h| formula_term(&psi, h, depth)).collect::<Vec<_>>().into_iter().sum();
        spheres.push(SphereTerm { m, sum, bound: envelope.sphere(m) });
    }
    let exact_partial: GaussRational = spheres.iter().map(|s| s.sum.clone()).sum();
    Ok(CertifiedValue {
        value: exact_partial.to_complex(),
        radius,
        tail_bound: envelope.tail(radius),
        exact_partial,
        product_is_identity: true,
        certified,
        spheres,
    })
}

/// A truncated trace together with the blocks outside its exactness window.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceReport {
    pub value: Complex64,
    /// Source blocks whose chain leaked or used a compressed multiplier.
    pub inexact_blocks: usize,
    /// `Σ_bad (|trace_h| + 2Π_i σ_G(ψ_i)(h))`, bounding the mismatch
    /// between the truncated and the true block contributions.
    pub window_correction: f64,
}

/// `Tr((2P − 1)[P, λ(a⁰)] ⋯ [P, λ(aⁿ)])` on a truncation, reporting the window
/// correction instead of refusing inputs that overhang the window.
pub fn trace_oracle_with_correction(input: &CocycleInput, t: &BlockTruncation) -> Result<TraceReport> {
    if t.params() != input.params {
        return Err(Error::input("truncation and input live on different free groups"));
    }
    let psi = shifted_functions(input);
    let per_block: Vec<(Complex64, f64, bool)> = (0..t.ball().len())
        .into_par_iter()
        .map(|b| {
            let chain = t.chain_trace(&input.terms, b);
            if chain.exact {
                return (chain.value, 0.0, true);
            }
            let h = &t.ball()[b];
            let sigma: f64 = psi
                .iter()
                .map(|f| rational_to_f64(&Expectations::new(&input.params, h, f.depth()).deviation_sq(f)).sqrt())
                .product();
            (chain.value, chain.value.norm() + 2.0 * sigma, false)
        })
        .collect();
    Ok(TraceReport {
        value: per_block.iter().map(|p| p.0).sum(),
        inexact_blocks: per_block.iter().filter(|p| !p.2).count(),
        window_correction: per_block.iter().map(|p| p.1).sum(),
    })
}

/// The strict oracle: every block must stay inside the exactness window.
pub fn trace_oracle(input: &CocycleInput, t: &BlockTruncation) -> Result<Complex64> {
    let report = trace_oracle_with_correction(input, t)?;
    if report.inexact_blocks > 0 {
        return Err(Error::domain(format!(
            "{} source blocks fall outside the exactness window of R = {}, m = {}",
            report.inexact_blocks,
            t.radius(),
            t.level()
        )));
    }
    Ok(report.value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidation {
    pub partial: Complex64,
    pub trace: Complex64,
    pub difference: f64,
    pub tail_bound: f64,
    pub window_correction: f64,
}

impl CrossValidation {
    pub fn holds(&self) -> bool {
        self.difference <= self.tail_bound + self.window_correction + 1e-10
    }
}

/// Compares the covariance formula on `B_R` with the trace on the same ball.
pub fn cross_validate(input: &CocycleInput, t: &BlockTruncation) -> Result<CrossValidation> {
    let value = cocycle_value(input, t.radius())?;
    let trace = trace_oracle_with_correction(input, t)?;
    Ok(CrossValidation {
        partial: value.value,
        trace: trace.value,
        difference: (value.value - trace.value).norm(),
        tail_bound: value.tail_bound,
        window_correction: trace.window_correction,
    })
}

/// `Φ(a⁰, …, aⁿ) = −Φ(aⁿ, a⁰, …, aⁿ⁻¹)` on partial sums: returns
/// `(|S_R(a) + S_R(rot a)|, combined tail)`.
pub fn cyclicity_check(input: &CocycleInput, radius: usize) -> Result<(f64, f64)> {
    let a = cocycle_value(input, radius)?;
    let b = cocycle_value(&input.rotated(), radius)?;
    Ok(((a.value + b.value).norm(), a.tail_bound + b.tail_bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Cylinder;
    use crate::function::one;
    use crate::scalar::rat;

    fn f2() -> GroupParams {
        GroupParams::new(2).unwrap()
    }

    fn w(s: &str) -> ReducedWord {
        s.parse().unwrap()
    }

    fn ind(s: &str) -> LocallyConstantFunction {
        LocallyConstantFunction::indicator(f2(), &Cylinder::new(w(s)))
    }

    fn input(terms: Vec<(LocallyConstantFunction, &str)>) -> CocycleInput {
        let degree = terms.len() - 1;
        CocycleInput::new(f2(), degree, terms.into_iter().map(|(f, g)| (f, w(g))).collect()).unwrap()
    }

    #[test]
    fn validation() {
        let t = vec![(ind("a"), ReducedWord::identity()); 3];
        assert!(matches!(CocycleInput::new(f2(), 2, t), Err(Error::Domain(_))));
        let t = vec![(ind("a"), ReducedWord::identity()); 3];
        assert!(CocycleInput::new(f2(), 3, t).is_err());
    }

    #[test]
    fn shifted() {
        let x = input(vec![(ind("a"), "1"), (ind("b"), "1")]);
        let psi = shifted_functions(&x);
        assert_eq!(psi[1], ind("b"));
        let x = input(vec![(ind("a"), "a"), (ind("b"), "A")]);
        assert_eq!(shifted_functions(&x)[1], ind("b").translate(&w("a")));
        let x = input(vec![(ind("a"), "ab"), (ind("b"), "A"), (ind("B"), "b"), (ind("ab"), "BBa")]);
        let psi = shifted_functions(&x);
        assert_eq!(psi[3], ind("ab").translate(&w("abAb")));
        assert!(psi[3].depth() <= 2 + w("abAb").len());
    }

    #[test]
    fn vanishing_and_trivial_cases() {
        let x = input(vec![(ind("a"), "a"), (ind("b"), "1"), (ind("a"), "1"), (ind("b"), "1")]);
        let v = cocycle_value(&x, 4).unwrap();
        assert!(v.exact_partial.is_zero() && v.tail_bound == 0.0 && !v.product_is_identity);

        let c = one(f2()).scale(&GaussRational::from_ints(3, 1));
        let x = input(vec![(c.clone(), "1"), (c.clone(), "a"), (c.clone(), "A"), (c, "1")]);
        let v = cocycle_value(&x, 3).unwrap();
        assert!(v.exact_partial.is_zero() && v.tail_bound == 0.0);

        let x = input(vec![(ind("a"), "1"); 4]);
        assert!(cocycle_value(&x, 5).unwrap().exact_partial.is_zero());
    }

    #[test]
    fn alternating_indicators_vanish() {
        let x = input(vec![(ind("a"), "1"), (ind("b"), "1"), (ind("a"), "1"), (ind("b"), "1")]);
        let v = cocycle_value(&x, 5).unwrap();
        assert!(v.exact_partial.is_zero());
        assert!(v.spheres.iter().all(SphereTerm::within_bound));
    }

    #[test]
    fn degree_one_is_uncertified() {
        let x = input(vec![(ind("a"), "1"), (ind("b"), "1")]);
        let v = cocycle_value(&x, 3).unwrap();
        assert!(!v.certified && v.tail_bound.is_infinite());
    }

    #[test]
    fn tail_monotone_and_spheres_bounded() {
        let x = input(vec![
            (ind("a"), "1"),
            (ind("b").scale(&GaussRational::i()), "a"),
            (ind("B"), "1"),
            (ind("ab"), "A"),
        ]);
        let values: Vec<_> = (0..5).map(|r| cocycle_value(&x, r).unwrap()).collect();
        for pair in values.windows(2) {
            assert!(pair[1].tail_bound <= pair[0].tail_bound);
        }
        assert!(values[4].spheres.iter().all(SphereTerm::within_bound));
        assert!(!values[4].exact_partial.is_zero());
    }

    #[test]
    fn multilinear_in_first_argument() {
        let x = input(vec![(ind("a"), "b"), (ind("b"), "1"), (ind("A"), "B"), (ind("B"), "1")]);
        let c = GaussRational::real(rat(-5, 7));
        let base = cocycle_value(&x, 3).unwrap().exact_partial;
        let scaled = cocycle_value(&x.scale_first(&c), 3).unwrap().exact_partial;
        assert_eq!(scaled, &base * &c);
    }

    #[test]
    fn oracle_matches_formula_inside_the_window() {
        // Depth-1 functions with identity group elements: every block of
        // B_2 is exact at level 3.
        let x = input(vec![
            (ind("a"), "1"),
            (ind("b").add(&ind("B").scale(&GaussRational::i())), "1"),
            (ind("A"), "1"),
            (ind("a").scale(&GaussRational::from_ints(1, -2)), "1"),
        ]);
        let t = BlockTruncation::build(f2(), 2, 3).unwrap();
        let trace = trace_oracle(&x, &t).unwrap();
        let partial = cocycle_value(&x, 2).unwrap();
        assert!((trace - partial.value).norm() < 1e-12, "{trace} vs {}", partial.value);
        assert!(partial.value.norm() > 1e-6);
    }

    #[test]
    fn oracle_matches_formula_with_group_elements() {
        let x = input(vec![(ind("a"), "a"), (ind("b"), "1"), (ind("B"), "A"), (ind("ab"), "1")]);
        let t = BlockTruncation::build(f2(), 1, 4).unwrap();
        let report = trace_oracle_with_correction(&x, &t).unwrap();
        let value = cocycle_value(&x, 1).unwrap();
        let exact_part = (report.value - value.value).norm();
        assert!(exact_part <= report.window_correction + 1e-12);
    }

    #[test]
    fn oracle_rejects_window_violation() {
        let x = input(vec![(ind("ab"), "1"); 4]);
        let t = BlockTruncation::build(f2(), 2, 2).unwrap();
        assert!(matches!(trace_oracle(&x, &t), Err(Error::Domain(_))));
        let r = trace_oracle_with_correction(&x, &t).unwrap();
        assert!(r.inexact_blocks > 0 && r.window_correction > 0.0);
    }

    #[test]
    fn cyclicity() {
        let x = input(vec![
            (ind("a"), "1"),
            (ind("b").scale(&GaussRational::i()), "b"),
            (ind("A"), "B"),
            (ind("ab"), "1"),
        ]);
        let (gap, tail) = cyclicity_check(&x, 4).unwrap();
        assert!(gap <= tail);
    }

    #[test]
    fn json_round_trip() {
        let x = input(vec![(ind("a"), "ab"), (ind("b"), "BA")]);
        let json = serde_json::to_string(&x.to_json()).unwrap();
        let back = CocycleInput::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.terms(), x.terms());
        let v = cocycle_value(&x, 2).unwrap().to_json();
        assert_eq!(v.tail_bound, "inf");
    }
}
