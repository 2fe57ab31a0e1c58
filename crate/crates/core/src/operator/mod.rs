//! Finite truncations of `H = ℓ²(F_n, L²(∂F_n, μ))`.
//!
//! The group factor is cut to a ball `B_R`, the function factor to the
//! level-`m` locally constant functions with orthonormal basis
//! `1_c/√μ(c)`. Basis vectors are ordered block-major: group element first
//! (canonical order), then cylinder (canonical order).
//!
//! Truncation is not a wrap-around: `λ(g)` sends `δ_h` to zero when
//! `gh ∉ B_R`, and `λ(φ)` on block `h` is the level-`m` compression of
//! multiplication by `h⁻¹.φ`. Both are exact on the *exactness window*:
//! blocks whose images stay in the ball and where `depth(φ) + |h| ≤ m`.
//! Every operator records which source blocks fall outside its window.

mod blocks;
mod svd;

pub use blocks::{BlockEntry, BlockTruncation, ChainTrace, DEFAULT_BLOCK_BUDGET};
pub use svd::{operator_norm, schatten_norm, singular_values};

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::{depth_mass, VisualStructure};
use crate::deviation::Expectations;
use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::group::{GroupParams, ReducedWord};
use crate::scalar::{format_f64, rational_to_f64, GaussRational, Rational};

/// Cap on the total dimension of a dense truncation.
pub const DEFAULT_DIMENSION_CAP: usize = 6000;

pub type Matrix = DMatrix<Complex64>;

#[derive(Clone, Debug)]
pub struct Truncation {
    params: GroupParams,
    visual: VisualStructure,
    radius: usize,
    level: usize,
    ball: Vec<ReducedWord>,
    index: HashMap<ReducedWord, usize>,
    level_dim: usize,
    /// `√μ(c)` for a level-`m` cylinder; the coordinates of the constant 1.
    sqrt_cell: f64,
}

impl Truncation {
    pub fn build(visual: VisualStructure, radius: usize, level: usize) -> Result<Self> {
        Truncation::build_with_cap(visual, radius, level, DEFAULT_DIMENSION_CAP)
    }

    pub fn build_with_cap(visual: VisualStructure, radius: usize, level: usize, cap: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::domain("the function level of a truncation must be at least 1"));
        }
        let params = visual.params();
        let requested = params.growth_count(radius) * params.sphere_count(level);
        if requested > cap as u128 {
            return Err(Error::Budget { what: "truncation dimension", requested, cap: cap as u128 });
        }
        let ball = params.ball(radius)?;
        let index = ball.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
        Ok(Truncation {
            params,
            visual,
            radius,
            level,
            ball,
            index,
            level_dim: params.sphere_count(level) as usize,
            sqrt_cell: rational_to_f64(&depth_mass(&params, level)).sqrt(),
        })
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn visual(&self) -> &VisualStructure {
        &self.visual
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ball(&self) -> &[ReducedWord] {
        &self.ball
    }

    pub fn block_of(&self, g: &ReducedWord) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn level_dim(&self) -> usize {
        self.level_dim
    }

    pub fn dim(&self) -> usize {
        self.ball.len() * self.level_dim
    }

    fn offset(&self, block: usize) -> usize {
        block * self.level_dim
    }

    /// Gram matrix of the basis, from exact cylinder intersections.
    pub fn gram_matrix(&self) -> Matrix {
        let mass = depth_mass(&self.params, self.level);
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| {
            if i / self.level_dim != j / self.level_dim {
                return Complex64::new(0.0, 0.0);
            }
            let overlap = if i % self.level_dim == j % self.level_dim { mass.clone() } else { Rational::default() };
            Complex64::new(rational_to_f64(&(overlap / &mass)), 0.0)
        })
    }

    /// The constant function 1 in block `h`.
    pub fn constant_vector(&self, block: usize) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        let o = self.offset(block);
        for c in 0..self.level_dim {
            v[o + c] = Complex64::new(self.sqrt_cell, 0.0);
        }
        v
    }

    /// Multiplier on block `h`: the level-`m` averages of `h⁻¹.φ`, and whether
    /// they are exact.
    fn block_multiplier(&self, phi: &LocallyConstantFunction, h: &ReducedWord) -> (Vec<Complex64>, bool) {
        let shifted = phi.translate(&h.inverse());
        let exact = shifted.depth() <= self.level;
        let values = shifted.average_to(self.level).values().iter().map(GaussRational::to_complex).collect();
        (values, exact)
    }

    /// `λ_μ(φ)`: block-diagonal, multiplication by `h⁻¹.φ` on block `h`.
    pub fn rep_function(&self, phi: &LocallyConstantFunction) -> TruncatedOperator {
        let n = self.dim();
        let mut matrix = Matrix::zeros(n, n);
        let mut inexact = Vec::new();
        for (b, h) in self.ball.iter().enumerate() {
            let (values, exact) = self.block_multiplier(phi, h);
            if !exact {
                inexact.push(b);
            }
            let o = self.offset(b);
            for (c, v) in values.into_iter().enumerate() {
                matrix[(o + c, o + c)] = v;
            }
        }
        TruncatedOperator { matrix, label: "lambda(phi)".into(), inexact_blocks: inexact }
    }

    /// `λ_μ(g)`: `δ_h ⊗ ψ ↦ δ_{gh} ⊗ ψ`, zero when `gh` leaves the ball.
    pub fn rep_group(&self, g: &ReducedWord) -> TruncatedOperator {
        let n = self.dim();
        let mut matrix = Matrix::zeros(n, n);
        let mut inexact = Vec::new();
        for (b, h) in self.ball.iter().enumerate() {
            match self.block_of(&g.mul(h)) {
                Some(t) => {
                    let (src, dst) = (self.offset(b), self.offset(t));
                    for c in 0..self.level_dim {
                        matrix[(dst + c, src + c)] = Complex64::new(1.0, 0.0);
                    }
                }
                None => inexact.push(b),
            }
        }
        TruncatedOperator { matrix, label: format!("lambda({g})"), inexact_blocks: inexact }
    }

    /// `λ_μ(Σ φ_g g) = Σ λ_μ(φ_g) λ_μ(g)`.
    pub fn rep_element(&self, a: &CrossedElement) -> TruncatedOperator {
        let n = self.dim();
        let mut total = TruncatedOperator { matrix: Matrix::zeros(n, n), label: "lambda(a)".into(), inexact_blocks: vec![] };
        for (phi, g) in &a.terms {
            let term = self.rep_function(phi).compose(&self.rep_group(g));
            total.matrix += term.matrix;
            total.inexact_blocks.extend(term.inexact_blocks);
        }
        total.inexact_blocks.sort_unstable();
        total.inexact_blocks.dedup();
        total
    }

    /// `P_{ℓ²Γ}`: integration against `μ` in every block.
    pub fn projection_p(&self) -> TruncatedOperator {
        let n = self.dim();
        let mut matrix = Matrix::zeros(n, n);
        let w = Complex64::new(self.sqrt_cell * self.sqrt_cell, 0.0);
        for b in 0..self.ball.len() {
            let o = self.offset(b);
            for i in 0..self.level_dim {
                for j in 0..self.level_dim {
                    matrix[(o + i, o + j)] = w;
                }
            }
        }
        TruncatedOperator { matrix, label: "P".into(), inexact_blocks: vec![] }
    }

    /// `Σ_h θ(h) |1_h⟩⟨1_h|`: multiplication by `θ` on the copy of `ℓ²(B_R)`.
    pub fn lifted_multiplier(&self, theta: &[Complex64]) -> Matrix {
        assert_eq!(theta.len(), self.ball.len());
        let n = self.dim();
        let mut matrix = Matrix::zeros(n, n);
        let w = self.sqrt_cell * self.sqrt_cell;
        for (b, t) in theta.iter().enumerate() {
            let o = self.offset(b);
            for i in 0..self.level_dim {
                for j in 0..self.level_dim {
                    matrix[(o + i, o + j)] = t * w;
                }
            }
        }
        matrix
    }

    /// Multiplication by a level-`≤ m` function `η` in every block.
    pub fn multiplication(&self, eta: &[Complex64]) -> Matrix {
        assert_eq!(eta.len(), self.level_dim);
        let n = self.dim();
        let mut matrix = Matrix::zeros(n, n);
        for b in 0..self.ball.len() {
            let o = self.offset(b);
            for (c, v) in eta.iter().enumerate() {
                matrix[(o + c, o + c)] = *v;
            }
        }
        matrix
    }

    /// `Π(φ) = (1 − P) λ(φ*) P`.
    pub fn pi(&self, phi: &LocallyConstantFunction) -> TruncatedOperator {
        let p = self.projection_p();
        let lam = self.rep_function(&phi.conjugate());
        let complement = Matrix::identity(self.dim(), self.dim()) - &p.matrix;
        TruncatedOperator {
            matrix: complement * &lam.matrix * &p.matrix,
            label: "Pi(phi)".into(),
            inexact_blocks: lam.inexact_blocks,
        }
    }

    /// `[P, λ(φ)]`.
    pub fn commutator(&self, phi: &LocallyConstantFunction) -> TruncatedOperator {
        let p = self.projection_p().matrix;
        let lam = self.rep_function(phi);
        TruncatedOperator {
            matrix: &p * &lam.matrix - &lam.matrix * &p,
            label: "[P, lambda(phi)]".into(),
            inexact_blocks: lam.inexact_blocks,
        }
    }

    fn require_window(&self, phi: &LocallyConstantFunction) -> Result<()> {
        if phi.depth() + self.radius > self.level && phi.depth() > 0 {
            return Err(Error::domain(format!(
                "depth {} + radius {} exceeds the function level {}",
                phi.depth(),
                self.radius,
                self.level
            )));
        }
        Ok(())
    }

    fn exact_to_matrix_values(&self, f: impl Fn(&Expectations) -> GaussRational, depth: usize) -> Vec<Complex64> {
        self.ball
            .iter()
            .map(|h| f(&Expectations::new(&self.params, h, depth)).to_complex())
            .collect()
    }
}

/// A dense truncated operator with the source blocks outside its window.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub matrix: Matrix,
    pub label: String,
    pub inexact_blocks: Vec<usize>,
}

impl TruncatedOperator {
    pub fn is_exact(&self) -> bool {
        self.inexact_blocks.is_empty()
    }

    pub fn compose(&self, right: &TruncatedOperator) -> TruncatedOperator {
        let mut inexact: Vec<usize> = self.inexact_blocks.iter().chain(&right.inexact_blocks).copied().collect();
        inexact.sort_unstable();
        inexact.dedup();
        TruncatedOperator {
            matrix: &self.matrix * &right.matrix,
            label: format!("{} {}", self.label, right.label),
            inexact_blocks: inexact,
        }
    }

    /// `row,col,re,im` for every nonzero entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for j in 0..self.matrix.ncols() {
            for i in 0..self.matrix.nrows() {
                let z = self.matrix[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    out.push_str(&format!("{i},{j},{},{}\n", format_f64(z.re), format_f64(z.im)));
                }
            }
        }
        out
    }

    /// Little-endian dump: `rows: u64`, `cols: u64`, then `(re, im)` pairs of
    /// `f64` in column-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.matrix.nrows() as u64).to_le_bytes())?;
        w.write_all(&(self.matrix.ncols() as u64).to_le_bytes())?;
        for z in self.matrix.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A finitely supported element `Σ φ_g g` of the algebraic crossed product.
#[derive(Clone, Debug, Default)]
pub struct CrossedElement {
    pub terms: Vec<(LocallyConstantFunction, ReducedWord)>,
}

impl CrossedElement {
    pub fn new(terms: Vec<(LocallyConstantFunction, ReducedWord)>) -> Self {
        CrossedElement { terms }
    }

    /// The conditional expectation `𝔼(a) = φ_1`.
    pub fn conditional_expectation(&self, params: GroupParams) -> LocallyConstantFunction {
        self.terms
            .iter()
            .filter(|(_, g)| g.is_identity())
            .fold(LocallyConstantFunction::constant(params, GaussRational::zero()), |acc, (phi, _)| acc.add(phi))
    }

    pub fn max_support(&self) -> usize {
        self.terms.iter().map(|(_, g)| g.len()).max().unwrap_or(0)
    }

    pub fn max_depth(&self) -> usize {
        self.terms.iter().map(|(phi, _)| phi.depth()).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiIdentityReport {
    /// `‖Π(φ)*Π(φ) − M(σ_G(φ)²)‖_max`.
    pub modulus_error: f64,
    /// `‖PλP − M(E_G φ)‖_max`.
    pub compression_error: f64,
    /// `σ_G(φ)(h)²` read off the diagonal of `Π*Π` at `h = 1`.
    pub identity_entry: f64,
}

pub fn verify_pi_identity(phi: &LocallyConstantFunction, t: &Truncation) -> Result<PiIdentityReport> {
    t.require_window(phi)?;
    let pi = t.pi(phi).matrix;
    let modulus = pi.adjoint() * &pi;
    let sigma_sq = t.exact_to_matrix_values(|ex| GaussRational::real(ex.deviation_sq(phi)), phi.depth());
    let modulus_error = max_abs(&(&modulus - t.lifted_multiplier(&sigma_sq)));

    let p = t.projection_p().matrix;
    let compressed = &p * t.rep_function(phi).matrix * &p;
    let expect = t.exact_to_matrix_values(|ex| ex.expectation(phi), phi.depth());
    let compression_error = max_abs(&(compressed - t.lifted_multiplier(&expect)));

    let one = t.constant_vector(0);
    let identity_entry = (one.adjoint() * &modulus * &one)[(0, 0)].re;
    Ok(PiIdentityReport { modulus_error, compression_error, identity_entry })
}

/// `‖Π(ψ)*Π(ψ′) − M(cov_G(ψ, ψ′))‖_max`.
pub fn verify_covariance_identity(
    psi: &LocallyConstantFunction,
    psi2: &LocallyConstantFunction,
    t: &Truncation,
) -> Result<f64> {
    t.require_window(psi)?;
    t.require_window(psi2)?;
    let product = t.pi(psi).matrix.adjoint() * t.pi(psi2).matrix;
    let depth = psi.depth().max(psi2.depth());
    let cov = t.exact_to_matrix_values(|ex| ex.covariance(psi, psi2), depth);
    Ok(max_abs(&(product - t.lifted_multiplier(&cov))))
}

/// Singular values of `[P, λ(φ)]`, decreasing.
pub fn commutator_singular_values(phi: &LocallyConstantFunction, t: &Truncation) -> Result<Vec<f64>> {
    t.require_window(phi)?;
    Ok(singular_values(&t.commutator(phi).matrix))
}

/// The multiset `{σ_G(φ)(h)} ∪ {σ_G(φ*)(h)}` over the ball, nonzero values only, decreasing.
pub fn expected_commutator_spectrum(phi: &LocallyConstantFunction, t: &Truncation) -> Vec<f64> {
    let conj = phi.conjugate();
    let mut out: Vec<f64> = t
        .ball()
        .iter()
        .flat_map(|h| {
            let ex = Expectations::new(&t.params(), h, phi.depth());
            [ex.deviation_sq(phi), ex.deviation_sq(&conj)]
        })
        .map(|s| rational_to_f64(&s).sqrt())
        .filter(|&s| s > 0.0)
        .collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMatch {
    pub expected: Vec<f64>,
    pub computed: Vec<f64>,
    /// Largest mismatch over the expected values.
    pub max_error: f64,
    /// Largest singular value beyond the expected ones (should vanish).
    pub residual: f64,
}

pub fn match_commutator_spectrum(phi: &LocallyConstantFunction, t: &Truncation) -> Result<SpectrumMatch> {
    let computed = commutator_singular_values(phi, t)?;
    let expected = expected_commutator_spectrum(phi, t);
    let max_error = expected.iter().zip(&computed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let residual = computed.get(expected.len()).copied().unwrap_or(0.0);
    Ok(SpectrumMatch { expected, computed, max_error, residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyCheck {
    pub norm_diff: f64,
    pub bound: f64,
    /// `‖P(1) − P‖_max`.
    pub p_one_error: f64,
}

impl HomotopyCheck {
    pub fn holds(&self) -> bool {
        self.norm_diff <= self.bound + 1e-12
    }
}

/// `P(η) = M(η̄) P M(η)`.
pub fn homotopy_projection(t: &Truncation, eta: &[Complex64]) -> Matrix {
    let conj: Vec<Complex64> = eta.iter().map(|z| z.conj()).collect();
    t.multiplication(&conj) * t.projection_p().matrix * t.multiplication(eta)
}

fn level_values(t: &Truncation, eta: &LocallyConstantFunction) -> Result<Vec<Complex64>> {
    if eta.depth() > t.level() {
        return Err(Error::domain(format!("η has level {} above the truncation level {}", eta.depth(), t.level())));
    }
    if eta.l2_norm_sqr() != Rational::from_integer(1.into()) {
        return Err(Error::domain(format!("‖η‖² = {} is not 1", eta.l2_norm_sqr())));
    }
    Ok(eta.refine(t.level())?.values().iter().map(GaussRational::to_complex).collect())
}

/// `‖P(η₁) − P(η₂)‖` against `2‖η₁ − η₂‖₂`, for exact unit vectors.
pub fn homotopy_projection_check(
    eta1: &LocallyConstantFunction,
    eta2: &LocallyConstantFunction,
    t: &Truncation,
) -> Result<HomotopyCheck> {
    let a = level_values(t, eta1)?;
    let b = level_values(t, eta2)?;
    let dist = rational_to_f64(&eta1.sub(eta2).l2_norm_sqr()).sqrt();
    Ok(homotopy_check_values(t, &a, &b, dist))
}

/// The same check for binary64 level-`m` tables, with `‖η‖₂ = 1` to 1e−12.
pub fn homotopy_projection_check_values(t: &Truncation, eta1: &[Complex64], eta2: &[Complex64]) -> Result<HomotopyCheck> {
    let cell = t.sqrt_cell * t.sqrt_cell;
    for eta in [eta1, eta2] {
        if eta.len() != t.level_dim() {
            return Err(Error::domain("η table does not match the truncation level"));
        }
        let norm: f64 = eta.iter().map(|z| z.norm_sqr() * cell).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("‖η‖² = {norm} is not 1")));
        }
    }
    let dist = eta1.iter().zip(eta2).map(|(x, y)| (x - y).norm_sqr() * cell).sum::<f64>().sqrt();
    Ok(homotopy_check_values(t, eta1, eta2, dist))
}

fn homotopy_check_values(t: &Truncation, a: &[Complex64], b: &[Complex64], dist: f64) -> HomotopyCheck {
    let diff = homotopy_projection(t, a) - homotopy_projection(t, b);
    let ones = vec![Complex64::new(1.0, 0.0); t.level_dim()];
    let p_one_error = max_abs(&(homotopy_projection(t, &ones) - t.projection_p().matrix));
    HomotopyCheck { norm_diff: operator_norm(&diff), bound: 2.0 * dist, p_one_error }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub h: ReducedWord,
    /// `‖Π(a)δ_h‖₂`.
    pub lhs: f64,
    /// `σ_G(𝔼(a))(h)`.
    pub rhs: f64,
}

/// Checks `‖Π(a)δ_h‖₂ ≥ σ_G(𝔼(a))(h)` for `h ∈ B_{⌊R/2⌋}`, with `Π(a) = (1 − P)λ(a)*P`.
pub fn conditional_lower_bound_check(a: &CrossedElement, t: &Truncation) -> Result<Vec<LowerBoundRow>> {
    let half = t.radius() / 2;
    if a.max_support() > half {
        return Err(Error::domain(format!("support radius {} exceeds R/2 = {half}", a.max_support())));
    }
    if a.max_depth() > 0 && a.max_depth() + half > t.level() {
        return Err(Error::domain("function depths fall outside the exactness window"));
    }
    let lam = t.rep_element(a).matrix;
    let p = t.projection_p().matrix;
    let complement = Matrix::identity(t.dim(), t.dim()) - &p;
    let pi = complement * lam.adjoint() * &p;
    let center = a.conditional_expectation(t.params());
    t.params()
        .ball(half)?
        .into_iter()
        .map(|h| {
            let b = t.block_of(&h).expect("inner ball inside the truncation");
            let lhs = (&pi * t.constant_vector(b)).norm();
            let rhs = rational_to_f64(&crate::deviation::deviation_sq(&center, &h)).sqrt();
            Ok(LowerBoundRow { h, lhs, rhs })
        })
        .collect()
}

/// `‖PλP − Σ_g M(Ē(φ_g)) λ(g)‖_max` on `ℓ²(B_R)`.
pub fn verify_compression_identity(a: &CrossedElement, t: &Truncation) -> Result<f64> {
    if a.max_depth() > 0 && a.max_depth() + t.radius() > t.level() {
        return Err(Error::domain("function depths fall outside the exactness window"));
    }
    let k = t.ball().len();
    let v = Matrix::from_fn(t.dim(), k, |i, b| {
        if i / t.level_dim() == b {
            Complex64::new(t.sqrt_cell, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let compressed = v.adjoint() * t.rep_element(a).matrix * &v;
    let mut reference = Matrix::zeros(k, k);
    for (phi, g) in &a.terms {
        for (b, h) in t.ball().iter().enumerate() {
            let gh = g.mul(h);
            if let Some(target) = t.block_of(&gh) {
                reference[(target, b)] += crate::deviation::expectation(phi, &gh).to_complex();
            }
        }
    }
    Ok(max_abs(&(compressed - reference)))
}

/// Truncated `A_p` norm data: `‖λ(a)‖` and `‖[P, λ(a)]‖_{𝓛^p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenReport {
    pub p: f64,
    pub operator_norm: f64,
    pub commutator_schatten: f64,
}

impl SchattenReport {
    pub fn norm(&self) -> f64 {
        self.operator_norm + self.commutator_schatten
    }
}

pub fn schatten_report(a: &CrossedElement, t: &Truncation, p: f64) -> SchattenReport {
    let lam = t.rep_element(a).matrix;
    let proj = t.projection_p().matrix;
    let comm = &proj * &lam - &lam * &proj;
    SchattenReport {
        p,
        operator_norm: operator_norm(&lam),
        commutator_schatten: schatten_norm(&singular_values(&comm), p),
    }
}
