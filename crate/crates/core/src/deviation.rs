//! G-expectation, G-deviation and G-covariance, computed exactly.
//!
//! `E_G(φ)(g) = ∫ φ d(g_*μ)`, `σ_G(φ)(g)² = E_G(|φ|²)(g) − |E_G(φ)(g)|²` and
//! `cov_G(φ, ψ)(g) = E_G(φψ*)(g) − E_G(φ)(g) E_G(ψ*)(g)`. The deviation is also
//! available through the double integral `½∬|φ(gx) − φ(gy)|² dμ dμ`, which
//! never touches pushforward tables and serves as an independent check.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{depth_mass, pushforward, BoundaryPoint, CylinderMeasure};
use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::group::{GroupParams, ReducedWord, DEFAULT_ELEMENT_CAP};
use crate::scalar::{format_rational, rational_to_f64, GaussRational, Rational};

/// The measure `g_*μ` at a fixed depth, reusable for every function of
/// level at most that depth.
#[derive(Clone, Debug)]
pub struct Expectations {
    g: ReducedWord,
    table: Option<CylinderMeasure>,
}

impl Expectations {
    pub fn new(params: &GroupParams, g: &ReducedWord, depth: usize) -> Self {
        let table = (depth > 0).then(|| pushforward(params, g, depth).expect("depth >= 1"));
        Expectations { g: g.clone(), table }
    }

    pub fn element(&self) -> &ReducedWord {
        &self.g
    }

    pub fn depth(&self) -> usize {
        self.table.as_ref().map_or(0, CylinderMeasure::depth)
    }

    /// `E_G(φ)(g)`.
    pub fn expectation(&self, phi: &LocallyConstantFunction) -> GaussRational {
        if phi.depth() == 0 {
            return phi.values()[0].clone();
        }
        let table = self.table.as_ref().expect("table deep enough");
        assert!(phi.depth() <= table.depth(), "function level exceeds the table depth");
        let phi = phi.refine(table.depth()).unwrap();
        phi.values()
            .iter()
            .zip(table.masses())
            .filter(|(v, _)| !v.is_zero())
            .map(|(v, m)| v.scale(m))
            .sum()
    }

    pub fn deviation_sq(&self, phi: &LocallyConstantFunction) -> Rational {
        let second = self.expectation(&phi.abs_sqr()).re;
        second - self.expectation(phi).norm_sqr()
    }

    pub fn covariance(&self, phi: &LocallyConstantFunction, psi: &LocallyConstantFunction) -> GaussRational {
        let psi_conj = psi.conjugate();
        let joint = self.expectation(&phi.pointwise_mul(&psi_conj));
        joint - &self.expectation(phi) * &self.expectation(&psi_conj)
    }
}

pub fn expectation(phi: &LocallyConstantFunction, g: &ReducedWord) -> GaussRational {
    Expectations::new(&phi.params(), g, phi.depth()).expectation(phi)
}

pub fn deviation_sq(phi: &LocallyConstantFunction, g: &ReducedWord) -> Rational {
    Expectations::new(&phi.params(), g, phi.depth()).deviation_sq(phi)
}

/// `σ_G(φ)(g)` in binary64.
pub fn deviation(phi: &LocallyConstantFunction, g: &ReducedWord) -> f64 {
    rational_to_f64(&deviation_sq(phi, g)).sqrt()
}

pub fn covariance(phi: &LocallyConstantFunction, psi: &LocallyConstantFunction, g: &ReducedWord) -> GaussRational {
    let depth = phi.depth().max(psi.depth());
    Expectations::new(&phi.params(), g, depth).covariance(phi, psi)
}

/// `½∬|φ(gx) − φ(gy)|² dμ(x)dμ(y)` over the depth-`(k + |g|)` cylinders, on
/// which `x ↦ φ(gx)` is constant.
pub fn deviation_sq_pairsum(phi: &LocallyConstantFunction, g: &ReducedWord) -> Rational {
    let k = phi.depth();
    if k == 0 {
        return Rational::default();
    }
    let params = phi.params();
    let depth = k + g.len();
    let cell = depth_mass(&params, depth);
    // Distribution of φ∘g: distinct values with their total masses.
    let mut law: HashMap<GaussRational, Rational> = HashMap::new();
    for i in 0..params.sphere_count(depth) as usize {
        let image = g.mul(&params.word_at(depth, i));
        let value = phi.value_at(&image.prefix(k)).clone();
        *law.entry(value).or_default() += &cell;
    }
    let atoms: Vec<_> = law.into_iter().collect();
    let mut total = Rational::default();
    for (v, p) in &atoms {
        for (w, q) in &atoms {
            total += (v - w).norm_sqr() * p * q;
        }
    }
    total / Rational::from_integer(2.into())
}

/// `Ē(φ)` on `Γ̄ = Γ ⊔ ∂Γ`: the G-expectation on group elements, `φ` itself on
/// the boundary.
pub enum CompactificationPoint<'a> {
    Group(&'a ReducedWord),
    Boundary(&'a BoundaryPoint),
}

pub fn glued_extension(phi: &LocallyConstantFunction, at: CompactificationPoint<'_>) -> GaussRational {
    match at {
        CompactificationPoint::Group(g) => expectation(phi, g),
        CompactificationPoint::Boundary(xi) => phi.eval_point(xi),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileRow {
    pub g: ReducedWord,
    pub expectation: GaussRational,
    pub deviation_sq: Rational,
}

impl ProfileRow {
    pub fn length(&self) -> usize {
        self.g.len()
    }

    pub fn deviation(&self) -> f64 {
        rational_to_f64(&self.deviation_sq).sqrt()
    }
}

/// `E_G(φ)` and `σ_G(φ)²` on every element of a ball, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationProfile {
    pub params: GroupParams,
    pub radius: usize,
    pub rows: Vec<ProfileRow>,
}

pub fn deviation_profile(phi: &LocallyConstantFunction, radius: usize) -> Result<DeviationProfile> {
    deviation_profile_with_cap(phi, radius, DEFAULT_ELEMENT_CAP)
}

pub fn deviation_profile_with_cap(phi: &LocallyConstantFunction, radius: usize, cap: u128) -> Result<DeviationProfile> {
    let params = phi.params();
    let ball = params.ball_with_cap(radius, cap)?;
    let abs_sqr = phi.abs_sqr();
    let rows = ball
        .into_par_iter()
        .map(|g| {
            let ex = Expectations::new(&params, &g, phi.depth());
            let expectation = ex.expectation(phi);
            let deviation_sq = ex.expectation(&abs_sqr).re - expectation.norm_sqr();
            ProfileRow { g, expectation, deviation_sq }
        })
        .collect();
    Ok(DeviationProfile { params, radius, rows })
}

impl DeviationProfile {
    pub fn sphere(&self, m: usize) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(move |r| r.length() == m)
    }

    /// `max_{|g| = m} σ_G(φ)(g)²`.
    pub fn sphere_max(&self, m: usize) -> Rational {
        self.sphere(m).map(|r| r.deviation_sq.clone()).max().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.deviation_sq == Rational::default())
    }

    pub fn row(&self, g: &ReducedWord) -> Option<&ProfileRow> {
        self.rows.iter().find(|r| &r.g == g)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("g,length,re_expectation,im_expectation,deviation_sq\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.g,
                r.length(),
                format_rational(&r.expectation.re),
                format_rational(&r.expectation.im),
                format_rational(&r.deviation_sq)
            ));
        }
        out
    }

    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            rank: self.params.rank(),
            radius: self.radius,
            rows: self
                .rows
                .iter()
                .map(|r| ProfileRowJson {
                    g: r.g.to_string(),
                    length: r.length(),
                    expectation: r.expectation.to_pair(),
                    deviation_sq: format_rational(&r.deviation_sq),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &ProfileJson) -> Result<Self> {
        let params = GroupParams::new(json.rank)?;
        let rows = json
            .rows
            .iter()
            .map(|r| {
                Ok(ProfileRow {
                    g: params.parse_word(&r.g)?,
                    expectation: GaussRational::from_pair(&r.expectation[0], &r.expectation[1])?,
                    deviation_sq: crate::scalar::parse_rational(&r.deviation_sq)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.iter().any(|r| r.length() > json.radius) {
            return Err(Error::input("profile row outside its radius"));
        }
        Ok(DeviationProfile { params, radius: json.radius, rows })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileJson {
    pub rank: usize,
    pub radius: usize,
    pub rows: Vec<ProfileRowJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRowJson {
    pub g: String,
    pub length: usize,
    pub expectation: [String; 2],
    pub deviation_sq: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Cylinder;
    use crate::function::one;
    use crate::scalar::{rat, rat_int};

    fn f2() -> GroupParams {
        GroupParams::new(2).unwrap()
    }

    fn w(s: &str) -> ReducedWord {
        s.parse().unwrap()
    }

    fn ind(s: &str) -> LocallyConstantFunction {
        LocallyConstantFunction::indicator(f2(), &Cylinder::new(w(s)))
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expectation(&ind("a"), &w("1")), GaussRational::real(rat(1, 4)));
        assert_eq!(expectation(&ind("a"), &w("a")), GaussRational::real(rat(3, 4)));
        assert_eq!(expectation(&ind("a"), &w("b")), GaussRational::real(rat(1, 12)));
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(deviation_sq(&ind("a"), &w("1")), rat(3, 16));
        assert_eq!(deviation_sq(&ind("a"), &w("a")), rat(3, 16));
        assert_eq!(deviation_sq(&ind("a"), &w("b")), rat(11, 144));
        assert_eq!(deviation_sq(&one(f2()), &w("abA")), rat_int(0));
        assert_eq!(deviation_sq_pairsum(&ind("a"), &w("1")), rat(3, 16));
        assert_eq!(deviation_sq_pairsum(&one(f2()), &w("ab")), rat_int(0));
        assert!((deviation(&ind("a"), &w("1")) - 0.4330127018922193).abs() < 1e-15);
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(covariance(&ind("a"), &ind("b"), &w("1")), GaussRational::real(rat(-1, 16)));
        let c = one(f2()).scale(&GaussRational::from_ints(2, 3));
        for g in f2().ball(3).unwrap() {
            assert_eq!(covariance(&ind("aB"), &c, &g), GaussRational::zero());
            let phi = ind("a").add(&ind("Ab").scale(&GaussRational::real(rat(1, 2))));
            assert_eq!(covariance(&phi, &phi, &g), GaussRational::real(deviation_sq(&phi, &g)));
        }
    }

    #[test]
    fn cauchy_schwarz_for_covariance() {
        let phi = ind("a").add(&ind("bA").scale(&GaussRational::i()));
        let psi = ind("B").scale(&GaussRational::from_ints(1, -2)).add(&ind("ab"));
        for g in f2().ball(3).unwrap() {
            let c = covariance(&phi, &psi, &g).abs_f64();
            assert!(c <= deviation(&phi, &g) * deviation(&psi, &g) + 1e-14);
        }
    }

    #[test]
    fn two_deviation_formulas_agree_on_complex_values() {
        let phi = ind("a")
            .add(&ind("ba").scale(&GaussRational::i()))
            .add(&ind("Bb").scale(&GaussRational::new(rat(1, 2), rat(-3, 1))));
        for g in f2().ball(3).unwrap() {
            assert_eq!(deviation_sq(&phi, &g), deviation_sq_pairsum(&phi, &g), "g={g}");
        }
    }

    #[test]
    fn profile_rows() {
        let prof = deviation_profile(&ind("a"), 3).unwrap();
        assert_eq!(prof.rows.len(), 53);
        assert_eq!(prof.row(&w("a")).unwrap().deviation_sq, rat(3, 16));
        assert_eq!(prof.sphere_max(1), rat(3, 16));
        for m in 0..=3 {
            let brute = f2().sphere(m).unwrap().iter().map(|g| deviation_sq(&ind("a"), g)).max().unwrap();
            assert_eq!(prof.sphere_max(m), brute);
        }
        assert!(deviation_profile(&one(f2()), 3).unwrap().is_zero());
        let csv = prof.to_csv();
        assert!(csv.lines().any(|l| l == "b,1,1/12,0,11/144"));
        let back = DeviationProfile::from_json(&prof.to_json()).unwrap();
        assert_eq!(back, prof);
    }

    #[test]
    fn extension_is_equivariant_and_continuous() {
        let p = f2();
        let phi = ind("a").add(&ind("Ba").scale(&GaussRational::from_ints(0, 2)));
        for g in p.ball(2).unwrap() {
            let moved = phi.translate(&g);
            for h in p.ball(2).unwrap() {
                assert_eq!(expectation(&moved, &h), expectation(&phi, &g.inverse().mul(&h)));
            }
        }
        let omega = BoundaryPoint::parse(&p, "Ba(ab)").unwrap();
        let at_omega = glued_extension(&phi, CompactificationPoint::Boundary(&omega));
        for m in 3..=9 {
            let g = omega.prefix(m);
            let err = (&glued_extension(&phi, CompactificationPoint::Group(&g)) - &at_omega).abs_f64();
            assert!(err <= 2.0 * phi.sup_norm() * 3f64.powi(-((m - phi.depth()) as i32)) + 1e-15);
        }
    }
}
