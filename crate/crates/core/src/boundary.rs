//! The boundary `∂F_n`: infinite reduced words, cylinder sets, the canonical
//! visual metric and the normalized Hausdorff measure.
//!
//! Measures are exact. A cylinder `[w]` with `|w| ≥ 1` has mass
//! `(1/2n)(1/(2n−1))^{|w|−1}`, independent of the visual parameter; only
//! distances and dimensions depend on `ε`.

use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{inverse_letter, GroupParams, Letter, ReducedWord};
use crate::scalar::{big_pow, format_rational, parse_rational, Rational};

/// Canonical visual structure of parameter `ε` on the tree boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisualStructure {
    params: GroupParams,
    epsilon: f64,
    q: f64,
    entropy: f64,
}

impl VisualStructure {
    pub fn new(params: GroupParams, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::domain(format!("visual parameter must be positive, got {epsilon}")));
        }
        Ok(VisualStructure {
            params,
            epsilon,
            q: (-epsilon).exp(),
            entropy: (params.branching() as f64).ln(),
        })
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `exp(−ε)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Volume entropy `ln(2n − 1)`.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn hausdorff_dimension(&self) -> f64 {
        self.entropy / self.epsilon
    }

    /// `exp(−ε t)` for a common-prefix length `t`.
    pub fn distance_at(&self, t: usize) -> f64 {
        (-self.epsilon * t as f64).exp()
    }

    /// Visual distance between two disjoint cylinders or boundary points.
    pub fn distance(&self, a: &Region, b: &Region) -> Result<f64> {
        match region_common_prefix(a, b)? {
            None => Ok(0.0),
            Some(t) => Ok(self.distance_at(t)),
        }
    }
}

/// The clopen set of boundary points with a given finite prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cylinder {
    prefix: ReducedWord,
}

impl Cylinder {
    pub fn new(prefix: ReducedWord) -> Self {
        Cylinder { prefix }
    }

    /// `[∅] = ∂X`.
    pub fn whole() -> Self {
        Cylinder::default()
    }

    pub fn prefix(&self) -> &ReducedWord {
        &self.prefix
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    pub fn contains(&self, other: &Cylinder) -> bool {
        other.prefix.starts_with(&self.prefix)
    }

    pub fn is_disjoint(&self, other: &Cylinder) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    pub fn contains_point(&self, xi: &BoundaryPoint) -> bool {
        xi.prefix(self.depth()) == self.prefix
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.prefix)
    }
}

/// The eventually periodic infinite reduced word `head · period^∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryPoint {
    head: ReducedWord,
    period: ReducedWord,
}

impl BoundaryPoint {
    pub fn new(head: ReducedWord, period: ReducedWord) -> Result<Self> {
        let Some(p_first) = period.first() else {
            return Err(Error::domain("boundary point needs a nonempty period"));
        };
        let p_last = period.last().unwrap();
        if p_last == inverse_letter(p_first) {
            return Err(Error::domain(format!("period {period} cancels against itself")));
        }
        if head.last() == Some(inverse_letter(p_first)) {
            return Err(Error::domain(format!("head {head} cancels against period {period}")));
        }
        Ok(BoundaryPoint { head, period })
    }

    /// `w^∞` for a cyclically reduced `w`.
    pub fn periodic(period: ReducedWord) -> Result<Self> {
        BoundaryPoint::new(ReducedWord::identity(), period)
    }

    /// Parses `"head(period)"`, e.g. `"(a)"` for `a^∞` or `"aB(b)"`.
    pub fn parse(params: &GroupParams, s: &str) -> Result<Self> {
        let t = s.trim();
        let open = t.find('(').ok_or_else(|| Error::input(format!("expected head(period), got {s:?}")))?;
        if !t.ends_with(')') {
            return Err(Error::input(format!("expected head(period), got {s:?}")));
        }
        let head_str = &t[..open];
        let head = if head_str.is_empty() { ReducedWord::identity() } else { params.parse_word(head_str)? };
        let period = params.parse_word(&t[open + 1..t.len() - 1])?;
        BoundaryPoint::new(head, period)
    }

    pub fn head(&self) -> &ReducedWord {
        &self.head
    }

    pub fn period(&self) -> &ReducedWord {
        &self.period
    }

    pub fn letter(&self, i: usize) -> Letter {
        let h = self.head.len();
        if i < h {
            self.head.letters()[i]
        } else {
            self.period.letters()[(i - h) % self.period.len()]
        }
    }

    /// The first `k` letters.
    pub fn prefix(&self, k: usize) -> ReducedWord {
        let letters = (0..k).map(|i| self.letter(i)).collect();
        ReducedWord::from_reduced(letters).expect("boundary point letters are reduced")
    }

    /// Common-prefix length with `other`, or `None` when they are the same point.
    ///
    /// Past `max(|head|)` both sequences are periodic, so agreement on one
    /// further `lcm` of the periods means agreement forever.
    pub fn common_prefix(&self, other: &BoundaryPoint) -> Option<usize> {
        let window = self.head.len().max(other.head.len()) + lcm(self.period.len(), other.period.len());
        (0..window).find(|&i| self.letter(i) != other.letter(i))
    }

    pub fn same_point(&self, other: &BoundaryPoint) -> bool {
        self.common_prefix(other).is_none()
    }

    /// `g · ξ`.
    pub fn translate(&self, g: &ReducedWord) -> BoundaryPoint {
        let mut x: Vec<Letter> = g.mul(&self.head).letters().to_vec();
        let plen = self.period.len();
        let mut offset = 0;
        while let Some(&last) = x.last() {
            if last == inverse_letter(self.period.letters()[offset]) {
                x.pop();
                offset = (offset + 1) % plen;
            } else {
                break;
            }
        }
        x.extend_from_slice(&self.period.letters()[offset..]);
        let head = ReducedWord::from_reduced(x).expect("translated head is reduced");
        BoundaryPoint { head, period: self.period.clone() }
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.head.is_identity() {
            write!(f, "({})", self.period)
        } else {
            write!(f, "{}({})", self.head, self.period)
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// A boundary subset addressed by the metric: a cylinder or a single point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Cylinder(Cylinder),
    Point(BoundaryPoint),
}

impl From<Cylinder> for Region {
    fn from(c: Cylinder) -> Self {
        Region::Cylinder(c)
    }
}

impl From<BoundaryPoint> for Region {
    fn from(p: BoundaryPoint) -> Self {
        Region::Point(p)
    }
}

fn region_common_prefix(a: &Region, b: &Region) -> Result<Option<usize>> {
    match (a, b) {
        (Region::Point(x), Region::Point(y)) => Ok(x.common_prefix(y)),
        (Region::Cylinder(c), Region::Cylinder(d)) => {
            if !c.is_disjoint(d) {
                return Err(Error::domain(format!("cylinders {c} and {d} overlap")));
            }
            Ok(Some(c.prefix.common_prefix_len(&d.prefix)))
        }
        (Region::Cylinder(c), Region::Point(x)) | (Region::Point(x), Region::Cylinder(c)) => {
            if c.contains_point(x) {
                return Err(Error::domain(format!("point {x} lies in cylinder {c}")));
            }
            Ok(Some(c.prefix.common_prefix_len(&x.prefix(c.depth()))))
        }
    }
}

/// Mass `μ([w])` of any cylinder of the given depth.
pub fn depth_mass(params: &GroupParams, depth: usize) -> Rational {
    if depth == 0 {
        return Rational::one();
    }
    let denom = BigInt::from(params.alphabet_size()) * big_pow(params.branching() as u64, depth as u32 - 1);
    Rational::new(BigInt::one(), denom)
}

/// Normalized Hausdorff measure of a cylinder.
pub fn cylinder_measure(params: &GroupParams, c: &Cylinder) -> Rational {
    depth_mass(params, c.depth())
}

/// The complement of a nonempty cylinder `[p]` as disjoint cylinders.
fn complement(params: &GroupParams, p: &ReducedWord) -> Vec<Cylinder> {
    let letters = p.letters();
    let mut out = Vec::new();
    for j in 0..letters.len() {
        let stem = &letters[..j];
        for y in params.letters() {
            if y == letters[j] || (j > 0 && y == inverse_letter(letters[j - 1])) {
                continue;
            }
            let mut w = stem.to_vec();
            w.push(y);
            out.push(Cylinder::new(ReducedWord::from_reduced(w).expect("reduced by construction")));
        }
    }
    out
}

/// Disjoint cylinders whose union is `{ξ : g·ξ ∈ c} = g⁻¹·c`.
///
/// With `u = g⁻¹` and `t` the number of letters cancelled between the tail of
/// `u` and the head of the prefix `w`:
/// * `t = 0` or `0 < t < |w|`: the image is the single cylinder `[reduce(u w)]`;
/// * `t = |w|`: `u = u′ w⁻¹` and the image is the complement of the cylinder
///   on the first `|u| − |w| + 1` letters of `u`.
pub fn preimage_cylinder(params: &GroupParams, g: &ReducedWord, c: &Cylinder) -> Vec<Cylinder> {
    let w = c.prefix();
    if w.is_identity() {
        return vec![Cylinder::whole()];
    }
    let u = g.inverse();
    let t = u.cancellation_with(w);
    if t < w.len() {
        vec![Cylinder::new(u.mul(w))]
    } else {
        let p = u.prefix(u.len() - w.len() + 1);
        let mut out = complement(params, &p);
        out.sort();
        out
    }
}

/// A probability measure tabulated on the depth-`k` cylinders, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderMeasure {
    params: GroupParams,
    depth: usize,
    masses: Vec<Rational>,
}

impl CylinderMeasure {
    pub fn from_masses(params: GroupParams, depth: usize, masses: Vec<Rational>) -> Result<Self> {
        if masses.len() as u128 != params.sphere_count(depth) {
            return Err(Error::input(format!(
                "depth-{depth} table needs {} masses, got {}",
                params.sphere_count(depth),
                masses.len()
            )));
        }
        if masses.iter().any(|m| m.is_negative()) {
            return Err(Error::input("negative mass"));
        }
        Ok(CylinderMeasure { params, depth, masses })
    }

    /// The canonical measure `μ`.
    pub fn uniform(params: GroupParams, depth: usize) -> Self {
        let m = depth_mass(&params, depth);
        CylinderMeasure { params, depth, masses: vec![m; params.sphere_count(depth) as usize] }
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[Rational] {
        &self.masses
    }

    pub fn total(&self) -> Rational {
        self.masses.iter().sum()
    }

    pub fn mass_at(&self, w: &ReducedWord) -> &Rational {
        debug_assert_eq!(w.len(), self.depth);
        &self.masses[self.params.word_index(w)]
    }

    /// Mass of a cylinder no deeper than the table.
    pub fn mass(&self, c: &Cylinder) -> Result<Rational> {
        let d = c.depth();
        if d > self.depth {
            return Err(Error::domain(format!(
                "cylinder {c} is deeper than the depth-{} table",
                self.depth
            )));
        }
        if d == 0 {
            return Ok(self.total());
        }
        let span = self.params.branching().pow((self.depth - d) as u32);
        let start = self.params.word_index(c.prefix()) * span;
        Ok(self.masses[start..start + span].iter().sum())
    }

    /// `dν/dμ` per depth-`k` cylinder.
    pub fn density(&self) -> Vec<Rational> {
        let base = depth_mass(&self.params, self.depth);
        self.masses.iter().map(|m| m / &base).collect()
    }

    pub fn to_json(&self) -> CylinderMeasureJson {
        let masses = self
            .masses
            .iter()
            .enumerate()
            .map(|(i, m)| (self.params.word_at(self.depth, i).to_string(), format_rational(m)))
            .collect();
        CylinderMeasureJson { depth: self.depth, masses }
    }

    pub fn from_json(params: GroupParams, json: &CylinderMeasureJson) -> Result<Self> {
        let mut masses = vec![None; params.sphere_count(json.depth) as usize];
        for (key, value) in &json.masses {
            let w = params.parse_word(key)?;
            if w.len() != json.depth {
                return Err(Error::input(format!("key {key:?} is not a depth-{} cylinder", json.depth)));
            }
            masses[params.word_index(&w)] = Some(parse_rational(value)?);
        }
        let masses = masses
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::input("measure table is missing cylinders"))?;
        CylinderMeasure::from_masses(params, json.depth, masses)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderMeasureJson {
    pub depth: usize,
    pub masses: IndexMap<String, String>,
}

/// `g_*μ` tabulated at depth `k`.
pub fn pushforward(params: &GroupParams, g: &ReducedWord, depth: usize) -> Result<CylinderMeasure> {
    if depth == 0 {
        return Err(Error::domain("pushforward tables start at depth 1"));
    }
    let max_depth = g.len() + depth;
    let mass_by_depth: Vec<Rational> = (0..=max_depth).map(|d| depth_mass(params, d)).collect();
    let masses = (0..params.sphere_count(depth) as usize)
        .map(|i| {
            let c = Cylinder::new(params.word_at(depth, i));
            preimage_cylinder(params, g, &c).iter().map(|p| &mass_by_depth[p.depth()]).sum()
        })
        .collect();
    Ok(CylinderMeasure { params: *params, depth, masses })
}

/// `g_*ν` at depth `k`, for a table `ν` of depth at least `|g| + k`.
pub fn pushforward_measure(g: &ReducedWord, nu: &CylinderMeasure, depth: usize) -> Result<CylinderMeasure> {
    if depth == 0 {
        return Err(Error::domain("pushforward tables start at depth 1"));
    }
    let params = nu.params;
    let mut masses = Vec::with_capacity(params.sphere_count(depth) as usize);
    for i in 0..params.sphere_count(depth) as usize {
        let c = Cylinder::new(params.word_at(depth, i));
        let mut total = Rational::zero();
        for p in preimage_cylinder(&params, g, &c) {
            total += nu.mass(&p)?;
        }
        masses.push(total);
    }
    Ok(CylinderMeasure { params, depth, masses })
}

/// `(min, max)` of `g_*μ([w]) / μ([w])` over depth-`k` cylinders.
pub fn comparability_constants(params: &GroupParams, g: &ReducedWord, depth: usize) -> Result<(Rational, Rational)> {
    let density = pushforward(params, g, depth)?.density();
    let lo = density.iter().min().cloned().expect("nonempty table");
    let hi = density.iter().max().cloned().expect("nonempty table");
    Ok((lo, hi))
}

/// Total-variation distance `Σ_w |g_*μ([w]) − δ_ω([w])|` at depth `k`.
pub fn weak_distance_to_delta(
    params: &GroupParams,
    g: &ReducedWord,
    omega: &BoundaryPoint,
    depth: usize,
) -> Result<Rational> {
    let table = pushforward(params, g, depth)?;
    let hit = params.word_index(&omega.prefix(depth));
    Ok(table
        .masses()
        .iter()
        .enumerate()
        .map(|(i, m)| if i == hit { (Rational::one() - m).abs() } else { m.clone() })
        .sum())
}
