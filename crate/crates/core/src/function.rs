//! Locally constant functions on `∂F_n` with Gaussian-rational values.
//!
//! A level-`k` function is a table over the depth-`k` cylinders in canonical
//! order (a single constant for `k = 0`). Such functions are Lipschitz for
//! every visual metric and form a dense, translation-invariant *-subalgebra
//! of `C(∂X)`; this is the algebra every statistic in the crate is computed on.
//! Depths are not canonicalized: mergeable children are never pruned, and
//! equality compares after refining both sides.

use indexmap::IndexMap;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::boundary::{depth_mass, BoundaryPoint, Cylinder, VisualStructure};
use crate::error::{Error, Result};
use crate::group::{GroupParams, ReducedWord};
use crate::scalar::{rational_to_f64, GaussRational, Rational};

#[derive(Clone, Debug)]
pub struct LocallyConstantFunction {
    params: GroupParams,
    depth: usize,
    values: Vec<GaussRational>,
}

impl LocallyConstantFunction {
    pub fn from_values(params: GroupParams, depth: usize, values: Vec<GaussRational>) -> Result<Self> {
        let expected = params.sphere_count(depth);
        if values.len() as u128 != expected {
            return Err(Error::input(format!(
                "depth-{depth} function needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(LocallyConstantFunction { params, depth, values })
    }

    pub fn constant(params: GroupParams, value: GaussRational) -> Self {
        LocallyConstantFunction { params, depth: 0, values: vec![value] }
    }

    /// `1_c`.
    pub fn indicator(params: GroupParams, c: &Cylinder) -> Self {
        let depth = c.depth();
        let mut values = vec![GaussRational::zero(); params.sphere_count(depth) as usize];
        values[params.word_index(c.prefix())] = GaussRational::one();
        LocallyConstantFunction { params, depth, values }
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[GaussRational] {
        &self.values
    }

    /// Value on the depth-`k` cylinder `[w]`, `|w| = k`.
    pub fn value_at(&self, w: &ReducedWord) -> &GaussRational {
        debug_assert_eq!(w.len(), self.depth);
        &self.values[self.params.word_index(w)]
    }

    pub fn eval_cylinder(&self, c: &Cylinder) -> Result<GaussRational> {
        if c.depth() < self.depth {
            return Err(Error::domain(format!(
                "cylinder {c} is shallower than the function's level {}",
                self.depth
            )));
        }
        Ok(self.value_at(&c.prefix().prefix(self.depth)).clone())
    }

    pub fn eval_point(&self, xi: &BoundaryPoint) -> GaussRational {
        self.value_at(&xi.prefix(self.depth)).clone()
    }

    /// The same function tabulated at a deeper level.
    pub fn refine(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::domain(format!("cannot refine level {} down to {depth}", self.depth)));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let count = self.params.sphere_count(depth) as usize;
        let values = if self.depth == 0 {
            vec![self.values[0].clone(); count]
        } else {
            let span = self.params.branching().pow((depth - self.depth) as u32);
            (0..count).map(|i| self.values[i / span].clone()).collect()
        };
        Ok(LocallyConstantFunction { params: self.params, depth, values })
    }

    /// Conditional expectation onto the level-`depth` functions (cylinder averages).
    pub fn average_to(&self, depth: usize) -> Self {
        if depth >= self.depth {
            return self.refine(depth).expect("refining upward");
        }
        let count = self.params.sphere_count(depth) as usize;
        let span = self.values.len() / count;
        let weight = Rational::new(1.into(), span.into());
        let values = self
            .values
            .chunks(span)
            .map(|chunk| chunk.iter().cloned().sum::<GaussRational>().scale(&weight))
            .collect();
        LocallyConstantFunction { params: self.params, depth, values }
    }

    /// `(g.φ)(ξ) = φ(g⁻¹ξ)`, tabulated at level `k + |g|`.
    pub fn translate(&self, g: &ReducedWord) -> Self {
        if self.depth == 0 || g.is_identity() {
            return self.clone();
        }
        let depth = self.depth + g.len();
        let g_inv = g.inverse();
        let values = (0..self.params.sphere_count(depth) as usize)
            .map(|i| {
                let image = g_inv.mul(&self.params.word_at(depth, i));
                self.value_at(&image.prefix(self.depth)).clone()
            })
            .collect();
        LocallyConstantFunction { params: self.params, depth, values }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&GaussRational, &GaussRational) -> GaussRational) -> Self {
        assert_eq!(self.params, other.params, "functions on different groups");
        let depth = self.depth.max(other.depth);
        let a = self.refine(depth).unwrap();
        let b = other.refine(depth).unwrap();
        let values = a.values.iter().zip(&b.values).map(|(x, y)| f(x, y)).collect();
        LocallyConstantFunction { params: self.params, depth, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn pointwise_mul(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn conjugate(&self) -> Self {
        self.map(GaussRational::conj)
    }

    pub fn scale(&self, c: &GaussRational) -> Self {
        self.map(|x| x * c)
    }

    /// `|φ|²`.
    pub fn abs_sqr(&self) -> Self {
        self.map(|x| GaussRational::real(x.norm_sqr()))
    }

    pub fn map(&self, f: impl Fn(&GaussRational) -> GaussRational) -> Self {
        LocallyConstantFunction {
            params: self.params,
            depth: self.depth,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|p| p[0] == p[1])
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(GaussRational::is_real)
    }

    /// `∫ φ dμ`, exact.
    pub fn integral(&self) -> GaussRational {
        let mass = depth_mass(&self.params, self.depth);
        self.values.iter().cloned().sum::<GaussRational>().scale(&mass)
    }

    /// `‖φ‖²_{L²(μ)}`, exact.
    pub fn l2_norm_sqr(&self) -> Rational {
        let mass = depth_mass(&self.params, self.depth);
        self.values.iter().map(GaussRational::norm_sqr).sum::<Rational>() * mass
    }

    /// `‖φ‖²_∞`, exact.
    pub fn sup_norm_sqr(&self) -> Rational {
        self.values.iter().map(GaussRational::norm_sqr).max().unwrap_or_else(Rational::zero)
    }

    pub fn sup_norm(&self) -> f64 {
        rational_to_f64(&self.sup_norm_sqr()).sqrt()
    }

    /// Upper bound `2‖φ‖_∞ exp(εk)` on the Lipschitz constant for `d_ε`.
    pub fn lip_bound(&self, vs: &VisualStructure) -> f64 {
        2.0 * self.sup_norm() * (vs.epsilon() * self.depth as f64).exp()
    }

    pub fn to_json(&self) -> FunctionJson {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.params.word_at(self.depth, i).to_string(), v.to_pair()))
            .collect();
        FunctionJson { depth: self.depth, values }
    }

    pub fn from_json(params: GroupParams, json: &FunctionJson) -> Result<Self> {
        let mut values = vec![None; params.sphere_count(json.depth) as usize];
        for (key, [re, im]) in &json.values {
            let w = params.parse_word(key)?;
            if w.len() != json.depth {
                return Err(Error::input(format!("key {key:?} is not a depth-{} cylinder", json.depth)));
            }
            values[params.word_index(&w)] = Some(GaussRational::from_pair(re, im)?);
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::input("function table is missing cylinders"))?;
        LocallyConstantFunction::from_values(params, json.depth, values)
    }
}

impl PartialEq for LocallyConstantFunction {
    fn eq(&self, other: &Self) -> bool {
        if self.params != other.params {
            return false;
        }
        let depth = self.depth.max(other.depth);
        self.refine(depth).unwrap().values == other.refine(depth).unwrap().values
    }
}

impl Eq for LocallyConstantFunction {}

/// `{"depth": k, "values": {"ab": ["1/3", "0"], ...}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionJson {
    pub depth: usize,
    pub values: IndexMap<String, [String; 2]>,
}

/// Unit constant.
pub fn one(params: GroupParams) -> LocallyConstantFunction {
    LocallyConstantFunction::constant(params, GaussRational::real(Rational::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::preimage_cylinder;
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

    fn pt(s: &str) -> BoundaryPoint {
        BoundaryPoint::parse(&f2(), s).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ind("a").eval_point(&pt("(a)")), GaussRational::one());
        assert_eq!(ind("a").eval_cylinder(&Cylinder::new(w("ba"))).unwrap(), GaussRational::zero());
        let phi = ind("ab").scale(&GaussRational::from_ints(2, 1));
        assert_eq!(phi.eval_cylinder(&Cylinder::new(w("aba"))).unwrap(), GaussRational::from_ints(2, 1));
        assert!(phi.eval_cylinder(&Cylinder::new(w("a"))).is_err());
    }

    #[test]
    fn translate_examples() {
        let phi = ind("a");
        assert_eq!(phi.translate(&ReducedWord::identity()), phi);
        let moved = phi.translate(&w("a"));
        assert_eq!(moved.eval_point(&pt("aa(b)")), GaussRational::one());
        assert_eq!(moved.eval_point(&pt("a(b)")), GaussRational::zero());
        assert!(moved.depth() <= phi.depth() + 1);
    }

    #[test]
    fn translate_agrees_with_preimage_cylinders() {
        // g.1_c = 1_{g·c}, and g·c = preimage of c under g⁻¹.
        let p = f2();
        for g in p.ball(3).unwrap() {
            for c in p.ball(2).unwrap().into_iter().skip(1) {
                let c = Cylinder::new(c);
                let lhs = LocallyConstantFunction::indicator(p, &c).translate(&g);
                let mut rhs = LocallyConstantFunction::constant(p, GaussRational::zero());
                for piece in preimage_cylinder(&p, &g.inverse(), &c) {
                    rhs = rhs.add(&LocallyConstantFunction::indicator(p, &piece));
                }
                assert_eq!(lhs, rhs, "g={g}, c={c}");
            }
        }
    }

    #[test]
    fn algebra_examples() {
        let zero = LocallyConstantFunction::constant(f2(), GaussRational::zero());
        assert_eq!(ind("a").pointwise_mul(&ind("b")), zero);
        let sum = ind("a").add(&ind("A")).add(&ind("b")).add(&ind("B"));
        assert_eq!(sum, one(f2()));
        let z = ind("a").scale(&GaussRational::from_ints(2, 1));
        assert_eq!(z.conjugate(), ind("a").scale(&GaussRational::from_ints(2, -1)));
    }

    #[test]
    fn partition_of_unity() {
        let p = f2();
        for k in 0..=4 {
            let mut total = LocallyConstantFunction::constant(p, GaussRational::zero());
            for c in p.sphere(k).unwrap() {
                total = total.add(&LocallyConstantFunction::indicator(p, &Cylinder::new(c)));
            }
            assert_eq!(total, one(p));
        }
    }

    #[test]
    fn averaging_preserves_integral() {
        let phi = ind("ab").add(&ind("A").scale(&GaussRational::i())).translate(&w("bA"));
        for d in 0..phi.depth() {
            assert_eq!(phi.average_to(d).integral(), phi.integral());
        }
        assert_eq!(ind("a").integral(), GaussRational::real(rat(1, 4)));
        assert_eq!(ind("a").l2_norm_sqr(), rat(1, 4));
    }

    #[test]
    fn lipschitz_bound_holds_on_cylinder_pairs() {
        let p = f2();
        let vs = VisualStructure::new(p, 0.7).unwrap();
        let phi = ind("ab").scale(&GaussRational::from_ints(3, -1)).add(&ind("b")).refine(2).unwrap();
        let bound = phi.lip_bound(&vs);
        let cells = p.sphere(2).unwrap();
        for (i, c) in cells.iter().enumerate() {
            for d in &cells[i + 1..] {
                let diff = (phi.value_at(c) - phi.value_at(d)).abs_f64();
                let dist = vs.distance(&Cylinder::new(c.clone()).into(), &Cylinder::new(d.clone()).into()).unwrap();
                assert!(diff <= bound * dist + 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let phi = ind("ab").scale(&GaussRational::new(rat(1, 3), rat(-2, 1)));
        let json = serde_json::to_string(&phi.to_json()).unwrap();
        assert!(json.contains("\"ab\":[\"1/3\",\"-2\"]"));
        let back: FunctionJson = serde_json::from_str(&json).unwrap();
        assert_eq!(LocallyConstantFunction::from_json(f2(), &back).unwrap(), phi);
        let bad: FunctionJson = serde_json::from_str(r#"{"depth":1,"values":{"a":["1","0"]}}"#).unwrap();
        assert!(LocallyConstantFunction::from_json(f2(), &bad).is_err());
    }
}
