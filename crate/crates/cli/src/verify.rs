//! `verify-all`: the invariant suite on seeded random inputs.
//!
//! Reports contain no timings or paths, so two runs with the same seed write
//! identical bytes.

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use fredholm::boundary::{pushforward, weak_distance_to_delta};
use fredholm::chern::cocycle_value;
use fredholm::deviation::{deviation_sq, deviation_sq_pairsum, expectation};
use fredholm::scalar::{format_rational, rat, Rational};
use fredholm::{
    BoundaryPoint, CocycleInput, Cylinder, GaussRational, GroupParams, LocallyConstantFunction, ReducedWord,
    Truncation, VisualStructure,
};

use crate::commands::{checks_csv, fail_on, operator_checks, Check};
use crate::config::Settings;
use crate::output::Artifacts;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Radius of the balls and truncations.
    #[arg(long = "R", alias = "radius")]
    pub radius: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of random functions per check.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
}

fn random_function(rng: &mut ChaCha8Rng, params: GroupParams, depth: usize) -> LocallyConstantFunction {
    let count = params.sphere_count(depth) as usize;
    let values = (0..count)
        .map(|_| {
            let mut part = || rat(rng.random_range(-3..=3), rng.random_range(1..=4));
            GaussRational::new(part(), part())
        })
        .collect();
    LocallyConstantFunction::from_values(params, depth, values).expect("table has the sphere size")
}

pub fn verify_all(s: &Settings, a: VerifyArgs) -> anyhow::Result<()> {
    let params = GroupParams::new(s.rank(a.n))?;
    let radius = s.radius(a.radius, 2);
    let seed = s.seed(a.seed);
    let vs = VisualStructure::new(params, s.epsilon(a.epsilon)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let ball = params.ball_with_cap(radius + 2, s.budget as u128)?;
    checks.push(Check::exact(
        "growth",
        ball.len().to_string(),
        params.growth_count(radius + 2).to_string(),
    ));

    let small = &ball[..ball.len().min(30)];
    let assoc = small.iter().all(|x| {
        x.mul(&x.inverse()).is_identity()
            && small.iter().all(|y| small.iter().all(|z| x.mul(y).mul(z) == x.mul(&y.mul(z))))
    });
    checks.push(Check::exact("group_axioms", assoc.to_string(), "true".into()));

    let mut probability = true;
    for g in &ball {
        let total: Rational = pushforward(&params, g, 2)?.total();
        probability &= total == rat(1, 1);
    }
    checks.push(Check::exact("pushforward_mass", probability.to_string(), "true".into()));

    let omega = BoundaryPoint::periodic(params.generator(0, false))?;
    let q = Rational::from_integer((params.branching() as i64).into());
    let mut furstenberg = true;
    for m in 2..=8 {
        let d = weak_distance_to_delta(&params, &omega.prefix(m), &omega, 1)?;
        furstenberg &= d <= rat(2, 1) * q.pow(1 - m as i32);
    }
    checks.push(Check::exact("furstenberg_rate", furstenberg.to_string(), "true".into()));

    // Two formulas for σ² plus the hermitian covariance rule, on random tables.
    let mut formulas = true;
    let mut equivariant = true;
    for _ in 0..a.samples {
        let depth = rng.random_range(0..=2);
        let phi = random_function(&mut rng, params, depth);
        let g = &ball[rng.random_range(0..ball.len())];
        let h = &ball[rng.random_range(0..ball.len())];
        formulas &= deviation_sq(&phi, g) == deviation_sq_pairsum(&phi, g);
        equivariant &= expectation(&phi.translate(h), g) == expectation(&phi, &h.inverse().mul(g));
    }
    checks.push(Check::exact("deviation_formulas", formulas.to_string(), "true".into()));
    checks.push(Check::exact("expectation_equivariance", equivariant.to_string(), "true".into()));

    let phi = random_function(&mut rng, params, 1);
    let t = Truncation::build(vs, radius, 1 + radius)?;
    for mut c in operator_checks(&phi, &t)? {
        c.name = format!("operators_{}", c.name);
        checks.push(c);
    }

    // The cocycle vanishes on constants and when the group product is not 1.
    let a_gen = params.generator(0, false);
    let b_gen = params.generator(1 % params.rank(), false);
    let ind = |w: &ReducedWord| LocallyConstantFunction::indicator(params, &Cylinder::new(w.clone()));
    let off = CocycleInput::new(params, 1, vec![(ind(&a_gen), a_gen.clone()), (ind(&b_gen), ReducedWord::identity())])?;
    let off_value = cocycle_value(&off, radius + 1)?;
    checks.push(Check::exact(
        "cocycle_nonidentity_product",
        off_value.exact_partial.is_zero().to_string(),
        "true".into(),
    ));
    let constant = LocallyConstantFunction::constant(params, GaussRational::one());
    let flat = CocycleInput::new(
        params,
        1,
        vec![(constant, a_gen.clone()), (random_function(&mut rng, params, 2), a_gen.inverse())],
    )?;
    let flat_value = cocycle_value(&flat, radius + 1)?;
    checks.push(Check::exact("cocycle_constant_entry", format_rational(&flat_value.exact_partial.norm_sqr()), "0".into()));
    let three = CocycleInput::new(
        params,
        3,
        (0..4)
            .map(|i| {
                let g = if i % 2 == 0 { a_gen.clone() } else { a_gen.inverse() };
                (random_function(&mut rng, params, 1), g)
            })
            .collect(),
    )?;
    let value = cocycle_value(&three, radius + 1)?;
    checks.push(Check::exact(
        "cocycle_sphere_bounds",
        value.spheres.iter().all(|t| t.within_bound()).to_string(),
        "true".into(),
    ));

    let out = Artifacts::new(&s.out)?;
    out.json(
        "verify-all",
        &json!({
            "rank": params.rank(),
            "radius": radius,
            "seed": seed,
            "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "passed": checks.iter().all(|c| c.passed),
        }),
    )?;
    out.csv("verify-all", &checks_csv(&checks))?;
    for c in &checks {
        println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    fail_on(&checks)
}
