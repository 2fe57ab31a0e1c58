//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fredholm::boundary::weak_distance_to_delta;
use fredholm::chern::{cocycle_value, cross_validate};
use fredholm::deviation::{deviation_profile, deviation_sq, deviation_sq_pairsum};
use fredholm::operator::{
    homotopy_projection_check, match_commutator_spectrum, verify_compression_identity, verify_pi_identity,
    BlockTruncation, CrossedElement,
};
use fredholm::scalar::{rat, rational_to_f64, Rational};
use fredholm::summability::{hausdorff_dimension, sphere_sums};
use fredholm::{
    BoundaryPoint, CocycleInput, Cylinder, GaussRational, GroupParams, LocallyConstantFunction, ReducedWord,
    Truncation, VisualStructure,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn f2() -> GroupParams {
    GroupParams::new(2).unwrap()
}

fn ind(s: &str) -> LocallyConstantFunction {
    LocallyConstantFunction::indicator(f2(), &Cylinder::new(s.parse().unwrap()))
}

fn w(s: &str) -> ReducedWord {
    s.parse().unwrap()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let spent = start.elapsed();
    if spent <= limit {
        Ok(())
    } else {
        Err(format!("took {spent:?}, limit {limit:?}"))
    }
}

/// Values in `{0, 1, 1/2, i}`: every table of depth 0 and 1, plus seeded
/// depth-2 tables (the full depth-2 family has 4^12 members).
fn deviation_identity() -> Outcome {
    let start = Instant::now();
    let palette = [GaussRational::zero(), GaussRational::one(), GaussRational::real(rat(1, 2)), GaussRational::i()];
    let ball = f2().ball(3).unwrap();
    let mut functions = Vec::new();
    for depth in 0..=1 {
        let cells = f2().sphere_count(depth) as u32;
        for code in 0..4usize.pow(cells) {
            let values = (0..cells).map(|i| palette[(code >> (2 * i)) & 3].clone()).collect();
            functions.push(LocallyConstantFunction::from_values(f2(), depth, values).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..64 {
        let values = (0..12).map(|_| palette[rng.random_range(0..4)].clone()).collect();
        functions.push(LocallyConstantFunction::from_values(f2(), 2, values).unwrap());
    }
    let mut cases = 0;
    for phi in &functions {
        for g in &ball {
            if deviation_sq(phi, g) != deviation_sq_pairsum(phi, g) {
                return Err(format!("mismatch at g = {g}"));
            }
            cases += 1;
        }
    }
    within(Duration::from_secs(30), start)?;
    ensure(cases >= 2000, format!("{cases} cases in {:?}", start.elapsed()))
}

fn sphere_ratios() -> Vec<Rational> {
    let profile = deviation_profile(&ind("a"), 8).unwrap();
    (0..=8).map(|m| profile.sphere_max(m) * Rational::from_integer(3.into()).pow(m as i32)).collect()
}

/// `max_{|g|=m} σ²·3^m` with K taken as the largest value for `m ≤ 3`.
fn c0_decay() -> Outcome {
    let scaled = sphere_ratios();
    let k = scaled[..=3].iter().max().unwrap().clone();
    let bad: Vec<usize> = (0..=8).filter(|&m| scaled[m] > k).collect();
    ensure(
        bad.is_empty(),
        format!("K = {:.6} from m ≤ 3; exceeded at m = {bad:?}", rational_to_f64(&k)),
    )
}

/// The same decay with the sharp constant `K = 3/4 = sup_m`.
fn c0_decay_sharp() -> Outcome {
    let scaled = sphere_ratios();
    let bad: Vec<usize> = (0..=8).filter(|&m| scaled[m] > rat(3, 4)).collect();
    ensure(bad.is_empty(), format!("K = 3/4; worst {:.6}", rational_to_f64(scaled.iter().max().unwrap())))
}

fn summability_threshold() -> Outcome {
    let start = Instant::now();
    let profile = deviation_profile(&ind("a"), 8).unwrap();
    let three = sphere_sums(&profile, 3.0);
    let two = sphere_sums(&profile, 2.0);
    let limit = 3f64.powf(-0.5) + 0.1;
    let worst = (4..=8).map(|m| three[m] / three[m - 1]).fold(0.0, f64::max);
    let least = two.iter().copied().fold(f64::INFINITY, f64::min);
    within(Duration::from_secs(60), start)?;
    ensure(worst <= limit && least >= 0.1, format!("p=3 worst ratio {worst:.6}, p=2 least sum {least:.6}"))
}

fn operator_identities() -> Outcome {
    let start = Instant::now();
    let vs = VisualStructure::new(f2(), 1.0).unwrap();
    let t = Truncation::build(vs, 2, 3).map_err(|e| e.to_string())?;
    if t.dim() != 612 {
        return Err(format!("dimension {}", t.dim()));
    }
    let phi = ind("a").add(&ind("B").scale(&GaussRational::from_ints(0, 2)));
    let pi = verify_pi_identity(&phi, &t).map_err(|e| e.to_string())?;
    let a = CrossedElement::new(vec![(phi.clone(), ReducedWord::identity()), (ind("b"), w("a"))]);
    let compression = verify_compression_identity(&a, &t).map_err(|e| e.to_string())?;
    let spectrum = match_commutator_spectrum(&phi, &t).map_err(|e| e.to_string())?;
    within(Duration::from_secs(120), start)?;
    let ok = pi.modulus_error <= 1e-10
        && pi.compression_error <= 1e-10
        && compression <= 1e-10
        && spectrum.max_error <= 1e-9
        && spectrum.residual <= 1e-9;
    ensure(
        ok,
        format!(
            "Π*Π {:.1e}, PλP {:.1e}, crossed PλP {:.1e}, singular values {:.1e}, {:?}",
            pi.modulus_error,
            pi.compression_error,
            compression,
            spectrum.max_error.max(spectrum.residual),
            start.elapsed()
        ),
    )
}

/// A random exact unit vector at level 2. Neighbouring cells get moduli
/// `x, y` with `x² + y² = 2` and every cell a rational phase.
fn unit_vector(rng: &mut ChaCha8Rng) -> LocallyConstantFunction {
    let mut t = || rat(rng.random_range(-9..=9), rng.random_range(1..=9));
    let mut values = Vec::new();
    for _ in 0..6 {
        let s = t();
        let den = Rational::one() + &s * &s;
        let x = (Rational::one() - rat(2, 1) * &s - &s * &s) / &den;
        let y = (Rational::one() + rat(2, 1) * &s - &s * &s) / &den;
        for r in [x, y] {
            let u = t();
            let d = Rational::one() + &u * &u;
            let phase = GaussRational::new((Rational::one() - &u * &u) / &d, rat(2, 1) * &u / &d);
            values.push(phase.scale(&r));
        }
    }
    LocallyConstantFunction::from_values(f2(), 2, values).unwrap()
}

fn homotopy_inequality() -> Outcome {
    let vs = VisualStructure::new(f2(), 1.0).unwrap();
    let t = Truncation::build(vs, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut p_one = 0.0f64;
    for _ in 0..50 {
        let (a, b) = (unit_vector(&mut rng), unit_vector(&mut rng));
        let check = homotopy_projection_check(&a, &b, &t).map_err(|e| e.to_string())?;
        if !check.holds() {
            return Err(format!("‖ΔP‖ = {} > {}", check.norm_diff, check.bound));
        }
        worst = worst.max(check.norm_diff / check.bound);
        p_one = p_one.max(check.p_one_error);
    }
    ensure(p_one <= 1e-12, format!("50 pairs, worst ratio {worst:.4}, P(1) error {p_one:.1e}"))
}

fn furstenberg() -> Outcome {
    let a = w("a");
    let omega = BoundaryPoint::periodic(a.clone()).unwrap();
    for m in 0..=10 {
        let d = weak_distance_to_delta(&f2(), &a.pow(m), &omega, 1).unwrap();
        let expected = rat(1, 2) * Rational::from_integer(3.into()).pow(1 - m as i32);
        if d != expected {
            return Err(format!("m = {m}: {d} ≠ {expected}"));
        }
    }
    Ok("exact for m = 0..10".into())
}

fn chern_cocycle() -> Outcome {
    let start = Instant::now();
    let input = |terms: Vec<(LocallyConstantFunction, &str)>, degree| {
        CocycleInput::new(f2(), degree, terms.into_iter().map(|(f, g)| (f, w(g))).collect()).unwrap()
    };
    let vanishing = input(vec![(ind("a"), "a"), (ind("b"), "1"), (ind("A"), "1"), (ind("ab"), "1")], 3);
    let v = cocycle_value(&vanishing, 5).map_err(|e| e.to_string())?;
    if !v.exact_partial.is_zero() {
        return Err("g₀g₁g₂g₃ ≠ 1 but the cocycle is nonzero".into());
    }
    let phi = ind("a").add(&ind("bA").scale(&GaussRational::i()));
    for degree in [1, 3] {
        let same = input(vec![(phi.clone(), "1"); degree + 1], degree);
        if !cocycle_value(&same, 5).map_err(|e| e.to_string())?.exact_partial.is_zero() {
            return Err(format!("identical arguments give a nonzero value in degree {degree}"));
        }
    }
    let x = input(
        vec![
            (ind("a"), "1"),
            (ind("b").scale(&GaussRational::i()), "b"),
            (ind("A"), "1"),
            (ind("ab"), "B"),
        ],
        3,
    );
    let t = BlockTruncation::build(f2(), 4, 4).map_err(|e| e.to_string())?;
    let cv = cross_validate(&x, &t).map_err(|e| e.to_string())?;
    if !cv.holds() {
        return Err(format!(
            "|partial − trace| = {:.3e} > tail {:.3e} + window {:.3e}",
            cv.difference, cv.tail_bound, cv.window_correction
        ));
    }
    // Alternating indicators: the formula gives 0 exactly; the trace at R=5, m=4 must agree.
    let alternating = input(vec![(ind("a"), "1"), (ind("b"), "1"), (ind("a"), "1"), (ind("b"), "1")], 3);
    let frozen = cocycle_value(&alternating, 5).map_err(|e| e.to_string())?;
    let t5 = BlockTruncation::build(f2(), 5, 4).map_err(|e| e.to_string())?;
    let cv5 = cross_validate(&alternating, &t5).map_err(|e| e.to_string())?;
    if !frozen.exact_partial.is_zero() || !cv5.holds() {
        return Err(format!("alternating indicators: partial {:?}, trace {}", frozen.exact_partial, cv5.trace));
    }
    let mut spheres = 0;
    for case in [&vanishing, &x, &alternating] {
        let value = cocycle_value(case, 6).map_err(|e| e.to_string())?;
        if let Some(s) = value.spheres.iter().find(|s| !s.within_bound()) {
            return Err(format!("sphere {} sum {} above bound {}", s.m, s.sum.abs_f64(), s.bound));
        }
        spheres += value.spheres.len();
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!(
        "|partial − trace| = {:.3e} ≤ {:.3e} + {:.3e}; alternating trace {:.1e}; {spheres} sphere sums within bound",
        cv.difference, cv.tail_bound, cv.window_correction, cv5.trace.norm()
    ))
}

fn growth() -> Outcome {
    for n in [2usize, 3] {
        let p = GroupParams::new(n).unwrap();
        for r in 0..=8u32 {
            let q = 2 * n as u128 - 1;
            let closed = 1 + 2 * n as u128 * (q.pow(r) - 1) / (2 * n as u128 - 2);
            let count = p.ball(r as usize).unwrap().len() as u128;
            if count != closed {
                return Err(format!("n = {n}, R = {r}: {count} ≠ {closed}"));
            }
        }
    }
    Ok("n ∈ {2, 3}, R ≤ 8".into())
}

fn dimension() -> Outcome {
    let vs = VisualStructure::new(f2(), 3f64.ln()).unwrap();
    let d = hausdorff_dimension(&vs);
    ensure((d - 1.0).abs() <= 1e-15, format!("D = {d:?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fredholm"))
            .args(["--out", out.to_str().unwrap(), "verify-all", "--seed", "17"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("verify-all exited with {}", status.status));
        }
        read_reports(&out)
    };
    let first = run("first")?;
    let second = run("second")?;
    ensure(!first.is_empty() && first == second, format!("{} report files identical", first.len()))
}

fn read_reports(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), bytes))
        })
        .collect()
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("1 deviation identity", deviation_identity),
        ("2 C0 deviation decay", c0_decay),
        ("2s C0 decay, sharp constant", c0_decay_sharp),
        ("3 summability threshold", summability_threshold),
        ("4 operator identities", operator_identities),
        ("5 homotopy inequality", homotopy_inequality),
        ("6 Furstenberg convergence", furstenberg),
        ("7 Chern cocycle", chern_cocycle),
        ("8 growth closed form", growth),
        ("9 dimension formula", dimension),
        ("10 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion checks failed");
        ExitCode::FAILURE
    }
}
