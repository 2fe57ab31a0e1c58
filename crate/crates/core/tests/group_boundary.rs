use fredholm::boundary::{cylinder_measure, pushforward, pushforward_measure, weak_distance_to_delta};
use fredholm::group::gromov_product;
use fredholm::scalar::{rat, Rational};
use fredholm::{BoundaryPoint, Cylinder, GroupParams, Letter, ReducedWord, Region, VisualStructure};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn f2() -> GroupParams {
    GroupParams::new(2).unwrap()
}

fn letters(rank: usize, max_len: usize) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(0..(2 * rank) as Letter, 0..=max_len)
}

/// Elements of `B_R`, uniformly by index.
fn element(params: GroupParams, radius: usize) -> impl Strategy<Value = ReducedWord> {
    let ball = params.ball(radius).unwrap();
    (0..ball.len()).prop_map(move |i| ball[i].clone())
}

proptest! {
    #[test]
    fn reduce_is_idempotent(rank in 2usize..5, raw in letters(4, 24)) {
        let p = GroupParams::new(rank).unwrap();
        let raw: Vec<Letter> = raw.into_iter().map(|l| l % (2 * rank) as Letter).collect();
        let w = p.reduce(&raw).unwrap();
        prop_assert_eq!(p.reduce(w.letters()).unwrap(), w.clone());
        prop_assert!(w.letters().windows(2).all(|x| x[0] != x[1] ^ 1));
    }

    #[test]
    fn group_axioms(g in element(f2(), 6), h in element(f2(), 6), k in element(f2(), 6)) {
        prop_assert_eq!(g.mul(&h).mul(&k), g.mul(&h.mul(&k)));
        prop_assert!(g.mul(&g.inverse()).is_identity());
        prop_assert!(g.inverse().mul(&g).is_identity());
        prop_assert_eq!(g.mul(&ReducedWord::identity()), g.clone());
        prop_assert_eq!(ReducedWord::identity().mul(&g), g);
    }

    #[test]
    fn group_axioms_rank_three(a in letters(3, 8), b in letters(3, 8)) {
        let p = GroupParams::new(3).unwrap();
        let (g, h) = (p.reduce(&a).unwrap(), p.reduce(&b).unwrap());
        let mut cat = a.clone();
        cat.extend(&b);
        prop_assert_eq!(p.reduce(&cat).unwrap(), g.mul(&h));
    }

    #[test]
    fn translation_preserves_measure_of_preimages(g in element(f2(), 3), w in element(f2(), 3)) {
        prop_assume!(!w.is_identity());
        // g_*μ([w]) summed over the children of w equals g_*μ([w]).
        let table = pushforward(&f2(), &g, w.len() + 1).unwrap();
        let parent = table.mass(&Cylinder::new(w.clone())).unwrap();
        let children: Rational = f2().letters().filter(|&l| Some(l ^ 1) != w.last())
            .map(|l| table.mass(&Cylinder::new(w.push(l))).unwrap()).sum();
        prop_assert_eq!(parent, children);
    }

    #[test]
    fn boundary_action_is_a_group_action(g in element(f2(), 3), h in element(f2(), 3),
                                         head in letters(2, 3), period in letters(2, 3)) {
        let p = f2();
        let head = p.reduce(&head).unwrap();
        let period = p.reduce(&period).unwrap();
        prop_assume!(!period.is_identity());
        let Ok(xi) = BoundaryPoint::new(head, period) else { return Ok(()) };
        let left = xi.translate(&h).translate(&g);
        let right = xi.translate(&g.mul(&h));
        prop_assert!(left.same_point(&right));
        prop_assert!(xi.translate(&g).translate(&g.inverse()).same_point(&xi));
    }
}

#[test]
fn zero_hyperbolicity_on_b5() {
    let ball = f2().ball(5).unwrap();
    for g in &ball {
        for h in &ball {
            let gh = gromov_product(g, h);
            for k in ball.iter().step_by(3) {
                assert!(gh >= gromov_product(g, k).min(gromov_product(h, k)));
            }
        }
    }
}

#[test]
fn gromov_product_is_common_prefix_on_b5() {
    let ball = f2().ball(5).unwrap();
    for g in &ball {
        for h in &ball {
            assert_eq!(gromov_product(g, h), g.common_prefix_len(h), "{g} {h}");
        }
    }
}

#[test]
fn ball_sizes_match_growth_closed_form() {
    for rank in [2usize, 3] {
        let p = GroupParams::new(rank).unwrap();
        let n = rank as u128;
        for r in 0..=8u32 {
            let closed = 1 + 2 * n * ((2 * n - 1).pow(r) - 1) / (2 * n - 2);
            assert_eq!(p.ball(r as usize).unwrap().len() as u128, closed);
            assert_eq!(p.growth_count(r as usize), closed);
        }
    }
}

#[test]
fn additivity_on_b5() {
    let p = f2();
    for w in p.ball(5).unwrap() {
        let children: Rational = p
            .letters()
            .filter(|&l| w.last().is_none_or(|last| l != last ^ 1))
            .map(|l| cylinder_measure(&p, &Cylinder::new(w.push(l))))
            .sum();
        assert_eq!(children, cylinder_measure(&p, &Cylinder::new(w)));
    }
}

#[test]
fn pushforwards_are_probability_measures() {
    let p = f2();
    for g in p.ball(5).unwrap() {
        for k in 1..=4 {
            assert!(pushforward(&p, &g, k).unwrap().total().is_one(), "{g} at depth {k}");
        }
    }
}

#[test]
fn pushforward_composes() {
    let p = f2();
    let ball = p.ball(3).unwrap();
    let k = 2;
    for h in &ball {
        let inner = pushforward(&p, h, k + 3).unwrap();
        for g in &ball {
            let composed = pushforward_measure(g, &inner, k).unwrap();
            assert_eq!(composed, pushforward(&p, &g.mul(h), k).unwrap(), "g = {g}, h = {h}");
        }
    }
}

/// Some depth-1 cylinder carries all but `1/(2n(2n−1)^{m−1})` of `g_*μ`.
#[test]
fn pushforwards_concentrate() {
    let p = f2();
    for m in 1..=6 {
        let bound = rat(1, 4) * Rational::from_integer(3.into()).pow(-(m as i32 - 1));
        for g in p.sphere(m).unwrap() {
            let table = pushforward(&p, &g, 1).unwrap();
            let deficit = table.masses().iter().map(|x| Rational::one() - x).min().unwrap();
            assert!(deficit <= bound, "{g}");
            assert_eq!(deficit, bound);
        }
    }
}

#[test]
fn weak_distance_decays_geometrically() {
    let p = f2();
    for omega in ["(a)", "(ab)", "b(Ab)", "aB(aab)"] {
        let omega = BoundaryPoint::parse(&p, omega).unwrap();
        for k in 1..=3 {
            for m in k + 1..=10 {
                let d = weak_distance_to_delta(&p, &omega.prefix(m), &omega, k).unwrap();
                let bound = rat(2, 1) * Rational::from_integer(3.into()).pow(-((m - k) as i32));
                assert!(d <= bound, "ω = {omega}, m = {m}, k = {k}");
                assert!(!d.is_zero());
            }
        }
    }
}

#[test]
fn visual_distance_of_cylinders() {
    let vs = VisualStructure::new(f2(), 0.7).unwrap();
    let ball = f2().sphere(3).unwrap();
    for a in &ball {
        for b in &ball {
            let (ca, cb): (Region, Region) = (Cylinder::new(a.clone()).into(), Cylinder::new(b.clone()).into());
            if a == b {
                continue;
            }
            let d = vs.distance(&ca, &cb).unwrap();
            assert!((d - (-0.7 * a.common_prefix_len(b) as f64).exp()).abs() < 1e-15);
        }
    }
}
