mod common;

use common::{
    finite_hyperreal, nearby_point, rng, space, standard_point, vars, well_scaled, ExprGen,
};
use mulagrange::hyperreal::{Hyperreal, Monomial, Space, Tolerance};
use mulagrange::mudiff::{
    common_space, directional, gradient, partial, DiffConfig, HyperPoint, Step,
};
use mulagrange::{parse, Expr};
use proptest::prelude::*;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn same_terms(a: &Hyperreal, b: &Hyperreal) -> bool {
    let monomials: Vec<&Monomial> = a
        .terms()
        .map(|(m, _)| m)
        .chain(b.terms().map(|(m, _)| m))
        .collect();
    monomials
        .into_iter()
        .all(|m| close(a.coefficient(m), b.coefficient(m), 1e-12))
}

/// Random series over `eps, delta` with up to eight terms of degree <= 3.
fn series(order: u32) -> impl Strategy<Value = (u32, Vec<(u32, u32, f64)>)> {
    (
        Just(order),
        prop::collection::vec((0u32..=3, 0u32..=3, -3.0f64..3.0), 0..8),
    )
}

fn build(space: &Space, terms: &[(u32, u32, f64)]) -> Hyperreal {
    space.from_terms(
        terms
            .iter()
            .map(|&(e, d, c)| (Monomial::from_pairs([(0, e), (1, d)]), c)),
    )
}

fn unit_series() -> impl Strategy<Value = (f64, Vec<(u32, u32, f64)>)> {
    (
        prop_oneof![-3.0f64..-0.5, 0.5f64..3.0],
        prop::collection::vec((0u32..=2, 0u32..=2, -1.0f64..1.0), 0..5),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ring_laws_hold_up_to_truncation(
        (k, a) in series(4), (_, b) in series(4), (_, c) in series(4),
    ) {
        let s = space().with_order(k).unwrap();
        let (a, b, c) = (build(&s, &a), build(&s, &b), build(&s, &c));
        prop_assert!(same_terms(&((&a + &b) + &c), &(&a + &(&b + &c))));
        prop_assert!(same_terms(&(&a * &b), &(&b * &a)));
        prop_assert!(same_terms(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c))));
    }

    #[test]
    fn standard_part_is_a_ring_homomorphism((_, a) in series(4), (_, b) in series(4)) {
        let s = space();
        let (a, b) = (build(&s, &a), build(&s, &b));
        prop_assert!(close((&a + &b).st(), a.st() + b.st(), 1e-12));
        prop_assert!(close((&a * &b).st(), a.st() * b.st(), 1e-12));
    }

    #[test]
    fn division_inverts_multiplication_by_units((_, a) in series(4), (c0, u) in unit_series()) {
        let s = space();
        let a = build(&s, &a);
        let b = s.real(c0) + build(&s, &u.into_iter().filter(|t| t.0 + t.1 > 0).collect::<Vec<_>>());
        let q = a.checked_div(&b).unwrap();
        let back = &q * &b;
        prop_assert!(back.approx_eq(&a, tol()).unwrap());
        // Agreement on every monomial below the truncation order.
        for (m, _) in a.terms().chain(back.terms()) {
            if m.degree() < s.order() {
                prop_assert!(close(back.coefficient(m), a.coefficient(m), 1e-9), "{m:?}");
            }
        }
    }

    #[test]
    fn truncation_is_monotone((_, a) in series(6), (_, b) in series(6), (c0, u) in unit_series()) {
        let high = space().with_order(6).unwrap();
        let low = space();
        let (ah, bh) = (build(&high, &a), build(&high, &b));
        let (al, bl) = (ah.truncate(4).unwrap(), bh.truncate(4).unwrap());
        let u: Vec<_> = u.into_iter().filter(|t| t.0 + t.1 > 0).collect();
        let (dh, dl) = (high.real(c0) + build(&high, &u), low.real(c0) + build(&low, &u));
        let via_high = ((&ah * &bh) + &ah).checked_div(&dh).unwrap().truncate(4).unwrap();
        let direct = ((&al * &bl) + &al).checked_div(&dl).unwrap();
        prop_assert_eq!(via_high.space(), direct.space());
        prop_assert!(same_terms(&via_high, &direct));
    }

    #[test]
    fn shadow_commutes_with_evaluation(seed in any::<u64>()) {
        let s = space();
        let mut r = rng(seed);
        let f = ExprGen::rational(&s).gen(&mut r);
        let alpha = standard_point(&mut r, 3);
        let hyper = f.eval(&HyperPoint::from_standard(&s, &alpha)).unwrap();
        let shadow = f.shadow().eval_standard(&alpha);
        prop_assert!((hyper.st() - shadow).abs() <= 1e-9 * shadow.abs().max(1.0));
    }

    #[test]
    fn shadow_commutes_with_symbolic_diff(seed in any::<u64>()) {
        let s = space();
        let mut r = rng(seed);
        let f = ExprGen::rational(&s).gen(&mut r);
        for i in 0..3 {
            let lhs = f.symbolic_diff(i).shadow();
            let rhs = f.shadow().symbolic_diff(i);
            for _ in 0..5 {
                let alpha = standard_point(&mut r, 3);
                let (a, b) = (lhs.eval_standard(&alpha), rhs.eval_standard(&alpha));
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mu_partials_match_symbolic_derivatives(seed in any::<u64>()) {
        let s = space();
        let mut r = rng(seed);
        let f = ExprGen::rational(&s).gen(&mut r);
        let std = standard_point(&mut r, 3);
        let x = nearby_point(&mut r, &s, &std);
        prop_assume!(well_scaled(&f, &x, 1e4));
        let cfg = DiffConfig::default();
        for i in 0..3 {
            let p = partial(&f, &x, i, &cfg).unwrap();
            let oracle = f.symbolic_diff(i).eval(&x).unwrap();
            let (p, oracle) = common_space(&p, &oracle).unwrap();
            prop_assert!(p.approx_eq(&oracle, tol()).unwrap());
        }
    }

    #[test]
    fn step_choice_does_not_matter(seed in any::<u64>()) {
        let s = space();
        let mut r = rng(seed);
        let f = ExprGen::rational(&s).gen(&mut r);
        let std = standard_point(&mut r, 3);
        let x = nearby_point(&mut r, &s, &std);
        prop_assume!(well_scaled(&f, &x, 1e4));
        let linear = gradient(&f, &x, &DiffConfig::default()).unwrap();
        let squared = gradient(&f, &x, &DiffConfig { step: Step::Fresh { power: 2 }, ..DiffConfig::default() }).unwrap();
        prop_assert!(linear.approx_eq(squared.partials(), tol()).unwrap());
    }

    #[test]
    fn directional_derivative_is_linear_in_gradient(seed in any::<u64>()) {
        let s = space();
        let mut r = rng(seed);
        let f = ExprGen::rational(&s).gen(&mut r);
        let std = standard_point(&mut r, 3);
        let x = nearby_point(&mut r, &s, &std);
        let dir = standard_point(&mut r, 3);
        let u = nearby_point(&mut r, &s, &dir);
        prop_assume!(well_scaled(&f, &x, 1e3));
        let cfg = DiffConfig::default();
        let d = directional(&f, &x, &u, &cfg).unwrap();
        let g = gradient(&f, &x, &cfg).unwrap().dot(&u).unwrap();
        prop_assert!(d.approx_eq(&g, tol()).unwrap());
    }

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>()) {
        let s = space();
        let vars = vars();
        let mut r = rng(seed);
        let gen = ExprGen { max_depth: 5, ..ExprGen::rational(&s) };
        let e = gen.gen(&mut r);
        let text = e.render(&vars).to_string();
        let back = parse(&text, &vars, &s).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }
}

#[test]
fn render_round_trip_on_one_thousand_expressions() {
    let s = space();
    let vars = vars();
    let mut r = rng(0x5eed);
    let gen = ExprGen {
        max_depth: 5,
        ..ExprGen::rational(&s)
    };
    for _ in 0..1000 {
        let e = gen.gen(&mut r);
        let text = e.render(&vars).to_string();
        assert_eq!(parse(&text, &vars, &s).unwrap(), e, "{text}");
    }
}

#[test]
fn gradients_are_local() {
    let s = space();
    let mut r = rng(11);
    let cfg = DiffConfig::default();
    let mut checked = 0;
    while checked < 100 {
        let f = ExprGen::rational(&s).gen(&mut r);
        let std = standard_point(&mut r, 3);
        let x = nearby_point(&mut r, &s, &std);
        let y = nearby_point(&mut r, &s, &std);
        if !well_scaled(&f, &x, 1e4) {
            continue;
        }
        let gx = gradient(&f, &x, &cfg).unwrap();
        let gy = gradient(&f, &y, &cfg).unwrap();
        assert!(gx.approx_eq(gy.partials(), tol()).unwrap());
        checked += 1;
    }
}

#[test]
fn gradient_algebra() {
    let s = space();
    let mut r = rng(12);
    let cfg = DiffConfig::default();
    let mut checked = 0;
    while checked < 100 {
        let gen = ExprGen::rational(&s);
        let (f, g) = (gen.gen(&mut r), gen.gen(&mut r));
        let std = standard_point(&mut r, 3);
        let x = nearby_point(&mut r, &s, &std);
        let k = finite_hyperreal(&mut r, &s, 1.5);
        if !well_scaled(&f, &x, 1e3) || !well_scaled(&g, &x, 1e3) {
            continue;
        }
        let gf = gradient(&f, &x, &cfg).unwrap();
        let gg = gradient(&g, &x, &cfg).unwrap();
        let work = gf.space().unwrap().clone();
        let (fx, gx, kw) = (
            f.eval(&x).unwrap().embed(&work).unwrap(),
            g.eval(&x).unwrap().embed(&work).unwrap(),
            k.embed(&work).unwrap(),
        );

        let kf = Expr::Mul(Box::new(Expr::Const(k.clone())), Box::new(f.clone()));
        let scaled: Vec<Hyperreal> = gf.partials().iter().map(|p| &kw * p).collect();
        assert!(gradient(&kf, &x, &cfg)
            .unwrap()
            .approx_eq(&scaled, tol())
            .unwrap());

        let sum = Expr::Add(Box::new(f.clone()), Box::new(g.clone()));
        let summed: Vec<Hyperreal> = gf
            .partials()
            .iter()
            .zip(gg.partials())
            .map(|(a, b)| a + b)
            .collect();
        assert!(gradient(&sum, &x, &cfg)
            .unwrap()
            .approx_eq(&summed, tol())
            .unwrap());

        let prod = Expr::Mul(Box::new(f.clone()), Box::new(g.clone()));
        let rule: Vec<Hyperreal> = gf
            .partials()
            .iter()
            .zip(gg.partials())
            .map(|(df, dg)| &(&fx * dg) + &(&gx * df))
            .collect();
        assert!(gradient(&prod, &x, &cfg)
            .unwrap()
            .approx_eq(&rule, tol())
            .unwrap());
        checked += 1;
    }
}

#[test]
fn perturbing_a_gradient_infinitesimally_gives_another_gradient() {
    let s = space();
    let vars = vars();
    let f = parse("(1+eps)*x*y^2 - delta*z", &vars, &s).unwrap();
    let x = HyperPoint::from_standard(&s, &[0.3, -1.1, 2.0]);
    let g = gradient(&f, &x, &DiffConfig::default()).unwrap();
    let work = g.space().unwrap().clone();
    let omega = work.generator("eps").unwrap().scale(7.0) - work.generator("delta").unwrap();
    let shifted: Vec<Hyperreal> = g.partials().iter().map(|p| p + &omega).collect();
    assert!(g.approx_eq(&shifted, tol()).unwrap());
}
