use std::collections::BTreeMap;

use hamspray::expr::{parse, Alphabet, Expr, SampleBox, Sampler, Symbol};
use proptest::prelude::*;

const NAMES: [&str; 3] = ["x1", "x2", "y1"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0..NAMES.len()).prop_map(|i| Expr::var(NAMES[i])),
        (-4i64..5).prop_map(Expr::int),
        (-5i64..6, 1i64..5).prop_map(|(p, q)| Expr::ratio(p, q)),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::sum),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::product),
            (inner.clone(), 0i64..4).prop_map(|(e, k)| e.powi(k)),
            inner.clone().prop_map(|e| e.sin()),
            inner.clone().prop_map(|e| e.cos()),
            inner.clone().prop_map(|e| (e.sin() * Expr::ratio(1, 2)).exp()),
            inner.clone().prop_map(|e| (Expr::one() + e.powi(2)).recip()),
        ]
    })
}

fn sampler(trials: usize) -> Sampler {
    let vars: Vec<Symbol> = NAMES.iter().map(|n| Symbol::new(n)).collect();
    Sampler::new(SampleBox::uniform(&vars, -1.0, 1.0).unwrap(), trials, 1e-9, 17)
}

fn alphabet() -> Alphabet {
    Alphabet::new(NAMES)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn print_parse_round_trip(e in tree()) {
        let parsed = parse(&e.to_string(), &alphabet()).unwrap();
        prop_assert_eq!(parse(&parsed.to_string(), &alphabet()).unwrap(), parsed.clone());
        prop_assert!(sampler(32).is_zero(&(parsed - e)).unwrap().passed());
    }

    #[test]
    fn derivative_is_linear(a in -3i64..4, e1 in tree(), e2 in tree(), v in 0..NAMES.len()) {
        let s = Symbol::new(NAMES[v]);
        let a = Expr::int(a);
        let lhs = (&a * &e1 + &e2).diff(&s);
        let rhs = &a * &e1.diff(&s) + e2.diff(&s);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn mixed_partials_commute(e in tree(), u in 0..NAMES.len(), v in 0..NAMES.len()) {
        let (su, sv) = (Symbol::new(NAMES[u]), Symbol::new(NAMES[v]));
        let diff = e.diff(&su).diff(&sv) - e.diff(&sv).diff(&su);
        prop_assert!(sampler(64).is_zero(&diff).unwrap().passed());
    }

    #[test]
    fn simplify_is_idempotent(e in tree()) {
        let once = e.simplify();
        prop_assert_eq!(once.simplify(), once);
    }

    #[test]
    fn derivative_matches_finite_differences(e in tree(), v in 0..NAMES.len()) {
        let s = Symbol::new(NAMES[v]);
        let d = e.diff(&s);
        let step = 1e-6;
        for p in sampler(32).points() {
            let env: BTreeMap<Symbol, f64> = NAMES.iter().map(|n| Symbol::new(n)).zip(p.iter().copied()).collect();
            let shifted = |delta: f64| {
                let mut m = env.clone();
                *m.get_mut(&s).unwrap() += delta;
                e.eval(&m)
            };
            let (Ok(exact), Ok(plus), Ok(minus)) = (d.eval(&env), shifted(step), shifted(-step)) else { continue };
            let fd = (plus - minus) / (2.0 * step);
            prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {} for {}", fd, exact, e);
        }
    }

    #[test]
    fn sum_evaluates_termwise(e1 in tree(), e2 in tree()) {
        let sum = &e1 + &e2;
        for p in sampler(8).points() {
            let env: Vec<(Symbol, f64)> = NAMES.iter().map(|n| Symbol::new(n)).zip(p.iter().copied()).collect();
            if let (Ok(a), Ok(b), Ok(c)) = (e1.eval(env.as_slice()), e2.eval(env.as_slice()), sum.eval(env.as_slice())) {
                prop_assert!((a + b - c).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
            }
        }
    }
}

#[test]
fn zero_test_examples() {
    let s = sampler(64);
    let x1 = Expr::var("x1");
    let y1 = Expr::var("y1");
    assert!(s.is_zero(&(&y1 - &y1)).unwrap().is_proven());
    let pyth = x1.sin().powi(2) + x1.cos().powi(2) - Expr::one();
    let v = s.is_zero(&pyth).unwrap();
    assert!(v.passed() && !v.is_proven());
    assert!(!s.is_zero(&(&x1 * &y1)).unwrap().passed());
}

#[test]
fn parse_errors_locate_the_problem() {
    use hamspray::expr::ParseError;
    match parse("x1*", &alphabet()) {
        Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 3),
        other => panic!("expected syntax error, got {other:?}"),
    }
    match parse("rho*y1", &alphabet()) {
        Err(ParseError::UnknownSymbol { name, offset }) => {
            assert_eq!(name, "rho");
            assert_eq!(offset, 0);
        }
        other => panic!("expected unknown symbol, got {other:?}"),
    }
}

#[test]
fn evaluation_examples() {
    let a = alphabet();
    let env: BTreeMap<Symbol, f64> = [("x1", 2.0), ("x2", -1.0), ("y1", 0.5)]
        .iter()
        .map(|(n, v)| (Symbol::new(n), *v))
        .collect();
    let cases = [
        ("x1^2*y1 - x2", 3.0),
        ("(x1 + x2)/y1", 2.0),
        ("sin(0*x1) + exp(x2 + 1)", 1.0),
        ("sqrt(x1^2)*3/4", 1.5),
    ];
    for (src, want) in cases {
        let got = parse(src, &a).unwrap().eval(&env).unwrap();
        assert!((got - want).abs() < 1e-12, "{src}: {got}");
    }
    assert!(parse("log(x2)", &a).unwrap().eval(&env).is_err());
}
