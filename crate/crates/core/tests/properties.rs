use std::f64::consts::PI;

use proptest::prelude::*;

use fdosc_core::criteria::{build_comparison_coefficient, q_functional, IntervalOscInstance};
use fdosc_core::expr::{parse, parse_expr, quad, BinOp, Expr, Func, PiecewiseFn, ScalarFn};
use fdosc_core::integrator::{solve_cauchy, solve_ode_interval, DelayTerm, EquationSpec, HistorySpec, SolveOptions};
use fdosc_core::riccati::{
    riccati_from_solution, solution_from_riccati, solve_riccati, verify_scalar_comparison, RiccatiOptions, RiccatiProblem,
    ScalarRiccatiPair,
};

fn pw(s: &str) -> PiecewiseFn {
    parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        Just(Expr::Var),
        Just(Expr::Pi),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Abs)], inner.clone())
                .prop_map(|(f, a)| Expr::call(f, vec![a])),
            (prop_oneof![Just(Func::Min), Just(Func::Max), Just(Func::Ind)], inner.clone(), inner)
                .prop_map(|(f, a, b)| Expr::call(f, vec![a, b])),
        ]
    })
}

fn same_value(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y || (x - y).abs() <= 1e-12 * x.abs().max(1.0),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(e in expr_strategy()) {
        let printed = e.to_string();
        let back = parse_expr(&printed).unwrap();
        prop_assert_eq!(back.to_string(), printed.clone());
        for t in [-1.7, 0.0, 0.3, 2.5] {
            prop_assert!(same_value(e.eval(t), back.eval(t)), "{} at {}", printed, t);
        }
    }

    #[test]
    fn quadrature_is_additive(a in -3.0..3.0f64, w in 0.1..4.0f64, c in -2.0..2.0f64, lo in -5.0..0.0f64,
                              mid in 0.0..3.0f64, len in 0.1..5.0f64, edge in -2.0..6.0f64) {
        let f = pw(&format!("{a}*sin({w}*t) + {c}*ind({edge}, inf) + t^2/10"));
        let hi = mid + len;
        let whole = quad(&f, lo, hi, 1e-12).unwrap();
        let split = quad(&f, lo, mid, 1e-12).unwrap() + quad(&f, mid, hi, 1e-12).unwrap();
        prop_assert!((whole - split).abs() <= 1e-9 * whole.abs().max(1.0), "{} vs {}", whole, split);
    }

    #[test]
    fn positive_part_is_pointwise_max(a in -3.0..3.0f64, b in -3.0..3.0f64, w in 0.1..4.0f64, t in -10.0..10.0f64) {
        let f = pw(&format!("piecewise (-inf, 0): {a} ; [0, inf): {b}*cos({w}*t) + {a}"));
        let v = f.positive_part().eval(t).unwrap();
        prop_assert_eq!(v, f.eval(t).unwrap().max(0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solutions_superpose(k in 0.2..2.0f64, c in 0.0..1.0f64, tau in 0.2..1.5f64, z1 in -1.0..1.0f64,
                           z2 in -1.0..1.0f64, m in -1.0..1.0f64) {
        let forced = EquationSpec {
            p: pw("1 + 0.3*sin(t)"),
            q: pw("0.1*cos(t)"),
            f: pw("sin(2*t)"),
            terms: vec![
                DelayTerm { r: pw(&format!("{k}")), alpha: pw("t") },
                DelayTerm { r: pw(&format!("{c}")), alpha: pw(&format!("t - {tau}")) },
            ],
            t0: 0.0,
        };
        let hom = forced.homogeneous();
        let opts = SolveOptions::with_tol(1e-11);
        let a = solve_cauchy(&forced, &HistorySpec::new(0.0, pw("cos(t)"), z1), 8.0, &opts).unwrap();
        let b = solve_cauchy(&hom, &HistorySpec::new(0.0, pw(&format!("{m}*t + 1")), z2), 8.0, &opts).unwrap();
        let sum = solve_cauchy(&forced, &HistorySpec::new(0.0, pw(&format!("cos(t) + {m}*t + 1")), z1 + z2), 8.0, &opts).unwrap();
        for i in 0..=80 {
            let t = i as f64 * 0.1;
            let want = a.phi(t).unwrap() + b.phi(t).unwrap();
            let got = sum.phi(t).unwrap();
            prop_assert!((got - want).abs() <= 1e-7 * want.abs().max(1.0), "t={} {} {}", t, got, want);
        }
    }

    #[test]
    fn riccati_round_trip(k in 1.0..2.0f64, c in 0.0..0.5f64, tau in 0.2..1.5f64, zeta in 0.0..1.0f64, lambda in 0.5..3.0f64) {
        let eq = EquationSpec {
            p: pw("1 + 0.2*cos(t)"),
            q: pw("0"),
            f: pw("0"),
            terms: vec![
                DelayTerm { r: pw(&format!("-{k}")), alpha: pw("t") },
                DelayTerm { r: pw(&format!("{c}")), alpha: pw(&format!("t - {tau}")) },
            ],
            t0: 0.0,
        };
        let hist = HistorySpec::new(0.0, PiecewiseFn::constant(lambda), zeta);
        let traj = solve_cauchy(&eq, &hist, 10.0, &SolveOptions::default()).unwrap();
        let ric = riccati_from_solution(&eq, &hist, &traj, 0.0).unwrap();
        let back = solution_from_riccati(&ric, lambda).unwrap();
        for i in 0..=100 {
            let t = i as f64 * 0.1;
            let (x, y) = (traj.phi(t).unwrap(), back.phi(t).unwrap());
            prop_assert!(((y - x) / x).abs() <= 1e-6, "t={} {} {}", t, x, y);
        }
    }

    /// With past `θ = exp(μ t)`, `y ≡ μ` before `t1` and `φ = exp(F)` after.
    #[test]
    fn big_f_is_log_of_solution(mu in -0.5..0.5f64, k in 0.5..1.5f64, tau in 0.2..1.0f64) {
        let eq = EquationSpec {
            p: pw("1"),
            q: pw("0"),
            f: pw("0"),
            terms: vec![
                DelayTerm { r: pw(&format!("-{k}")), alpha: pw("t") },
                DelayTerm { r: pw("0.1"), alpha: pw(&format!("t - {tau}")) },
            ],
            t0: 0.0,
        };
        let prob = RiccatiProblem { eq: eq.clone(), lambda: 1.0, t1: 0.0, gamma: PiecewiseFn::constant(mu), homogeneous: true, r1: None };
        let ric = solve_riccati(&prob, 5.0, &RiccatiOptions::default()).unwrap();
        prop_assume!(ric.is_clean());
        let traj = solve_cauchy(&eq, &HistorySpec::new(0.0, pw(&format!("exp({mu}*t)")), mu), 5.0, &SolveOptions::default()).unwrap();
        prop_assume!(traj.zeros.is_empty());
        for i in 0..=50 {
            let t = i as f64 * 0.1;
            let lhs = ric.big_f(t).unwrap();
            let rhs = traj.phi(t).unwrap().ln();
            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1.0), "t={} {} {}", t, lhs, rhs);
        }
    }

    #[test]
    fn zeros_of_independent_solutions_interlace(a in 0.0..0.5f64, w in 0.2..2.0f64, k in 1.0..4.0f64, b in 0.0..0.9f64,
                                                 u0 in -1.0..1.0f64) {
        let p = pw(&format!("1 + {a}*sin({w}*t)"));
        let r = pw(&format!("{k} + {b}*cos({w}*t)"));
        let opts = SolveOptions::default();
        let u = solve_ode_interval(&p, &r, (0.0, 25.0), (u0, 1.0), &opts).unwrap();
        let v = solve_ode_interval(&p, &r, (0.0, 25.0), (1.0, -u0 / 2.0 - 0.7), &opts).unwrap();
        let mut zs: Vec<(f64, u8)> = u.zeros.iter().map(|z| (z.t, 0)).chain(v.zeros.iter().map(|z| (z.t, 1))).collect();
        zs.sort_by(|x, y| x.0.total_cmp(&y.0));
        prop_assert!(zs.len() >= 4);
        for pair in zs.windows(2) {
            prop_assert!(pair[0].1 != pair[1].1 && pair[1].0 > pair[0].0, "{:?}", pair);
        }
    }

    #[test]
    fn scalar_comparison_orders_solutions(a in 0.0..1.0f64, b in -1.0..1.0f64, c in -0.5..0.5f64, dc in 0.0..1.0f64,
                                          y0 in -0.8..0.8f64, gap in 0.0..0.5f64, len in 0.2..1.5f64) {
        let pair = ScalarRiccatiPair {
            a: pw(&format!("{a}*(1 + 0.5*sin(3*t))")),
            b: pw(&format!("{b}*cos(t)")),
            c: pw(&format!("{c} + 0.3*sin(2*t)")),
            a1: pw(&format!("{a}*(1 + 0.5*sin(3*t))")),
            b1: pw(&format!("{b}*cos(t)")),
            c1: pw(&format!("{c} + 0.3*sin(2*t) - {dc}*(1 + cos(5*t))")),
            interval: (0.0, len),
            y0,
            eta0: y0 + gap,
            eta1: y0 + gap,
            lambda: y0 + 0.5 * gap,
        };
        let rep = verify_scalar_comparison(&pair, 1e-8).unwrap();
        prop_assume!(rep.conditions.iter().all(|c| c.holds));
        prop_assert!(rep.ordering_margin >= -1e-8, "{}", rep.ordering_margin);
        prop_assert!(rep.conclusion);
    }

    #[test]
    fn comparison_coefficient_grows_with_epsilon(c in 0.5..3.0f64, h in 0.0..0.9f64, t1 in 0.0..1.0f64, len in 1.0..4.0f64,
                                                 e1 in 0.01..1.0f64, factor in 1.0..8.0f64) {
        let inst = IntervalOscInstance {
            p: pw("1 + 0.3*sin(t)"),
            // Switched on once the delayed argument has entered [t1, t2].
            terms: vec![(pw(&format!("{c}*ind({t1} + {h}, inf)")), pw(&format!("t - {h}")))],
            partition: [t1, t1 + len, t1 + len + 0.5, t1 + len + 3.0],
        };
        let lo = build_comparison_coefficient(&inst, e1, 1e-2).unwrap();
        let hi = build_comparison_coefficient(&inst, e1 * factor, 1e-2).unwrap();
        for i in 0..=50 {
            let t = (t1 + len * i as f64 / 50.0).min(t1 + len);
            let (x, y) = (lo.eval(t).unwrap(), hi.eval(t).unwrap());
            prop_assert!(x <= y + 1e-12, "t={} {} {}", t, x, y);
        }
    }

    /// The solution between consecutive zeros makes the variational
    /// functional vanish.
    #[test]
    fn own_solution_between_zeros_has_zero_q(a in 0.0..0.5f64, w in 0.2..2.0f64, k in 1.0..4.0f64, b in 0.0..0.9f64, s in 0.0..3.0f64) {
        let d = pw(&format!("1 + {a}*sin({w}*t)"));
        let r = pw(&format!("{k} + {b}*cos({w}*t)"));
        let mut opts = SolveOptions::with_tol(1e-12);
        opts.stop_at_first_zero = true;
        let traj = solve_ode_interval(&d, &r, (s, s + 10.0), (0.0, 1.0), &opts).unwrap();
        let z = traj.zeros.first().expect("a zero").t;
        let u = |t: f64| {
            let t = t.clamp(s, z);
            let (phi, psi) = traj.eval(t).unwrap();
            (phi, psi / d.eval(t).unwrap())
        };
        let q = q_functional(&d, &r, &u, (s, z), &traj.mesh()).unwrap();
        prop_assert!(q.abs() <= 1e-7, "Q = {}", q);
        let half = PI / k.sqrt();
        prop_assert!(z - s > 0.3 * half && z - s < 3.0 * half);
    }
}
