use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use fdosc_core::criteria::{
    build_comparison_coefficient, check_interval_osc_thm22, check_nonoscillation_cor31, check_nonoscillation_thm31,
    check_oscillation_thm32, find_zero_free, CrossCheck, HypothesisStatus, IntervalOscInstance, IntervalOscOptions,
    IntervalStrategy, NonoscOptions, NonoscWitness, OscOptions,
};
use fdosc_core::expr::{parse, PiecewiseFn, ScalarFn};
use fdosc_core::integrator::{identity, DelayTerm, EquationSpec, HistorySpec, SolveOptions};
use fdosc_core::OscillationVerdict;

fn pw(s: &str) -> PiecewiseFn {
    parse(s).unwrap()
}

fn forced_delay() -> EquationSpec {
    EquationSpec {
        p: pw("1"),
        q: pw("0"),
        f: pw("cos(sin(ln(1+t)))"),
        terms: vec![
            DelayTerm { r: pw("sin(t)^2"), alpha: pw("t - 1") },
            DelayTerm { r: pw("cos(t)^2"), alpha: pw("t - 2") },
            DelayTerm { r: pw("-1"), alpha: identity() },
        ],
        t0: 0.0,
    }
}

/// `c` on `[3πl + 1, 3π(l+1))`, zero on `[3πl, 3πl + 1)`, for `l < periods`.
fn gated(c: f64, periods: usize) -> PiecewiseFn {
    let parts: Vec<String> = (0..periods).map(|l| format!("ind(3*pi*{l} + 1, 3*pi*{})", l + 1)).collect();
    pw(&format!("{c}*({})", parts.join(" + ")))
}

fn step_equation(c: f64) -> EquationSpec {
    EquationSpec {
        p: pw("1"),
        q: pw("0"),
        f: pw("sin(t/3)"),
        terms: vec![DelayTerm { r: gated(c, 12), alpha: pw("t - 0.5") }],
        t0: 0.0,
    }
}

fn partition(l: usize) -> [f64; 4] {
    let l = l as f64;
    [3.0 * PI * l + 0.5, (3.0 * l + 2.0) * PI + 0.5, (3.0 * l + 2.0) * PI + 1.0, 3.0 * PI * (l + 1.0)]
}

fn instance(eq: &EquationSpec, l: usize) -> IntervalOscInstance {
    IntervalOscInstance {
        p: eq.p.clone(),
        terms: eq.terms.iter().map(|d| (d.r.clone(), d.alpha.clone())).collect(),
        partition: partition(l),
    }
}

#[test]
fn constant_witness_has_vanishing_residual() {
    let eq = forced_delay();
    let r1: Vec<_> = eq.terms.iter().map(|d| d.r.clone()).collect();
    let rep =
        check_nonoscillation_thm31(&eq, &r1, &NonoscWitness::Expression(pw("1")), (0.0, 100.0), &NonoscOptions::default())
            .unwrap();
    assert_eq!(rep.verdict, OscillationVerdict::CertifiedNonoscillatory);
    match &rep.witnesses[0] {
        fdosc_core::criteria::Witness::Expression { max_residual, residual_l1, .. } => {
            assert!(*max_residual <= 1e-12);
            assert!(*residual_l1 <= 1e-10);
        }
        w => panic!("unexpected witness {w:?}"),
    }
    let ids: Vec<&str> = rep.hypotheses.iter().map(|h| h.id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "4", "5", "witness"]);
}

#[test]
fn forced_delay_equation_has_zero_free_solution() {
    let eq = forced_delay();
    let hs = vec![HistorySpec::new(0.0, pw("1"), 1.0), HistorySpec::new(0.0, pw("1"), 0.0)];
    let found = find_zero_free(&eq, &hs, 300.0, 0.0, &SolveOptions::default()).unwrap();
    let (_, traj) = found.expect("a zero-free solution");
    assert!(traj.zeros.is_empty());
    assert!(traj.horizon >= 300.0);
}

#[test]
fn positive_part_comparison_is_searched_numerically() {
    let eq = forced_delay();
    let rep = check_nonoscillation_cor31(&eq, (0.0, 100.0), None, &NonoscOptions::default()).unwrap();
    assert_eq!(rep.hypothesis("1").unwrap().status, HypothesisStatus::Verified);
    assert_eq!(rep.hypothesis("2").unwrap().status, HypothesisStatus::Verified);
    assert!(!rep.verdict.is_certified());
}

#[test]
fn step_instance_ratio_against_quadrature() {
    let eq = step_equation(2.0);
    let inst = instance(&eq, 1);
    let coef = build_comparison_coefficient(&inst, 0.1, 1e-2).unwrap();
    let t = 3.0 * PI + 2.0;
    let t1 = inst.partition[0];
    // p = 1: ∫ dτ/p is the interval length.
    let want = 2.0 * ((t - 0.5 - t1) + 0.1) / ((t - t1) + 0.1);
    assert!((coef.eval(t).unwrap() - want).abs() < 1e-10);
}

#[test]
fn ratio_is_monotone_in_epsilon() {
    let eq = step_equation(2.0);
    let inst = instance(&eq, 0);
    let coefs: Vec<_> = [0.01, 0.1, 1.0].iter().map(|&e| build_comparison_coefficient(&inst, e, 1e-2).unwrap()).collect();
    let (t1, t2) = (inst.partition[0], inst.partition[1]);
    for i in 0..=200 {
        let t = t1 + (t2 - t1) * i as f64 / 200.0;
        let v: Vec<f64> = coefs.iter().map(|c| c.eval(t).unwrap()).collect();
        assert!(v[0] <= v[1] + 1e-14 && v[1] <= v[2] + 1e-14, "t={t} {v:?}");
    }
}

#[test]
fn step_instance_bounds() {
    let eq = step_equation(2.0);
    for l in 0..10 {
        let sets = instance(&eq, l).sets(1e-2).unwrap();
        assert!(sets.big_t1 >= 3.0 * PI * l as f64 - 1e-9);
        assert!(sets.big_t2 <= 3.0 * PI * (l + 1) as f64 + 1e-9);
        assert!(sets.omega_plus.is_empty());
        assert_eq!(sets.omega1_minus, vec![1]);
    }
}

#[test]
fn desk_step_instance_second_interval_is_too_short() {
    // [t3, t4] has length π - 1, below the conjugate distance π/√2 of φ'' + 2φ = 0.
    assert!(PI - 1.0 < PI / SQRT_2);
    let eq = step_equation(2.0);
    let rep = check_interval_osc_thm22(&instance(&eq, 0), &IntervalOscOptions::default()).unwrap();
    assert_eq!(rep.hypothesis("a").unwrap().status, HypothesisStatus::Verified);
    assert_eq!(rep.hypothesis("b").unwrap().status, HypothesisStatus::Verified);
    assert_eq!(rep.hypothesis("c").unwrap().status, HypothesisStatus::Verified);
    assert_eq!(rep.hypothesis("d").unwrap().status, HypothesisStatus::Violated);
}

#[test]
fn stronger_step_instance_is_oscillatory_on_each_period() {
    let eq = step_equation(2.5);
    for l in 0..10 {
        let rep = check_interval_osc_thm22(&instance(&eq, l), &IntervalOscOptions::default()).unwrap();
        assert!(rep.all_verified(), "l={l}: {:?}", rep.hypotheses);
        match rep.verdict {
            OscillationVerdict::CertifiedOscillatoryOn { a, b } => {
                assert!(a >= 3.0 * PI * l as f64 - 1e-9 && b <= 3.0 * PI * (l + 1) as f64 + 1e-9);
            }
            v => panic!("l={l}: {v:?}"),
        }
    }
}

#[test]
fn stronger_step_equation_is_oscillatory_with_cross_check() {
    let started = Instant::now();
    let eq = step_equation(2.5);
    let intervals: Vec<(f64, f64)> = (0..10).map(|l| (3.0 * PI * l as f64, 3.0 * PI * (l + 1) as f64)).collect();
    let opts = OscOptions {
        strategy: IntervalStrategy::Thm22 { partitions: (0..10).map(partition).collect(), interval: IntervalOscOptions::default() },
        cross_check: Some(CrossCheck { histories: 20, seed: 42, horizon: 30.0 * PI, intervals }),
        ..OscOptions::default()
    };
    let r1: Vec<_> = eq.terms.iter().map(|d| d.r.clone()).collect();
    let rep = check_oscillation_thm32(&eq, &r1, (0.0, 30.0 * PI), &opts).unwrap();
    assert!(rep.all_verified(), "{:?}", rep.hypotheses);
    assert_eq!(rep.verdict, OscillationVerdict::CertifiedOscillatory);
    let table = rep.cross_check.unwrap();
    assert_eq!(table.rows.len(), 20);
    assert!(table.all_hit, "{table:?}");
    assert!(started.elapsed().as_secs() < 120);
}
