use barrierlab::barriers::{check_params, select_sub, select_super, Barrier};
use barrierlab::residual::{analytic_flux_outer, time_derivative};
use barrierlab::weights::{eval_g, invert_g};
use barrierlab::{EnvelopeCalculus, ProblemSpec, WeightSpec};
use proptest::prelude::*;

fn weight_strategy() -> impl Strategy<Value = WeightSpec> {
    prop_oneof![
        (0.2f64..1.9).prop_map(|a| WeightSpec::power(a).unwrap()),
        (0.2f64..0.9, 0.1f64..0.9, 1.2f64..5.0).prop_map(|(a, b, c)| WeightSpec::zygmund(a, b, c).unwrap()),
    ]
}

fn calc_p2(w: WeightSpec) -> Option<EnvelopeCalculus> {
    ProblemSpec::new(3, 2.0, 2.0, w).ok().map(EnvelopeCalculus::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_inverse_round_trips(w in weight_strategy(), le in -5.0f64..5.0) {
        let s = 10f64.powf(le);
        let y = eval_g(&w, s).unwrap();
        let back = invert_g(&w, y).unwrap();
        prop_assert!((back - s).abs() <= 1e-10 * s);
    }

    #[test]
    fn g_inverse_slope_within_doubling(w in weight_strategy(), le in -4.0f64..4.0) {
        // (g⁻¹)'(y) = 1/g'(g⁻¹(y)) lies between s/(α₂ y) and s/(α₁ y)
        let y = 10f64.powf(le);
        let h = 1e-5 * y;
        let d = (invert_g(&w, y + h).unwrap() - invert_g(&w, y - h).unwrap()) / (2.0 * h);
        let s = invert_g(&w, y).unwrap();
        let lo = s / (w.alpha2() * y);
        let hi = s / (w.alpha1() * y);
        prop_assert!(d >= lo * (1.0 - 1e-6) && d <= hi * (1.0 + 1e-6), "{lo} {d} {hi}");
    }

    #[test]
    fn envelope_is_j_of_g_inverse(w in weight_strategy(), le in -3.0f64..4.0) {
        let Some(calc) = calc_p2(w) else { return Ok(()) };
        let tau = 10f64.powf(le);
        let r = calc.big_g_inverse(tau);
        prop_assert!((calc.big_e(tau) - calc.big_j(r)).abs() <= 1e-9 * calc.big_j(r));
        prop_assert!(calc.big_e(tau * 1.01) > calc.big_e(tau));
    }

    #[test]
    fn barrier_profile_nonincreasing_in_r(w in weight_strategy(), lt in 0.0f64..8.0) {
        let Some(calc) = calc_p2(w) else { return Ok(()) };
        let params = select_super(&calc).unwrap();
        let b = Barrier::new(&params, &calc);
        let t = lt.exp_m1();
        let s = b.slice(t);
        let edge = b.support_radius_at(&s);
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let v = b.eval_at(&s, 1.05 * edge * i as f64 / 200.0);
            prop_assert!(v <= prev * (1.0 + 1e-13));
            prev = v;
        }
        prop_assert_eq!(b.eval_at(&s, 1.01 * edge), 0.0);
    }

    #[test]
    fn barrier_support_expands(w in weight_strategy(), lt in 0.0f64..10.0) {
        let Some(calc) = calc_p2(w) else { return Ok(()) };
        for params in [select_super(&calc).unwrap(), select_sub(&calc, 1.0).unwrap()] {
            prop_assert!(check_params(&params, &calc).iter().all(|c| c.pass));
            let b = Barrier::new(&params, &calc);
            let t = lt.exp_m1();
            prop_assert!(b.support_radius(2.0 * t + 1.0) >= b.support_radius(t));
        }
    }

    #[test]
    fn flux_matches_finite_difference(r in 1.2f64..6.0, t in 0.0f64..50.0) {
        let calc = calc_p2(WeightSpec::power(1.0).unwrap()).unwrap();
        let params = select_super(&calc).unwrap();
        let b = Barrier::new(&params, &calc);
        prop_assume!(r < 0.9 * b.support_radius(t));
        // flux = U^{m-1}|U_r|^{p-2}U_r with m = p = 2: U·U_r
        let h = 1e-6 * r;
        let ur = (b.eval(r + h, t) - b.eval(r - h, t)) / (2.0 * h);
        let fd = b.eval(r, t) * ur;
        let exact = analytic_flux_outer(&params, &calc, r, t);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "{fd} {exact}");
        let k = 1e-6 * (t + params.t0());
        let ut = (b.eval(r, t + k) - b.eval(r, (t - k).max(0.0))) / (t + k - (t - k).max(0.0));
        let exact_t = time_derivative(&params, &calc, r, t);
        prop_assert!((ut - exact_t).abs() <= 1e-5 * exact_t.abs().max(1e-12), "{ut} {exact_t}");
    }
}

#[test]
fn c1_matching_at_r0() {
    for w in [WeightSpec::power(1.0).unwrap(), WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap()] {
        let calc = calc_p2(w).unwrap();
        for params in [select_super(&calc).unwrap(), select_sub(&calc, 1.0).unwrap()] {
            let b = Barrier::new(&params, &calc);
            let s = b.slice(1.0);
            let r0 = params.r0;
            let h = 1e-5 * r0;
            let left = (b.eval_at(&s, r0) - b.eval_at(&s, r0 - h)) / h;
            let right = (b.eval_at(&s, r0 + h) - b.eval_at(&s, r0)) / h;
            assert!((left - right).abs() <= 1e-3 * left.abs(), "{left} {right}");
        }
    }
}

#[test]
fn zygmund_primitive_against_trapezoid() {
    // G(r) = ∫_0^r g(s)/s ds; in u = ln s the integrand g(e^u) decays like
    // e^{αu}, so a fine trapezoid rule on [ln r - 60, ln r] is an oracle.
    let w = WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap();
    let calc = calc_p2(w).unwrap();
    for r in [1e-3f64, 0.5, 1.0, 7.0, 300.0] {
        let (a, b) = (r.ln() - 60.0, r.ln());
        let n = 1_000_000;
        let h = (b - a) / n as f64;
        let f = |u: f64| w.g(u.exp());
        let mut sum = 0.5 * (f(a) + f(b));
        for i in 1..n {
            sum += f(a + i as f64 * h);
        }
        let oracle = sum * h;
        let got = calc.big_g(r);
        assert!((got - oracle).abs() <= 1e-8 * oracle, "r={r}: {got} vs {oracle}");
    }
}

#[test]
fn power_primitive_is_closed_form() {
    for a in [0.3, 1.0, 1.5] {
        let calc = calc_p2(WeightSpec::power(a).unwrap()).unwrap();
        for r in [1e-4f64, 0.1, 1.0, 10.0, 1e4] {
            let exact = r.powf(a) / a;
            assert!((calc.big_g(r) - exact).abs() <= 1e-12 * exact);
            let tau = exact;
            assert!((calc.big_g_inverse(tau) - r).abs() <= 1e-10 * r);
        }
    }
}
