use contestlab::contest::*;
use contestlab::Contestant;
use proptest::prelude::*;

fn any_spec() -> impl Strategy<Value = ContestModelSpec> {
    (0usize..4, 1.0f64..5.0, 0.2f64..3.0, 0.2f64..3.0, 0.0f64..1.5).prop_map(|(v, theta, r_l, r_h, alpha)| {
        match Variant::ALL[v] {
            Variant::Baseline => ContestModelSpec::baseline(theta, r_l, r_h),
            Variant::RewardScaled => ContestModelSpec::reward_scaled(theta, r_l, r_h),
            Variant::RewardThetaDependent => ContestModelSpec::reward_theta_dependent(theta, alpha, r_h),
            Variant::Choking => ContestModelSpec::choking(theta, alpha, r_l, r_h),
        }
        .unwrap()
    })
}

/// Payoff derivative by central differences.
fn marginal(spec: &ContestModelSpec, who: Contestant, own: f64, other: f64) -> f64 {
    let h = 1e-6 * own.max(1e-3);
    (payoff(spec, who, own + h, other).unwrap() - payoff(spec, who, own - h, other).unwrap()) / (2.0 * h)
}

proptest! {
    #[test]
    fn closed_form_is_a_stationary_point(spec in any_spec()) {
        let eq = equilibrium(&spec).unwrap();
        let (r_l, r_h) = foc_residuals(&spec, eq.effort_l, eq.effort_h).unwrap();
        prop_assert!(r_l.abs() <= 1e-10 && r_h.abs() <= 1e-10);
        // Independent of the residual helper: numerical payoff slopes vanish.
        prop_assert!(marginal(&spec, Contestant::Low, eq.effort_l, eq.effort_h).abs() < 1e-5);
        prop_assert!(marginal(&spec, Contestant::High, eq.effort_h, eq.effort_l).abs() < 1e-5);
        prop_assert!((eq.win_prob_h + eq.win_prob_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_profitable_deviation_on_a_coarse_grid(spec in any_spec(), k in 0usize..50) {
        let eq = equilibrium(&spec).unwrap();
        let dev = 2.0 * spec.max_reward() * k as f64 / 49.0;
        let base_l = payoff(&spec, Contestant::Low, eq.effort_l, eq.effort_h).unwrap();
        let base_h = payoff(&spec, Contestant::High, eq.effort_h, eq.effort_l).unwrap();
        prop_assert!(payoff(&spec, Contestant::Low, dev, eq.effort_h).unwrap() <= base_l + 1e-12);
        prop_assert!(payoff(&spec, Contestant::High, dev, eq.effort_l).unwrap() <= base_h + 1e-12);
    }

    #[test]
    fn equal_rewards_give_equal_baseline_efforts(theta in 1.0f64..10.0, r in 0.1f64..5.0) {
        let eq = equilibrium(&ContestModelSpec::baseline(theta, r, r).unwrap()).unwrap();
        prop_assert!((eq.effort_l - eq.effort_h).abs() <= 1e-12 * r);
    }

    #[test]
    fn with_theta_keeps_the_theta_dependent_reward_rule(theta in 1.0f64..4.0, alpha in 0.0f64..1.0) {
        let s = ContestModelSpec::reward_theta_dependent(1.0, alpha, 1.5).unwrap().with_theta(theta).unwrap();
        prop_assert!((s.reward_l - theta.powf(alpha) * 1.5).abs() < 1e-12);
    }
}

#[test]
fn printed_choking_expression_matches() {
    // The equilibrium as printed, with the denominator's reward read as R_l.
    for &(theta, alpha, r_l, r_h) in &[(1.3, 0.2, 1.0, 1.0), (2.5, 0.7, 0.6, 1.4), (1.0, 0.0, 2.0, 1.0)] {
        let eq = equilibrium(&ContestModelSpec::choking(theta, alpha, r_l, r_h).unwrap()).unwrap();
        let t1: f64 = theta.powf(alpha + 1.0);
        let d = (r_l + t1 * r_h).powi(2);
        approx::assert_relative_eq!(eq.effort_l, t1 * r_h * r_l * r_l / d, max_relative = 1e-12);
        approx::assert_relative_eq!(eq.effort_h, theta.powf(2.0 * alpha + 1.0) * r_l * r_h * r_h / d, max_relative = 1e-12);
    }
}

#[test]
fn oracle_agrees_with_closed_form_on_each_variant() {
    let specs = [
        ContestModelSpec::baseline(2.0, 1.0, 1.0).unwrap(),
        ContestModelSpec::reward_scaled(1.5, 2.0, 1.0).unwrap(),
        ContestModelSpec::reward_theta_dependent(1.2, 0.2, 1.0).unwrap(),
        ContestModelSpec::choking(3.9, 0.75, 0.76, 1.8).unwrap(),
    ];
    for spec in specs {
        let grid = EffortGrid::uniform(0.0, 2.0 * spec.max_reward(), 4001).unwrap();
        let o = nash_oracle(&spec, &grid, NashOptions::default()).unwrap();
        let eq = equilibrium(&spec).unwrap();
        assert!((o.effort_l - eq.effort_l).abs() <= grid.step(), "{spec:?}");
        assert!((o.effort_h - eq.effort_h).abs() <= grid.step(), "{spec:?}");
    }
}

#[test]
fn theta_below_one_is_rejected() {
    assert!(matches!(ContestModelSpec::baseline(0.9, 1.0, 1.0), Err(contestlab::Error::Domain(_))));
    let t = ContestModelSpec::baseline(1.0, 1.0, 1.0).unwrap();
    assert!(effort_curve_on(&t, 0.5, 2.0, 10).is_err());
}
