use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wnv_core::{
    equilibria, find_order1, iterate_map, nullcline_markers, poincare_map, simulate, ControlPolicy,
    CycleOrder, OrbitOptions, Parameters, SimConfig, State,
};

fn params(mu_m: f64, delta_m: f64) -> Parameters {
    Parameters {
        mu_m,
        k_m: 1000.0,
        delta_m,
        mu_b: 0.01,
        c: 0.09,
        beta_bm: 0.8,
        n_b: 400.0,
    }
}

/// Scenario settings with a known order-1 orbit, covering both regimes.
fn known_scenarios() -> Vec<(Parameters, ControlPolicy)> {
    vec![
        (
            params(0.357, 0.035),
            ControlPolicy::new(0.15, 0.45, 250.0).unwrap(),
        ),
        (
            params(0.537, 0.035),
            ControlPolicy::new(0.25, 0.6, 250.0).unwrap(),
        ),
        (
            params(0.06, 0.04),
            ControlPolicy::new(0.8, 0.3, 250.0).unwrap(),
        ),
        (
            params(0.06, 0.05),
            ControlPolicy::new(0.8, 0.25, 250.0).unwrap(),
        ),
    ]
}

#[test]
fn replayed_orbits_close() {
    let opts = OrbitOptions::default();
    for (params, policy) in known_scenarios() {
        let (orbit, _) = find_order1(&params, &policy, &opts).unwrap();
        let anchor = orbit.anchors[0];
        for k in 1..=3 {
            let cfg = SimConfig {
                t_max: 2.0 * k as f64 * orbit.period,
                max_impulses: k,
                ..SimConfig::default()
            };
            let traj = simulate(
                State::new(anchor, policy.phase_level()),
                &params,
                Some(&policy),
                &cfg,
            )
            .unwrap();
            assert_eq!(traj.events.len(), k);
            let last = traj.events[k - 1];
            assert!(
                (last.post.m - anchor).abs() <= 1e-6 * params.k_m,
                "k = {k}: {} vs {anchor}",
                last.post.m
            );
            assert!((last.t - k as f64 * orbit.period).abs() <= 1e-6 * orbit.period);
        }
    }
}

#[test]
fn stability_identities_hold_on_known_orbits() {
    let opts = OrbitOptions::default();
    for (params, policy) in known_scenarios() {
        let (orbit, report) = find_order1(&params, &policy, &opts).unwrap();
        assert!(report.identity_residual <= 1e-6, "{report:?}");
        assert!(
            (report.mu_analytic - report.mu_numeric).abs()
                <= 1e-3 * report.mu_numeric.abs().max(1.0)
        );
        assert!(report.stable);
        let m_star = equilibria(&params).endemic.unwrap().m;
        assert!(orbit.anchors[0] > 0.0 && orbit.anchors[0] < m_star);
    }
}

#[test]
fn case_b_iterates_converge_from_any_seed() {
    let opts = OrbitOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (params, policy) in known_scenarios() {
        let regime = nullcline_markers(&params, &policy).unwrap();
        if !regime.case_b {
            continue;
        }
        let (orbit, _) = find_order1(&params, &policy, &opts).unwrap();
        for _ in 0..20 {
            let x0 = rng.gen_range(1e-6..1.5) * regime.m_star;
            let it = iterate_map(x0, &params, &policy, 200, 10, &opts).unwrap();
            assert_eq!(it.order, CycleOrder::Order1, "seed {x0}");
            assert!((it.anchor().unwrap() - orbit.anchors[0]).abs() <= 1e-6 * params.k_m);
        }
    }
}

prop_compose! {
    fn reachable_policy()(mu_m in 0.15..0.6f64, p in 0.05..0.6f64, q in 0.1..0.8f64, h_b in 120.0..330.0f64)
        -> (Parameters, ControlPolicy)
    {
        (params(mu_m, 0.035), ControlPolicy::new(p, q, h_b).unwrap())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn return_map_is_continuous((params, policy) in reachable_policy(), frac in 0.01..1.0f64) {
        let regime = nullcline_markers(&params, &policy).unwrap();
        prop_assume!(regime.threshold_reachable);
        let opts = OrbitOptions::default();
        let x = frac * regime.m_star;
        let a = poincare_map(x, &params, &policy, &opts).unwrap();
        let b = poincare_map(x * (1.0 + 1e-9), &params, &policy, &opts).unwrap();
        let (ya, yb) = (a.x_out.unwrap(), b.x_out.unwrap());
        prop_assert!((ya - yb).abs() <= 1e-6 * params.k_m, "{ya} vs {yb}");
        prop_assert_eq!(ya, (1.0 - policy.p) * a.m_at_guard.unwrap());
    }

    #[test]
    fn random_orbits_satisfy_the_identity((params, policy) in reachable_policy()) {
        let regime = nullcline_markers(&params, &policy).unwrap();
        prop_assume!(regime.threshold_reachable);
        let (orbit, report) = find_order1(&params, &policy, &OrbitOptions::default()).unwrap();
        prop_assert!(orbit.closure_gap(&policy) <= 1e-9 * params.k_m);
        prop_assert!(report.identity_residual <= 1e-6, "{:?}", report);
        prop_assert!((report.mu_analytic - report.mu_numeric).abs() <= 1e-3 * report.mu_numeric.abs().max(1.0));
    }

    #[test]
    fn case_b_seeds_reach_the_order1_anchor((params, policy) in reachable_policy(), frac in 0.001..1.0f64) {
        let regime = nullcline_markers(&params, &policy).unwrap();
        prop_assume!(regime.threshold_reachable && regime.case_b);
        let opts = OrbitOptions::default();
        let (orbit, _) = find_order1(&params, &policy, &opts).unwrap();
        let it = iterate_map(frac * regime.m_star, &params, &policy, 300, 5, &opts).unwrap();
        prop_assert_eq!(it.order, CycleOrder::Order1);
        prop_assert!((it.anchor().unwrap() - orbit.anchors[0]).abs() <= 1e-6 * params.k_m);
    }
}

#[test]
fn low_growth_tail_is_periodic() {
    let (params, policy) = known_scenarios()[2];
    let opts = OrbitOptions::default();
    let x0 = wnv_core::experiment::scan::seed_from_state(
        State::new(29.0, 175.0),
        &params,
        &policy,
        &opts.sim,
    );
    let it = iterate_map(x0, &params, &policy, 200, 50, &opts).unwrap();
    assert_ne!(it.order, CycleOrder::Undetermined);
    let m_star = equilibria(&params).endemic.unwrap().m;
    let reached_far_seed =
        iterate_map(0.05 * params.k_m, &params, &policy, 200, 50, &opts).unwrap();
    assert!((reached_far_seed.anchor().unwrap() - it.anchor().unwrap()).abs() <= 1e-6 * params.k_m);
    assert!(it.anchor().unwrap() < m_star);
}
