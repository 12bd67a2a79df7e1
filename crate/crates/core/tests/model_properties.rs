use proptest::prelude::*;
use wnv_core::{
    classify_region, dulac_divergence, equilibria, jacobian_eigenvalues, nullcline_markers,
    vector_field, ControlPolicy, Parameters, Region, State,
};

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

prop_compose! {
    /// Draws within the documented empirical ranges; `N_b` has none, so a wide band is used.
    fn table_params()(
        mu_m in log_range(0.036, 42.5),
        k_m in log_range(1e5, 1e6),
        delta_m in 0.016..0.07f64,
        mu_b in log_range(1e-4, 1e-3),
        c in 0.09..0.16f64,
        beta_bm in 0.80..0.96f64,
        n_b in log_range(1e2, 1e4),
    ) -> Parameters {
        Parameters { mu_m, k_m, delta_m, mu_b, c, beta_bm, n_b }
    }
}

prop_compose! {
    fn endemic_params()(params in table_params().prop_filter("needs mu_m > delta_m", |p| p.mu_m > p.delta_m)) -> Parameters {
        params
    }
}

prop_compose! {
    fn params_and_policy()(params in endemic_params(), p in 0.01..0.99f64, q in 0.01..0.99f64, frac in 0.01..0.99f64)
        -> (Parameters, ControlPolicy)
    {
        let policy = ControlPolicy::new(p, q, frac * params.n_b).unwrap();
        (params, policy)
    }
}

proptest! {
    #[test]
    fn divergence_is_negative(params in table_params()) {
        prop_assert!(dulac_divergence(&params) < 0.0);
    }

    #[test]
    fn equilibria_are_stationary(params in table_params()) {
        let eq = equilibria(&params);
        let origin = vector_field(eq.disease_free, &params);
        prop_assert_eq!((origin.dm_dt, origin.dib_dt), (0.0, 0.0));
        prop_assert_eq!(eq.endemic.is_some(), params.mu_m > params.delta_m);
        if let Some(e) = eq.endemic {
            let rates = vector_field(e, &params);
            let scale = params.mu_m * params.k_m;
            prop_assert!(rates.dm_dt.abs() <= 1e-9 * scale);
            prop_assert!(rates.dib_dt.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn saddle_at_origin_node_at_endemic(params in endemic_params()) {
        let eq = equilibria(&params);
        let (a, b) = jacobian_eigenvalues(&params, eq.disease_free);
        prop_assert!(a.max(b) > 0.0 && a.min(b) < 0.0);
        let (a, b) = jacobian_eigenvalues(&params, eq.endemic.unwrap());
        prop_assert!(a < 0.0 && b < 0.0);
    }

    #[test]
    fn region_matches_fresh_field_signs(params in table_params(), mf in 0.0..1.5f64, bf in 0.0..1.0f64) {
        let s = State::new(mf * params.k_m, bf * params.n_b);
        let rates = vector_field(s, &params);
        let expected = match (rates.dm_dt > 0.0, rates.dib_dt > 0.0) {
            (true, false) => Region::Omega1,
            (true, true) => Region::Omega2,
            (false, true) => Region::Omega3,
            (false, false) => Region::Omega4,
        };
        let region = classify_region(s, &params);
        prop_assert!(region == expected || region == Region::Boundary);
        if region == Region::Boundary {
            let m_tol = 1e-12 * params.mu_m * params.k_m;
            let ib_tol = 1e-12 * params.infection_rate() * params.k_m;
            prop_assert!(rates.dm_dt.abs() <= m_tol || rates.dib_dt.abs() <= ib_tol);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn marker_ordering_and_reachability((params, policy) in params_and_policy()) {
        let r = nullcline_markers(&params, &policy).unwrap();
        prop_assert!(0.0 < r.n_mq && r.n_mq < r.n_mh);
        prop_assert_eq!(r.n_mh < r.m_star, policy.h_b < r.i_b_star);
        prop_assert_eq!(r.threshold_reachable, policy.h_b < r.i_b_star);
        prop_assert_eq!(r.case_a, (1.0 - policy.p) * r.m_star < r.n_mq);
        prop_assert_eq!(r.case_b, (1.0 - policy.p) * r.n_mh > r.n_mq);
    }
}
