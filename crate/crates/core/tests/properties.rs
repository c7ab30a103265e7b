use forestmfg_core::dynamics::{
    lognormal_tpd, reflected_tpd, simulate_endpoints, simulate_path, simulate_reflected,
    DensitySpec, Scheme,
};
use forestmfg_core::equilibrium::{
    fosd_response, q_mfe_finite_horizon, q_mfe_stationary, time_grid, Bequest,
    FiniteHorizonOptions,
};
use forestmfg_core::estimation::{
    fit_beliefs, fit_gamma, fit_gbm, gamma_criterion_profile, gbm_mle_numeric, FixedParams,
    GammaOptions, GbmControl, GbmOptions, MomentSet,
};
use forestmfg_core::instrument::{
    haversine_km, linguistic_distance, normalize_exposure, z_index, ExposureInput,
    LanguageClassification,
};
use forestmfg_core::panel::Panel;
use forestmfg_core::synthetic::{beta_sample, gbm_panel, model_panel, SyntheticDesign};
use forestmfg_core::{
    adherence_grid, belief_moment, elasticities, g1, g2, BeliefPrior, G1Form, G2Form, ModelParams,
};
use proptest::prelude::*;

fn g1_form() -> impl Strategy<Value = G1Form> {
    prop_oneof![
        Just(G1Form::Unit),
        (0.0..=1.0f64, 0.2..4.0f64).prop_map(|(c, k1)| G1Form::OneMinusPowA { c, k1 }),
    ]
}

fn g2_form() -> impl Strategy<Value = G2Form> {
    prop_oneof![Just(G2Form::Zero), (0.2..4.0f64).prop_map(|k2| G2Form::PowA { k2 })]
}

fn prior() -> impl Strategy<Value = BeliefPrior> {
    (0.3..6.0f64, 0.3..6.0f64).prop_map(|(a, b)| BeliefPrior::new(a, b).unwrap())
}

/// Table 5 ecology with a random curvature and interaction shape.
fn params() -> impl Strategy<Value = ModelParams> {
    (1.2..4.0f64, g2_form()).prop_map(|(gamma, g2f)| {
        ModelParams::new(0.0482, 0.258, 0.0487, gamma, G1Form::Unit, g2f).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_forms_are_monotone(f1 in g1_form(), f2 in g2_form(), gamma in 1.1..5.0f64) {
        let p = ModelParams::new(0.02, 0.1, 0.3, gamma, f1, f2).unwrap();
        let grid = adherence_grid(101);
        for w in grid.windows(2) {
            prop_assert!(g1(w[1], &p).unwrap() <= g1(w[0], &p).unwrap());
            prop_assert!(g2(w[1], &p).unwrap() >= g2(w[0], &p).unwrap());
        }
    }

    #[test]
    fn elasticity_identities(f1 in g1_form(), f2 in g2_form(), gamma in 1.1..5.0f64, a in 0.0..=1.0f64) {
        let p = ModelParams::new(0.02, 0.1, 0.3, gamma, f1, f2).unwrap();
        let e = elasticities(a, &p).unwrap();
        prop_assert_eq!(e.nu_q, g1(a, &p).unwrap() * (1.0 - gamma));
        prop_assert_eq!(e.nu_xbar, g2(a, &p).unwrap() * (1.0 - gamma));
        prop_assert!(e.eps_q > 0.0);
    }

    /// eps_q against the curvature of u(q^g1 xbar^g2) by central differences.
    #[test]
    fn eps_matches_utility_curvature(
        f1 in g1_form(), gamma in 1.1..5.0f64, a in 0.0..=1.0f64, q in 0.5..3.0f64, xbar in 0.5..3.0f64,
    ) {
        let p = ModelParams::new(0.02, 0.1, 0.3, gamma, f1, G2Form::PowA { k2: 1.0 }).unwrap();
        let (e1, e2) = (g1(a, &p).unwrap(), g2(a, &p).unwrap());
        prop_assume!(e1 > 1e-3);
        let u = |q: f64| (q.powf(e1) * xbar.powf(e2)).powf(1.0 - gamma) / (1.0 - gamma);
        // central differences with one Richardson step
        let d1 = |h: f64| (u(q + h) - u(q - h)) / (2.0 * h);
        let d2 = |h: f64| (u(q + h) - 2.0 * u(q) + u(q - h)) / (h * h);
        let h = 1e-2 * q;
        let uq = (4.0 * d1(h / 2.0) - d1(h)) / 3.0;
        let uqq = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
        let fd = -uq / (uqq * q);
        let eps = elasticities(a, &p).unwrap().eps_q;
        prop_assert!(((fd - eps) / eps).abs() <= 1e-6, "fd {} eps {}", fd, eps);
    }

    #[test]
    fn belief_moments_match_raw_moments(pr in prior(), k in 0u32..=10) {
        let quad = belief_moment(&pr, |a| a.powi(k as i32)).unwrap();
        let analytic: f64 = (0..k).map(|j| (pr.alpha + j as f64) / (pr.alpha + pr.beta + j as f64)).product();
        prop_assert!((quad - analytic).abs() <= 1e-8, "k={} quad {} analytic {}", k, quad, analytic);
        prop_assert!((pr.mean() - pr.alpha / (pr.alpha + pr.beta)).abs() < 1e-15);
    }

    #[test]
    fn stationary_self_consistency(p in params(), pr in prior()) {
        let sol = q_mfe_stationary(&p, &pr, &adherence_grid(11)).unwrap();
        let avg = belief_moment(&pr, |a| sol.rate_at(a).unwrap()).unwrap();
        prop_assert!((avg - sol.q_tilde_star).abs() <= 1e-8);
    }

    #[test]
    fn rate_at_zero_ignores_prior(p in params(), p1 in prior(), p2 in prior()) {
        let s1 = q_mfe_stationary(&p, &p1, &[0.0]).unwrap();
        let s2 = q_mfe_stationary(&p, &p2, &[0.0]).unwrap();
        prop_assert!((s1.q_rate[0] - s2.q_rate[0]).abs() <= 1e-14);
    }

    #[test]
    fn fosd_shift_fixes_zero(p in params(), a in 0.3..3.0f64, b in 0.5..4.0f64, da in 0.0..2.0f64) {
        let lo = BeliefPrior::new(a, b).unwrap();
        let hi = BeliefPrior::new(a + da, b).unwrap();
        let r = fosd_response(&p, &lo, &hi, &adherence_grid(21)).unwrap();
        prop_assert_eq!(r.delta_q[0], 0.0);
    }

    #[test]
    fn linguistic_distance_properties(
        shared in 0usize..4, extra1 in 1usize..4, extra2 in 1usize..4, l1 in 0.05..0.5f64, dl in 0.05..0.5f64,
    ) {
        let base: Vec<String> = (0..shared).map(|i| format!("n{i}")).collect();
        let mk = |tag: &str, extra: usize| {
            let mut v = base.clone();
            v.extend((0..extra).map(|i| format!("{tag}{i}")));
            LanguageClassification::new(tag, v).unwrap()
        };
        let (x, y) = (mk("x", extra1), mk("y", extra2));
        let d = linguistic_distance(&x, &y, l1).unwrap();
        prop_assert_eq!(d, linguistic_distance(&y, &x, l1).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        if shared > 0 {
            // 0 < shared ratio < 1 here, so larger lambda gives a larger distance
            let d2 = linguistic_distance(&x, &y, l1 + dl).unwrap();
            prop_assert!(d2 > d, "lambda {} -> {}, d {} -> {}", l1, l1 + dl, d, d2);
        }
    }

    #[test]
    fn haversine_triangle(
        a in (-90.0..90.0f64, -180.0..180.0f64),
        b in (-90.0..90.0f64, -180.0..180.0f64),
        c in (-90.0..90.0f64, -180.0..180.0f64),
    ) {
        let ab = haversine_km(a.0, a.1, b.0, b.1).unwrap();
        let bc = haversine_km(b.0, b.1, c.0, c.1).unwrap();
        let ac = haversine_km(a.0, a.1, c.0, c.1).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab - haversine_km(b.0, b.1, a.0, a.1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn z_index_homogeneity(hd in 0.0..400.0f64, ld in 0.0..=1.0f64, dens in 0.01..100.0f64, rp in 0.0..=1.0f64, k in -8i32..8) {
        let c = 2f64.powi(k);
        let row = |d: f64| ExposureInput { unit_id: "u".into(), year: 2002, hd_km: hd, ld, pent_density: d, rp_c: rp };
        let z = z_index(&[row(dens), row(c * dens)]).unwrap();
        prop_assert_eq!(z[1].z, z[0].z / c);
        prop_assert_eq!(z[0].z, hd * ld / dens * rp);
    }

    #[test]
    fn exposure_normalization_preserves_order(signals in prop::collection::vec(-130.0..-20.0f64, 2..40)) {
        let rp = normalize_exposure(&signals, -90.0).unwrap();
        for i in 0..signals.len() {
            prop_assert!((0.0..=1.0).contains(&rp[i]));
            for j in 0..signals.len() {
                if signals[i] >= signals[j] {
                    prop_assert!(rp[i] <= rp[j]);
                }
            }
        }
    }

    #[test]
    fn paths_are_positive_and_reproducible(seed in any::<u64>(), rate in 0.0..0.2f64, sigma in 0.0..0.5f64) {
        let p = ModelParams::new(0.05, sigma, 0.5, 2.0, G1Form::Unit, G2Form::Zero).unwrap();
        let a = simulate_path(10.0, rate, &p, 20.0, 0.25, seed).unwrap();
        prop_assert_eq!(&a, &simulate_path(10.0, rate, &p, 20.0, 0.25, seed).unwrap());
        prop_assert_eq!(a.times.len(), a.values.len());
        prop_assert!(a.values.iter().all(|&v| v > 0.0));
        let r = simulate_reflected(10.0, rate, &p, 12.0, 20.0, 0.25, seed).unwrap();
        prop_assert!(r.values.iter().all(|&v| v > 0.0 && v <= 12.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn finite_horizon_contracts_and_approaches_stationary(p in params(), pr in prior()) {
        let adh = adherence_grid(11);
        let stat = q_mfe_stationary(&p, &pr, &adh).unwrap();
        prop_assume!(stat.q_rate.iter().all(|&q| q > 0.01));
        let mut last = f64::INFINITY;
        for t in [10.0, 25.0, 50.0, 100.0] {
            let sol = q_mfe_finite_horizon(&p, &pr, t, &time_grid(t, 101), &adh, &Bequest::default(), &FiniteHorizonOptions::default()).unwrap();
            let hist = &sol.residual_history;
            for w in hist.windows(2).skip(3) {
                if w[0] > 1e-13 {
                    prop_assert!(w[1] < w[0], "residuals {:?}", hist);
                }
            }
            let gap = sol.rate_path.iter().zip(&stat.q_rate).map(|(row, q)| (row[0] - q).abs()).fold(0.0, f64::max);
            prop_assert!(gap < last, "T={} gap {} previous {}", t, gap, last);
            last = gap;
        }
    }

    #[test]
    fn reflection_vanishes_for_distant_caps(mu_star in -0.05..0.05f64, sigma in 0.1..0.4f64, t in 1.0..10.0f64, z in -1.5..1.5f64) {
        let x0 = 10.0;
        let x = x0 * (mu_star * t + z * sigma * t.sqrt()).exp();
        let free = lognormal_tpd(x, t, &DensitySpec::new(mu_star, sigma, x0, None).unwrap()).unwrap();
        let spread = (4.0 * sigma * t.sqrt() + mu_star.abs() * t).exp();
        let mut prev = f64::INFINITY;
        for decade in 0..3 {
            let cap = x0 * spread * 10f64.powi(decade);
            let rf = reflected_tpd(x, t, &DensitySpec::new(mu_star, sigma, x0, Some(cap)).unwrap()).unwrap();
            let gap = (rf - free).abs();
            prop_assert!(gap <= prev, "cap {} gap {} prev {}", cap, gap, prev);
            prev = gap;
        }
        let far = reflected_tpd(x, t, &DensitySpec::new(mu_star, sigma, x0, Some(x0 * 1e12)).unwrap()).unwrap();
        prop_assert!((far - free).abs() <= 1e-10 * free.max(1.0));
    }

    #[test]
    fn gbm_closed_form_matches_numeric(seed in any::<u64>(), mu in -0.05..0.1f64, sigma in 0.05..0.4f64) {
        let design = SyntheticDesign { n_units: 40, ..Default::default() };
        let panel = gbm_panel(mu, sigma, &design, seed).unwrap();
        let closed = fit_gbm(&panel, GbmControl::None, &GbmOptions { n_boot: 50, seed }).unwrap();
        let (m, s) = gbm_mle_numeric(&panel).unwrap();
        prop_assert!((closed.estimates["mu"] - m).abs() <= 1e-8);
        prop_assert!((closed.estimates["sigma"] - s).abs() <= 1e-8);
    }

    #[test]
    fn estimators_ignore_unit_order(seed in any::<u64>()) {
        let design = SyntheticDesign { n_units: 60, ..Default::default() };
        let panel = gbm_panel(0.0482, 0.258, &design, seed).unwrap();
        let mut shuffled = panel.records.clone();
        shuffled.reverse();
        let shuffled = Panel::new(shuffled).unwrap();
        let opts = GbmOptions { n_boot: 200, seed };
        let a = fit_gbm(&panel, GbmControl::None, &opts).unwrap();
        let b = fit_gbm(&shuffled, GbmControl::None, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &fit_gbm(&panel, GbmControl::None, &opts).unwrap());
    }

    #[test]
    fn emitted_json_round_trips(p in params(), pr in prior(), seed in any::<u64>()) {
        let sol = q_mfe_stationary(&p, &pr, &adherence_grid(21)).unwrap();
        let text = serde_json::to_string(&sol).unwrap();
        prop_assert_eq!(&serde_json::from_str::<forestmfg_core::equilibrium::EquilibriumSolution>(&text).unwrap(), &sol);
        let xs = beta_sample(&pr, 200, seed).unwrap();
        let r = fit_beliefs(&xs).unwrap();
        let back: forestmfg_core::estimation::EstimationResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn beta_mle_improves_on_start(seed in any::<u64>(), pr in prior()) {
        let xs = beta_sample(&pr, 300, seed).unwrap();
        let r = fit_beliefs(&xs).unwrap();
        prop_assert!(r.diagnostics["log_likelihood"] >= r.diagnostics["log_likelihood_start"]);
        prop_assert!(r.std_errors.values().all(|&s| s >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gmm_estimate_is_a_local_minimum(seed in any::<u64>()) {
        let p = ModelParams::table5();
        let pr = BeliefPrior::table5();
        let design = SyntheticDesign { n_units: 200, ..Default::default() };
        let panel = model_panel(&p, &pr, &design, seed).unwrap();
        let fixed = FixedParams::from(&p);
        let r = fit_gamma(&panel, fixed, &pr, 1.0, MomentSet::MeanOnly, &GammaOptions::default());
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let g = r.estimates["gamma"];
        let w = r.diagnostics["weight_00"];
        let prof = gamma_criterion_profile(&panel, fixed, &pr, 1.0, MomentSet::MeanOnly, &[g - 0.01, g, g + 0.01], Some(&[w]));
        prop_assert!(prof[1].1 <= prof[0].1 && prof[1].1 <= prof[2].1, "{:?}", prof);
    }

    #[test]
    fn effective_drift_sets_median_direction(seed in any::<u64>(), offset in 0.01..0.05f64) {
        let p = ModelParams::new(0.05, 0.2, 0.5, 2.0, G1Form::Unit, G2Form::Zero).unwrap();
        let s = p.threshold();
        let median = |rate: f64, h: f64| {
            let mut v = simulate_endpoints(10.0, &vec![rate; 10_000], &p, None, h, 0.5, seed, Scheme::ExactLogNormal).unwrap();
            v.sort_by(f64::total_cmp);
            v[5000]
        };
        prop_assert!(median(s + offset, 40.0) < median(s + offset, 10.0));
        prop_assert!(median((s - offset).max(0.0), 40.0) > median((s - offset).max(0.0), 10.0));
    }
}
