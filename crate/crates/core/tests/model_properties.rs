use approx::assert_relative_eq;
use proptest::prelude::*;

use venuelab::model::{self, DemandParams, ModelParamsClassic, ModelParamsGmm};

fn delta_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![0.3..0.95f64, 1.05..5.0f64]
}

prop_compose! {
    fn classic()(
        gamma in 0.5..2.0f64,
        rho_s in 0.2..3.0f64,
        rho_u in 0.2..3.0f64,
        delta in delta_strategy(),
        a_s in 0.5..3.0f64,
        a_u in 0.5..3.0f64,
    ) -> ModelParamsClassic {
        ModelParamsClassic {
            gamma_disutility: gamma,
            rho_s,
            rho_u,
            delta,
            a_s,
            a_u,
            sigma_curv: 2.0,
            beta_disc: 0.96,
        }
    }
}

prop_compose! {
    fn gmm_params()(
        zeta in prop_oneof![-1.5..-0.05f64, 0.05..0.8f64],
        share_lambda in 0.1..0.9f64,
        a_rel in 0.5..3.0f64,
        alpha in 0.5..1.8f64,
        rho_s in 0.2..3.0f64,
        rho_u in 0.2..3.0f64,
    ) -> ModelParamsGmm {
        ModelParamsGmm { zeta, share_lambda, a_rel, alpha, rho_s, rho_u, sigma_curv: 2.0, beta_disc: 0.96 }
    }
}

fn employment(l: f64, p: &ModelParamsClassic) -> (f64, f64) {
    let eq = model::equilibrium_classic(l, p).unwrap();
    (eq.n_s, eq.n_u)
}

proptest! {
    #[test]
    fn labor_supply_clears_market(p in classic(), l in 0.01..500.0f64) {
        let eq = model::equilibrium_classic(l, &p).unwrap();
        let s = model::labor_supply(eq.w_s, p.rho_s, p.gamma_disutility).unwrap();
        let u = model::labor_supply(eq.w_u, p.rho_u, p.gamma_disutility).unwrap();
        prop_assert!((s / eq.n_s - 1.0).abs() < 1e-10);
        prop_assert!((u / eq.n_u - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classic_wages_are_marginal_products(p in classic(), s in 0.2..5.0f64, u in 0.2..5.0f64) {
        let h = 1e-5;
        let w = model::wages_classic(s, u, &p).unwrap();
        let f = |a: f64, b: f64| model::ces_output_classic(a, b, &p).unwrap();
        let ds = (f(s + h, u) - f(s - h, u)) / (2.0 * h);
        let du = (f(s, u + h) - f(s, u - h)) / (2.0 * h);
        prop_assert!((w.w_s / ds - 1.0).abs() < 1e-5);
        prop_assert!((w.w_u / du - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gmm_wages_are_marginal_products(p in gmm_params(), s in 0.2..5.0f64, u in 0.2..5.0f64, theta in 0.5..60.0f64) {
        let h = 1e-5;
        let w = model::wages_gmm(s, u, theta, &p).unwrap();
        let f = |a: f64, b: f64| model::ces_output_gmm(a, b, theta, &p).unwrap();
        let ds = (f(s + h, u) - f(s - h, u)) / (2.0 * h);
        let du = (f(s, u + h) - f(s, u - h)) / (2.0 * h);
        prop_assert!((w.w_s / ds - 1.0).abs() < 1e-5);
        prop_assert!((w.w_u / du - 1.0).abs() < 1e-5);
    }

    #[test]
    fn output_homogeneity(p in classic(), g in gmm_params(), s in 0.2..5.0f64, u in 0.2..5.0f64, theta in 0.5..60.0f64) {
        for t in [2.0f64, 3.0] {
            let y = model::ces_output_classic(s, u, &p).unwrap();
            prop_assert!((model::ces_output_classic(t * s, t * u, &p).unwrap() / (t * y) - 1.0).abs() < 1e-10);
            let y = model::ces_output_gmm(s, u, theta, &g).unwrap();
            let scaled = model::ces_output_gmm(t * s, t * u, theta, &g).unwrap();
            prop_assert!((scaled / (t.powf(g.alpha) * y) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn premium_is_wage_ratio(p in classic(), s in 0.2..5.0f64, u in 0.2..5.0f64) {
        let w = model::wages_classic(s, u, &p).unwrap();
        let premium = model::skill_premium(s, u, &p).unwrap();
        prop_assert!((premium / (w.w_s / w.w_u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_wage_is_hours_weighted_mean(p in classic(), s in 0.2..5.0f64, u in 0.2..5.0f64) {
        let w = model::wages_classic(s, u, &p).unwrap();
        let direct = (w.w_s * s + w.w_u * u) / (s + u);
        prop_assert!((model::average_wage(s, u, &p).unwrap() / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn elasticity_round_trip(e in prop_oneof![0.2..0.99f64, 1.01..10.0f64], mu in 0.05..0.95f64, prem in 0.5..4.0f64) {
        let c = model::calibrate_gmm(mu, prem, e).unwrap();
        prop_assert!((model::elasticity_from_zeta(c.zeta) - e).abs() < 1e-12);
    }

    #[test]
    fn composition_tilts_towards_unskilled(
        rho_u in 0.1..2.0f64,
        gap in 0.05..2.0f64,
        delta in 1.05..5.0f64,
        l0 in 0.1..10.0f64,
        step in 1.01..3.0f64,
    ) {
        let p = ModelParamsClassic {
            gamma_disutility: 1.0,
            rho_s: rho_u + gap,
            rho_u,
            delta,
            a_s: 2.0,
            a_u: 1.0,
            sigma_curv: 2.0,
            beta_disc: 0.96,
        };
        let grid: Vec<f64> = (0..10).map(|i| l0 * step.powi(i)).collect();
        let ratios: Vec<f64> = grid.iter().map(|&l| model::composition_ratio(l, &p).unwrap()).collect();
        prop_assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn employment_rises_with_bankruptcies(
        p in classic(),
        br in 0.0..20.0f64,
        share in 0.0..0.9f64,
        extra in 0.01..0.09f64,
    ) {
        let d = DemandParams::default();
        let h = 1e-4;
        // Derivative in BR with a fixed forum-shopped share of cases.
        let slope = |f: f64| {
            let lo = model::total_demand(&d, br, f * br).unwrap();
            let hi = model::total_demand(&d, br + h, f * (br + h)).unwrap();
            let (s0, u0) = employment(lo, &p);
            let (s1, u1) = employment(hi, &p);
            ((s1 - s0) / h, (u1 - u0) / h)
        };
        let (ds, du) = slope(share);
        prop_assert!(ds >= 0.0 && du >= 0.0);
        let (ds_more, du_more) = slope(share + extra);
        prop_assert!(ds_more <= ds + 1e-9 && du_more <= du + 1e-9);
    }
}

#[test]
fn baseline_carries_estimation_targets() {
    let p = ModelParamsGmm::baseline();
    assert_relative_eq!(1.0 / p.rho_s, 0.0853, epsilon = 1e-12);
    assert_relative_eq!(1.0 / p.rho_u, 0.264, epsilon = 1e-12);
    assert_relative_eq!(p.alpha, 1.293, epsilon = 1e-12);
}
