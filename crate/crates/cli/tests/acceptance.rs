//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p venuelab-cli --test acceptance -- --nocapture` to
//! see the report.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use venuelab::fe::{self, RegressionSpec};
use venuelab::gmm::{self, GmmCalibration, GmmData, GmmSpec};
use venuelab::model::{self, DemandParams, ModelParamsClassic, ModelParamsGmm};
use venuelab::panel::{self, CountyYearPanel, DgpKind, PanelRow, SynthConfig};
use venuelab::stats;
use venuelab::welfare::{self, EvWeighting, HouseholdPath, PathAnchors};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

// ---------------------------------------------------------------- 1

fn calibration() -> Outcome {
    let c = model::calibrate_gmm(0.42, 2.40, 1.4).map_err(|e| e.to_string())?;
    check(
        (c.zeta - 0.2857).abs() <= 0.005 && (c.pi_share - 0.63).abs() <= 0.01,
        format!("zeta = {:.4}, pi = {:.4}", c.zeta, c.pi_share),
    )
}

// ---------------------------------------------------------------- 2

fn delta_formula() -> Outcome {
    let a = fe::delta_from_betas(0.0413, 0.0384).map_err(|e| e.to_string())?;
    let b = fe::delta_from_betas(0.0121, 0.0295).map_err(|e| e.to_string())?;
    check(
        (a - 24.983).abs() <= 0.05 && (b - 33.445).abs() <= 0.05,
        format!("delta = {a:.3} and {b:.3}"),
    )
}

// ---------------------------------------------------------------- 3

fn chi_square_anchor() -> Outcome {
    let p = stats::chi2_sf(12.592, 11.0).map_err(|e| e.to_string())?;
    let oracle = 1.0 - ChiSquared::new(11.0).unwrap().cdf(12.592);
    check(
        (p - 0.321).abs() <= 0.005 && (p - oracle).abs() < 1e-10,
        format!("p = {p:.6} (reference {oracle:.6})"),
    )
}

// ---------------------------------------------------------------- 4

fn classic_draw(rng: &mut ChaCha8Rng) -> ModelParamsClassic {
    let delta = loop {
        let d = uniform(rng, 0.3, 5.0);
        if (d - 1.0).abs() > 0.05 {
            break d;
        }
    };
    ModelParamsClassic {
        gamma_disutility: uniform(rng, 0.5, 2.0),
        rho_s: uniform(rng, 0.2, 3.0),
        rho_u: uniform(rng, 0.2, 3.0),
        delta,
        a_s: uniform(rng, 0.5, 3.0),
        a_u: uniform(rng, 0.5, 3.0),
        sigma_curv: 2.0,
        beta_disc: 0.96,
    }
}

fn gmm_draw(rng: &mut ChaCha8Rng) -> ModelParamsGmm {
    let zeta = loop {
        let z = uniform(rng, -1.5, 0.8);
        if z.abs() > 0.05 {
            break z;
        }
    };
    ModelParamsGmm {
        zeta,
        share_lambda: uniform(rng, 0.1, 0.9),
        a_rel: uniform(rng, 0.5, 3.0),
        alpha: uniform(rng, 0.5, 1.8),
        rho_s: uniform(rng, 0.2, 3.0),
        rho_u: uniform(rng, 0.2, 3.0),
        sigma_curv: 2.0,
        beta_disc: 0.96,
    }
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn equilibrium_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut clearing, mut mp, mut homog) = (0.0f64, 0.0f64, 0.0f64);
    let h = 1e-5;
    for _ in 0..1000 {
        let p = classic_draw(&mut rng);
        let l = uniform(&mut rng, 0.1, 100.0);
        let eq = model::equilibrium_classic(l, &p).map_err(|e| e.to_string())?;
        for (w, n, rho, a) in [
            (eq.w_s, eq.n_s, p.rho_s, p.a_s),
            (eq.w_u, eq.n_u, p.rho_u, p.a_u),
        ] {
            let supplied =
                model::labor_supply(w, rho, p.gamma_disutility).map_err(|e| e.to_string())?;
            clearing = clearing.max(rel(supplied, n));
            // Inverse labor demand at the given legal demand level.
            let demand_wage = a.powf(p.ces_exponent()) * (l / n).powf(1.0 / p.delta);
            clearing = clearing.max(rel(w, demand_wage));
        }

        let (s, u) = (uniform(&mut rng, 0.2, 5.0), uniform(&mut rng, 0.2, 5.0));
        let w = model::wages_classic(s, u, &p).map_err(|e| e.to_string())?;
        let ys = central_diff(|x| model::ces_output_classic(x, u, &p).unwrap(), s, h);
        let yu = central_diff(|x| model::ces_output_classic(s, x, &p).unwrap(), u, h);
        mp = mp.max(rel(w.w_s, ys)).max(rel(w.w_u, yu));

        let g = gmm_draw(&mut rng);
        let theta = uniform(&mut rng, 0.5, 60.0);
        let w = model::wages_gmm(s, u, theta, &g).map_err(|e| e.to_string())?;
        let ys = central_diff(|x| model::ces_output_gmm(x, u, theta, &g).unwrap(), s, h);
        let yu = central_diff(|x| model::ces_output_gmm(s, x, theta, &g).unwrap(), u, h);
        mp = mp.max(rel(w.w_s, ys)).max(rel(w.w_u, yu));

        let y_c = model::ces_output_classic(s, u, &p).unwrap();
        let y_g = model::ces_output_gmm(s, u, theta, &g).unwrap();
        for t in [2.0, 3.0] {
            homog = homog.max(rel(
                model::ces_output_classic(t * s, t * u, &p).unwrap(),
                t * y_c,
            ));
            homog = homog.max(rel(
                model::ces_output_gmm(t * s, t * u, theta, &g).unwrap(),
                t.powf(g.alpha) * y_g,
            ));
        }
    }
    check(
        clearing < 1e-10 && mp < 1e-5 && homog < 1e-10,
        format!("max rel. errors: clearing {clearing:.1e}, marginal products {mp:.1e}, homogeneity {homog:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn wage_propositions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid: Vec<f64> = (0..40).map(|i| 0.1 * 1.2f64.powi(i)).collect();
    let mut accepted = 0;
    let mut failures = Vec::new();
    while accepted < 200 {
        let rho_u = uniform(&mut rng, 0.1, 2.0);
        let p = ModelParamsClassic {
            gamma_disutility: uniform(&mut rng, 0.5, 2.0),
            rho_s: rho_u + uniform(&mut rng, 0.1, 2.0),
            rho_u,
            delta: uniform(&mut rng, 1.05, 5.0),
            a_s: uniform(&mut rng, 1.0, 4.0),
            a_u: uniform(&mut rng, 0.5, 1.0),
            sigma_curv: 2.0,
            beta_disc: 0.96,
        };
        let eqs: Vec<_> = grid
            .iter()
            .map(|&l| model::equilibrium_classic(l, &p).unwrap())
            .collect();
        let premium_above_one = eqs
            .iter()
            .all(|e| model::skill_premium(e.n_s, e.n_u, &p).unwrap() > 1.0);
        if !premium_above_one {
            continue;
        }
        accepted += 1;
        let ratio: Vec<f64> = grid
            .iter()
            .map(|&l| model::composition_ratio(l, &p).unwrap())
            .collect();
        let avg: Vec<f64> = eqs
            .iter()
            .map(|e| model::average_wage(e.n_s, e.n_u, &p).unwrap())
            .collect();
        let series =
            |f: fn(&model::EquilibriumState) -> f64| eqs.iter().map(f).collect::<Vec<f64>>();
        let ok = strictly(&ratio, false)
            && strictly(&avg, false)
            && strictly(&series(|e| e.n_s), true)
            && strictly(&series(|e| e.n_u), true)
            && strictly(&series(|e| e.w_s), true)
            && strictly(&series(|e| e.w_u), true);
        if !ok {
            failures.push(format!("{p:?}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} of 200 draws monotone along a 40-point demand grid",
            200 - failures.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

/// Dummy-variable OLS with a pseudo-inverse: coefficients and the clustered
/// sandwich for the leading `k` regressors.
fn dummy_ols(
    panel: &CountyYearPanel,
    spec: &RegressionSpec,
) -> (DVector<f64>, DMatrix<f64>, usize) {
    let rows = panel.rows();
    let value = |r: &PanelRow, name: &str| match name {
        "n_br" => r.n_br as f64,
        "n_fs" => r.n_fs as f64,
        "ln_population" => r.population.ln(),
        "ln_emp_nonlegal" => r.emp_nonlegal.ln(),
        other => panic!("unexpected column {other}"),
    };
    let names = spec.regressors();
    let k = names.len();
    let mut counties = BTreeMap::new();
    let mut cells = BTreeMap::new();
    for r in rows {
        let n = counties.len();
        counties.entry(r.county_id).or_insert(n);
        let n = cells.len();
        cells.entry((r.district_id, r.year)).or_insert(n);
    }
    let cols = k + counties.len() + cells.len();
    let n = rows.len();
    let mut x = DMatrix::zeros(n, cols);
    let mut y = DVector::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        y[i] = r.emp_legal.ln();
        for (j, name) in names.iter().enumerate() {
            x[(i, j)] = value(r, name);
        }
        x[(i, k + counties[&r.county_id])] = 1.0;
        x[(i, k + counties.len() + cells[&(r.district_id, r.year)])] = 1.0;
    }
    // Centering leaves the fit unchanged (the dummies span the intercept) but
    // keeps the level of log population from swamping its within variation.
    for j in 0..k {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let pinv = x.clone().pseudo_inverse(1e-9).unwrap();
    let beta = &pinv * &y;
    let resid = &y - &x * &beta;
    let mut scores: BTreeMap<i64, DVector<f64>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let s = scores
            .entry(r.county_id)
            .or_insert_with(|| DVector::zeros(k));
        for j in 0..k {
            s[j] += pinv[(j, i)] * resid[i];
        }
    }
    let g = scores.len() as f64;
    let mut v = DMatrix::zeros(k, k);
    for s in scores.values() {
        v += s * s.transpose();
    }
    let factor = g / (g - 1.0) * (n as f64 - 1.0) / (n - k) as f64;
    (beta.rows(0, k).into_owned(), v * factor, n)
}

fn fe_oracle() -> Outcome {
    let mut worst_coef = 0.0f64;
    let mut worst_vcov = 0.0f64;
    let spec = RegressionSpec {
        lag_structure: vec![],
        ..RegressionSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for inst in 0..25 {
        let cfg = SynthConfig {
            n_counties: rng.random_range(12..=60),
            n_years: 6,
            dgp_kind: DgpKind::ReducedForm,
            br_rate: uniform(&mut rng, 0.5, 3.0),
            missing_prob: if inst % 2 == 0 { 0.0 } else { 0.1 },
            rng_seed: 600 + inst,
            ..SynthConfig::default()
        };
        let panel = panel::simulate_reduced_form_panel(&cfg).map_err(|e| e.to_string())?;
        let res = fe::ols_fe(&panel, &spec).map_err(|e| format!("instance {inst}: {e}"))?;
        let (beta, vcov, n) = dummy_ols(&panel, &spec);
        if n != res.n_obs {
            return Err(format!(
                "instance {inst}: {n} vs {} observations",
                res.n_obs
            ));
        }
        worst_coef = worst_coef.max((&res.coefficients - &beta).amax());
        worst_vcov = worst_vcov.max((&res.vcov_clustered - &vcov).amax() / vcov.amax());
    }
    check(
        worst_coef < 1e-8 && worst_vcov < 1e-10,
        format!("25 instances: max coefficient gap {worst_coef:.1e}, max relative vcov gap {worst_vcov:.1e}"),
    )
}

// ---------------------------------------------------------------- 7

fn reduced_form_recovery() -> Outcome {
    const REPS: u64 = 200;
    let base = SynthConfig {
        n_counties: 300,
        n_years: 6,
        dgp_kind: DgpKind::ReducedForm,
        ..SynthConfig::default()
    };
    let spec = RegressionSpec::default();
    let truth = [base.true_gamma_br, base.true_gamma_fs];
    let reps: Vec<Result<([f64; 2], [bool; 2], bool), String>> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let cfg = SynthConfig {
                rng_seed: 7000 + rep,
                ..base.clone()
            };
            let panel = panel::simulate_reduced_form_panel(&cfg).map_err(|e| e.to_string())?;
            let res = fe::ols_fe(&panel, &spec).map_err(|e| e.to_string())?;
            let mut est = [0.0; 2];
            let mut covered = [false; 2];
            for (i, name) in ["n_br", "n_fs"].iter().enumerate() {
                let (b, se) = (res.coef(name).unwrap(), res.std_err(name).unwrap());
                est[i] = b;
                covered[i] = (b - truth[i]).abs() <= stats::Z_975 * se;
            }
            let placebo = fe::placebo_lags(&panel, &spec).map_err(|e| e.to_string())?;
            let z = placebo.coef("n_br_lag1").unwrap() / placebo.std_err("n_br_lag1").unwrap();
            Ok((est, covered, stats::normal_two_sided_p(z) < 0.05))
        })
        .collect();
    let reps: Vec<_> = reps.into_iter().collect::<Result<_, _>>()?;
    let n = reps.len() as f64;
    let mean = [0, 1].map(|i| reps.iter().map(|r| r.0[i]).sum::<f64>() / n);
    let coverage = [0, 1].map(|i| reps.iter().filter(|r| r.1[i]).count() as f64 / n);
    let placebo = reps.iter().filter(|r| r.2).count() as f64 / n;
    let ok = (0..2).all(|i| rel(mean[i], truth[i]) <= 0.10 && (0.90..=0.99).contains(&coverage[i]))
        && (0.02..=0.10).contains(&placebo);
    check(
        ok,
        format!(
            "mean ({:.5}, {:.5}), 95% coverage ({:.1}%, {:.1}%), placebo rejections {:.1}%",
            mean[0],
            mean[1],
            100.0 * coverage[0],
            100.0 * coverage[1],
            100.0 * placebo
        ),
    )
}

// ---------------------------------------------------------------- 8

const GMM_TRUTH: [f64; 3] = [0.0853, 0.264, 1.293];

fn gmm_setup() -> (ModelParamsGmm, DemandParams, GmmSpec, SynthConfig) {
    let cal = model::calibrate_gmm(0.42, 2.40, 1.4).unwrap();
    let p = ModelParamsGmm::baseline();
    let d = DemandParams {
        l_bar_county: 50.0,
        phi_fees: 5.0,
        ..DemandParams::default()
    };
    let spec = GmmSpec::baseline(GmmCalibration {
        zeta: cal.zeta,
        pi_share: cal.pi_share,
    });
    let cfg = SynthConfig {
        br_rate: 3.0,
        br_rate_dispersion: 0.1,
        noise_sd_logemp: 0.02,
        noise_sd_logwage: 0.02,
        ..SynthConfig::default()
    };
    (p, d, spec, cfg)
}

fn gmm_data(
    cfg: &SynthConfig,
    p: &ModelParamsGmm,
    d: &DemandParams,
    spec: &GmmSpec,
) -> Result<GmmData, String> {
    let panel = panel::simulate_structural_panel(cfg, p, d).map_err(|e| e.to_string())?;
    let (obs, _) = gmm::observations_from_panel(&panel, d).map_err(|e| e.to_string())?;
    GmmData::new(obs, spec.clone()).map_err(|e| e.to_string())
}

fn gmm_recovery() -> Outcome {
    let (p, d, spec, base) = gmm_setup();
    // Baseline parameters must carry the estimation targets.
    let truth_ok = rel(1.0 / p.rho_s, GMM_TRUTH[0]) < 1e-12
        && rel(1.0 / p.rho_u, GMM_TRUTH[1]) < 1e-12
        && rel(p.alpha, GMM_TRUTH[2]) < 1e-12;

    let zero = SynthConfig {
        noise_sd_logemp: 0.0,
        noise_sd_logwage: 0.0,
        ..base.clone()
    };
    let data = gmm_data(&zero, &p, &d, &spec)?;
    let exact = gmm::two_step_gmm(&data).map_err(|e| format!("zero noise: {e}"))?;
    let zero_gap = (0..3)
        .map(|i| (exact.beta_hat[i] - GMM_TRUTH[i]).abs())
        .fold(0.0, f64::max);

    const REPS: u64 = 100;
    let reps: Vec<Result<([bool; 3], bool, f64, usize), String>> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let cfg = SynthConfig {
                rng_seed: 1000 + rep,
                ..base.clone()
            };
            let data = gmm_data(&cfg, &p, &d, &spec)?;
            let r = gmm::two_step_gmm(&data).map_err(|e| format!("rep {rep}: {e}"))?;
            let se = r.std_errors();
            let covered = [0, 1, 2].map(|i| (r.beta_hat[i] - GMM_TRUTH[i]).abs() <= 3.0 * se[i]);
            let numeric_gap = if rep < 10 {
                let num = gmm::numeric_stage(&data, &r.weight_matrix_2, &r.stage1_beta)
                    .map_err(|e| e.to_string())?;
                (num - r.beta_hat).amax()
            } else {
                0.0
            };
            Ok((covered, r.j_pvalue < 0.05, numeric_gap, r.n_obs))
        })
        .collect();
    let reps: Vec<_> = reps.into_iter().collect::<Result<_, _>>()?;
    let coverage = [0, 1, 2].map(|i| reps.iter().filter(|r| r.0[i]).count());
    let size = reps.iter().filter(|r| r.1).count() as f64 / reps.len() as f64;
    let numeric = reps.iter().map(|r| r.2).fold(0.0, f64::max);
    let n_obs = reps[0].3;
    let ok = truth_ok
        && zero_gap < 1e-8
        && coverage.iter().all(|&c| c >= 90)
        && numeric < 1e-6
        && (0.02..=0.10).contains(&size);
    check(
        ok,
        format!(
            "N = {n_obs}; within 3 SE in {:?} of {REPS}; zero-noise gap {zero_gap:.1e}; numeric gap {numeric:.1e}; J size {:.0}%",
            coverage,
            100.0 * size
        ),
    )
}

// ---------------------------------------------------------------- 9

fn scaled(path: &HouseholdPath, factor: f64) -> HouseholdPath {
    HouseholdPath {
        consumption: path.consumption.iter().map(|c| c * factor).collect(),
        ..path.clone()
    }
}

/// Nested grid search for the consumption scaling that equates utilities.
fn grid_ev(f: &HouseholdPath, cf: &HouseholdPath) -> f64 {
    let target = welfare::lifetime_utility(cf).unwrap();
    // Scalings that leave no consumption net of disutility count as infeasible.
    let gap = |e: f64| match welfare::lifetime_utility(&scaled(f, 1.0 + e)) {
        Ok(u) if u.is_finite() => u - target,
        _ => f64::NEG_INFINITY,
    };
    let (mut lo, mut hi) = (welfare::EV_LOWER, welfare::EV_UPPER);
    while hi - lo > 1e-13 {
        let step = (hi - lo) / 1000.0;
        let mut prev = lo;
        for i in 1..=1000 {
            let x = if i == 1000 { hi } else { lo + i as f64 * step };
            if gap(x) >= 0.0 {
                hi = x;
                lo = prev;
                break;
            }
            prev = x;
        }
    }
    0.5 * (lo + hi)
}

fn welfare_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_identity = 0.0f64;
    let mut worst_uniform = 0.0f64;
    let mut worst_grid = 0.0f64;
    for _ in 0..30 {
        let t = rng.random_range(3..12);
        let c: Vec<f64> = (0..t).map(|_| uniform(&mut rng, 1.0, 3.0)).collect();
        let n: Vec<f64> = (0..t).map(|_| uniform(&mut rng, 0.2, 0.9)).collect();
        let rho = uniform(&mut rng, 0.5, 3.0);
        for sigma in [0.5, 2.0] {
            let f = HouseholdPath::new(c.clone(), n.clone(), rho, sigma, 0.96).unwrap();
            let e = welfare::equivalent_variation(&f, &f).unwrap();
            worst_identity = worst_identity.max(e.abs());

            let ratio = uniform(&mut rng, 0.9, 1.1);
            let cf = scaled(&f, ratio);
            let e = welfare::equivalent_variation(&f, &cf).unwrap();
            worst_uniform = worst_uniform.max((e - (ratio - 1.0)).abs());

            let n2: Vec<f64> = n
                .iter()
                .map(|v| v * uniform(&mut rng, 0.95, 1.05))
                .collect();
            let c2: Vec<f64> = c
                .iter()
                .map(|v| v * uniform(&mut rng, 0.97, 1.05))
                .collect();
            let cf = HouseholdPath::new(c2, n2, rho, sigma, 0.96).unwrap();
            let e = welfare::equivalent_variation(&f, &cf).unwrap();
            worst_grid = worst_grid.max((e - grid_ev(&f, &cf)).abs());
        }
    }

    let p = ModelParamsGmm::baseline();
    let panel =
        panel::simulate_structural_panel(&SynthConfig::default(), &p, &DemandParams::default())
            .map_err(|e| e.to_string())?;
    let mut signs = true;
    let mut summary = Vec::new();
    for sigma in [2.0, 0.5] {
        let p = ModelParamsGmm {
            sigma_curv: sigma,
            ..p
        };
        let paths = welfare::counterfactual_no_fs(
            &panel,
            &p,
            &DemandParams::default(),
            &PathAnchors::default(),
        )
        .map_err(|e| e.to_string())?;
        let evs = welfare::county_evs(&paths).map_err(|e| e.to_string())?;
        let s = welfare::aggregate_ev(&evs, EvWeighting::County);
        signs &= s.ev_skilled > 0.0 && s.ev_unskilled > 0.0 && s.ev_unskilled >= s.ev_skilled;
        summary.push(format!(
            "sigma {sigma}: {:.3}%/{:.3}%",
            100.0 * s.ev_skilled,
            100.0 * s.ev_unskilled
        ));
    }
    check(
        worst_identity == 0.0 && worst_uniform < 1e-10 && worst_grid < 1e-8 && signs,
        format!(
            "identity {worst_identity:.1e}, uniform ratio {worst_uniform:.1e}, grid search {worst_grid:.1e}; {}",
            summary.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 10

fn gains_share() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut rows = Vec::new();
    for pair in 0..20i64 {
        let emp: Vec<f64> = (0..6).map(|_| uniform(&mut rng, 50.0, 5000.0)).collect();
        let m: Vec<u32> = (0..6).map(|_| rng.random_range(0..4)).collect();
        // Paired counties share employment and filings; forum-shopping
        // shares are 0.20 and 0.28.
        for (offset, shopped) in [(0, 10), (1, 14)] {
            let county_id = 2 * pair + offset + 1;
            for t in 0..6 {
                rows.push(PanelRow {
                    county_id,
                    district_id: (county_id - 1) / 5 + 1,
                    state_id: (county_id - 1) / 10 + 1,
                    year: 2000 + t as i32,
                    n_br: 50 * m[t],
                    n_fs: shopped * m[t],
                    emp_legal: emp[t],
                    emp_nonlegal: 10.0 * emp[t],
                    population: 100.0 * emp[t],
                    wage_avg: 1.0,
                    emp_skilled: 0.4 * emp[t],
                    emp_unskilled: 0.6 * emp[t],
                    wage_skilled: 1.5,
                    wage_unskilled: 0.8,
                });
            }
        }
    }
    let panel = CountyYearPanel::new(rows).map_err(|e| e.to_string())?;
    let g = welfare::gains_lost(0.0123, -0.0123, &panel);
    check(
        (g.share_of_potential - 0.24).abs() <= 0.001,
        format!(
            "share {:.6}, {:.1} of {:.1} jobs per year",
            g.share_of_potential, g.jobs_lost_per_year, g.potential_per_year
        ),
    )
}

// ---------------------------------------------------------------- 11

fn example_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/example.conf")
}

fn run_pipeline(out: &Path) -> Result<(), String> {
    for command in [
        "simulate",
        "calibrate",
        "regress",
        "gmm",
        "welfare",
        "gains",
        "report",
    ] {
        let status = Command::new(env!("CARGO_BIN_EXE_venuelab"))
            .arg("--config")
            .arg(example_config())
            .arg("--out")
            .arg(out)
            .arg(command)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "{command} failed: {}",
                String::from_utf8_lossy(&status.stderr).trim()
            ));
        }
    }
    Ok(())
}

fn directory_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let (ca, cb) = (directory_contents(a.path()), directory_contents(b.path()));
    let differing: Vec<&String> = ca
        .keys()
        .chain(cb.keys())
        .filter(|k| ca.get(*k) != cb.get(*k))
        .collect();
    check(
        differing.is_empty() && ca.len() >= 10,
        format!(
            "{} files compared, {} differ, {:.1} s for both runs",
            ca.len(),
            differing.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

// ----------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("calibration reproduction", calibration),
        ("substitution elasticity formula", delta_formula),
        ("chi-square anchor", chi_square_anchor),
        ("equilibrium identities", equilibrium_identities),
        ("composition and wage propositions", wage_propositions),
        ("fixed-effects oracle equivalence", fe_oracle),
        ("reduced-form recovery", reduced_form_recovery),
        ("GMM recovery", gmm_recovery),
        ("welfare oracle", welfare_oracle),
        ("gains-lost construction", gains_share),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
