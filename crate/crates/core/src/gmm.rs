//! Two-step clustered GMM for the log-differenced demand and supply system.
//!
//! With the production constants `(zeta, pi)` fixed, every residual is affine
//! in `beta = (1/rho_s, 1/rho_u, alpha)`:
//!
//! ```text
//! u_i(beta) = y_i - X_i beta
//! ```
//!
//! so both stages have closed-form weighted least-squares solutions.
//! Moment sums are accumulated per county cluster in parallel and then
//! combined in ascending county order, which makes results independent of
//! the number of worker threads.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe::{self, FeDim};
use crate::linalg;
use crate::model::{self, DemandParams};
use crate::optim::{self, NelderMeadOptions};
use crate::panel::CountyYearPanel;
use crate::stats;

pub const PARAM_NAMES: [&str; 3] = ["inv_rho_s", "inv_rho_u", "alpha"];
/// Condition number of the clustered moment covariance above which a
/// warning is logged.
pub const CONDITION_WARNING: f64 = 1e12;

/// One county-year with a defined previous year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmObservation {
    pub county_id: i64,
    pub year: i32,
    pub dw_s: f64,
    pub dw_u: f64,
    pub dn_s: f64,
    pub dn_u: f64,
    pub dtheta: f64,
    /// Locally filed cases this year and last year.
    pub br_t: f64,
    pub br_tm1: f64,
}

/// Log-differences of the four outcome series with the demand-shifter
/// change built from locally filed cases, in county-year order.
/// Returns the observations together with the panel row of each year `t`.
pub fn observations_from_panel(
    panel: &CountyYearPanel,
    d: &DemandParams,
) -> Result<(Vec<GmmObservation>, Vec<usize>)> {
    d.validate()?;
    let rows = panel.rows();
    let mut obs = Vec::new();
    let mut index = Vec::new();
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        if prev.county_id != cur.county_id || prev.year + 1 != cur.year {
            continue;
        }
        let br_t = cur.n_local() as f64;
        let br_tm1 = prev.n_local() as f64;
        obs.push(GmmObservation {
            county_id: cur.county_id,
            year: cur.year,
            dw_s: (cur.wage_skilled / prev.wage_skilled).ln(),
            dw_u: (cur.wage_unskilled / prev.wage_unskilled).ln(),
            dn_s: (cur.emp_skilled / prev.emp_skilled).ln(),
            dn_u: (cur.emp_unskilled / prev.emp_unskilled).ln(),
            dtheta: model::delta_theta(d, br_t, br_tm1)?,
            br_t,
            br_tm1,
        });
        index.push(i);
    }
    if obs.is_empty() {
        return Err(Error::Estimation(
            "panel has no county with two consecutive years".into(),
        ));
    }
    Ok((obs, index))
}

/// Replaces the four outcome differences and the demand-shifter change by
/// their residuals from a fixed-effects projection on `controls` (taken at
/// year `t`). With no fixed effects but some controls, an intercept is used;
/// with neither, the data are returned unchanged. The projection is linear,
/// so residuals that vanish before detrending still vanish after it.
pub fn detrend(
    panel: &CountyYearPanel,
    obs: &[GmmObservation],
    rows: &[usize],
    controls: &[String],
    absorb: &[FeDim],
) -> Result<Vec<GmmObservation>> {
    if obs.len() != rows.len() {
        return Err(Error::domain(
            "observations and panel rows differ in length",
        ));
    }
    if controls.is_empty() && absorb.is_empty() {
        return Ok(obs.to_vec());
    }
    let n = obs.len();
    let k = controls.len();
    const SERIES: usize = 5;
    let mut data = DMatrix::zeros(n, SERIES + k);
    for (i, o) in obs.iter().enumerate() {
        data[(i, 0)] = o.dw_s;
        data[(i, 1)] = o.dw_u;
        data[(i, 2)] = o.dn_s;
        data[(i, 3)] = o.dn_u;
        data[(i, 4)] = o.dtheta;
    }
    for (c, name) in controls.iter().enumerate() {
        let col = panel.column(name)?;
        for (i, &r) in rows.iter().enumerate() {
            let v = col[r];
            if !v.is_finite() {
                return Err(Error::Estimation(format!(
                    "control '{name}' undefined at county {} year {}",
                    obs[i].county_id, obs[i].year
                )));
            }
            data[(i, SERIES + c)] = v;
        }
    }
    let groups: Vec<Vec<usize>> = if absorb.is_empty() {
        vec![vec![0; n]]
    } else {
        absorb
            .iter()
            .map(|&dim| fe::group_indices(panel, rows, dim))
            .collect()
    };
    let within = fe::within_transform(&data, &groups, fe::DEMEAN_TOL, fe::DEMEAN_MAX_ITER)?;
    let y = within.data.columns(0, SERIES).clone_owned();
    let resid = if k == 0 {
        y
    } else {
        let x = within.data.columns(SERIES, k).clone_owned();
        let mut out = DMatrix::zeros(n, SERIES);
        for j in 0..SERIES {
            let yj = y.column(j).clone_owned();
            let fit = linalg::least_squares(&x, &yj, controls)?;
            out.set_column(j, &(&yj - &x * &fit.coef));
        }
        out
    };
    Ok(obs
        .iter()
        .enumerate()
        .map(|(i, o)| GmmObservation {
            dw_s: resid[(i, 0)],
            dw_u: resid[(i, 1)],
            dn_s: resid[(i, 2)],
            dn_u: resid[(i, 3)],
            dtheta: resid[(i, 4)],
            ..*o
        })
        .collect())
}

/// Raw material of an instrument power term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrumentSource {
    /// Locally filed cases this year.
    Br,
    /// Locally filed cases last year.
    BrLag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstrumentTerm {
    pub source: InstrumentSource,
    pub power: u32,
}

impl InstrumentTerm {
    pub fn eval(&self, o: &GmmObservation) -> f64 {
        let base = match self.source {
            InstrumentSource::Br => o.br_t,
            InstrumentSource::BrLag => o.br_tm1,
        };
        base.powi(self.power as i32)
    }
}

impl fmt::Display for InstrumentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.source {
            InstrumentSource::Br => "br",
            InstrumentSource::BrLag => "br_lag",
        };
        write!(f, "{name}^{}", self.power)
    }
}

fn parse_single(s: &str) -> std::result::Result<(InstrumentSource, u32), String> {
    let (name, power) = match s.split_once('^') {
        Some((n, p)) => (
            n.trim(),
            p.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad instrument power in '{s}'"))?,
        ),
        None => (s.trim(), 1),
    };
    let source = match name {
        "br" => InstrumentSource::Br,
        "br_lag" => InstrumentSource::BrLag,
        other => return Err(format!("unknown instrument '{other}' (br, br_lag)")),
    };
    if power == 0 {
        return Err(format!("instrument power must be positive in '{s}'"));
    }
    Ok((source, power))
}

/// Parses a comma-separated list such as `br_lag^1..br_lag^4, br`.
pub fn parse_instrument_list(s: &str) -> std::result::Result<Vec<InstrumentTerm>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (src_lo, p_lo) = parse_single(lo)?;
            let (src_hi, p_hi) = parse_single(hi)?;
            if src_lo != src_hi || p_lo > p_hi {
                return Err(format!("bad instrument range '{item}'"));
            }
            out.extend((p_lo..=p_hi).map(|power| InstrumentTerm {
                source: src_lo,
                power,
            }));
        } else {
            let (source, power) = parse_single(item)?;
            out.push(InstrumentTerm { source, power });
        }
    }
    Ok(out)
}

pub fn format_instrument_list(terms: &[InstrumentTerm]) -> String {
    terms
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Fixed production constants used to build residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmCalibration {
    pub zeta: f64,
    pub pi_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    pub wage_instruments: Vec<InstrumentTerm>,
    pub labor_instruments: Vec<InstrumentTerm>,
    pub include_constant_wage: bool,
    pub include_constant_labor: bool,
    pub calib: GmmCalibration,
}

impl GmmSpec {
    /// Four powers of last year's local cases for the wage equations;
    /// this year's and last year's cases plus a constant for labor supply.
    pub fn baseline(calib: GmmCalibration) -> Self {
        GmmSpec {
            wage_instruments: parse_instrument_list("br_lag^1..br_lag^4").expect("static"),
            labor_instruments: parse_instrument_list("br, br_lag").expect("static"),
            include_constant_wage: false,
            include_constant_labor: true,
            calib,
        }
    }

    pub fn simplified(calib: GmmCalibration) -> Self {
        GmmSpec {
            wage_instruments: parse_instrument_list("br_lag").expect("static"),
            labor_instruments: parse_instrument_list("br").expect("static"),
            include_constant_wage: false,
            include_constant_labor: true,
            calib,
        }
    }

    pub fn q_wage(&self) -> usize {
        self.wage_instruments.len() + self.include_constant_wage as usize
    }

    pub fn q_labor(&self) -> usize {
        self.labor_instruments.len() + self.include_constant_labor as usize
    }

    /// Total number of moment conditions.
    pub fn q(&self) -> usize {
        2 * self.q_wage() + 2 * self.q_labor()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_wage() == 0 || self.q_labor() == 0 {
            return Err(Error::domain(
                "each equation block needs at least one instrument",
            ));
        }
        let GmmCalibration { zeta, pi_share } = self.calib;
        if !zeta.is_finite() || zeta == 0.0 || zeta >= 1.0 {
            return Err(Error::domain(format!(
                "zeta must be finite, nonzero and < 1, got {zeta}"
            )));
        }
        if !(pi_share > 0.0 && pi_share < 1.0) {
            return Err(Error::domain(format!(
                "pi_share must lie in (0,1), got {pi_share}"
            )));
        }
        Ok(())
    }

    fn wage_z(&self, o: &GmmObservation) -> Vec<f64> {
        let mut z: Vec<f64> = self.wage_instruments.iter().map(|t| t.eval(o)).collect();
        if self.include_constant_wage {
            z.push(1.0);
        }
        z
    }

    fn labor_z(&self, o: &GmmObservation) -> Vec<f64> {
        let mut z: Vec<f64> = self.labor_instruments.iter().map(|t| t.eval(o)).collect();
        if self.include_constant_labor {
            z.push(1.0);
        }
        z
    }

    /// Moment labels in stacking order.
    pub fn moment_names(&self) -> Vec<String> {
        let mut wage: Vec<String> = self
            .wage_instruments
            .iter()
            .map(|t| t.to_string())
            .collect();
        if self.include_constant_wage {
            wage.push("const".into());
        }
        let mut labor: Vec<String> = self
            .labor_instruments
            .iter()
            .map(|t| t.to_string())
            .collect();
        if self.include_constant_labor {
            labor.push("const".into());
        }
        let mut out = Vec::with_capacity(self.q());
        for (eq, list) in [
            ("w_s", &wage),
            ("w_u", &wage),
            ("n_s", &labor),
            ("n_u", &labor),
        ] {
            out.extend(list.iter().map(|z| format!("{eq}:{z}")));
        }
        out
    }
}

/// Parameter vector `(1/rho_s, 1/rho_u, alpha)`.
pub type Beta = Vector3<f64>;

/// Residuals `(wS, wU, nS, nU)` at `beta`.
pub fn residuals(beta: &Beta, o: &GmmObservation, calib: &GmmCalibration) -> Vector4<f64> {
    let (y, x) = residual_parts(o, calib);
    y - x * beta
}

/// Intercept and slope of the affine residual map, `u = y - X beta`.
pub fn residual_parts(
    o: &GmmObservation,
    calib: &GmmCalibration,
) -> (Vector4<f64>, SMatrix<f64, 4, 3>) {
    let GmmCalibration { zeta, pi_share: pi } = *calib;
    let mix = pi * o.dn_s + (1.0 - pi) * o.dn_u;
    let y = Vector4::new(
        o.dw_s - o.dtheta - (zeta - 1.0) * o.dn_s + zeta * mix,
        o.dw_u - o.dtheta - (zeta - 1.0) * o.dn_u + zeta * mix,
        o.dn_s,
        o.dn_u,
    );
    #[rustfmt::skip]
    let x = SMatrix::<f64, 4, 3>::new(
        0.0,    0.0,    mix,
        0.0,    0.0,    mix,
        o.dw_s, 0.0,    0.0,
        0.0,    o.dw_u, 0.0,
    );
    (y, x)
}

/// Block-diagonal `4 x q` instrument matrix of one observation.
pub fn build_instruments(o: &GmmObservation, spec: &GmmSpec) -> DMatrix<f64> {
    let zw = spec.wage_z(o);
    let zn = spec.labor_z(o);
    let (qw, qn) = (zw.len(), zn.len());
    let mut z = DMatrix::zeros(4, spec.q());
    for (j, v) in zw.iter().enumerate() {
        z[(0, j)] = *v;
        z[(1, qw + j)] = *v;
    }
    for (j, v) in zn.iter().enumerate() {
        z[(2, 2 * qw + j)] = *v;
        z[(3, 2 * qw + qn + j)] = *v;
    }
    z
}

/// Observations grouped by county, with the instrument-weighted affine
/// pieces needed by the estimator.
#[derive(Debug, Clone)]
pub struct GmmData {
    pub obs: Vec<GmmObservation>,
    pub spec: GmmSpec,
    /// Start index of each county's run in `obs`, plus a final sentinel.
    cluster_bounds: Vec<usize>,
}

/// Sample moment pieces: `g(beta) = g0 - G beta`.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    /// `(1/N) sum Z_i' y_i`.
    pub g0: DVector<f64>,
    /// `(1/N) sum Z_i' X_i`; the moment Jacobian is `-G`.
    pub g: DMatrix<f64>,
    pub n_obs: usize,
}

impl GmmData {
    /// Sorts observations by county and year.
    pub fn new(mut obs: Vec<GmmObservation>, spec: GmmSpec) -> Result<Self> {
        spec.validate()?;
        if obs.is_empty() {
            return Err(Error::Estimation("no GMM observations".into()));
        }
        if let Some(bad) = obs.iter().find(|o| {
            ![o.dw_s, o.dw_u, o.dn_s, o.dn_u, o.dtheta, o.br_t, o.br_tm1]
                .iter()
                .all(|v| v.is_finite())
        }) {
            return Err(Error::Invariant(format!(
                "non-finite GMM observation at county {} year {}",
                bad.county_id, bad.year
            )));
        }
        obs.sort_by_key(|o| (o.county_id, o.year));
        let mut cluster_bounds = vec![0];
        for i in 1..obs.len() {
            if obs[i].county_id != obs[i - 1].county_id {
                cluster_bounds.push(i);
            }
        }
        cluster_bounds.push(obs.len());
        Ok(GmmData {
            obs,
            spec,
            cluster_bounds,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.obs.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_bounds.len() - 1
    }

    fn clusters(&self) -> Vec<&[GmmObservation]> {
        self.cluster_bounds
            .windows(2)
            .map(|w| &self.obs[w[0]..w[1]])
            .collect()
    }

    /// Parallel per-cluster map followed by an in-order sum.
    fn reduce<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[GmmObservation]) -> T + Sync + Send,
    {
        self.clusters().par_iter().map(|c| f(c)).collect()
    }

    pub fn moment_system(&self) -> MomentSystem {
        let q = self.spec.q();
        let parts = self.reduce(|cluster| {
            let mut g0 = DVector::zeros(q);
            let mut g = DMatrix::zeros(q, 3);
            for o in cluster {
                let z = build_instruments(o, &self.spec);
                let (y, x) = residual_parts(o, &self.spec.calib);
                g0 += z.transpose() * DVector::from_column_slice(y.as_slice());
                g += z.transpose() * DMatrix::from_column_slice(4, 3, x.as_slice());
            }
            (g0, g)
        });
        let n = self.n_obs() as f64;
        let mut g0 = DVector::zeros(q);
        let mut g = DMatrix::zeros(q, 3);
        for (a, b) in parts {
            g0 += a;
            g += b;
        }
        MomentSystem {
            g0: g0 / n,
            g: g / n,
            n_obs: self.n_obs(),
        }
    }

    /// Sample moments `(1/N) sum Z_i' u_i(beta)`.
    pub fn moments(&self, beta: &Beta) -> DVector<f64> {
        let q = self.spec.q();
        let parts = self.reduce(|cluster| cluster_score(cluster, beta, &self.spec, q));
        let mut total = DVector::zeros(q);
        for p in parts {
            total += p;
        }
        total / self.n_obs() as f64
    }

    /// Clustered moment covariance `(1/N) sum_c lambda_c lambda_c'` with
    /// `lambda_c = sum_{i in c} Z_i' u_i(beta)`.
    pub fn clustered_covariance(&self, beta: &Beta) -> DMatrix<f64> {
        let q = self.spec.q();
        let parts = self.reduce(|cluster| {
            let s = cluster_score(cluster, beta, &self.spec, q);
            &s * s.transpose()
        });
        let mut total = DMatrix::zeros(q, q);
        for p in parts {
            total += p;
        }
        linalg::symmetrize(&(total / self.n_obs() as f64))
    }
}

fn cluster_score(
    cluster: &[GmmObservation],
    beta: &Beta,
    spec: &GmmSpec,
    q: usize,
) -> DVector<f64> {
    let mut s = DVector::zeros(q);
    for o in cluster {
        let u = residuals(beta, o, &spec.calib);
        s += build_instruments(o, spec).transpose() * DVector::from_column_slice(u.as_slice());
    }
    s
}

/// `Q(beta, W) = g(beta)' W g(beta)`.
pub fn gmm_criterion(beta: &Beta, data: &GmmData, w: &DMatrix<f64>) -> Result<f64> {
    let q = data.spec.q();
    if w.shape() != (q, q) {
        return Err(Error::domain(format!(
            "weight matrix is {}x{}, expected {q}x{q}",
            w.nrows(),
            w.ncols()
        )));
    }
    let g = data.moments(beta);
    Ok((g.transpose() * w * &g)[(0, 0)])
}

/// Minimiser of `(g0 - G b)' W (g0 - G b)`.
pub fn solve_stage(system: &MomentSystem, w: &DMatrix<f64>) -> Result<Beta> {
    let gtw = system.g.transpose() * w;
    let lhs = &gtw * &system.g;
    let rhs = &gtw * &system.g0;
    if linalg::independent_columns(&system.g).len() < 3 {
        return Err(Error::RankDeficient {
            columns: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        });
    }
    let sol = lhs
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| lhs.lu().solve(&rhs))
        .ok_or_else(|| Error::Singular("moment Jacobian normal matrix".into()))?;
    Ok(Vector3::new(sol[0], sol[1], sol[2]))
}

/// Minimises the criterion with a derivative-free search, for cross-checks.
pub fn numeric_stage(data: &GmmData, w: &DMatrix<f64>, start: &Beta) -> Result<Beta> {
    let system = data.moment_system();
    // The closed-form objective is cheaper to evaluate than re-summing moments.
    let objective = |b: &[f64]| {
        let m = &system.g0 - &system.g * Vector3::new(b[0], b[1], b[2]);
        (m.transpose() * w * &m)[(0, 0)]
    };
    let scale = objective(start.as_slice()).max(f64::MIN_POSITIVE);
    let mut opts = NelderMeadOptions::new(3);
    opts.initial_step = start.iter().map(|v| 0.1 * v.abs().max(0.1)).collect();
    opts.x_tol = 1e-13;
    let m = optim::nelder_mead(|b| objective(b) / scale, start.as_slice(), &opts);
    if !m.value.is_finite() {
        return Err(Error::Estimation(
            "numeric GMM minimisation diverged".into(),
        ));
    }
    Ok(Vector3::new(m.x[0], m.x[1], m.x[2]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JTest {
    pub j_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub just_identified: bool,
}

/// `J = N Q(beta_2, W_2)` against chi-square with `q - 3` degrees of freedom.
pub fn j_test(n_obs: usize, q: usize, stage2_criterion: f64) -> Result<JTest> {
    if q < 3 {
        return Err(Error::domain(format!(
            "{q} moments cannot identify 3 parameters"
        )));
    }
    if q == 3 {
        return Ok(JTest {
            j_stat: 0.0,
            df: 0,
            p_value: 1.0,
            just_identified: true,
        });
    }
    let j = (n_obs as f64 * stage2_criterion).max(0.0);
    Ok(JTest {
        j_stat: j,
        df: q - 3,
        p_value: stats::chi2_sf(j, (q - 3) as f64)?,
        just_identified: false,
    })
}

/// `(1/N) (G' W G)^-1` with the analytic moment Jacobian.
pub fn gmm_vcov(system: &MomentSystem, w: &DMatrix<f64>) -> Result<Matrix3<f64>> {
    let info = system.g.transpose() * w * &system.g;
    let inv = linalg::spd_inverse(&info, "G'WG")? / system.n_obs as f64;
    let inv = linalg::symmetrize(&inv);
    Ok(Matrix3::from_fn(|r, c| inv[(r, c)]))
}

#[derive(Debug, Clone)]
pub struct GmmResult {
    pub beta_hat: Beta,
    pub vcov_clustered: Matrix3<f64>,
    pub j_stat: f64,
    pub j_df: usize,
    pub j_pvalue: f64,
    pub just_identified: bool,
    pub stage1_beta: Beta,
    pub weight_matrix_2: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub q: usize,
    pub lambda_condition: f64,
    pub jacobian_condition: f64,
}

impl GmmResult {
    pub fn std_errors(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.vcov_clustered[(i, i)].max(0.0).sqrt())
    }

    /// `parameter,estimate,std_err` rows.
    pub fn coefficient_csv(&self) -> String {
        let se = self.std_errors();
        let mut out = String::from("parameter,estimate,std_err\n");
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            out.push_str(&format!("{name},{},{}\n", self.beta_hat[i], se[i]));
        }
        out
    }
}

impl fmt::Display for GmmResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let se = self.std_errors();
        writeln!(
            f,
            "{:<12} {:>12} {:>12} {:>12}",
            "parameter", "estimate", "std.err", "stage 1"
        )?;
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            writeln!(
                f,
                "{name:<12} {:>12.6} {:>12.6} {:>12.6}",
                self.beta_hat[i], se[i], self.stage1_beta[i]
            )?;
        }
        writeln!(
            f,
            "observations {}   clusters {}   moments {}",
            self.n_obs, self.n_clusters, self.q
        )?;
        if self.just_identified {
            writeln!(f, "J-stat 0 (just identified)")?;
        } else {
            writeln!(
                f,
                "J-stat {:.3} (df {}, p = {:.3})",
                self.j_stat, self.j_df, self.j_pvalue
            )?;
        }
        writeln!(
            f,
            "condition numbers: moment covariance {:.3e}, G'WG {:.3e}",
            self.lambda_condition, self.jacobian_condition
        )
    }
}

/// Identity-weighted first stage, clustered optimal weighting in the second.
pub fn two_step_gmm(data: &GmmData) -> Result<GmmResult> {
    let n_clusters = data.n_clusters();
    if n_clusters < 2 {
        return Err(Error::Estimation(format!(
            "two-step GMM needs at least 2 clusters, found {n_clusters}"
        )));
    }
    let q = data.spec.q();
    let system = data.moment_system();
    let identity = DMatrix::identity(q, q);
    let stage1 = solve_stage(&system, &identity)?;

    let lambda = data.clustered_covariance(&stage1);
    let lambda_condition = linalg::condition_number_sym(&lambda);
    if lambda_condition > CONDITION_WARNING {
        log::warn!("clustered moment covariance is ill-conditioned ({lambda_condition:.3e})");
    }
    let w2 = linalg::spd_inverse(&lambda, "clustered moment covariance").map_err(|_| {
        Error::Singular(
            "clustered moment covariance is not invertible; reduce the instrument set".into(),
        )
    })?;
    let stage2 = solve_stage(&system, &w2)?;
    let vcov = gmm_vcov(&system, &w2)?;
    let jacobian_condition =
        linalg::condition_number_sym(&(system.g.transpose() * &w2 * &system.g));
    let m = &system.g0 - &system.g * stage2;
    let q2 = (m.transpose() * &w2 * &m)[(0, 0)];
    let j = j_test(data.n_obs(), q, q2)?;
    Ok(GmmResult {
        beta_hat: stage2,
        vcov_clustered: vcov,
        j_stat: j.j_stat,
        j_df: j.df,
        j_pvalue: j.p_value,
        just_identified: j.just_identified,
        stage1_beta: stage1,
        weight_matrix_2: w2,
        n_obs: data.n_obs(),
        n_clusters,
        q,
        lambda_condition,
        jacobian_condition,
    })
}
