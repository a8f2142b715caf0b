//! Consumption-equivalent welfare under the no-forum-shopping counterfactual
//! and the reduced-form tally of employment gains lost.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe::RegressionResult;
use crate::model::{self, DemandParams, ModelParamsGmm};
use crate::panel::CountyYearPanel;

pub const EV_LOWER: f64 = -0.99;
pub const EV_UPPER: f64 = 10.0;
const EV_TOL: f64 = 1e-10;

/// Consumption and hours of one household type over periods `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdPath {
    pub consumption: Vec<f64>,
    pub labor: Vec<f64>,
    pub rho: f64,
    pub sigma_curv: f64,
    pub beta_disc: f64,
}

impl HouseholdPath {
    pub fn new(
        consumption: Vec<f64>,
        labor: Vec<f64>,
        rho: f64,
        sigma_curv: f64,
        beta_disc: f64,
    ) -> Result<Self> {
        let path = HouseholdPath {
            consumption,
            labor,
            rho,
            sigma_curv,
            beta_disc,
        };
        path.validate()?;
        Ok(path)
    }

    /// Horizon `T`; the path has `T + 1` periods.
    pub fn horizon(&self) -> usize {
        self.consumption.len().saturating_sub(1)
    }

    fn disutility(&self, t: usize) -> f64 {
        self.labor[t].powf(1.0 + self.rho) / (1.0 + self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.consumption.is_empty() || self.consumption.len() != self.labor.len() {
            return Err(Error::domain(format!(
                "consumption ({}) and labor ({}) paths must be nonempty and equally long",
                self.consumption.len(),
                self.labor.len()
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::domain(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.sigma_curv > 0.0 && self.sigma_curv.is_finite()) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {}",
                self.sigma_curv
            )));
        }
        if self.sigma_curv == 1.0 {
            return Err(Error::Unsupported(
                "log utility (sigma = 1) is not implemented".into(),
            ));
        }
        if !(self.beta_disc > 0.0 && self.beta_disc < 1.0) {
            return Err(Error::domain(format!(
                "discount factor must lie in (0,1), got {}",
                self.beta_disc
            )));
        }
        for t in 0..self.consumption.len() {
            let (c, n) = (self.consumption[t], self.labor[t]);
            if !(c > 0.0 && c.is_finite()) || !(n > 0.0 && n.is_finite()) {
                return Err(Error::Invariant(format!(
                    "period {t}: consumption {c} and labor {n} must be positive"
                )));
            }
            let arg = c - self.disutility(t);
            if arg <= 0.0 {
                return Err(Error::Invariant(format!(
                    "period {t}: consumption net of labor disutility is {arg}, must be positive"
                )));
            }
        }
        Ok(())
    }

    fn utility_scaled(&self, scale: f64) -> f64 {
        let s = self.sigma_curv;
        let mut acc = Neumaier::default();
        let mut discount = 1.0;
        for t in 0..self.consumption.len() {
            let arg = self.consumption[t] * scale - self.disutility(t);
            let u = if arg > 0.0 {
                arg.powf(1.0 - s) / (1.0 - s)
            } else if s > 1.0 {
                return f64::NEG_INFINITY;
            } else {
                0.0
            };
            acc.add(discount * u);
            discount *= self.beta_disc;
        }
        acc.sum()
    }
}

/// `sum_t beta^t (c_t - n_t^(1+rho)/(1+rho))^(1-sigma) / (1-sigma)`.
pub fn lifetime_utility(path: &HouseholdPath) -> Result<f64> {
    path.validate()?;
    Ok(path.utility_scaled(1.0))
}

/// Uniform proportional consumption change `eps` that makes the factual
/// path as good as the counterfactual one.
pub fn equivalent_variation(
    factual: &HouseholdPath,
    counterfactual: &HouseholdPath,
) -> Result<f64> {
    factual.validate()?;
    counterfactual.validate()?;
    if factual.consumption.len() != counterfactual.consumption.len()
        || factual.sigma_curv != counterfactual.sigma_curv
        || factual.beta_disc != counterfactual.beta_disc
    {
        return Err(Error::domain(
            "paths must share horizon, curvature and discount factor",
        ));
    }
    let target = counterfactual.utility_scaled(1.0);
    let gap = |eps: f64| factual.utility_scaled(1.0 + eps) - target;
    if gap(0.0) == 0.0 {
        return Ok(0.0);
    }

    let (mut lo, mut hi) = (EV_LOWER, EV_UPPER);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if !(g_lo <= 0.0 && g_hi >= 0.0) {
        return Err(Error::Estimation(format!(
            "no equivalent variation in ({EV_LOWER}, {EV_UPPER}): utility gap {g_lo:e} .. {g_hi:e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g.abs() < EV_TOL * target.abs().max(1.0) && hi - lo < 1e-14 {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Starting levels for re-simulated paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAnchors {
    pub mu_skill_share: f64,
    pub wage_premium: f64,
}

impl Default for PathAnchors {
    fn default() -> Self {
        PathAnchors {
            mu_skill_share: 0.42,
            wage_premium: 2.40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub factual: HouseholdPath,
    pub counterfactual: HouseholdPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountyPaths {
    pub county_id: i64,
    pub skilled: PathPair,
    pub unskilled: PathPair,
    /// Mean legal employment, for employment-weighted averages.
    pub emp_weight: f64,
    /// Whether the county ever had a locally filed case.
    pub has_local_bankruptcy: bool,
}

struct TypePaths {
    w_s: Vec<f64>,
    w_u: Vec<f64>,
    n_s: Vec<f64>,
    n_u: Vec<f64>,
}

/// Noise-free log-difference paths driven by `shocks`, starting from a
/// bankruptcy-free steady state the period before the sample.
fn deterministic_paths(
    shocks: &[f64],
    p: &ModelParamsGmm,
    d: &DemandParams,
    pi: f64,
    anchors: &PathAnchors,
) -> Result<TypePaths> {
    let mu = anchors.mu_skill_share;
    let mut ln = [anchors.wage_premium.ln(), 0.0, mu.ln(), (1.0 - mu).ln()];
    let mut out = TypePaths {
        w_s: Vec::with_capacity(shocks.len()),
        w_u: Vec::with_capacity(shocks.len()),
        n_s: Vec::with_capacity(shocks.len()),
        n_u: Vec::with_capacity(shocks.len()),
    };
    let mut prev = 0.0;
    for &br in shocks {
        let dtheta = model::delta_theta(d, br, prev)?;
        let ch = model::log_diff_equilibrium(dtheta, pi, p, [0.0; 4])?;
        ln[0] += ch.dw_s;
        ln[1] += ch.dw_u;
        ln[2] += ch.dn_s;
        ln[3] += ch.dn_u;
        out.w_s.push(ln[0].exp());
        out.w_u.push(ln[1].exp());
        out.n_s.push(ln[2].exp());
        out.n_u.push(ln[3].exp());
        prev = br;
    }
    Ok(out)
}

fn household(w: &[f64], n: &[f64], rho: f64, p: &ModelParamsGmm) -> Result<HouseholdPath> {
    let c = w.iter().zip(n).map(|(w, n)| w * n).collect();
    HouseholdPath::new(c, n.to_vec(), rho, p.sigma_curv, p.beta_disc)
}

/// Factual paths use locally filed cases `BR - FS`; counterfactual paths
/// treat every case as filed locally. Both are simulated without
/// structural noise. Counties must cover consecutive years.
pub fn counterfactual_no_fs(
    panel: &CountyYearPanel,
    p: &ModelParamsGmm,
    d: &DemandParams,
    anchors: &PathAnchors,
) -> Result<Vec<CountyPaths>> {
    p.validate()?;
    d.validate()?;
    let mu = anchors.mu_skill_share;
    if !(mu > 0.0 && mu < 1.0) || !(anchors.wage_premium > 0.0) {
        return Err(Error::domain(
            "anchors need a skill share in (0,1) and a positive premium",
        ));
    }
    let pi = model::skill_share(mu, 1.0 - mu, p)?;
    panel
        .by_county()
        .par_iter()
        .map(|rows| {
            let county_id = rows[0].county_id;
            if rows.windows(2).any(|w| w[1].year != w[0].year + 1) {
                return Err(Error::Invariant(format!(
                    "county {county_id} has gaps in its years; welfare paths need consecutive years"
                )));
            }
            let local: Vec<f64> = rows.iter().map(|r| r.n_local() as f64).collect();
            let all: Vec<f64> = rows.iter().map(|r| r.n_br as f64).collect();
            let fact = deterministic_paths(&local, p, d, pi, anchors)?;
            let cf = deterministic_paths(&all, p, d, pi, anchors)?;
            Ok(CountyPaths {
                county_id,
                skilled: PathPair {
                    factual: household(&fact.w_s, &fact.n_s, p.rho_s, p)?,
                    counterfactual: household(&cf.w_s, &cf.n_s, p.rho_s, p)?,
                },
                unskilled: PathPair {
                    factual: household(&fact.w_u, &fact.n_u, p.rho_u, p)?,
                    counterfactual: household(&cf.w_u, &cf.n_u, p.rho_u, p)?,
                },
                emp_weight: rows.iter().map(|r| r.emp_legal).sum::<f64>() / rows.len() as f64,
                has_local_bankruptcy: rows.iter().any(|r| r.n_local() > 0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountyEv {
    pub county_id: i64,
    pub ev_skilled: f64,
    pub ev_unskilled: f64,
    pub emp_weight: f64,
    pub included: bool,
}

pub fn county_evs(paths: &[CountyPaths]) -> Result<Vec<CountyEv>> {
    paths
        .par_iter()
        .map(|c| {
            Ok(CountyEv {
                county_id: c.county_id,
                ev_skilled: equivalent_variation(&c.skilled.factual, &c.skilled.counterfactual)?,
                ev_unskilled: equivalent_variation(
                    &c.unskilled.factual,
                    &c.unskilled.counterfactual,
                )?,
                emp_weight: c.emp_weight,
                included: c.has_local_bankruptcy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvWeighting {
    #[default]
    County,
    Employment,
}

impl EvWeighting {
    pub fn as_str(self) -> &'static str {
        match self {
            EvWeighting::County => "county",
            EvWeighting::Employment => "employment",
        }
    }
}

impl std::str::FromStr for EvWeighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "county" => Ok(EvWeighting::County),
            "employment" => Ok(EvWeighting::Employment),
            other => Err(format!(
                "unknown EV weighting '{other}' (county, employment)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvSummary {
    pub ev_skilled: f64,
    pub ev_unskilled: f64,
    pub n_counties: usize,
}

/// Average over counties that ever had a locally filed case.
pub fn aggregate_ev(evs: &[CountyEv], weighting: EvWeighting) -> EvSummary {
    let mut s = Neumaier::default();
    let mut u = Neumaier::default();
    let mut w = Neumaier::default();
    let mut n = 0;
    for e in evs.iter().filter(|e| e.included) {
        let weight = match weighting {
            EvWeighting::County => 1.0,
            EvWeighting::Employment => e.emp_weight,
        };
        s.add(weight * e.ev_skilled);
        u.add(weight * e.ev_unskilled);
        w.add(weight);
        n += 1;
    }
    let total = w.sum();
    if n == 0 || total == 0.0 {
        return EvSummary {
            ev_skilled: 0.0,
            ev_unskilled: 0.0,
            n_counties: 0,
        };
    }
    EvSummary {
        ev_skilled: s.sum() / total,
        ev_unskilled: u.sum() / total,
        n_counties: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearGains {
    pub year: i32,
    pub potential: f64,
    pub lost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainsLost {
    pub by_year: Vec<YearGains>,
    pub jobs_lost_per_year: f64,
    pub potential_per_year: f64,
    pub share_of_potential: f64,
}

/// Potential gain `g_br n_br emp_legal` and loss `-g_fs n_fs emp_legal`
/// per county-year, summed by year.
pub fn gains_lost(gamma_br: f64, gamma_fs: f64, panel: &CountyYearPanel) -> GainsLost {
    let mut years: std::collections::BTreeMap<i32, (Neumaier, Neumaier)> = Default::default();
    for r in panel.rows() {
        let e = years.entry(r.year).or_default();
        e.0.add(gamma_br * r.n_br as f64 * r.emp_legal);
        e.1.add(-gamma_fs * r.n_fs as f64 * r.emp_legal);
    }
    let by_year: Vec<YearGains> = years
        .into_iter()
        .map(|(year, (p, l))| YearGains {
            year,
            potential: p.sum(),
            lost: l.sum(),
        })
        .collect();
    let mut potential = Neumaier::default();
    let mut lost = Neumaier::default();
    for y in &by_year {
        potential.add(y.potential);
        lost.add(y.lost);
    }
    let years = by_year.len().max(1) as f64;
    let share = if potential.sum() == 0.0 {
        0.0
    } else {
        lost.sum() / potential.sum()
    };
    GainsLost {
        jobs_lost_per_year: lost.sum() / years,
        potential_per_year: potential.sum() / years,
        share_of_potential: share,
        by_year,
    }
}

/// Reads the `n_br` and `n_fs` coefficients from a regression.
pub fn gains_lost_from_result(
    result: &RegressionResult,
    panel: &CountyYearPanel,
) -> Result<GainsLost> {
    Ok(gains_lost(
        result.coef("n_br")?,
        result.coef("n_fs")?,
        panel,
    ))
}
