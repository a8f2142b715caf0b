//! Synthetic county-year panels and their on-disk format.
//!
//! Every county draws from its own ChaCha stream keyed by `(rng_seed,
//! county_id, purpose)`, so generation order and worker count never change a
//! panel. District-year effects use streams keyed by district id.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, DemandParams, ModelParamsGmm};

/// Column order of the panel file.
pub const PANEL_HEADER: [&str; 14] = [
    "county_id",
    "district_id",
    "state_id",
    "year",
    "n_br",
    "n_fs",
    "emp_legal",
    "emp_nonlegal",
    "population",
    "wage_avg",
    "emp_skilled",
    "emp_unskilled",
    "wage_skilled",
    "wage_unskilled",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub county_id: i64,
    pub district_id: i64,
    pub state_id: i64,
    pub year: i32,
    /// Active Chapter 11 filings of firms headquartered in the county.
    pub n_br: u32,
    /// The subset of `n_br` filed outside the home district.
    pub n_fs: u32,
    pub emp_legal: f64,
    pub emp_nonlegal: f64,
    pub population: f64,
    pub wage_avg: f64,
    pub emp_skilled: f64,
    pub emp_unskilled: f64,
    pub wage_skilled: f64,
    pub wage_unskilled: f64,
}

impl PanelRow {
    fn check(&self) -> std::result::Result<(), String> {
        if self.n_fs > self.n_br {
            return Err(format!(
                "county {} year {}: n_fs ({}) exceeds n_br ({})",
                self.county_id, self.year, self.n_fs, self.n_br
            ));
        }
        let positives = [
            ("emp_legal", self.emp_legal),
            ("emp_nonlegal", self.emp_nonlegal),
            ("population", self.population),
            ("wage_avg", self.wage_avg),
            ("emp_skilled", self.emp_skilled),
            ("emp_unskilled", self.emp_unskilled),
            ("wage_skilled", self.wage_skilled),
            ("wage_unskilled", self.wage_unskilled),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!(
                    "county {} year {}: {name} must be positive, got {v}",
                    self.county_id, self.year
                ));
            }
        }
        Ok(())
    }

    /// Bankruptcies filed locally.
    pub fn n_local(&self) -> u32 {
        self.n_br - self.n_fs
    }
}

/// A county-year panel, kept sorted by `(county_id, year)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyYearPanel {
    rows: Vec<PanelRow>,
}

/// Incremental checker shared by construction and file reading.
#[derive(Default)]
struct PanelChecker {
    seen: HashMap<(i64, i32), usize>,
    geography: HashMap<i64, (i64, i64)>,
}

impl PanelChecker {
    fn push(&mut self, index: usize, row: &PanelRow) -> std::result::Result<(), String> {
        row.check()?;
        if let Some(first) = self.seen.insert((row.county_id, row.year), index) {
            return Err(format!(
                "duplicate (county {}, year {}); first seen at record {}",
                row.county_id,
                row.year,
                first + 1
            ));
        }
        let geo = (row.district_id, row.state_id);
        match self.geography.get(&row.county_id) {
            Some(&known) if known != geo => Err(format!(
                "county {} maps to district/state {:?} and {:?}",
                row.county_id, known, geo
            )),
            Some(_) => Ok(()),
            None => {
                self.geography.insert(row.county_id, geo);
                Ok(())
            }
        }
    }
}

impl CountyYearPanel {
    pub fn new(mut rows: Vec<PanelRow>) -> Result<Self> {
        let mut checker = PanelChecker::default();
        for (i, row) in rows.iter().enumerate() {
            checker.push(i, row).map_err(Error::Invariant)?;
        }
        rows.sort_by_key(|r| (r.county_id, r.year));
        Ok(CountyYearPanel { rows })
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn county_ids(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.rows.iter().map(|r| r.county_id).collect();
        ids.dedup();
        ids
    }

    /// Rows grouped by county, each group in year order.
    pub fn by_county(&self) -> Vec<&[PanelRow]> {
        self.rows
            .chunk_by(|a, b| a.county_id == b.county_id)
            .collect()
    }

    /// Numeric column by name. Besides the file columns, accepts `n_local`
    /// (`n_br - n_fs`), `ln_<col>`, `<col>_lag<k>` and `<col>_lead<k>`.
    /// Undefined entries (missing lag, log of zero) are `NaN`.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(base) = name.strip_prefix("ln_") {
            return Ok(self
                .column(base)?
                .into_iter()
                .map(|v| if v > 0.0 { v.ln() } else { f64::NAN })
                .collect());
        }
        for (marker, sign) in [("_lag", -1i32), ("_lead", 1i32)] {
            if let Some(pos) = name.rfind(marker) {
                let digits = &name[pos + marker.len()..];
                if let Ok(k) = digits.parse::<i32>() {
                    let base = self.column(&name[..pos])?;
                    return Ok(self.shifted(&base, sign * k));
                }
            }
        }
        let get: fn(&PanelRow) -> f64 = match name {
            "county_id" => |r| r.county_id as f64,
            "district_id" => |r| r.district_id as f64,
            "state_id" => |r| r.state_id as f64,
            "year" => |r| r.year as f64,
            "n_br" => |r| r.n_br as f64,
            "n_fs" => |r| r.n_fs as f64,
            "n_local" => |r| r.n_local() as f64,
            "emp_legal" => |r| r.emp_legal,
            "emp_nonlegal" => |r| r.emp_nonlegal,
            "population" => |r| r.population,
            "wage_avg" => |r| r.wage_avg,
            "emp_skilled" => |r| r.emp_skilled,
            "emp_unskilled" => |r| r.emp_unskilled,
            "wage_skilled" => |r| r.wage_skilled,
            "wage_unskilled" => |r| r.wage_unskilled,
            _ => return Err(Error::domain(format!("unknown panel column '{name}'"))),
        };
        Ok(self.rows.iter().map(get).collect())
    }

    /// Value of `values` at `(county, year + offset)` for each row.
    fn shifted(&self, values: &[f64], offset: i32) -> Vec<f64> {
        let index: HashMap<(i64, i32), usize> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.county_id, r.year), i))
            .collect();
        self.rows
            .iter()
            .map(|r| {
                index
                    .get(&(r.county_id, r.year + offset))
                    .map_or(f64::NAN, |&j| values[j])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKind {
    Structural,
    ReducedForm,
}

impl DgpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DgpKind::Structural => "structural",
            DgpKind::ReducedForm => "reduced_form",
        }
    }
}

impl std::str::FromStr for DgpKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "structural" => Ok(DgpKind::Structural),
            "reduced_form" => Ok(DgpKind::ReducedForm),
            other => Err(format!(
                "unknown dgp_kind '{other}' (structural | reduced_form)"
            )),
        }
    }
}

/// Synthetic-panel settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_counties: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub counties_per_district: usize,
    pub districts_per_state: usize,
    /// Mean of the bankruptcy count process.
    pub br_rate: f64,
    /// Log-scale standard deviation of the county rate multiplier.
    pub br_rate_dispersion: f64,
    /// Probability that a case is filed outside the home district.
    pub fs_prob: f64,
    pub noise_sd_logemp: f64,
    pub noise_sd_logwage: f64,
    pub rng_seed: u64,
    pub dgp_kind: DgpKind,
    pub true_gamma_br: f64,
    pub true_gamma_fs: f64,
    pub true_beta_log_pop: f64,
    pub true_beta_log_nonlegal: f64,
    /// Period-0 skilled share of hours in the structural DGP.
    pub mu_skill_share: f64,
    /// Period-0 skilled-to-unskilled wage ratio in the structural DGP.
    pub wage_premium: f64,
    /// Probability that a row is dropped; 0 keeps the panel balanced.
    pub missing_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_counties: 237,
            n_years: 11,
            first_year: 1991,
            counties_per_district: 5,
            districts_per_state: 2,
            br_rate: 0.5,
            br_rate_dispersion: 0.5,
            fs_prob: 0.276,
            noise_sd_logemp: 0.05,
            noise_sd_logwage: 0.05,
            rng_seed: 20_240_601,
            dgp_kind: DgpKind::Structural,
            true_gamma_br: 0.01,
            true_gamma_fs: -0.011,
            true_beta_log_pop: 0.3,
            true_beta_log_nonlegal: 0.07,
            mu_skill_share: 0.42,
            wage_premium: 2.40,
            missing_prob: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::domain(m));
        if self.n_counties == 0 || self.n_years == 0 {
            return fail("n_counties and n_years must be positive".into());
        }
        if self.counties_per_district == 0 || self.districts_per_state == 0 {
            return fail("counties_per_district and districts_per_state must be positive".into());
        }
        if !(self.br_rate >= 0.0 && self.br_rate.is_finite()) {
            return fail(format!("br_rate must be nonnegative, got {}", self.br_rate));
        }
        if !(self.br_rate_dispersion >= 0.0) {
            return fail("br_rate_dispersion must be nonnegative".into());
        }
        for (name, v) in [
            ("fs_prob", self.fs_prob),
            ("missing_prob", self.missing_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.missing_prob >= 1.0 {
            return fail("missing_prob must be below 1".into());
        }
        if !(self.noise_sd_logemp >= 0.0 && self.noise_sd_logwage >= 0.0) {
            return fail("noise standard deviations must be nonnegative".into());
        }
        if !(self.mu_skill_share > 0.0 && self.mu_skill_share < 1.0) {
            return fail("mu_skill_share must lie in (0, 1)".into());
        }
        if !(self.wage_premium > 0.0) {
            return fail("wage_premium must be positive".into());
        }
        Ok(())
    }

    pub fn county_ids(&self) -> impl Iterator<Item = i64> {
        1..=self.n_counties as i64
    }

    pub fn district_of(&self, county_id: i64) -> i64 {
        (county_id - 1) / self.counties_per_district as i64 + 1
    }

    pub fn state_of(&self, county_id: i64) -> i64 {
        (self.district_of(county_id) - 1) / self.districts_per_state as i64 + 1
    }

    fn year(&self, t: usize) -> i32 {
        self.first_year + t as i32
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Shocks = 0,
    StructuralNoise = 1,
    ReducedFormNoise = 2,
    Covariates = 3,
    Missing = 4,
    DistrictEffects = 5,
}

fn stream_rng(seed: u64, id: i64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((id as u64) << 3) | purpose as u64);
    rng
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Bankruptcy and forum-shopping counts for one county, in year order.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyShocks {
    pub county_id: i64,
    pub n_br: Vec<u32>,
    pub n_fs: Vec<u32>,
}

fn county_shocks(cfg: &SynthConfig, county_id: i64) -> CountyShocks {
    let mut rng = stream_rng(cfg.rng_seed, county_id, Stream::Shocks);
    let disp = cfg.br_rate_dispersion;
    let multiplier = (disp * std_normal(&mut rng) - 0.5 * disp * disp).exp();
    let rate = cfg.br_rate * multiplier;
    let poisson = (rate > 0.0).then(|| Poisson::new(rate).expect("positive finite rate"));
    let mut n_br = Vec::with_capacity(cfg.n_years);
    let mut n_fs = Vec::with_capacity(cfg.n_years);
    for _ in 0..cfg.n_years {
        let br = poisson.as_ref().map_or(0, |d| d.sample(&mut rng) as u32);
        let fs = if br == 0 {
            0
        } else {
            Binomial::new(br as u64, cfg.fs_prob)
                .expect("probability validated")
                .sample(&mut rng) as u32
        };
        n_br.push(br);
        n_fs.push(fs);
    }
    CountyShocks {
        county_id,
        n_br,
        n_fs,
    }
}

/// Draws `(n_br, n_fs)` for every county-year.
///
/// Counts are Poisson with a mean-one lognormal county multiplier on
/// `br_rate`; forum-shopped cases are binomial thinnings with `fs_prob`.
pub fn simulate_shocks(cfg: &SynthConfig) -> Result<Vec<CountyShocks>> {
    cfg.validate()?;
    let ids: Vec<i64> = cfg.county_ids().collect();
    Ok(ids.par_iter().map(|&c| county_shocks(cfg, c)).collect())
}

struct Covariates {
    population: Vec<f64>,
    emp_nonlegal: Vec<f64>,
    legal_scale: f64,
}

fn county_covariates(cfg: &SynthConfig, county_id: i64) -> Covariates {
    let mut rng = stream_rng(cfg.rng_seed, county_id, Stream::Covariates);
    let base = 11.0 + std_normal(&mut rng);
    let legal_scale = (base - 5.5 + 0.3 * std_normal(&mut rng)).exp();
    let mut population = Vec::with_capacity(cfg.n_years);
    let mut emp_nonlegal = Vec::with_capacity(cfg.n_years);
    for t in 0..cfg.n_years {
        let ln_pop = base + 0.01 * t as f64 + 0.02 * std_normal(&mut rng);
        population.push(ln_pop.exp());
        emp_nonlegal.push((ln_pop + 0.45f64.ln() + 0.03 * std_normal(&mut rng)).exp());
    }
    Covariates {
        population,
        emp_nonlegal,
        legal_scale,
    }
}

fn apply_missing(cfg: &SynthConfig, county_id: i64, rows: Vec<PanelRow>) -> Vec<PanelRow> {
    if cfg.missing_prob == 0.0 {
        return rows;
    }
    let mut rng = stream_rng(cfg.rng_seed, county_id, Stream::Missing);
    rows.into_iter()
        .filter(|_| rng.random::<f64>() >= cfg.missing_prob)
        .collect()
}

/// Model-implied panel: each year's log-changes of skilled/unskilled wages
/// and hours solve the four log-differenced demand and supply equations,
/// driven by the change in the demand shifter from locally filed cases plus
/// independent normal errors. Wage errors use `noise_sd_logwage`, hours
/// errors `noise_sd_logemp`. Levels start from `(mu, 1 - mu)` hours and
/// wages `(wage_premium, 1)`.
pub fn simulate_structural_panel(
    cfg: &SynthConfig,
    p: &ModelParamsGmm,
    d: &DemandParams,
) -> Result<CountyYearPanel> {
    cfg.validate()?;
    p.validate()?;
    d.validate()?;
    if cfg.dgp_kind != DgpKind::Structural {
        return Err(Error::domain(
            "simulate_structural_panel needs dgp_kind = structural",
        ));
    }
    let mu = cfg.mu_skill_share;
    let pi = model::skill_share(mu, 1.0 - mu, p)?;
    let ids: Vec<i64> = cfg.county_ids().collect();

    let counties: Result<Vec<Vec<PanelRow>>> = ids
        .par_iter()
        .map(|&county_id| {
            let shocks = county_shocks(cfg, county_id);
            let cov = county_covariates(cfg, county_id);
            let mut rng = stream_rng(cfg.rng_seed, county_id, Stream::StructuralNoise);
            let mut ln = [cfg.wage_premium.ln(), 0.0, mu.ln(), (1.0 - mu).ln()];
            let mut rows = Vec::with_capacity(cfg.n_years);
            for t in 0..cfg.n_years {
                if t > 0 {
                    let local_t = (shocks.n_br[t] - shocks.n_fs[t]) as f64;
                    let local_tm1 = (shocks.n_br[t - 1] - shocks.n_fs[t - 1]) as f64;
                    let dtheta = model::delta_theta(d, local_t, local_tm1)?;
                    let draws: [f64; 4] = std::array::from_fn(|_| std_normal(&mut rng));
                    let errors = [
                        cfg.noise_sd_logwage * draws[0],
                        cfg.noise_sd_logwage * draws[1],
                        cfg.noise_sd_logemp * draws[2],
                        cfg.noise_sd_logemp * draws[3],
                    ];
                    let ch = model::log_diff_equilibrium(dtheta, pi, p, errors)?;
                    ln[0] += ch.dw_s;
                    ln[1] += ch.dw_u;
                    ln[2] += ch.dn_s;
                    ln[3] += ch.dn_u;
                }
                let [w_s, w_u, n_s, n_u] = ln.map(f64::exp);
                rows.push(PanelRow {
                    county_id,
                    district_id: cfg.district_of(county_id),
                    state_id: cfg.state_of(county_id),
                    year: cfg.year(t),
                    n_br: shocks.n_br[t],
                    n_fs: shocks.n_fs[t],
                    emp_legal: cov.legal_scale * (n_s + n_u),
                    emp_nonlegal: cov.emp_nonlegal[t],
                    population: cov.population[t],
                    wage_avg: (n_s * w_s + n_u * w_u) / (n_s + n_u),
                    emp_skilled: n_s,
                    emp_unskilled: n_u,
                    wage_skilled: w_s,
                    wage_unskilled: w_u,
                });
            }
            Ok(apply_missing(cfg, county_id, rows))
        })
        .collect();
    CountyYearPanel::new(counties?.into_iter().flatten().collect())
}

/// Fixed effects drawn by the reduced-form DGP.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFormTruth {
    pub intercept: f64,
    pub county_effect: BTreeMap<i64, f64>,
    pub district_year_effect: BTreeMap<(i64, i32), f64>,
}

const RF_INTERCEPT: f64 = 2.0;
const RF_COUNTY_SD: f64 = 0.5;
const RF_DISTRICT_YEAR_SD: f64 = 0.05;

fn district_year_effects(cfg: &SynthConfig) -> BTreeMap<(i64, i32), f64> {
    let n_districts = cfg.district_of(cfg.n_counties as i64);
    let mut out = BTreeMap::new();
    for district in 1..=n_districts {
        let mut rng = stream_rng(cfg.rng_seed, district, Stream::DistrictEffects);
        for t in 0..cfg.n_years {
            out.insert(
                (district, cfg.year(t)),
                RF_DISTRICT_YEAR_SD * std_normal(&mut rng),
            );
        }
    }
    out
}

/// Reduced-form panel with known treatment effects:
/// `ln emp_legal = c + a_county + b_district_year + g_br n_br + g_fs n_fs
///  + b_pop ln population + b_nl ln emp_nonlegal + e`.
pub fn simulate_reduced_form_panel(cfg: &SynthConfig) -> Result<CountyYearPanel> {
    simulate_reduced_form_with_truth(cfg).map(|(panel, _)| panel)
}

pub fn simulate_reduced_form_with_truth(
    cfg: &SynthConfig,
) -> Result<(CountyYearPanel, ReducedFormTruth)> {
    cfg.validate()?;
    if cfg.dgp_kind != DgpKind::ReducedForm {
        return Err(Error::domain(
            "simulate_reduced_form_panel needs dgp_kind = reduced_form",
        ));
    }
    let dy = district_year_effects(cfg);
    let ids: Vec<i64> = cfg.county_ids().collect();
    let counties: Vec<(i64, f64, Vec<PanelRow>)> = ids
        .par_iter()
        .map(|&county_id| {
            let shocks = county_shocks(cfg, county_id);
            let cov = county_covariates(cfg, county_id);
            let mut rng = stream_rng(cfg.rng_seed, county_id, Stream::ReducedFormNoise);
            let county_effect = RF_COUNTY_SD * std_normal(&mut rng);
            let district = cfg.district_of(county_id);
            let rows = (0..cfg.n_years)
                .map(|t| {
                    let year = cfg.year(t);
                    let (br, fs) = (shocks.n_br[t], shocks.n_fs[t]);
                    let ln_emp = RF_INTERCEPT
                        + county_effect
                        + dy[&(district, year)]
                        + cfg.true_gamma_br * br as f64
                        + cfg.true_gamma_fs * fs as f64
                        + cfg.true_beta_log_pop * cov.population[t].ln()
                        + cfg.true_beta_log_nonlegal * cov.emp_nonlegal[t].ln()
                        + cfg.noise_sd_logemp * std_normal(&mut rng);
                    let emp_legal = ln_emp.exp();
                    let wage_avg = (3.0 + cfg.noise_sd_logwage * std_normal(&mut rng)).exp();
                    PanelRow {
                        county_id,
                        district_id: district,
                        state_id: cfg.state_of(county_id),
                        year,
                        n_br: br,
                        n_fs: fs,
                        emp_legal,
                        emp_nonlegal: cov.emp_nonlegal[t],
                        population: cov.population[t],
                        wage_avg,
                        emp_skilled: cfg.mu_skill_share * emp_legal,
                        emp_unskilled: (1.0 - cfg.mu_skill_share) * emp_legal,
                        wage_skilled: wage_avg * cfg.wage_premium.sqrt(),
                        wage_unskilled: wage_avg / cfg.wage_premium.sqrt(),
                    }
                })
                .collect();
            (
                county_id,
                county_effect,
                apply_missing(cfg, county_id, rows),
            )
        })
        .collect();

    let truth = ReducedFormTruth {
        intercept: RF_INTERCEPT,
        county_effect: counties.iter().map(|(c, e, _)| (*c, *e)).collect(),
        district_year_effect: dy,
    };
    let panel = CountyYearPanel::new(counties.into_iter().flat_map(|(_, _, r)| r).collect())?;
    Ok((panel, truth))
}

/// Simulates according to `cfg.dgp_kind`.
pub fn simulate_panel(
    cfg: &SynthConfig,
    p: &ModelParamsGmm,
    d: &DemandParams,
) -> Result<CountyYearPanel> {
    match cfg.dgp_kind {
        DgpKind::Structural => simulate_structural_panel(cfg, p, d),
        DgpKind::ReducedForm => simulate_reduced_form_panel(cfg),
    }
}

pub fn write_panel(panel: &CountyYearPanel, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for row in &panel.rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io_err)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: match kind {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                other => format!("{other:?}"),
            },
        },
    }
}

/// Reads a panel file, rejecting malformed rows, `n_fs > n_br`, duplicate
/// county-years and counties that change district or state.
pub fn read_panel(path: &Path) -> Result<CountyYearPanel> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(PANEL_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header must be '{}'", PANEL_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    let mut checker = PanelChecker::default();
    for (i, record) in reader.deserialize::<PanelRow>().enumerate() {
        let row = record.map_err(|e| csv_error(path, e))?;
        checker.push(i, &row).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message,
        })?;
        rows.push(row);
    }
    rows.sort_by_key(|r| (r.county_id, r.year));
    Ok(CountyYearPanel { rows })
}
