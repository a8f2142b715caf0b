//! Run configuration: sectioned `key = value` files.
//!
//! ```text
//! # comment
//! [simulate]
//! n_counties = 237
//! [io]
//! seed = 7
//! ```
//!
//! Keys before the first section header belong to `[simulate]`, so a flat
//! file of synthetic-panel settings is also a valid configuration. Unknown
//! sections and keys are rejected with the offending line number.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fe::{FeDim, RegressionSpec};
use crate::gmm::{self, GmmCalibration, GmmSpec, InstrumentTerm};
use crate::model::{self, DemandParams, ModelParamsClassic, ModelParamsGmm};
use crate::panel::SynthConfig;
use crate::welfare::{EvWeighting, PathAnchors};

/// Model parameters for both parameterisations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    /// Calibration target for the skilled share of hours.
    pub mu_skill_share: f64,
    /// Skilled relative efficiency, also the calibration wage premium.
    pub a_rel: f64,
    pub subst_elasticity: f64,
    pub alpha: f64,
    pub inv_rho_s: f64,
    pub inv_rho_u: f64,
    pub sigma_curv: f64,
    pub beta_disc: f64,
    pub classic: ModelParamsClassic,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mu_skill_share: 0.42,
            a_rel: 2.40,
            subst_elasticity: 1.4,
            alpha: 1.293,
            inv_rho_s: 0.0853,
            inv_rho_u: 0.264,
            sigma_curv: 2.0,
            beta_disc: 0.96,
            classic: ModelParamsClassic {
                gamma_disutility: 1.0,
                rho_s: 1.0,
                rho_u: 0.5,
                delta: 1.4,
                a_s: 2.0,
                a_u: 1.0,
                sigma_curv: 2.0,
                beta_disc: 0.96,
            },
        }
    }
}

impl ModelSection {
    pub fn calibration(&self) -> Result<model::Calibration> {
        model::calibrate_gmm(self.mu_skill_share, self.a_rel, self.subst_elasticity)
    }

    pub fn gmm_params(&self) -> Result<ModelParamsGmm> {
        let cal = self.calibration()?;
        if !(self.inv_rho_s > 0.0 && self.inv_rho_u > 0.0) {
            return Err(Error::domain("inv_rho_s and inv_rho_u must be positive"));
        }
        let p = ModelParamsGmm {
            zeta: cal.zeta,
            share_lambda: cal.share_lambda,
            a_rel: self.a_rel,
            alpha: self.alpha,
            rho_s: 1.0 / self.inv_rho_s,
            rho_u: 1.0 / self.inv_rho_u,
            sigma_curv: self.sigma_curv,
            beta_disc: self.beta_disc,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressSection {
    pub spec: RegressionSpec,
    /// Linear combinations to test, each a list of `(column, weight)`.
    pub lincom: Vec<Vec<(String, f64)>>,
    /// Also fit unskilled employment and wages and report the implied
    /// elasticity of substitution.
    pub delta: bool,
}

impl Default for RegressSection {
    fn default() -> Self {
        RegressSection {
            spec: RegressionSpec::default(),
            lincom: vec![vec![("n_br".into(), 1.0), ("n_fs".into(), 1.0)]],
            delta: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSection {
    pub wage_instruments: Vec<InstrumentTerm>,
    pub labor_instruments: Vec<InstrumentTerm>,
    pub include_constant_wage: bool,
    pub include_constant_labor: bool,
    pub detrend_controls: Vec<String>,
    pub detrend_absorb: Vec<FeDim>,
    /// Cross-check the closed-form stages with a simplex search.
    pub numeric_check: bool,
}

impl Default for GmmSection {
    fn default() -> Self {
        let base = GmmSpec::baseline(GmmCalibration {
            zeta: 0.5,
            pi_share: 0.5,
        });
        GmmSection {
            wage_instruments: base.wage_instruments,
            labor_instruments: base.labor_instruments,
            include_constant_wage: base.include_constant_wage,
            include_constant_labor: base.include_constant_labor,
            detrend_controls: vec!["ln_population".into(), "ln_emp_nonlegal".into()],
            detrend_absorb: vec![],
            numeric_check: true,
        }
    }
}

impl GmmSection {
    pub fn spec(&self, calib: GmmCalibration) -> GmmSpec {
        GmmSpec {
            wage_instruments: self.wage_instruments.clone(),
            labor_instruments: self.labor_instruments.clone(),
            include_constant_wage: self.include_constant_wage,
            include_constant_labor: self.include_constant_labor,
            calib,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareSection {
    pub sigma_regimes: Vec<f64>,
    /// Last period of each path; 0 uses every panel year.
    pub horizon: usize,
    pub weighting: EvWeighting,
    pub anchors: PathAnchors,
}

impl Default for WelfareSection {
    fn default() -> Self {
        WelfareSection {
            sigma_regimes: vec![2.0, 0.5],
            horizon: 0,
            weighting: EvWeighting::County,
            anchors: PathAnchors::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoSection {
    pub seed: u64,
    pub panel: String,
    pub out_dir: String,
    pub chart: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            seed: 20_240_601,
            panel: "panel.csv".into(),
            out_dir: "run".into(),
            chart: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub simulate: SynthConfig,
    pub model: ModelSection,
    pub demand: DemandParams,
    pub regress: RegressSection,
    pub gmm: GmmSection,
    pub welfare: WelfareSection,
    pub io: IoSection,
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("cannot parse '{v}' as a number"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parsed_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    list(v)
        .iter()
        .map(|s| s.parse::<T>().map_err(|e| e.to_string()))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses `n_br + n_fs; 2*n_br - n_fs` into weight lists.
pub fn parse_lincom(v: &str) -> std::result::Result<Vec<Vec<(String, f64)>>, String> {
    let mut out = Vec::new();
    for expr in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let mut terms = Vec::new();
        let normalized = expr.replace('-', "+-");
        for raw in normalized
            .split('+')
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            let (sign, body) = match raw.strip_prefix('-') {
                Some(rest) => (-1.0, rest.trim()),
                None => (1.0, raw),
            };
            let (weight, name) = match body.split_once('*') {
                Some((w, n)) => (num::<f64>(w.trim())?, n.trim()),
                None => (1.0, body),
            };
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(format!("bad lincom term '{raw}'"));
            }
            terms.push((name.to_string(), sign * weight));
        }
        if terms.is_empty() {
            return Err(format!("empty lincom expression '{expr}'"));
        }
        out.push(terms);
    }
    Ok(out)
}

pub fn format_lincom(exprs: &[Vec<(String, f64)>]) -> String {
    exprs
        .iter()
        .map(|terms| {
            terms
                .iter()
                .enumerate()
                .map(|(i, (name, w))| {
                    let sign = if *w < 0.0 {
                        "- "
                    } else if i > 0 {
                        "+ "
                    } else {
                        ""
                    };
                    let mag = w.abs();
                    if mag == 1.0 {
                        format!("{sign}{name}")
                    } else {
                        format!("{sign}{mag}*{name}")
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl RunConfig {
    fn set(&mut self, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        let unknown = || Err(format!("unknown key '{key}' in [{section}]"));
        match section {
            "simulate" => {
                let s = &mut self.simulate;
                match key {
                    "n_counties" => s.n_counties = num(v)?,
                    "n_years" => s.n_years = num(v)?,
                    "first_year" => s.first_year = num(v)?,
                    "counties_per_district" => s.counties_per_district = num(v)?,
                    "districts_per_state" => s.districts_per_state = num(v)?,
                    "br_rate" => s.br_rate = num(v)?,
                    "br_rate_dispersion" => s.br_rate_dispersion = num(v)?,
                    "fs_prob" => s.fs_prob = num(v)?,
                    "noise_sd_logemp" => s.noise_sd_logemp = num(v)?,
                    "noise_sd_logwage" => s.noise_sd_logwage = num(v)?,
                    "dgp_kind" => s.dgp_kind = v.parse()?,
                    "true_gamma_br" => s.true_gamma_br = num(v)?,
                    "true_gamma_fs" => s.true_gamma_fs = num(v)?,
                    "true_beta_log_pop" => s.true_beta_log_pop = num(v)?,
                    "true_beta_log_nonlegal" => s.true_beta_log_nonlegal = num(v)?,
                    "mu_skill_share" => s.mu_skill_share = num(v)?,
                    "wage_premium" => s.wage_premium = num(v)?,
                    "missing_prob" => s.missing_prob = num(v)?,
                    "rng_seed" => return Err("set the seed with 'seed' in [io] or --seed".into()),
                    _ => return unknown(),
                }
            }
            "model" => {
                let m = &mut self.model;
                match key {
                    "mu_skill_share" => m.mu_skill_share = num(v)?,
                    "a_rel" => m.a_rel = num(v)?,
                    "subst_elasticity" => m.subst_elasticity = num(v)?,
                    "alpha" => m.alpha = num(v)?,
                    "inv_rho_s" => m.inv_rho_s = num(v)?,
                    "inv_rho_u" => m.inv_rho_u = num(v)?,
                    "sigma_curv" => m.sigma_curv = num(v)?,
                    "beta_disc" => m.beta_disc = num(v)?,
                    "classic_gamma_disutility" => m.classic.gamma_disutility = num(v)?,
                    "classic_rho_s" => m.classic.rho_s = num(v)?,
                    "classic_rho_u" => m.classic.rho_u = num(v)?,
                    "classic_delta" => m.classic.delta = num(v)?,
                    "classic_a_s" => m.classic.a_s = num(v)?,
                    "classic_a_u" => m.classic.a_u = num(v)?,
                    "classic_sigma_curv" => m.classic.sigma_curv = num(v)?,
                    "classic_beta_disc" => m.classic.beta_disc = num(v)?,
                    _ => return unknown(),
                }
            }
            "demand" => {
                let d = &mut self.demand;
                match key {
                    "l_bar_county" => d.l_bar_county = num(v)?,
                    "phi_fees" => d.phi_fees = num(v)?,
                    "shock_scale" => d.shock_scale = num(v)?,
                    "l_other" => d.l_other = num(v)?,
                    "l_bar_br" => d.l_bar_br = num(v)?,
                    _ => return unknown(),
                }
            }
            "regress" => {
                let r = &mut self.regress;
                match key {
                    "outcome" => r.spec.outcome = v.to_string(),
                    "treatments" => r.spec.treatments = list(v),
                    "controls" => r.spec.controls = list(v),
                    "absorb" => r.spec.absorb = parsed_list(v)?,
                    "cluster_by" => r.spec.cluster_by = v.parse()?,
                    "lag_structure" => r.spec.lag_structure = parsed_list(v)?,
                    "lincom" => r.lincom = parse_lincom(v)?,
                    "delta" => r.delta = boolean(v)?,
                    _ => return unknown(),
                }
            }
            "gmm" => {
                let g = &mut self.gmm;
                match key {
                    "wage_instruments" => g.wage_instruments = gmm::parse_instrument_list(v)?,
                    "labor_instruments" => g.labor_instruments = gmm::parse_instrument_list(v)?,
                    "include_constant_wage" => g.include_constant_wage = boolean(v)?,
                    "include_constant_labor" => g.include_constant_labor = boolean(v)?,
                    "detrend_controls" => g.detrend_controls = list(v),
                    "detrend_absorb" => g.detrend_absorb = parsed_list(v)?,
                    "numeric_check" => g.numeric_check = boolean(v)?,
                    _ => return unknown(),
                }
            }
            "welfare" => {
                let w = &mut self.welfare;
                match key {
                    "sigma_regimes" => w.sigma_regimes = parsed_list(v)?,
                    "horizon" => w.horizon = num(v)?,
                    "weighting" => w.weighting = v.parse()?,
                    "anchor_mu_skill_share" => w.anchors.mu_skill_share = num(v)?,
                    "anchor_wage_premium" => w.anchors.wage_premium = num(v)?,
                    _ => return unknown(),
                }
            }
            "io" => {
                let io = &mut self.io;
                match key {
                    "seed" => io.seed = num(v)?,
                    "panel" => io.panel = v.to_string(),
                    "out_dir" => io.out_dir = v.to_string(),
                    "chart" => io.chart = boolean(v)?,
                    _ => return unknown(),
                }
            }
            _ => return Err(format!("unknown section [{section}]")),
        }
        Ok(())
    }

    /// Parses configuration text; defaults fill unspecified keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::from("simulate");
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line, message };
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header '{content}'")))?
                    .trim();
                if !matches!(
                    name,
                    "simulate" | "model" | "demand" | "regress" | "gmm" | "welfare" | "io"
                ) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert((section.clone(), key.to_string())) {
                return Err(err(format!("duplicate key '{key}' in [{section}]")));
            }
            cfg.set(&section, key, value).map_err(err)?;
        }
        cfg.simulate.rng_seed = cfg.io.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Replaces the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.io.seed = seed;
        self.simulate.rng_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.simulate.validate()?;
        self.demand.validate()?;
        self.model.gmm_params()?;
        self.model.classic.validate()?;
        self.regress.spec.validate()?;
        if self.welfare.sigma_regimes.is_empty() {
            return Err(Error::domain("sigma_regimes must list at least one value"));
        }
        if let Some(s) = self
            .welfare
            .sigma_regimes
            .iter()
            .find(|s| !(**s > 0.0) || **s == 1.0)
        {
            return Err(Error::domain(format!(
                "sigma regimes must be positive and different from 1, got {s}"
            )));
        }
        let a = self.welfare.anchors;
        if !(a.mu_skill_share > 0.0 && a.mu_skill_share < 1.0 && a.wage_premium > 0.0) {
            return Err(Error::domain(
                "welfare anchors need a share in (0,1) and a positive premium",
            ));
        }
        let calib = GmmCalibration {
            zeta: 0.5,
            pi_share: 0.5,
        };
        self.gmm.spec(calib).validate()?;
        Ok(())
    }

    /// Fully resolved configuration in the input format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.simulate;
        let m = &self.model;
        let d = &self.demand;
        let r = &self.regress;
        let g = &self.gmm;
        let w = &self.welfare;
        let io = &self.io;
        let mut put = |section: &str, pairs: &[(&str, String)]| {
            let _ = writeln!(out, "[{section}]");
            for (k, v) in pairs {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        put(
            "simulate",
            &[
                ("n_counties", s.n_counties.to_string()),
                ("n_years", s.n_years.to_string()),
                ("first_year", s.first_year.to_string()),
                ("counties_per_district", s.counties_per_district.to_string()),
                ("districts_per_state", s.districts_per_state.to_string()),
                ("br_rate", s.br_rate.to_string()),
                ("br_rate_dispersion", s.br_rate_dispersion.to_string()),
                ("fs_prob", s.fs_prob.to_string()),
                ("noise_sd_logemp", s.noise_sd_logemp.to_string()),
                ("noise_sd_logwage", s.noise_sd_logwage.to_string()),
                ("dgp_kind", s.dgp_kind.as_str().to_string()),
                ("true_gamma_br", s.true_gamma_br.to_string()),
                ("true_gamma_fs", s.true_gamma_fs.to_string()),
                ("true_beta_log_pop", s.true_beta_log_pop.to_string()),
                (
                    "true_beta_log_nonlegal",
                    s.true_beta_log_nonlegal.to_string(),
                ),
                ("mu_skill_share", s.mu_skill_share.to_string()),
                ("wage_premium", s.wage_premium.to_string()),
                ("missing_prob", s.missing_prob.to_string()),
            ],
        );
        put(
            "model",
            &[
                ("mu_skill_share", m.mu_skill_share.to_string()),
                ("a_rel", m.a_rel.to_string()),
                ("subst_elasticity", m.subst_elasticity.to_string()),
                ("alpha", m.alpha.to_string()),
                ("inv_rho_s", m.inv_rho_s.to_string()),
                ("inv_rho_u", m.inv_rho_u.to_string()),
                ("sigma_curv", m.sigma_curv.to_string()),
                ("beta_disc", m.beta_disc.to_string()),
                (
                    "classic_gamma_disutility",
                    m.classic.gamma_disutility.to_string(),
                ),
                ("classic_rho_s", m.classic.rho_s.to_string()),
                ("classic_rho_u", m.classic.rho_u.to_string()),
                ("classic_delta", m.classic.delta.to_string()),
                ("classic_a_s", m.classic.a_s.to_string()),
                ("classic_a_u", m.classic.a_u.to_string()),
                ("classic_sigma_curv", m.classic.sigma_curv.to_string()),
                ("classic_beta_disc", m.classic.beta_disc.to_string()),
            ],
        );
        put(
            "demand",
            &[
                ("l_bar_county", d.l_bar_county.to_string()),
                ("phi_fees", d.phi_fees.to_string()),
                ("shock_scale", d.shock_scale.to_string()),
                ("l_other", d.l_other.to_string()),
                ("l_bar_br", d.l_bar_br.to_string()),
            ],
        );
        put(
            "regress",
            &[
                ("outcome", r.spec.outcome.clone()),
                ("treatments", join(&r.spec.treatments)),
                ("controls", join(&r.spec.controls)),
                ("absorb", join(&r.spec.absorb)),
                ("cluster_by", r.spec.cluster_by.to_string()),
                ("lag_structure", join(&r.spec.lag_structure)),
                ("lincom", format_lincom(&r.lincom)),
                ("delta", r.delta.to_string()),
            ],
        );
        put(
            "gmm",
            &[
                (
                    "wage_instruments",
                    gmm::format_instrument_list(&g.wage_instruments),
                ),
                (
                    "labor_instruments",
                    gmm::format_instrument_list(&g.labor_instruments),
                ),
                ("include_constant_wage", g.include_constant_wage.to_string()),
                (
                    "include_constant_labor",
                    g.include_constant_labor.to_string(),
                ),
                ("detrend_controls", join(&g.detrend_controls)),
                ("detrend_absorb", join(&g.detrend_absorb)),
                ("numeric_check", g.numeric_check.to_string()),
            ],
        );
        put(
            "welfare",
            &[
                ("sigma_regimes", join(&w.sigma_regimes)),
                ("horizon", w.horizon.to_string()),
                ("weighting", w.weighting.as_str().to_string()),
                (
                    "anchor_mu_skill_share",
                    w.anchors.mu_skill_share.to_string(),
                ),
                ("anchor_wage_premium", w.anchors.wage_premium.to_string()),
            ],
        );
        put(
            "io",
            &[
                ("seed", io.seed.to_string()),
                ("panel", io.panel.clone()),
                ("out_dir", io.out_dir.clone()),
                ("chart", io.chart.to_string()),
            ],
        );
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}
