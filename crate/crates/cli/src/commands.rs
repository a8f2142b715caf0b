use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use venuelab::config::RunConfig;
use venuelab::error::{Error, Result};
use venuelab::fe::{self, RegressionSpec};
use venuelab::gmm::{self, GmmCalibration, GmmData};
use venuelab::model::{self, ModelParamsGmm};
use venuelab::panel::{self, CountyYearPanel};
use venuelab::welfare;

use crate::chart::{self, Series};

pub struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_error(path))
}

/// Rows of a small comma-separated file written by this tool, header skipped.
fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_text(path)?
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect())
}

fn parse_number(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("'{s}' is not a number"),
    })
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out).map_err(io_error(&out))?;
        Ok(Context { cfg, out })
    }

    fn write(&self, name: &str, content: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, content).map_err(io_error(&path))
    }

    fn sidecar(&self, command: &str) -> Result<()> {
        self.write(&format!("{command}.config"), &self.cfg.render())
    }

    fn panel_path(&self, panel: Option<PathBuf>) -> PathBuf {
        panel.unwrap_or_else(|| self.out.join(&self.cfg.io.panel))
    }

    fn gmm_params(&self) -> Result<ModelParamsGmm> {
        self.cfg.model.gmm_params()
    }

    pub fn simulate(&self) -> Result<()> {
        let p = self.gmm_params()?;
        let panel = panel::simulate_panel(&self.cfg.simulate, &p, &self.cfg.demand)?;
        let path = self.out.join(&self.cfg.io.panel);
        panel::write_panel(&panel, &path)?;
        self.sidecar("simulate")?;
        let br: u64 = panel.rows().iter().map(|r| r.n_br as u64).sum();
        let fs: u64 = panel.rows().iter().map(|r| r.n_fs as u64).sum();
        println!(
            "wrote {} ({} rows, {} counties, {br} bankruptcies, {fs} forum-shopped)",
            path.display(),
            panel.len(),
            panel.county_ids().len()
        );
        Ok(())
    }

    pub fn calibrate(&self) -> Result<()> {
        let m = &self.cfg.model;
        let cal = m.calibration()?;
        let mut s = String::new();
        let _ = writeln!(s, "calibration");
        let _ = writeln!(s, "  skilled share mu        = {}", m.mu_skill_share);
        let _ = writeln!(s, "  relative efficiency A   = {}", m.a_rel);
        let _ = writeln!(s, "  substitution elasticity = {}", m.subst_elasticity);
        let _ = writeln!(s, "  zeta = {:.2} ({:.6})", cal.zeta, cal.zeta);
        let _ = writeln!(
            s,
            "  lambda = {:.2} ({:.6})",
            cal.share_lambda, cal.share_lambda
        );
        let _ = writeln!(s, "  pi = {:.2} ({:.6})", cal.pi_share, cal.pi_share);

        let c = &m.classic;
        let eq = model::equilibrium_classic(1.0, c)?;
        let _ = writeln!(s, "\nstatic equilibrium at unit legal demand");
        let _ = writeln!(s, "  skilled hours    {:.6}", eq.n_s);
        let _ = writeln!(s, "  unskilled hours  {:.6}", eq.n_u);
        let _ = writeln!(s, "  skilled wage     {:.6}", eq.w_s);
        let _ = writeln!(s, "  unskilled wage   {:.6}", eq.w_u);
        let _ = writeln!(s, "  skill premium    {:.6}", eq.w_s / eq.w_u);
        let _ = writeln!(
            s,
            "  average wage     {:.6}",
            model::average_wage(eq.n_s, eq.n_u, c)?
        );
        print!("{s}");
        self.write("calibration.txt", &s)?;
        self.sidecar("calibrate")
    }

    pub fn regress(&self, panel: Option<PathBuf>) -> Result<()> {
        let panel = panel::read_panel(&self.panel_path(panel))?;
        let r = &self.cfg.regress;
        let mut res = fe::ols_fe(&panel, &r.spec)?;
        for expr in &r.lincom {
            let weights: Vec<(&str, f64)> = expr.iter().map(|(n, w)| (n.as_str(), *w)).collect();
            res.lincom_tests.push(fe::lincom(&res, &weights)?);
        }
        let mut s = format!("employment regression: {}\n{res}", r.spec.outcome);

        if r.spec.lag_structure.iter().any(|&k| k > 0) {
            let placebo = fe::placebo_lags(&panel, &r.spec)?;
            let _ = write!(s, "\nplacebo lags of {}\n{placebo}", r.spec.treatments[0]);
            self.write("regress_placebo.csv", &placebo.coefficient_csv())?;
        }
        if r.delta {
            let _ = write!(s, "\n{}", self.delta_block(&panel, &r.spec));
        }
        print!("{s}");
        self.write("regress.txt", &s)?;
        self.write("regress_coefficients.csv", &res.coefficient_csv())?;
        self.sidecar("regress")
    }

    fn delta_block(&self, panel: &CountyYearPanel, spec: &RegressionSpec) -> String {
        let treatment = &spec.treatments[0];
        let coef = |outcome: &str| -> Result<f64> {
            let spec = RegressionSpec {
                outcome: outcome.into(),
                lag_structure: vec![],
                ..spec.clone()
            };
            fe::ols_fe(panel, &spec)?.coef(treatment)
        };
        let estimate = coef("ln_emp_unskilled").and_then(|b_emp| {
            let b_wage = coef("ln_wage_unskilled")?;
            Ok((b_emp, b_wage, fe::delta_from_betas(b_emp, b_wage)?))
        });
        match estimate {
            Ok((b_emp, b_wage, delta)) => format!(
                "elasticity of substitution from unskilled responses to {treatment}\n  \
                 employment {b_emp:.6}   wage {b_wage:.6}   delta {delta:.3}\n"
            ),
            Err(e) => format!("elasticity of substitution unavailable: {e}\n"),
        }
    }

    pub fn gmm(&self, panel: Option<PathBuf>) -> Result<()> {
        let panel = panel::read_panel(&self.panel_path(panel))?;
        let g = &self.cfg.gmm;
        let cal = self.cfg.model.calibration()?;
        let spec = g.spec(GmmCalibration {
            zeta: cal.zeta,
            pi_share: cal.pi_share,
        });
        let (obs, rows) = gmm::observations_from_panel(&panel, &self.cfg.demand)?;
        let obs = gmm::detrend(&panel, &obs, &rows, &g.detrend_controls, &g.detrend_absorb)?;
        let data = GmmData::new(obs, spec)?;
        let res = gmm::two_step_gmm(&data)?;

        let mut s = format!("two-step GMM ({} moments)\n{res}", res.q);
        let mut diag = format!(
            "key,value\nn_obs,{}\nn_clusters,{}\nq,{}\nj_stat,{}\nj_df,{}\nj_pvalue,{}\njust_identified,{}\nlambda_condition,{}\njacobian_condition,{}\n",
            res.n_obs,
            res.n_clusters,
            res.q,
            res.j_stat,
            res.j_df,
            res.j_pvalue,
            res.just_identified,
            res.lambda_condition,
            res.jacobian_condition
        );
        if g.numeric_check {
            let numeric = gmm::numeric_stage(&data, &res.weight_matrix_2, &res.stage1_beta)?;
            let gap = (numeric - res.beta_hat).amax();
            let _ = writeln!(
                s,
                "simplex cross-check: max |closed form - numeric| = {gap:.3e}"
            );
            let _ = writeln!(diag, "numeric_gap,{gap}");
        }
        print!("{s}");
        self.write("gmm.txt", &s)?;
        self.write("gmm_coefficients.csv", &res.coefficient_csv())?;
        self.write("gmm_diagnostics.csv", &diag)?;
        self.sidecar("gmm")
    }

    pub fn welfare(&self, panel: Option<PathBuf>) -> Result<()> {
        let mut panel = panel::read_panel(&self.panel_path(panel))?;
        let w = &self.cfg.welfare;
        if w.horizon > 0 {
            let first = panel.rows().iter().map(|r| r.year).min().unwrap_or(0);
            let last = first + w.horizon as i32;
            let rows = panel
                .rows()
                .iter()
                .filter(|r| r.year <= last)
                .cloned()
                .collect();
            panel = CountyYearPanel::new(rows)?;
        }
        let base = self.gmm_params()?;
        let mut summary = String::from("sigma,ev_skilled,ev_unskilled,n_counties\n");
        let mut s = format!(
            "consumption equivalent variation of removing forum shopping ({} average, percent)\n{:<8} {:>10} {:>10}\n",
            w.weighting.as_str(),
            "sigma",
            "skilled",
            "unskilled"
        );
        for &sigma in &w.sigma_regimes {
            let p = ModelParamsGmm {
                sigma_curv: sigma,
                ..base
            };
            let paths = welfare::counterfactual_no_fs(&panel, &p, &self.cfg.demand, &w.anchors)?;
            let evs = welfare::county_evs(&paths)?;
            let agg = welfare::aggregate_ev(&evs, w.weighting);
            let mut table = String::from("county_id,ev_skilled,ev_unskilled\n");
            for e in &evs {
                let _ = writeln!(table, "{},{},{}", e.county_id, e.ev_skilled, e.ev_unskilled);
            }
            self.write(&format!("welfare_sigma_{sigma}.csv"), &table)?;
            let _ = writeln!(
                summary,
                "{sigma},{},{},{}",
                agg.ev_skilled, agg.ev_unskilled, agg.n_counties
            );
            let _ = writeln!(
                s,
                "{sigma:<8} {:>9.3}% {:>9.3}%",
                100.0 * agg.ev_skilled,
                100.0 * agg.ev_unskilled
            );
        }
        print!("{s}");
        self.write("welfare.txt", &s)?;
        self.write("welfare_summary.csv", &summary)?;
        self.sidecar("welfare")
    }

    pub fn gains(&self, panel: Option<PathBuf>, coefficients: Option<PathBuf>) -> Result<()> {
        let panel = panel::read_panel(&self.panel_path(panel))?;
        let coef_path = coefficients.unwrap_or_else(|| self.out.join("regress_coefficients.csv"));
        let rows = read_rows(&coef_path)?;
        let find = |name: &str| -> Result<f64> {
            let (i, row) = rows
                .iter()
                .enumerate()
                .find(|(_, r)| r.first().map(String::as_str) == Some(name))
                .ok_or_else(|| Error::Parse {
                    path: coef_path.clone(),
                    line: 1,
                    message: format!("no '{name}' coefficient"),
                })?;
            let value = row.get(1).map(String::as_str).unwrap_or("");
            parse_number(&coef_path, i + 2, value)
        };
        let gains = welfare::gains_lost(find("n_br")?, find("n_fs")?, &panel);
        let mut table = String::from("year,potential,lost\n");
        for y in &gains.by_year {
            let _ = writeln!(table, "{},{},{}", y.year, y.potential, y.lost);
        }
        let s = format!(
            "potential legal employment gains lost to forum shopping\n  \
             jobs lost per year        {:.1}\n  \
             potential gains per year  {:.1}\n  \
             share of potential        {:.1}%\n",
            gains.jobs_lost_per_year,
            gains.potential_per_year,
            100.0 * gains.share_of_potential
        );
        print!("{s}");
        self.write("gains.csv", &table)?;
        self.write("gains.txt", &s)?;
        self.sidecar("gains")
    }

    pub fn report(&self, run_dir: Option<PathBuf>) -> Result<()> {
        let dir = run_dir.unwrap_or_else(|| self.out.clone());
        let mut s = String::from("venuelab run report\n===================\n");
        let mut found = 0;
        found += text_section(&mut s, &dir, "Calibration", "calibration.txt")?;
        found += text_section(&mut s, &dir, "Employment regressions", "regress.txt")?;
        let coef = dir.join("gmm_coefficients.csv");
        let diag = dir.join("gmm_diagnostics.csv");
        if coef.exists() && diag.exists() {
            let _ = write!(s, "\n{}", gmm_table(&coef, &diag)?);
            found += 1;
        }
        let summary = dir.join("welfare_summary.csv");
        if summary.exists() {
            let _ = write!(s, "\n{}", ev_table(&summary)?);
            found += 1;
        }
        found += text_section(&mut s, &dir, "Gains lost", "gains.txt")?;
        if found == 0 {
            return Err(Error::Estimation(format!(
                "no command outputs found in {}",
                dir.display()
            )));
        }
        if self.cfg.io.chart {
            if summary.exists() {
                self.write("report_welfare.svg", &ev_chart(&summary)?)?;
            }
            let gains = dir.join("gains.csv");
            if gains.exists() {
                self.write("report_gains.svg", &gains_chart(&gains)?)?;
            }
        }
        print!("{s}");
        self.write("report.txt", &s)?;
        self.sidecar("report")
    }
}

fn text_section(s: &mut String, dir: &Path, title: &str, file: &str) -> Result<usize> {
    let path = dir.join(file);
    if !path.exists() {
        return Ok(0);
    }
    let _ = write!(
        s,
        "\n{title}\n{}\n{}",
        "-".repeat(title.len()),
        read_text(&path)?
    );
    Ok(1)
}

fn gmm_table(coef: &Path, diag: &Path) -> Result<String> {
    let labels = [
        ("inv_rho_s", "1/rho_s"),
        ("inv_rho_u", "1/rho_u"),
        ("alpha", "alpha"),
    ];
    let mut s =
        String::from("GMM estimates of model parameters\n---------------------------------\n");
    for (i, row) in read_rows(coef)?.iter().enumerate() {
        if row.len() < 3 {
            continue;
        }
        let name = labels
            .iter()
            .find(|(k, _)| *k == row[0])
            .map_or(row[0].as_str(), |(_, l)| l);
        let est = parse_number(coef, i + 2, &row[1])?;
        let se = parse_number(coef, i + 2, &row[2])?;
        let _ = writeln!(
            s,
            "{name:<14} {est:>10.4}\n{:<14} {:>10}",
            "",
            format!("({se:.4})")
        );
    }
    let d: Vec<Vec<String>> = read_rows(diag)?;
    let get = |k: &str| {
        d.iter()
            .find(|r| r[0] == k)
            .and_then(|r| r.get(1))
            .cloned()
            .unwrap_or_default()
    };
    let _ = writeln!(s, "{:<14} {:>10}", "Observations", get("n_obs"));
    if get("just_identified") == "true" {
        let _ = writeln!(s, "{:<14} {:>10}", "J-stat", "just identified");
    } else {
        let j: f64 = get("j_stat").parse().unwrap_or(f64::NAN);
        let p: f64 = get("j_pvalue").parse().unwrap_or(f64::NAN);
        let _ = writeln!(s, "{:<14} {:>10}", "J-stat", format!("{j:.3} (p = {p:.2})"));
    }
    Ok(s)
}

fn ev_rows(summary: &Path) -> Result<Vec<(String, f64, f64)>> {
    read_rows(summary)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok((
                r[0].clone(),
                parse_number(summary, i + 2, &r[1])?,
                parse_number(summary, i + 2, &r[2])?,
            ))
        })
        .collect()
}

fn ev_table(summary: &Path) -> Result<String> {
    let mut s =
        String::from("Consumption equivalent variation\n--------------------------------\n");
    let _ = writeln!(s, "{:<12} {:>10} {:>10}", "", "Skilled", "Unskilled");
    for (sigma, sk, un) in ev_rows(summary)? {
        let _ = writeln!(
            s,
            "{:<12} {:>9.2}% {:>9.2}%",
            format!("sigma = {sigma}"),
            100.0 * sk,
            100.0 * un
        );
    }
    Ok(s)
}

fn ev_chart(summary: &Path) -> Result<String> {
    let rows = ev_rows(summary)?;
    let labels: Vec<String> = rows.iter().map(|r| format!("sigma = {}", r.0)).collect();
    Ok(chart::bar_chart(
        "Consumption equivalent variation (%)",
        &labels,
        &[
            Series {
                name: "skilled",
                values: rows.iter().map(|r| 100.0 * r.1).collect(),
            },
            Series {
                name: "unskilled",
                values: rows.iter().map(|r| 100.0 * r.2).collect(),
            },
        ],
    ))
}

fn gains_chart(gains: &Path) -> Result<String> {
    let rows = read_rows(gains)?;
    let mut years = Vec::new();
    let mut potential = Vec::new();
    let mut lost = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        years.push(parse_number(gains, i + 2, &r[0])?);
        potential.push(parse_number(gains, i + 2, &r[1])?);
        lost.push(parse_number(gains, i + 2, &r[2])?);
    }
    Ok(chart::line_chart(
        "Legal employment gains by year",
        &years,
        &[
            Series {
                name: "potential",
                values: potential,
            },
            Series {
                name: "lost",
                values: lost,
            },
        ],
    ))
}
