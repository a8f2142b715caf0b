//! Fixed-effects panel regression with county-clustered inference.
//!
//! Fixed effects are absorbed by alternating group demeaning (the method of
//! alternating projections), which is exact for a single dimension and
//! converges geometrically for crossed dimensions such as county and
//! district-year. Standard errors use the cluster sandwich with the
//! `G/(G-1) (N-1)/(N-K)` small-sample factor and normal reference
//! distributions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::{CountyYearPanel, PanelRow};
use crate::stats;

pub const DEMEAN_TOL: f64 = 1e-12;
pub const DEMEAN_MAX_ITER: usize = 10_000;
/// Below this many clusters normal p-values are flagged as unreliable.
pub const MIN_CLUSTERS_FOR_NORMAL: usize = 40;
pub const POISSON_MAX_DUMMIES: usize = 2000;
pub const POISSON_TOL: f64 = 1e-8;
pub const POISSON_MAX_ITER: usize = 200;

/// A fixed-effect (or clustering) dimension of the county-year panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeDim {
    County,
    District,
    State,
    Year,
    DistrictYear,
    StateYear,
}

impl FeDim {
    pub fn as_str(self) -> &'static str {
        match self {
            FeDim::County => "county",
            FeDim::District => "district",
            FeDim::State => "state",
            FeDim::Year => "year",
            FeDim::DistrictYear => "district_year",
            FeDim::StateYear => "state_year",
        }
    }

    fn key(self, r: &PanelRow) -> (i64, i64) {
        let year = r.year as i64;
        match self {
            FeDim::County => (r.county_id, 0),
            FeDim::District => (r.district_id, 0),
            FeDim::State => (r.state_id, 0),
            FeDim::Year => (year, 0),
            FeDim::DistrictYear => (r.district_id, year),
            FeDim::StateYear => (r.state_id, year),
        }
    }
}

impl fmt::Display for FeDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeDim {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "county" => FeDim::County,
            "district" => FeDim::District,
            "state" => FeDim::State,
            "year" => FeDim::Year,
            "district_year" => FeDim::DistrictYear,
            "state_year" => FeDim::StateYear,
            other => {
                return Err(format!(
                    "unknown fixed-effect dimension '{other}' \
                     (county, district, state, year, district_year, state_year)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub outcome: String,
    pub treatments: Vec<String>,
    pub controls: Vec<String>,
    pub absorb: Vec<FeDim>,
    pub cluster_by: FeDim,
    /// Placebo lags of the first treatment; 0 means no extra column.
    pub lag_structure: Vec<u32>,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        RegressionSpec {
            outcome: "ln_emp_legal".into(),
            treatments: vec!["n_br".into(), "n_fs".into()],
            controls: vec!["ln_population".into(), "ln_emp_nonlegal".into()],
            absorb: vec![FeDim::County, FeDim::DistrictYear],
            cluster_by: FeDim::County,
            lag_structure: vec![1, 2, 3],
        }
    }
}

impl RegressionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.absorb.is_empty() {
            return Err(Error::domain(
                "absorb must list at least one fixed-effect dimension",
            ));
        }
        let mut seen = BTreeSet::new();
        for name in std::iter::once(&self.outcome)
            .chain(&self.treatments)
            .chain(&self.controls)
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::domain(format!(
                    "column '{name}' appears more than once among outcome, treatments and controls"
                )));
            }
        }
        Ok(())
    }

    pub fn regressors(&self) -> Vec<String> {
        self.treatments
            .iter()
            .chain(&self.controls)
            .cloned()
            .collect()
    }
}

/// Estimation sample after dropping rows with undefined values.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    /// For each absorbed dimension, the group index of every observation.
    pub groups: Vec<Vec<usize>>,
    pub clusters: Vec<usize>,
    /// Panel row index of each observation.
    pub rows: Vec<usize>,
}

pub(crate) fn group_indices(panel: &CountyYearPanel, rows: &[usize], dim: FeDim) -> Vec<usize> {
    let mut ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &i in rows {
        let next = ids.len();
        ids.entry(dim.key(&panel.rows()[i])).or_insert(next);
    }
    // Renumber in key order so the encoding does not depend on row order.
    for (n, v) in ids.values_mut().enumerate() {
        *v = n;
    }
    rows.iter()
        .map(|&i| ids[&dim.key(&panel.rows()[i])])
        .collect()
}

/// Builds the estimation sample for `outcome ~ regressors | absorb`.
pub fn build_design(
    panel: &CountyYearPanel,
    outcome: &str,
    regressors: &[String],
    absorb: &[FeDim],
    cluster_by: FeDim,
) -> Result<Design> {
    let y_all = panel.column(outcome)?;
    let x_all: Vec<Vec<f64>> = regressors
        .iter()
        .map(|n| panel.column(n))
        .collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..panel.len())
        .filter(|&i| y_all[i].is_finite() && x_all.iter().all(|c| c[i].is_finite()))
        .collect();
    if rows.is_empty() {
        return Err(Error::Estimation("no complete observations".into()));
    }
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y_all[i]));
    let x = DMatrix::from_fn(rows.len(), regressors.len(), |r, c| x_all[c][rows[r]]);
    Ok(Design {
        names: regressors.to_vec(),
        y,
        x,
        groups: absorb
            .iter()
            .map(|&d| group_indices(panel, &rows, d))
            .collect(),
        clusters: group_indices(panel, &rows, cluster_by),
        rows,
    })
}

/// Result of alternating-projection demeaning.
#[derive(Debug, Clone)]
pub struct Demeaned {
    pub data: DMatrix<f64>,
    pub iterations: usize,
}

/// Removes group means of every absorbed dimension from each column.
///
/// Sweeps over the dimensions until the largest change made to any element
/// in a full sweep is below `tol` (scaled by the column's magnitude when that
/// exceeds one).
pub fn within_transform(
    columns: &DMatrix<f64>,
    groups: &[Vec<usize>],
    tol: f64,
    max_iter: usize,
) -> Result<Demeaned> {
    if !(tol > 0.0) {
        return Err(Error::domain("demeaning tolerance must be positive"));
    }
    let n = columns.nrows();
    let counts: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            assert_eq!(g.len(), n, "group vector length");
            let k = g.iter().max().map_or(0, |m| m + 1);
            let mut c = vec![0.0; k];
            for &gi in g {
                c[gi] += 1.0;
            }
            c
        })
        .collect();

    let mut out = columns.clone();
    let mut max_iterations = 0;
    for mut col in out.column_iter_mut() {
        let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut iterations = 0;
        loop {
            if groups.is_empty() {
                break;
            }
            iterations += 1;
            let mut change = 0.0f64;
            for (g, cnt) in groups.iter().zip(&counts) {
                let mut sums = vec![0.0; cnt.len()];
                for (v, &gi) in col.iter().zip(g) {
                    sums[gi] += v;
                }
                for (s, c) in sums.iter_mut().zip(cnt) {
                    *s /= c;
                }
                for (v, &gi) in col.iter_mut().zip(g) {
                    *v -= sums[gi];
                }
                change = sums.iter().fold(change, |m, s| m.max(s.abs()));
            }
            if change < tol * scale {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    last_change: change,
                });
            }
        }
        max_iterations = max_iterations.max(iterations);
    }
    Ok(Demeaned {
        data: out,
        iterations: max_iterations,
    })
}

/// Cluster-robust sandwich `(X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1`
/// scaled by `G/(G-1) (N-1)/(N-K)`.
pub fn cluster_vcov<C: Ord + Copy>(
    residuals: &DVector<f64>,
    design: &DMatrix<f64>,
    cluster_ids: &[C],
) -> Result<DMatrix<f64>> {
    let (n, k) = design.shape();
    if residuals.len() != n || cluster_ids.len() != n {
        return Err(Error::domain(
            "residuals, design and clusters must have equal length",
        ));
    }
    let mut scores: BTreeMap<C, DVector<f64>> = BTreeMap::new();
    for (i, &c) in cluster_ids.iter().enumerate() {
        let s = scores.entry(c).or_insert_with(|| DVector::zeros(k));
        s.axpy(residuals[i], &design.row(i).transpose(), 1.0);
    }
    let g = scores.len();
    if g < 2 {
        return Err(Error::Estimation(format!(
            "clustered covariance needs at least 2 clusters, found {g}"
        )));
    }
    if n <= k {
        return Err(Error::Estimation("clustered covariance needs N > K".into()));
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    let bread = linalg::spd_inverse(&(design.transpose() * design), "X'X")?;
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64);
    Ok(linalg::symmetrize(&(&bread * meat * &bread * factor)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LincomTest {
    pub expression: String,
    pub estimate: f64,
    pub std_err: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub vcov_clustered: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub within_r2: f64,
    pub lincom_tests: Vec<LincomTest>,
    /// Degrees-of-freedom and reliability notes.
    pub notes: Vec<String>,
    /// Within residuals, aligned with `rows`.
    pub residuals: DVector<f64>,
    pub rows: Vec<usize>,
    pub demean_iterations: usize,
}

impl RegressionResult {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::domain(format!("no coefficient named '{name}'")))
    }

    pub fn coef(&self, name: &str) -> Result<f64> {
        Ok(self.coefficients[self.index_of(name)?])
    }

    pub fn std_err(&self, name: &str) -> Result<f64> {
        let i = self.index_of(name)?;
        Ok(self.vcov_clustered[(i, i)].sqrt())
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.names.len())
            .map(|i| self.vcov_clustered[(i, i)].sqrt())
            .collect()
    }

    /// `term,estimate,std_err,z,p_value` rows, one per coefficient.
    pub fn coefficient_csv(&self) -> String {
        let mut out = String::from("term,estimate,std_err,z,p_value\n");
        for (i, name) in self.names.iter().enumerate() {
            let b = self.coefficients[i];
            let se = self.vcov_clustered[(i, i)].sqrt();
            out.push_str(&format!(
                "{name},{b},{se},{},{}\n",
                b / se,
                stats::normal_two_sided_p(b / se)
            ));
        }
        out
    }
}

impl fmt::Display for RegressionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>12} {:>12} {:>9} {:>9}",
            "term", "estimate", "std.err", "z", "p"
        )?;
        for (i, name) in self.names.iter().enumerate() {
            let b = self.coefficients[i];
            let se = self.vcov_clustered[(i, i)].sqrt();
            writeln!(
                f,
                "{name:<24} {b:>12.6} {se:>12.6} {:>9.3} {:>9.4}",
                b / se,
                stats::normal_two_sided_p(b / se)
            )?;
        }
        writeln!(
            f,
            "observations {}   clusters {}   within R2 {:.4}",
            self.n_obs, self.n_clusters, self.within_r2
        )?;
        for t in &self.lincom_tests {
            writeln!(
                f,
                "lincom {:<20} {:>12.6} {:>12.6} {:>9} {:>9.4}",
                t.expression, t.estimate, t.std_err, "", t.p_value
            )?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

/// Fits least squares on a design after absorbing its fixed effects.
pub fn fit_within(design: &Design) -> Result<RegressionResult> {
    let n = design.y.len();
    let k = design.names.len();
    let mut stacked = DMatrix::zeros(n, k + 1);
    stacked.set_column(0, &design.y);
    stacked.view_mut((0, 1), (n, k)).copy_from(&design.x);
    let demeaned = within_transform(&stacked, &design.groups, DEMEAN_TOL, DEMEAN_MAX_ITER)?;
    let y = demeaned.data.column(0).clone_owned();
    let x = demeaned.data.columns(1, k).clone_owned();

    // A regressor absorbed by the fixed effects demeans to numerical noise.
    let absorbed: Vec<String> = (0..k)
        .filter(|&c| {
            let raw = design.x.column(c);
            let mean = raw.mean();
            let spread = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
            x.column(c).norm() <= 1e-8 * spread.max(f64::MIN_POSITIVE)
        })
        .map(|c| design.names[c].clone())
        .collect();
    if !absorbed.is_empty() {
        return Err(Error::RankDeficient { columns: absorbed });
    }

    let fit = linalg::least_squares(&x, &y, &design.names)?;
    let residuals = &y - &x * &fit.coef;
    let vcov = cluster_vcov(&residuals, &x, &design.clusters)?;
    let n_clusters = design.clusters.iter().collect::<BTreeSet<_>>().len();
    let tss = y.norm_squared();
    let mut notes = vec![format!(
        "small-sample factor G/(G-1)*(N-1)/(N-K) with N={n}, K={k}, G={n_clusters}"
    )];
    if n_clusters < MIN_CLUSTERS_FOR_NORMAL {
        log::warn!("only {n_clusters} clusters; normal p-values may be unreliable");
        notes.push(format!(
            "only {n_clusters} clusters (< {MIN_CLUSTERS_FOR_NORMAL}); normal p-values may be unreliable"
        ));
    }
    Ok(RegressionResult {
        names: design.names.clone(),
        coefficients: fit.coef,
        vcov_clustered: vcov,
        n_obs: n,
        n_clusters,
        within_r2: if tss > 0.0 {
            1.0 - residuals.norm_squared() / tss
        } else {
            0.0
        },
        lincom_tests: Vec::new(),
        notes,
        residuals,
        rows: design.rows.clone(),
        demean_iterations: demeaned.iterations,
    })
}

/// Two-way (or more) fixed-effects OLS with clustered standard errors.
pub fn ols_fe(panel: &CountyYearPanel, spec: &RegressionSpec) -> Result<RegressionResult> {
    spec.validate()?;
    let design = build_design(
        panel,
        &spec.outcome,
        &spec.regressors(),
        &spec.absorb,
        spec.cluster_by,
    )?;
    fit_within(&design)
}

/// Tests `sum_j w_j beta_j = 0` with the clustered covariance.
pub fn lincom(result: &RegressionResult, weights: &[(&str, f64)]) -> Result<LincomTest> {
    if weights.is_empty() {
        return Err(Error::domain("lincom needs at least one weight"));
    }
    let mut w = DVector::zeros(result.names.len());
    let mut terms = Vec::new();
    for &(name, weight) in weights {
        w[result.index_of(name)?] += weight;
        terms.push(if weight == 1.0 {
            name.to_string()
        } else {
            format!("{weight}*{name}")
        });
    }
    let estimate = w.dot(&result.coefficients);
    let variance = (w.transpose() * &result.vcov_clustered * &w)[(0, 0)];
    let std_err = variance.max(0.0).sqrt();
    Ok(LincomTest {
        expression: terms.join(" + "),
        estimate,
        std_err,
        p_value: stats::normal_two_sided_p(estimate / std_err),
    })
}

/// Adds lags of the first treatment (within county) and refits; rows whose
/// lags are undefined are dropped. Lag 0 adds nothing.
pub fn placebo_lags(panel: &CountyYearPanel, spec: &RegressionSpec) -> Result<RegressionResult> {
    let base = spec
        .treatments
        .first()
        .ok_or_else(|| Error::domain("placebo lags need at least one treatment"))?;
    let mut lagged = spec.clone();
    for &k in &spec.lag_structure {
        if k > 0 {
            let name = format!("{base}_lag{k}");
            if !lagged.treatments.contains(&name) {
                lagged.treatments.push(name);
            }
        }
    }
    ols_fe(panel, &lagged)
}

/// `delta = (1/beta_u - 1) / (beta_u_w / beta_u)`.
pub fn delta_from_betas(beta_u: f64, beta_u_w: f64) -> Result<f64> {
    if beta_u == 0.0 || beta_u_w == 0.0 || !beta_u.is_finite() || !beta_u_w.is_finite() {
        return Err(Error::domain(format!(
            "delta needs nonzero finite betas, got ({beta_u}, {beta_u_w})"
        )));
    }
    Ok((1.0 / beta_u - 1.0) / (beta_u_w / beta_u))
}

#[derive(Debug, Clone)]
pub struct PoissonResult {
    /// `_cons` followed by the regressors.
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub vcov_clustered: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub iterations: usize,
    /// Largest coefficient change at each iteration.
    pub trace: Vec<f64>,
}

impl PoissonResult {
    pub fn coef(&self, name: &str) -> Result<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
            .ok_or_else(|| Error::domain(format!("no coefficient named '{name}'")))
    }

    pub fn std_err(&self, name: &str) -> Result<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vcov_clustered[(i, i)].sqrt())
            .ok_or_else(|| Error::domain(format!("no coefficient named '{name}'")))
    }
}

/// Poisson pseudo-maximum likelihood with a log link and explicit
/// fixed-effect dummies, fitted by iteratively reweighted least squares.
/// `spec.absorb` may be empty here (intercept-only fixed effects).
pub fn poisson_fe(panel: &CountyYearPanel, spec: &RegressionSpec) -> Result<PoissonResult> {
    let regressors = spec.regressors();
    let design = build_design(
        panel,
        &spec.outcome,
        &regressors,
        &spec.absorb,
        spec.cluster_by,
    )?;
    let y = &design.y;
    let n = y.len();
    if y.iter().any(|&v| v < 0.0) {
        return Err(Error::domain("Poisson outcome must be nonnegative"));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::Estimation(
            "Poisson outcome is zero everywhere".into(),
        ));
    }
    for (dim, g) in spec.absorb.iter().zip(&design.groups) {
        let k = g.iter().max().map_or(0, |m| m + 1);
        let mut sums = vec![0.0; k];
        for (v, &gi) in y.iter().zip(g) {
            sums[gi] += v;
        }
        let zero_groups = sums.iter().filter(|&&s| s == 0.0).count();
        if zero_groups > 0 {
            return Err(Error::Estimation(format!(
                "separation: {zero_groups} {dim} group(s) have an all-zero outcome"
            )));
        }
    }

    let dummy_count: usize = design
        .groups
        .iter()
        .map(|g| g.iter().max().map_or(0, |m| *m))
        .sum();
    if dummy_count > POISSON_MAX_DUMMIES {
        return Err(Error::domain(format!(
            "{dummy_count} fixed-effect dummies exceed the limit of {POISSON_MAX_DUMMIES}"
        )));
    }

    // Intercept, independent dummies, then the regressors.
    let mut dummies = DMatrix::zeros(n, 1 + dummy_count);
    dummies.column_mut(0).fill(1.0);
    let mut col = 1;
    for g in &design.groups {
        let k = g.iter().max().map_or(0, |m| *m);
        for level in 1..=k {
            for (i, &gi) in g.iter().enumerate() {
                if gi == level {
                    dummies[(i, col)] = 1.0;
                }
            }
            col += 1;
        }
    }
    let keep = linalg::independent_columns(&dummies);
    let fe_cols = keep.len();
    let kx = regressors.len();
    let p = fe_cols + kx;
    let mut x = DMatrix::zeros(n, p);
    for (j, &c) in keep.iter().enumerate() {
        x.set_column(j, &dummies.column(c));
    }
    x.view_mut((0, fe_cols), (n, kx)).copy_from(&design.x);
    let mut names: Vec<String> = (0..fe_cols).map(|j| format!("_fe{j}")).collect();
    names[0] = "_cons".into();
    names.extend(regressors.iter().cloned());
    if linalg::independent_columns(&x).len() < p {
        return Err(Error::RankDeficient {
            columns: regressors.clone(),
        });
    }

    let deviance = |mu: &DVector<f64>| -> f64 {
        y.iter()
            .zip(mu.iter())
            .map(|(&yi, &mi)| {
                let term = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
                2.0 * (term - (yi - mi))
            })
            .sum()
    };

    let mut beta = DVector::zeros(p);
    beta[0] = y.mean().ln();
    let mut eta = &x * &beta;
    let mut mu = eta.map(f64::exp);
    let mut dev = deviance(&mu);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..POISSON_MAX_ITER {
        let sqrt_w = mu.map(f64::sqrt);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / mu[i]);
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * sqrt_w[i]);
        let zw = z.component_mul(&sqrt_w);
        let target = linalg::least_squares(&xw, &zw, &names)?.coef;

        // Step halving keeps the deviance from increasing.
        let mut step = 1.0;
        let mut candidate;
        loop {
            candidate = &beta + (&target - &beta) * step;
            let eta_c = &x * &candidate;
            let mu_c = eta_c.map(f64::exp);
            let dev_c = deviance(&mu_c);
            if dev_c.is_finite() && (dev_c <= dev * (1.0 + 1e-12) || step < 1e-6) {
                eta = eta_c;
                mu = mu_c;
                dev = dev_c;
                break;
            }
            step *= 0.5;
        }
        let change = (&candidate - &beta).amax();
        trace.push(change);
        beta = candidate;
        if change < POISSON_TOL {
            converged = true;
            break;
        }
    }
    if !converged || beta.iter().any(|b| !b.is_finite()) {
        let tail: Vec<String> = trace
            .iter()
            .rev()
            .take(5)
            .map(|c| format!("{c:.3e}"))
            .collect();
        return Err(Error::Estimation(format!(
            "Poisson IRLS did not converge after {} iterations; last changes [{}]",
            trace.len(),
            tail.join(", ")
        )));
    }

    let xtwx = DMatrix::from_fn(p, p, |a, b| {
        (0..n).map(|i| x[(i, a)] * x[(i, b)] * mu[i]).sum::<f64>()
    });
    let bread = linalg::spd_inverse(&xtwx, "Poisson information")?;
    let mut scores: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        scores
            .entry(design.clusters[i])
            .or_insert_with(|| DVector::zeros(p))
            .axpy(y[i] - mu[i], &x.row(i).transpose(), 1.0);
    }
    let g = scores.len();
    if g < 2 {
        return Err(Error::Estimation(
            "clustered covariance needs at least 2 clusters".into(),
        ));
    }
    let mut meat = DMatrix::zeros(p, p);
    for s in scores.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    let vcov_full = &bread * meat * &bread * (g as f64 / (g as f64 - 1.0));

    // Report the intercept and the regressors only.
    let report: Vec<usize> = std::iter::once(0).chain(fe_cols..p).collect();
    Ok(PoissonResult {
        names: report.iter().map(|&i| names[i].clone()).collect(),
        coefficients: DVector::from_iterator(report.len(), report.iter().map(|&i| beta[i])),
        vcov_clustered: DMatrix::from_fn(report.len(), report.len(), |a, b| {
            vcov_full[(report[a], report[b])]
        }),
        n_obs: n,
        n_clusters: g,
        iterations: trace.len(),
        trace,
    })
}
