//! Closed-form legal-services economy.
//!
//! Two parameterisations coexist. The *classic* static model uses
//! factor-augmenting technologies `A_s`, `A_u`, an elasticity of substitution
//! `delta` and a disutility scale `gamma`; labor demand `L` is exogenous. The
//! *GMM* model adds a demand shifter `theta`, a CES share `share_lambda`, a
//! relative efficiency `a_rel` and returns to scale `alpha`, and is only used
//! through its log-differenced dynamics.
//!
//! Every function here is pure. Cobb-Douglas limits (`delta == 1`,
//! `zeta == 0`) are rejected rather than special-cased.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn require_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be nonnegative and finite, got {value}"
        )))
    }
}

fn require_unit_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}

/// Static-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParamsClassic {
    pub gamma_disutility: f64,
    /// Inverse Frisch elasticity of skilled labor.
    pub rho_s: f64,
    /// Inverse Frisch elasticity of unskilled labor.
    pub rho_u: f64,
    /// Elasticity of substitution between skilled and unskilled hours.
    pub delta: f64,
    pub a_s: f64,
    pub a_u: f64,
    pub sigma_curv: f64,
    pub beta_disc: f64,
}

impl ModelParamsClassic {
    pub fn validate(&self) -> Result<()> {
        require_positive("gamma_disutility", self.gamma_disutility)?;
        require_positive("rho_s", self.rho_s)?;
        require_positive("rho_u", self.rho_u)?;
        require_positive("delta", self.delta)?;
        require_positive("a_s", self.a_s)?;
        require_positive("a_u", self.a_u)?;
        require_positive("sigma_curv", self.sigma_curv)?;
        require_unit_open("beta_disc", self.beta_disc)?;
        if self.delta == 1.0 {
            return Err(Error::Unsupported(
                "delta = 1 (Cobb-Douglas limit) is not implemented".into(),
            ));
        }
        Ok(())
    }

    /// `(delta - 1) / delta`, the CES exponent.
    pub fn ces_exponent(&self) -> f64 {
        (self.delta - 1.0) / self.delta
    }
}

/// GMM-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParamsGmm {
    /// Substitution exponent, `1 - 1/delta`.
    pub zeta: f64,
    /// CES share parameter on skilled labor.
    pub share_lambda: f64,
    /// Relative efficiency of skilled workers.
    pub a_rel: f64,
    /// Returns to scale.
    pub alpha: f64,
    pub rho_s: f64,
    pub rho_u: f64,
    pub sigma_curv: f64,
    pub beta_disc: f64,
}

impl ModelParamsGmm {
    /// The calibrated baseline: skilled share 0.42, wage premium 2.40,
    /// elasticity of substitution 1.4, and the point estimates
    /// `1/rho_s = 0.0853`, `1/rho_u = 0.264`, `alpha = 1.293`.
    pub fn baseline() -> Self {
        let cal = calibrate_gmm(0.42, 2.40, 1.4).expect("baseline calibration is in domain");
        ModelParamsGmm {
            zeta: cal.zeta,
            share_lambda: cal.share_lambda,
            a_rel: 2.40,
            alpha: 1.293,
            rho_s: 1.0 / 0.0853,
            rho_u: 1.0 / 0.264,
            sigma_curv: 2.0,
            beta_disc: 0.96,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_unit_open("share_lambda", self.share_lambda)?;
        require_positive("a_rel", self.a_rel)?;
        require_positive("alpha", self.alpha)?;
        require_positive("rho_s", self.rho_s)?;
        require_positive("rho_u", self.rho_u)?;
        require_positive("sigma_curv", self.sigma_curv)?;
        require_unit_open("beta_disc", self.beta_disc)?;
        if !(self.zeta.is_finite() && self.zeta < 1.0) {
            return Err(Error::domain(format!(
                "zeta must be < 1, got {}",
                self.zeta
            )));
        }
        if self.zeta == 0.0 {
            return Err(Error::Unsupported(
                "zeta = 0 (Cobb-Douglas limit) is not implemented".into(),
            ));
        }
        Ok(())
    }

    /// Lossy embedding of the classic technology: constant returns, an equal
    /// share, `a_rel = A_s / A_u`, and the returned `theta` absorbing the
    /// overall technology level. `gamma_disutility` has no GMM counterpart.
    pub fn from_classic(p: &ModelParamsClassic) -> Result<(ModelParamsGmm, f64)> {
        p.validate()?;
        let zeta = p.ces_exponent();
        let theta = (2.0 * p.a_u.powf(zeta)).powf(1.0 / zeta);
        let gmm = ModelParamsGmm {
            zeta,
            share_lambda: 0.5,
            a_rel: p.a_s / p.a_u,
            alpha: 1.0,
            rho_s: p.rho_s,
            rho_u: p.rho_u,
            sigma_curv: p.sigma_curv,
            beta_disc: p.beta_disc,
        };
        Ok((gmm, theta))
    }

    /// Slope of the wage response to own and cross employment changes.
    fn demand_slopes(&self, pi_share: f64) -> DemandSlopes {
        let scale = self.alpha - self.zeta;
        DemandSlopes {
            ss: (self.zeta - 1.0) + scale * pi_share,
            su: scale * (1.0 - pi_share),
            uu: (self.zeta - 1.0) + scale * (1.0 - pi_share),
            us: scale * pi_share,
        }
    }
}

struct DemandSlopes {
    ss: f64,
    su: f64,
    uu: f64,
    us: f64,
}

/// County demand for legal services.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandParams {
    /// Steady-state county demand `L_bar_c`.
    pub l_bar_county: f64,
    /// Per-bankruptcy increase in legal expenses.
    pub phi_fees: f64,
    /// Scale of the bankruptcy shock `h(BR, f)`.
    pub shock_scale: f64,
    pub l_other: f64,
    pub l_bar_br: f64,
}

impl DemandParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("l_bar_county", self.l_bar_county)?;
        require_positive("phi_fees", self.phi_fees)?;
        require_positive("shock_scale", self.shock_scale)?;
        require_nonnegative("l_other", self.l_other)?;
        require_nonnegative("l_bar_br", self.l_bar_br)?;
        Ok(())
    }
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams {
            l_bar_county: 50.0,
            phi_fees: 1.0,
            shock_scale: 1.0,
            l_other: 1.0,
            l_bar_br: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WagePair {
    pub w_s: f64,
    pub w_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumState {
    pub n_s: f64,
    pub n_u: f64,
    pub w_s: f64,
    pub w_u: f64,
    pub l_demand: f64,
}

/// Household labor supply from the GHH first-order condition, `(w/gamma)^(1/rho)`.
pub fn labor_supply(wage: f64, rho: f64, gamma_disutility: f64) -> Result<f64> {
    require_positive("wage", wage)?;
    require_positive("rho", rho)?;
    require_positive("gamma_disutility", gamma_disutility)?;
    Ok((wage / gamma_disutility).powf(1.0 / rho))
}

pub fn frisch_elasticity(rho: f64) -> Result<f64> {
    require_positive("rho", rho)?;
    Ok(1.0 / rho)
}

/// `L = [(A_u u)^z + (A_s s)^z]^(1/z)` with `z = (delta - 1)/delta`.
pub fn ces_output_classic(n_s: f64, n_u: f64, p: &ModelParamsClassic) -> Result<f64> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    p.validate()?;
    let z = p.ces_exponent();
    Ok(((p.a_u * n_u).powf(z) + (p.a_s * n_s).powf(z)).powf(1.0 / z))
}

fn gmm_inner(n_s: f64, n_u: f64, p: &ModelParamsGmm) -> f64 {
    (1.0 - p.share_lambda) * n_u.powf(p.zeta) + p.share_lambda * (p.a_rel * n_s).powf(p.zeta)
}

/// `L = theta [(1 - lambda) u^zeta + lambda (A s)^zeta]^(alpha/zeta)`.
pub fn ces_output_gmm(n_s: f64, n_u: f64, theta: f64, p: &ModelParamsGmm) -> Result<f64> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    require_positive("theta", theta)?;
    p.validate()?;
    Ok(theta * gmm_inner(n_s, n_u, p).powf(p.alpha / p.zeta))
}

/// Marginal products of the classic CES technology.
pub fn wages_classic(n_s: f64, n_u: f64, p: &ModelParamsClassic) -> Result<WagePair> {
    let l = ces_output_classic(n_s, n_u, p)?;
    let z = p.ces_exponent();
    let inv_delta = 1.0 / p.delta;
    Ok(WagePair {
        w_s: p.a_s.powf(z) * (l / n_s).powf(inv_delta),
        w_u: p.a_u.powf(z) * (l / n_u).powf(inv_delta),
    })
}

/// Marginal products of the GMM technology.
pub fn wages_gmm(n_s: f64, n_u: f64, theta: f64, p: &ModelParamsGmm) -> Result<WagePair> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    require_positive("theta", theta)?;
    p.validate()?;
    let common = p.alpha * theta * gmm_inner(n_s, n_u, p).powf((p.alpha - p.zeta) / p.zeta);
    Ok(WagePair {
        w_s: common * p.share_lambda * p.a_rel * (p.a_rel * n_s).powf(p.zeta - 1.0),
        w_u: common * (1.0 - p.share_lambda) * n_u.powf(p.zeta - 1.0),
    })
}

/// `w_s / w_u = (A_s/A_u)^((delta-1)/delta) (s/u)^(-1/delta)`.
pub fn skill_premium(n_s: f64, n_u: f64, p: &ModelParamsClassic) -> Result<f64> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    p.validate()?;
    Ok((p.a_s / p.a_u).powf(p.ces_exponent()) * (n_s / n_u).powf(-1.0 / p.delta))
}

/// Skilled labor's CES cost share.
pub fn skill_share(n_s: f64, n_u: f64, p: &ModelParamsGmm) -> Result<f64> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    p.validate()?;
    let skilled = p.share_lambda * (p.a_rel * n_s).powf(p.zeta);
    Ok(skilled / ((1.0 - p.share_lambda) * n_u.powf(p.zeta) + skilled))
}

/// Hours-weighted average wage, written in terms of relative factor intensity.
pub fn average_wage(n_s: f64, n_u: f64, p: &ModelParamsClassic) -> Result<f64> {
    require_positive("n_s", n_s)?;
    require_positive("n_u", n_u)?;
    p.validate()?;
    let z = p.ces_exponent();
    let ratio = n_s / n_u;
    Ok((p.a_u.powf(z) + p.a_s.powf(z) * ratio.powf(z)).powf(1.0 / z) / (1.0 + ratio))
}

/// Equilibrium of the static legal labor market for an exogenous demand level.
///
/// Skilled hours solve `gamma s^rho_s = A_s^((delta-1)/delta) (L/s)^(1/delta)`,
/// giving `s* = [gamma^-delta A_s^(delta-1) L]^(1/(1+delta rho_s))` and
/// `w_s* = gamma (s*)^rho_s`; unskilled quantities are symmetric. `L` is taken
/// as given and is not required to equal `L(s*, u*)`.
pub fn equilibrium_classic(l_demand: f64, p: &ModelParamsClassic) -> Result<EquilibriumState> {
    require_positive("l_demand", l_demand)?;
    p.validate()?;
    let hours = |a: f64, rho: f64| {
        (p.gamma_disutility.powf(-p.delta) * a.powf(p.delta - 1.0) * l_demand)
            .powf(1.0 / (1.0 + p.delta * rho))
    };
    let n_s = hours(p.a_s, p.rho_s);
    let n_u = hours(p.a_u, p.rho_u);
    Ok(EquilibriumState {
        n_s,
        n_u,
        w_s: p.gamma_disutility * n_s.powf(p.rho_s),
        w_u: p.gamma_disutility * n_u.powf(p.rho_u),
        l_demand,
    })
}

/// Equilibrium skilled-to-unskilled hours ratio.
pub fn composition_ratio(l_demand: f64, p: &ModelParamsClassic) -> Result<f64> {
    let eq = equilibrium_classic(l_demand, p)?;
    Ok(eq.n_s / eq.n_u)
}

/// Bankruptcy demand shock `h = shock_scale (BR - FS)`.
pub fn demand_shock(br: f64, fs: f64, shock_scale: f64) -> Result<f64> {
    require_nonnegative("br", br)?;
    require_nonnegative("fs", fs)?;
    require_positive("shock_scale", shock_scale)?;
    if fs > br {
        return Err(Error::domain(format!(
            "forum-shopped cases ({fs}) exceed bankruptcies ({br})"
        )));
    }
    Ok(shock_scale * (br - fs))
}

/// `L = L_bar_BR + h(BR, FS) + L_other`.
pub fn total_demand(d: &DemandParams, br: f64, fs: f64) -> Result<f64> {
    d.validate()?;
    Ok(d.l_bar_br + demand_shock(br, fs, d.shock_scale)? + d.l_other)
}

/// County demand shifter `theta = L_bar_c + Phi BR`.
pub fn theta_level(d: &DemandParams, br: f64) -> Result<f64> {
    require_positive("l_bar_county", d.l_bar_county)?;
    require_nonnegative("br", br)?;
    Ok(d.l_bar_county + d.phi_fees * br)
}

/// Log-change of the demand shifter, `Phi (BR_t - BR_{t-1}) / (L_bar_c + BR_t)`.
pub fn delta_theta(d: &DemandParams, br_t: f64, br_tm1: f64) -> Result<f64> {
    require_positive("l_bar_county", d.l_bar_county)?;
    require_nonnegative("br_t", br_t)?;
    require_nonnegative("br_tm1", br_tm1)?;
    Ok(d.phi_fees * (br_t - br_tm1) / (d.l_bar_county + br_t))
}

/// Log-changes of wages implied by log-changes of hours and demand.
pub fn log_diff_demand(
    dn_s: f64,
    dn_u: f64,
    dtheta: f64,
    pi_share: f64,
    p: &ModelParamsGmm,
) -> (f64, f64) {
    let k = p.demand_slopes(pi_share);
    (
        dtheta + k.ss * dn_s + k.su * dn_u,
        dtheta + k.uu * dn_u + k.us * dn_s,
    )
}

/// Log-changes of hours supplied, `dn_j = dw_j / rho_j`.
pub fn log_diff_supply(dw_s: f64, dw_u: f64, p: &ModelParamsGmm) -> (f64, f64) {
    (dw_s / p.rho_s, dw_u / p.rho_u)
}

/// One period of joint log-changes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogChanges {
    pub dw_s: f64,
    pub dw_u: f64,
    pub dn_s: f64,
    pub dn_u: f64,
}

/// Solves the four log-differenced demand and supply equations jointly.
///
/// `shocks` are the structural errors `(eps_wS, eps_wU, eps_nS, eps_nU)`
/// added to the right-hand side of each equation.
pub fn log_diff_equilibrium(
    dtheta: f64,
    pi_share: f64,
    p: &ModelParamsGmm,
    shocks: [f64; 4],
) -> Result<LogChanges> {
    let k = p.demand_slopes(pi_share);
    let (b_s, b_u) = (1.0 / p.rho_s, 1.0 / p.rho_u);
    // Unknowns ordered (dw_s, dw_u, dn_s, dn_u).
    #[rustfmt::skip]
    let system = Matrix4::new(
        1.0,  0.0,  -k.ss, -k.su,
        0.0,  1.0,  -k.us, -k.uu,
        -b_s, 0.0,  1.0,   0.0,
        0.0,  -b_u, 0.0,   1.0,
    );
    let rhs = Vector4::new(dtheta + shocks[0], dtheta + shocks[1], shocks[2], shocks[3]);
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("log-differenced equilibrium system".into()))?;
    Ok(LogChanges {
        dw_s: x[0],
        dw_u: x[1],
        dn_s: x[2],
        dn_u: x[3],
    })
}

/// Calibrated production constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub zeta: f64,
    pub share_lambda: f64,
    pub pi_share: f64,
}

/// Calibrates `(zeta, lambda, pi)` from the skilled employment share, the
/// skill wage premium (used as the relative efficiency `A`) and the
/// elasticity of substitution.
pub fn calibrate_gmm(
    mu_skill_share: f64,
    wage_premium: f64,
    subst_elasticity: f64,
) -> Result<Calibration> {
    require_unit_open("mu_skill_share", mu_skill_share)?;
    require_positive("wage_premium", wage_premium)?;
    require_positive("subst_elasticity", subst_elasticity)?;
    if subst_elasticity == 1.0 {
        return Err(Error::Unsupported(
            "unit elasticity of substitution (zeta = 0) is not implemented".into(),
        ));
    }
    let zeta = zeta_from_elasticity(subst_elasticity);
    let skilled = (wage_premium * mu_skill_share).powf(zeta - 1.0);
    let unskilled = (1.0 - mu_skill_share).powf(zeta - 1.0);
    let share_lambda = unskilled / (skilled + unskilled);
    // Only the technology fields matter for the share.
    let p = ModelParamsGmm {
        zeta,
        share_lambda,
        a_rel: wage_premium,
        alpha: 1.0,
        rho_s: 1.0,
        rho_u: 1.0,
        sigma_curv: 2.0,
        beta_disc: 0.96,
    };
    let pi_share = skill_share(mu_skill_share, 1.0 - mu_skill_share, &p)?;
    Ok(Calibration {
        zeta,
        share_lambda,
        pi_share,
    })
}

pub fn zeta_from_elasticity(subst_elasticity: f64) -> f64 {
    1.0 - 1.0 / subst_elasticity
}

pub fn elasticity_from_zeta(zeta: f64) -> f64 {
    1.0 / (1.0 - zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn classic(delta: f64, a_s: f64, a_u: f64, rho_s: f64, rho_u: f64) -> ModelParamsClassic {
        ModelParamsClassic {
            gamma_disutility: 1.0,
            rho_s,
            rho_u,
            delta,
            a_s,
            a_u,
            sigma_curv: 2.0,
            beta_disc: 0.96,
        }
    }

    fn symmetric_gmm() -> ModelParamsGmm {
        ModelParamsGmm {
            zeta: 0.3,
            share_lambda: 0.5,
            a_rel: 1.0,
            alpha: 1.0,
            rho_s: 2.0,
            rho_u: 1.5,
            sigma_curv: 2.0,
            beta_disc: 0.96,
        }
    }

    #[test]
    fn labor_supply_cases() {
        assert_eq!(labor_supply(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(labor_supply(4.0, 2.0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!((labor_supply(2.9455, 2.0, 1.0).unwrap() - 1.7162).abs() < 1e-4);
        assert!(matches!(labor_supply(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(labor_supply(1.0, -1.0, 1.0).is_err());
        assert!(labor_supply(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn frisch_round_trip() {
        assert_eq!(frisch_elasticity(1.0).unwrap(), 1.0);
        assert_eq!(frisch_elasticity(2.0).unwrap(), 0.5);
        assert_relative_eq!(
            frisch_elasticity(1.0 / 0.0853).unwrap(),
            0.0853,
            epsilon = 1e-15
        );
        assert!(frisch_elasticity(0.0).is_err());
    }

    #[test]
    fn classic_output_values() {
        let p = classic(2.0, 1.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(
            ces_output_classic(1.0, 1.0, &p).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        let base = ces_output_classic(0.7, 1.3, &p).unwrap();
        assert_relative_eq!(
            ces_output_classic(2.1, 3.9, &p).unwrap(),
            3.0 * base,
            max_relative = 1e-12
        );
        let p = classic(2.0, 2.0, 1.0, 1.0, 1.0);
        let expected = (1.0 + 2f64.sqrt()).powi(2);
        assert_relative_eq!(
            ces_output_classic(1.0, 1.0, &p).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert!((expected - 5.8284).abs() < 1e-4);
    }

    #[test]
    fn cobb_douglas_limits_rejected() {
        let p = classic(1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            ces_output_classic(1.0, 1.0, &p),
            Err(Error::Unsupported(_))
        ));
        let mut g = symmetric_gmm();
        g.zeta = 0.0;
        assert!(matches!(
            ces_output_gmm(1.0, 1.0, 1.0, &g),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            calibrate_gmm(0.4, 2.0, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn gmm_output_values() {
        for zeta in [-0.5, 0.2857, 0.9] {
            let p = ModelParamsGmm {
                zeta,
                ..symmetric_gmm()
            };
            assert_relative_eq!(
                ces_output_gmm(1.0, 1.0, 1.0, &p).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
        let p = ModelParamsGmm {
            alpha: 1.3,
            ..symmetric_gmm()
        };
        let l = ces_output_gmm(0.4, 0.9, 1.7, &p).unwrap();
        assert_relative_eq!(
            ces_output_gmm(0.4, 0.9, 3.4, &p).unwrap(),
            2.0 * l,
            max_relative = 1e-14
        );

        // Calibrated point, against a direct transcription of the formula.
        let p = ModelParamsGmm {
            zeta: 0.2857,
            share_lambda: 0.5969,
            a_rel: 2.40,
            alpha: 1.0,
            ..symmetric_gmm()
        };
        let (s, u) = (0.42f64, 0.58f64);
        let direct =
            ((1.0 - 0.5969) * u.powf(0.2857) + 0.5969 * (2.40 * s).powf(0.2857)).powf(1.0 / 0.2857);
        assert_relative_eq!(
            ces_output_gmm(s, u, 1.0, &p).unwrap(),
            direct,
            max_relative = 1e-14
        );
    }

    #[test]
    fn classic_wages_values() {
        let p = classic(2.0, 1.0, 1.0, 1.0, 1.0);
        let w = wages_classic(1.0, 1.0, &p).unwrap();
        assert_relative_eq!(w.w_s, 2.0, epsilon = 1e-12);
        assert_relative_eq!(w.w_u, 2.0, epsilon = 1e-12);
        let p = classic(2.0, 2.0, 1.0, 1.0, 1.0);
        let w = wages_classic(1.0, 1.0, &p).unwrap();
        assert!((w.w_s - 3.4142).abs() < 1e-4);
        assert!((w.w_u - 2.4142).abs() < 1e-4);
    }

    #[test]
    fn classic_wages_are_central_differences() {
        let p = classic(2.5, 1.7, 1.1, 1.0, 1.0);
        let (s, u, h) = (0.8, 1.3, 1e-5);
        let w = wages_classic(s, u, &p).unwrap();
        let f = |s, u| ces_output_classic(s, u, &p).unwrap();
        let fd_s = (f(s + h, u) - f(s - h, u)) / (2.0 * h);
        let fd_u = (f(s, u + h) - f(s, u - h)) / (2.0 * h);
        assert!((w.w_s - fd_s).abs() < 1e-6);
        assert!((w.w_u - fd_u).abs() < 1e-6);
    }

    #[test]
    fn gmm_wages_symmetric_and_euler() {
        let p = symmetric_gmm();
        let w = wages_gmm(0.6, 0.6, 1.0, &p).unwrap();
        assert_relative_eq!(w.w_s, w.w_u, max_relative = 1e-14);

        let p = ModelParamsGmm {
            share_lambda: 0.6,
            a_rel: 2.4,
            ..symmetric_gmm()
        };
        let (s, u, theta) = (0.42, 0.58, 1.9);
        let w = wages_gmm(s, u, theta, &p).unwrap();
        let l = ces_output_gmm(s, u, theta, &p).unwrap();
        assert_relative_eq!(w.w_s * s + w.w_u * u, l, max_relative = 1e-12);

        let h = 1e-5;
        let f = |s, u| ces_output_gmm(s, u, theta, &p).unwrap();
        let fd_s = (f(s + h, u) - f(s - h, u)) / (2.0 * h);
        let fd_u = (f(s, u + h) - f(s, u - h)) / (2.0 * h);
        assert!(((w.w_s - fd_s) / w.w_s).abs() < 1e-5);
        assert!(((w.w_u - fd_u) / w.w_u).abs() < 1e-5);
    }

    #[test]
    fn skill_premium_values() {
        let p = classic(2.0, 1.5, 1.5, 1.0, 1.0);
        assert_relative_eq!(skill_premium(1.0, 1.0, &p).unwrap(), 1.0, epsilon = 1e-15);
        let p = classic(2.0, 2.0, 1.0, 2.0, 1.0);
        assert!((skill_premium(1.1487, 1.0, &p).unwrap() - 1.3194).abs() < 2e-4);
    }

    #[test]
    fn skill_share_values() {
        let p = symmetric_gmm();
        assert_relative_eq!(skill_share(0.7, 0.7, &p).unwrap(), 0.5, epsilon = 1e-15);
        let p = ModelParamsGmm {
            zeta: 0.2857,
            share_lambda: 0.5969,
            a_rel: 2.40,
            ..symmetric_gmm()
        };
        let pi = skill_share(0.42, 0.58, &p).unwrap();
        assert!((pi - 0.63).abs() < 0.01, "pi = {pi}");
        let mut last = 0.0;
        for i in 1..50 {
            let share = skill_share(0.05 * i as f64, 0.58, &p).unwrap();
            assert!(share > last && share < 1.0);
            last = share;
        }
    }

    #[test]
    fn average_wage_symmetric_case() {
        let p = classic(3.0, 1.2, 1.2, 1.0, 1.0);
        let w = wages_classic(0.9, 0.9, &p).unwrap();
        assert_relative_eq!(
            average_wage(0.9, 0.9, &p).unwrap(),
            w.w_s,
            max_relative = 1e-12
        );
    }

    #[test]
    fn equilibrium_closed_form_examples() {
        let p = classic(2.0, 1.0, 1.0, 1.0, 1.0);
        let eq = equilibrium_classic(1.0, &p).unwrap();
        for v in [eq.n_s, eq.n_u, eq.w_s, eq.w_u] {
            assert_relative_eq!(v, 1.0, epsilon = 1e-14);
        }
        let p = classic(2.0, 2.0, 1.0, 2.0, 1.0);
        let eq = equilibrium_classic(1.0, &p).unwrap();
        assert_relative_eq!(eq.n_s, 2f64.powf(0.2), epsilon = 1e-14);
        assert!((eq.n_s - 1.1487).abs() < 1e-4);
        assert_relative_eq!(eq.n_u, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn equilibrium_wage_clears_the_marginal_product_condition() {
        // With L held fixed, w_s* must equal A_s^((d-1)/d) (L / s*)^(1/d).
        let p = ModelParamsClassic {
            gamma_disutility: 1.7,
            ..classic(2.3, 1.9, 1.2, 1.6, 0.7)
        };
        let l = 3.1;
        let eq = equilibrium_classic(l, &p).unwrap();
        let z = p.ces_exponent();
        assert_relative_eq!(
            eq.w_s,
            p.a_s.powf(z) * (l / eq.n_s).powf(1.0 / p.delta),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            eq.w_u,
            p.a_u.powf(z) * (l / eq.n_u).powf(1.0 / p.delta),
            max_relative = 1e-12
        );
    }

    #[test]
    fn composition_ratio_examples() {
        let p = classic(2.0, 2.0, 1.0, 2.0, 1.0);
        assert!((composition_ratio(1.0, &p).unwrap() - 1.1487).abs() < 1e-4);
        let at_two = composition_ratio(2.0, &p).unwrap();
        assert_relative_eq!(
            at_two,
            4f64.powf(0.2) / 2f64.powf(1.0 / 3.0),
            epsilon = 1e-14
        );
        assert!((at_two - 1.0474).abs() < 2e-4);
        let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
        let ratios: Vec<f64> = grid
            .iter()
            .map(|&l| composition_ratio(l, &p).unwrap())
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn demand_shock_cases() {
        assert_eq!(demand_shock(2.0, 2.0, 0.5).unwrap(), 0.0);
        assert_eq!(demand_shock(1.0, 0.0, 0.5).unwrap(), 0.5);
        assert_eq!(demand_shock(3.0, 1.0, 2.0).unwrap(), 4.0);
        assert!(matches!(demand_shock(1.0, 2.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn total_demand_cases() {
        let d = DemandParams {
            l_bar_br: 1.0,
            l_other: 1.0,
            ..DemandParams::default()
        };
        assert_eq!(total_demand(&d, 0.0, 0.0).unwrap(), 2.0);
        let d = DemandParams {
            l_bar_br: 1.0,
            l_other: 0.0,
            shock_scale: 1.0,
            ..d
        };
        assert_eq!(total_demand(&d, 2.0, 1.0).unwrap(), 2.0);

        // dL/dBR = lambda (1 - f) holding the forum-shopped share fixed.
        let d = DemandParams {
            shock_scale: 0.7,
            ..d
        };
        let (br, f, h) = (3.0, 0.25, 1e-5);
        let at = |b: f64| total_demand(&d, b, f * b).unwrap();
        let fd = (at(br + h) - at(br - h)) / (2.0 * h);
        assert_relative_eq!(fd, 0.7 * 0.75, max_relative = 1e-8);
    }

    #[test]
    fn theta_cases() {
        let d = DemandParams {
            l_bar_county: 9.0,
            phi_fees: 1.0,
            ..DemandParams::default()
        };
        assert_relative_eq!(delta_theta(&d, 1.0, 0.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(delta_theta(&d, 2.0, 2.0).unwrap(), 0.0);
        let d = DemandParams {
            l_bar_county: 10.0,
            phi_fees: 2.0,
            ..d
        };
        assert_eq!(theta_level(&d, 3.0).unwrap(), 16.0);
    }

    #[test]
    fn log_diff_demand_cases() {
        let p = ModelParamsGmm {
            alpha: 1.2,
            ..symmetric_gmm()
        };
        assert_eq!(log_diff_demand(0.0, 0.0, 0.03, 0.6, &p), (0.03, 0.03));
        let p = ModelParamsGmm {
            alpha: 0.3,
            ..symmetric_gmm()
        };
        let (dw_s, _) = log_diff_demand(0.02, -0.4, 0.01, 0.6, &p);
        assert_relative_eq!(dw_s, 0.01 + (0.3 - 1.0) * 0.02, epsilon = 1e-15);
    }

    #[test]
    fn log_diff_demand_matches_log_wages() {
        // Numeric log-differentiation of the marginal products between two
        // nearby states; the error must shrink quadratically in the step.
        let p = ModelParamsGmm {
            share_lambda: 0.6,
            a_rel: 2.4,
            alpha: 1.29,
            ..symmetric_gmm()
        };
        let (s0, u0, th0) = (0.42f64, 0.58f64, 1.0f64);
        let pi = skill_share(s0, u0, &p).unwrap();
        let w0 = wages_gmm(s0, u0, th0, &p).unwrap();
        let mut errors = Vec::new();
        for step in [1e-2, 5e-3] {
            let (ds, du, dt): (f64, f64, f64) = (step, -0.5 * step, 0.8 * step);
            let w1 = wages_gmm(s0 * ds.exp(), u0 * du.exp(), th0 * dt.exp(), &p).unwrap();
            let (pred_s, pred_u) = log_diff_demand(ds, du, dt, pi, &p);
            let err = ((w1.w_s / w0.w_s).ln() - pred_s)
                .abs()
                .max(((w1.w_u / w0.w_u).ln() - pred_u).abs());
            errors.push(err);
        }
        assert!(errors[0] < 1e-4);
        let ratio = errors[0] / errors[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn log_diff_supply_cases() {
        let p = ModelParamsGmm {
            rho_s: 1.0,
            ..symmetric_gmm()
        };
        assert_eq!(log_diff_supply(0.0, 0.0, &p), (0.0, 0.0));
        assert_eq!(log_diff_supply(0.07, 0.0, &p).0, 0.07);
        // Log-difference of the supply curve itself.
        let (w0, w1) = (1.3f64, 1.45f64);
        let n0 = labor_supply(w0, p.rho_u, 1.0).unwrap();
        let n1 = labor_supply(w1, p.rho_u, 1.0).unwrap();
        let (_, dn_u) = log_diff_supply(0.0, (w1 / w0).ln(), &p);
        assert_relative_eq!(dn_u, (n1 / n0).ln(), max_relative = 1e-13);
    }

    #[test]
    fn log_diff_equilibrium_satisfies_all_four_equations() {
        let p = ModelParamsGmm::baseline();
        let ch = log_diff_equilibrium(0.04, 0.63, &p, [0.01, -0.02, 0.003, 0.004]).unwrap();
        let (dw_s, dw_u) = log_diff_demand(ch.dn_s, ch.dn_u, 0.04, 0.63, &p);
        let (dn_s, dn_u) = log_diff_supply(ch.dw_s, ch.dw_u, &p);
        assert!((ch.dw_s - dw_s - 0.01).abs() < 1e-15);
        assert!((ch.dw_u - dw_u + 0.02).abs() < 1e-15);
        assert!((ch.dn_s - dn_s - 0.003).abs() < 1e-15);
        assert!((ch.dn_u - dn_u - 0.004).abs() < 1e-15);
    }

    #[test]
    fn calibration_values() {
        let cal = calibrate_gmm(0.42, 2.40, 1.4).unwrap();
        assert!((cal.zeta - 0.2857).abs() < 1e-4);
        assert!((cal.pi_share - 0.63).abs() < 0.01);
        assert!(
            (cal.share_lambda - 0.597).abs() < 1e-3,
            "lambda {}",
            cal.share_lambda
        );
        assert_relative_eq!(elasticity_from_zeta(cal.zeta), 1.4, epsilon = 1e-12);
        assert!(calibrate_gmm(0.42, 2.40, 0.0).is_err());
        assert!(calibrate_gmm(1.2, 2.40, 1.4).is_err());
    }

    #[test]
    fn classic_embeds_into_gmm() {
        let c = classic(2.4, 1.8, 0.9, 1.0, 1.0);
        let (g, theta) = ModelParamsGmm::from_classic(&c).unwrap();
        let (s, u) = (0.7, 1.6);
        assert_relative_eq!(
            ces_output_gmm(s, u, theta, &g).unwrap(),
            ces_output_classic(s, u, &c).unwrap(),
            max_relative = 1e-12
        );
        let wc = wages_classic(s, u, &c).unwrap();
        let wg = wages_gmm(s, u, theta, &g).unwrap();
        assert_relative_eq!(wc.w_s, wg.w_s, max_relative = 1e-12);
        assert_relative_eq!(wc.w_u, wg.w_u, max_relative = 1e-12);
    }
}
