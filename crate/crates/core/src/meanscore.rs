//! The mean score estimator.
//!
//! The pattern-mixture model `E[y | x, r] = h(β_Pᵀx_P + Δ(x)(1 - r))` is fitted
//! to complete cases; each missing outcome is replaced by its conditional mean
//! ỹᵢ = h(β_Pᵀx_Pi + Δᵢ), and the substantive GLM is solved with ỹ. The
//! variance comes from the sandwich over the stacked estimating equations
//! `(U_S, U_P)`, and the effective sample size from the influence of the
//! individuals with missing outcomes.

use nalgebra::{DMatrix, DVector};

use crate::cluster::{self, ClusterSummary};
use crate::data::TrialDataset;
use crate::delta::{Departure, DeltaSpec};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, GlmFamily, GlmFit};
use crate::inference::{confidence_interval, small_sample_factor, IntervalEstimate};
use crate::linalg::{spd_inverse, symmetrize};

/// Bread, meat and sandwich of the stacked estimating equations, plus the
/// per-row score contributions `Uᵢ` (n × (p_S + p_P)).
#[derive(Clone, Debug)]
pub struct Sandwich {
    pub bread: DMatrix<f64>,
    pub meat: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub scores: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceSummary {
    pub n_eff: f64,
    pub i_mis: f64,
    pub i_mis_star: f64,
}

impl InfluenceSummary {
    /// `I_mis / I_mis*`, with `0/0` read as 1.
    pub fn ratio(&self) -> f64 {
        if self.i_mis_star == 0.0 {
            1.0
        } else {
            self.i_mis / self.i_mis_star
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanScoreFit {
    pub family: GlmFamily,
    pub beta_s: DVector<f64>,
    pub beta_p: DVector<f64>,
    /// Joint sandwich variance of `(β_S, β_P)`, uncorrected.
    pub v: DMatrix<f64>,
    /// Top-left `p_S × p_S` block of `v`.
    pub v_s: DMatrix<f64>,
    pub bread: DMatrix<f64>,
    pub meat: DMatrix<f64>,
    pub n_eff: f64,
    pub i_mis: f64,
    pub i_mis_star: f64,
    pub ytilde: DVector<f64>,
    pub n: usize,
    pub n_obs: usize,
    pub arm_column: usize,
    pub clusters: Option<ClusterSummary>,
}

impl MeanScoreFit {
    pub fn p_s(&self) -> usize {
        self.beta_s.len()
    }

    pub fn p_star(&self) -> usize {
        self.family.p_star(self.p_s())
    }

    pub fn m_eff(&self) -> Option<f64> {
        self.clusters.as_ref().map(|c| c.m_eff)
    }

    pub fn correction_factor(&self) -> Result<f64> {
        small_sample_factor(self.n_eff, self.p_star(), self.m_eff())
    }

    /// `f · V_S`.
    pub fn corrected_variance(&self) -> Result<DMatrix<f64>> {
        Ok(&self.v_s * self.correction_factor()?)
    }

    pub fn treatment_effect(&self) -> f64 {
        self.beta_s[self.arm_column]
    }

    pub fn interval(&self, coef: usize, level: f64) -> Result<IntervalEstimate> {
        if coef >= self.p_s() {
            return Err(Error::Dimension(format!("coefficient {coef} outside β_S")));
        }
        confidence_interval(
            self.beta_s[coef],
            self.v_s[(coef, coef)],
            self.family,
            self.n_eff,
            self.p_star(),
            level,
            self.m_eff(),
        )
    }

    pub fn treatment_interval(&self, level: f64) -> Result<IntervalEstimate> {
        self.interval(self.arm_column, level)
    }
}

/// Complete-case GLM of y on `(XS, XA)`: the pattern-model coefficients.
pub fn fit_pattern_model(data: &TrialDataset, family: GlmFamily) -> Result<GlmFit> {
    if data.n_obs() < data.p_p() {
        return Err(Error::InsufficientData(format!(
            "{} observed outcomes for {} pattern-model parameters",
            data.n_obs(),
            data.p_p()
        )));
    }
    let (y, x) = data.complete_case_rows(data.xp());
    fit_glm(&y, &x, family, None, None)
}

/// ỹᵢ = yᵢ when observed, otherwise `h(β_Pᵀx_Pi + Δᵢ)`.
pub fn compute_ytilde(
    data: &TrialDataset,
    beta_p: &DVector<f64>,
    delta: &DeltaSpec,
    family: GlmFamily,
) -> Result<DVector<f64>> {
    let deps = delta.resolve(data, family)?;
    ytilde_resolved(data, beta_p, &deps, family)
}

fn ytilde_resolved(
    data: &TrialDataset,
    beta_p: &DVector<f64>,
    deps: &[Option<Departure>],
    family: GlmFamily,
) -> Result<DVector<f64>> {
    if beta_p.len() != data.p_p() {
        return Err(Error::Dimension(format!(
            "β_P has {} entries, pattern design has {} columns",
            beta_p.len(),
            data.p_p()
        )));
    }
    let xp = data.xp();
    Ok(DVector::from_iterator(
        data.n(),
        (0..data.n()).map(|i| match (data.outcome()[i], deps[i]) {
            (Some(y), _) => y,
            (None, Some(d)) => family.mean(d.shift(xp.row(i).dot(&beta_p.transpose()))),
            (None, None) => unreachable!("missing row without departure"),
        }),
    ))
}

/// Solves `Σ {ỹᵢ - h(β_Sᵀx_Si)} x_Si = 0`.
pub fn solve_substantive(data: &TrialDataset, ytilde: &DVector<f64>, family: GlmFamily) -> Result<DVector<f64>> {
    if ytilde.len() != data.n() || ytilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData("ỹ must be complete and finite".into()));
    }
    Ok(fit_glm(ytilde, data.xs(), family, None, None)?.beta)
}

/// Per-row stacked scores `Uᵢ = (U_Si, U_Pi)` evaluated at `(β_S, β_P)`.
pub fn stacked_scores(
    data: &TrialDataset,
    family: GlmFamily,
    delta: &DeltaSpec,
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let deps = delta.resolve(data, family)?;
    Ok(scores_resolved(data, family, &deps, beta_s, beta_p))
}

fn scores_resolved(
    data: &TrialDataset,
    family: GlmFamily,
    deps: &[Option<Departure>],
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
) -> DMatrix<f64> {
    let (xs, xp) = (data.xs(), data.xp());
    let (ps, pp) = (data.p_s(), data.p_p());
    let mut u = DMatrix::zeros(data.n(), ps + pp);
    for i in 0..data.n() {
        let eta_s = xs.row(i).dot(&beta_s.transpose());
        let eta_p = xp.row(i).dot(&beta_p.transpose());
        let (e_s, e_p) = match (data.outcome()[i], deps[i]) {
            (Some(y), _) => (y - family.mean(eta_s), y - family.mean(eta_p)),
            (None, Some(d)) => (family.mean(d.shift(eta_p)) - family.mean(eta_s), 0.0),
            (None, None) => unreachable!("missing row without departure"),
        };
        for a in 0..ps {
            u[(i, a)] = e_s * xs[(i, a)];
        }
        if e_p != 0.0 {
            for a in 0..pp {
                u[(i, ps + a)] = e_p * xp[(i, a)];
            }
        }
    }
    u
}

/// Bread `B = -dU/dβ` of the stacked system at `(β_S, β_P)`, blockwise.
pub fn stacked_bread(
    data: &TrialDataset,
    family: GlmFamily,
    delta: &DeltaSpec,
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let deps = delta.resolve(data, family)?;
    Ok(bread_resolved(data, family, &deps, beta_s, beta_p))
}

fn bread_resolved(
    data: &TrialDataset,
    family: GlmFamily,
    deps: &[Option<Departure>],
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
) -> DMatrix<f64> {
    let (xs, xp) = (data.xs(), data.xp());
    let (ps, pp) = (data.p_s(), data.p_p());
    let mut b = DMatrix::zeros(ps + pp, ps + pp);
    for i in 0..data.n() {
        let eta_s = xs.row(i).dot(&beta_s.transpose());
        let eta_p = xp.row(i).dot(&beta_p.transpose());
        let d_ss = family.mean_deriv(eta_s);
        for a in 0..ps {
            for c in 0..ps {
                b[(a, c)] += d_ss * xs[(i, a)] * xs[(i, c)];
            }
        }
        match deps[i] {
            None => {
                let d_pp = family.mean_deriv(eta_p);
                for a in 0..pp {
                    for c in 0..pp {
                        b[(ps + a, ps + c)] += d_pp * xp[(i, a)] * xp[(i, c)];
                    }
                }
            }
            Some(dep) => {
                let d_sp = family.mean_deriv(dep.shift(eta_p));
                if d_sp != 0.0 {
                    for a in 0..ps {
                        for c in 0..pp {
                            b[(a, ps + c)] -= d_sp * xs[(i, a)] * xp[(i, c)];
                        }
                    }
                }
            }
        }
    }
    b
}

/// Assembles `B`, `C = Σ UᵢUᵢᵀ` and `V = B⁻¹ C B⁻ᵀ`.
pub fn assemble_sandwich(
    data: &TrialDataset,
    family: GlmFamily,
    delta: &DeltaSpec,
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
) -> Result<Sandwich> {
    let deps = delta.resolve(data, family)?;
    let scores = scores_resolved(data, family, &deps, beta_s, beta_p);
    let bread = bread_resolved(data, family, &deps, beta_s, beta_p);
    let meat = scores.transpose() * &scores;
    sandwich_from(bread, meat, scores)
}

fn sandwich_from(bread: DMatrix<f64>, meat: DMatrix<f64>, scores: DMatrix<f64>) -> Result<Sandwich> {
    let binv = bread.clone().try_inverse().ok_or(Error::VarianceSingular)?;
    if binv.iter().any(|v| !v.is_finite()) {
        return Err(Error::VarianceSingular);
    }
    let mut variance = &binv * &meat * binv.transpose();
    symmetrize(&mut variance);
    Ok(Sandwich {
        bread,
        meat,
        variance,
        scores,
    })
}

/// Effective sample size `n_obs + (I_mis / I_mis*) n_mis`, clamped to `[n_obs, n]`.
///
/// `sigma2_p` is the pattern-model residual variance (identity link only);
/// for the logit link the variance of the unobserved outcome is
/// `μ(1 - μ)` at the pattern-mixture mean `h(β_Pᵀx_P + Δ)`.
pub fn influence_neff(
    data: &TrialDataset,
    family: GlmFamily,
    delta: &DeltaSpec,
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
    sandwich: &Sandwich,
    sigma2_p: Option<f64>,
) -> Result<InfluenceSummary> {
    let deps = delta.resolve(data, family)?;
    influence_resolved(data, family, &deps, beta_s, beta_p, sandwich, sigma2_p)
}

fn influence_resolved(
    data: &TrialDataset,
    family: GlmFamily,
    deps: &[Option<Departure>],
    beta_s: &DVector<f64>,
    beta_p: &DVector<f64>,
    sandwich: &Sandwich,
    sigma2_p: Option<f64>,
) -> Result<InfluenceSummary> {
    let (n, n_obs, n_mis) = (data.n(), data.n_obs(), data.n_mis());
    if n_mis == 0 {
        return Ok(InfluenceSummary {
            n_eff: n as f64,
            i_mis: 0.0,
            i_mis_star: 0.0,
        });
    }
    let ps = data.p_s();
    let v_s = sandwich.variance.view((0, 0), (ps, ps)).into_owned();
    let v_s_inv = spd_inverse(&v_s)
        .ok_or_else(|| Error::IllConditionedVariance("V_S is not positive definite".into()))?;
    let binv = sandwich
        .bread
        .clone()
        .try_inverse()
        .ok_or(Error::VarianceSingular)?;
    let b_ss = sandwich.bread.view((0, 0), (ps, ps)).into_owned();
    let b_ss_inv = b_ss.try_inverse().ok_or(Error::VarianceSingular)?;
    let q_mat = b_ss_inv.transpose() * &v_s_inv * &b_ss_inv;
    let binv_s = binv.rows(0, ps).into_owned();

    let (xs, xp) = (data.xs(), data.xp());
    let mut i_mis = 0.0;
    let mut i_star = 0.0;
    for (i, dep) in deps.iter().enumerate() {
        let Some(dep) = *dep else { continue };
        let u_i = sandwich.scores.row(i).transpose();
        let d = &binv_s * u_i;
        i_mis += (d.transpose() * &v_s_inv * &d)[(0, 0)];

        let x_si = xs.row(i).transpose();
        let eta_s = xs.row(i).dot(&beta_s.transpose());
        let mnar_eta = dep.shift(xp.row(i).dot(&beta_p.transpose()));
        let mu_star = family.mean(mnar_eta);
        let resid = mu_star - family.mean(eta_s);
        let var_star = match family {
            GlmFamily::Logit => family.mean_deriv(mnar_eta),
            GlmFamily::Identity => sigma2_p.ok_or_else(|| {
                Error::InsufficientData("pattern-model residual variance unavailable".into())
            })?,
        };
        let quad = (x_si.transpose() * &q_mat * &x_si)[(0, 0)];
        i_star += (resid * resid + var_star) * quad;
    }
    if i_star == 0.0 && i_mis > 0.0 {
        return Err(Error::DegenerateInfluence { i_mis });
    }
    let summary = InfluenceSummary {
        n_eff: 0.0,
        i_mis,
        i_mis_star: i_star,
    };
    let raw = n_obs as f64 + summary.ratio() * n_mis as f64;
    Ok(InfluenceSummary {
        n_eff: raw.clamp(n_obs as f64, n as f64),
        ..summary
    })
}

/// Runs the full estimator: pattern fit, ỹ, substantive solve, sandwich
/// (cluster-robust when the data carry cluster labels) and `n_eff`.
pub fn fit_mean_score(data: &TrialDataset, family: GlmFamily, delta: &DeltaSpec) -> Result<MeanScoreFit> {
    let deps = delta.resolve(data, family)?;
    let pattern = fit_pattern_model(data, family)?;
    let beta_p = pattern.beta;
    let ytilde = ytilde_resolved(data, &beta_p, &deps, family)?;
    let beta_s = solve_substantive(data, &ytilde, family)?;

    let scores = scores_resolved(data, family, &deps, &beta_s, &beta_p);
    let bread = bread_resolved(data, family, &deps, &beta_s, &beta_p);
    let meat = match data.clusters() {
        Some(ids) => cluster::clustered_meat(&scores, ids)?,
        None => scores.transpose() * &scores,
    };
    let sandwich = sandwich_from(bread, meat, scores)?;
    let infl = influence_resolved(
        data,
        family,
        &deps,
        &beta_s,
        &beta_p,
        &sandwich,
        pattern.residual_variance,
    )?;
    let clusters = match data.clusters() {
        Some(_) => {
            let mut summary = ClusterSummary::from_data(data)?;
            let (_, m_eff) = cluster::cluster_neff(
                infl.i_mis,
                infl.i_mis_star,
                &summary,
                data.n_obs(),
                data.n_mis(),
            )?;
            summary.m_eff = m_eff;
            Some(summary)
        }
        None => None,
    };
    let ps = data.p_s();
    let v_s = sandwich.variance.view((0, 0), (ps, ps)).into_owned();
    Ok(MeanScoreFit {
        family,
        beta_s,
        beta_p,
        v: sandwich.variance,
        v_s,
        bread: sandwich.bread,
        meat: sandwich.meat,
        n_eff: infl.n_eff,
        i_mis: infl.i_mis,
        i_mis_star: infl.i_mis_star,
        ytilde,
        n: data.n(),
        n_obs: data.n_obs(),
        arm_column: data.arm_column(),
        clusters,
    })
}
