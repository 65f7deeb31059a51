//! Closed-form asymptotics: rate and variance constants, Ornstein–Uhlenbeck
//! moments of the linear modes, and an advisor that tabulates the known
//! consistency/normality results for the standard example equations.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub c_mean: f64,
    pub c_var: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub rate_exponent: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive (got {v})")))
    }
}

/// Cumulative constants `C^E_α`, `C^Var_α`, the asymptotic variance `V` of
/// `N^{(β+1)/2}(θ̂_N - θ)` and the rate exponent `(β+1)/2`.
///
/// `V = 2θ(β(2α-2γ+1)+1)² / (TΛ(β(4α-4γ+1)+1))`, minimal at `α = γ`.
pub fn asymptotic_constants(
    theta: f64,
    t_final: f64,
    lambda_scale: f64,
    beta: f64,
    gamma: f64,
    alpha: f64,
) -> Result<AsymptoticConstants> {
    check_positive("theta", theta)?;
    check_positive("T", t_final)?;
    check_positive("Lambda", lambda_scale)?;
    check_positive("beta", beta)?;
    if !gamma.is_finite() || !alpha.is_finite() {
        return Err(Error::Domain("gamma and alpha must be finite".into()));
    }
    let bound = gamma - (1.0 + 1.0 / beta) / 8.0;
    if !(alpha > bound) {
        return Err(Error::Domain(format!(
            "hypothesis alpha > gamma - (1+1/beta)/8 violated: alpha = {alpha}, bound = {bound}"
        )));
    }
    let e = 2.0 * alpha - 2.0 * gamma + 1.0;
    let q = 4.0 * alpha - 4.0 * gamma + 1.0;
    let c_mean = t_final * lambda_scale.powf(e) / (2.0 * theta * (beta * e + 1.0));
    let c_var = t_final * lambda_scale.powf(q) / (2.0 * theta.powi(3) * (beta * q + 1.0));
    // V = C^E_{2α-γ} / (C^E_α)^2; the weights λ^{2α} cancel, so Λ enters only as 1/Λ.
    let v = 2.0 * theta * (beta * e + 1.0).powi(2) / (t_final * lambda_scale * (beta * q + 1.0));
    Ok(AsymptoticConstants {
        c_mean,
        c_var,
        v,
        rate_exponent: 0.5 * (beta + 1.0),
    })
}

/// Moments of `∫_0^T (x̄_t)^2 dt` for the mode `dx̄ = -θλ x̄ dt + λ^{-γ} dW`, `x̄_0 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuMoments {
    /// Exact `E ∫_0^T x̄_t² dt`.
    pub mean_integral: f64,
    /// Large-`λ` asymptote `Tλ^{-(4γ+3)} / (2θ³)` of the variance.
    pub var_integral_leading: f64,
}

pub fn ou_moment_oracle(theta: f64, gamma: f64, lambda: f64, t_final: f64) -> OuMoments {
    let s = lambda.powf(-(2.0 * gamma + 1.0)) / (2.0 * theta);
    let r = 2.0 * theta * lambda;
    // (1 - e^{-rT}) / r without cancellation.
    let tail = -(-r * t_final).exp_m1() / r;
    OuMoments {
        mean_integral: s * (t_final - tail),
        var_integral_leading: t_final * lambda.powf(-(4.0 * gamma + 3.0)) / (2.0 * theta.powi(3)),
    }
}

/// `E[x̄_s x̄_t] = λ^{-(2γ+1)}/(2θ) (e^{-θλ|t-s|} - e^{-θλ(t+s)})`.
pub fn ou_covariance(theta: f64, gamma: f64, lambda: f64, s: f64, t: f64) -> f64 {
    let scale = lambda.powf(-(2.0 * gamma + 1.0)) / (2.0 * theta);
    let a = theta * lambda;
    scale * ((-a * (t - s).abs()).exp() - (-a * (t + s)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    ReactionDiffusion,
    Burgers,
    CahnHilliard,
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "reaction_diffusion" => Ok(Example::ReactionDiffusion),
            "burgers" => Ok(Example::Burgers),
            "cahn_hilliard" => Ok(Example::CahnHilliard),
            other => Err(Error::Config(format!("unknown example `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvisorQuery {
    pub example: Example,
    /// Spatial dimension.
    pub n: usize,
    /// Polynomial degree of the reaction term.
    pub m_f: Option<usize>,
    pub gamma: f64,
    pub alpha: f64,
    pub m_f_odd: bool,
    pub leading_coeff_negative: bool,
    /// Parameters entering `V` only.
    pub theta: f64,
    pub t_final: f64,
    pub lambda_scale: f64,
}

impl AdvisorQuery {
    pub fn new(example: Example, gamma: f64, alpha: f64) -> Self {
        Self {
            example,
            n: 1,
            m_f: None,
            gamma,
            alpha,
            m_f_odd: false,
            leading_coeff_negative: false,
            theta: 1.0,
            t_final: 1.0,
            lambda_scale: std::f64::consts::PI.powi(2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AsymptoticallyNormal,
    /// Consistent with rate `N^a` for every `a` below the reported rate.
    ConsistentWithRate,
    Consistent,
    NotCovered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAdvice {
    pub status: Status,
    pub rate: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
}

impl EstimatorAdvice {
    fn normal(rate: f64, v: f64) -> Self {
        Self {
            status: Status::AsymptoticallyNormal,
            rate: Some(rate),
            v: Some(v),
        }
    }

    fn with_rate(rate: f64) -> Self {
        Self {
            status: Status::ConsistentWithRate,
            rate: Some(rate),
            v: None,
        }
    }

    fn consistent() -> Self {
        Self {
            status: Status::Consistent,
            rate: None,
            v: None,
        }
    }

    fn not_covered() -> Self {
        Self {
            status: Status::NotCovered,
            rate: None,
            v: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub satisfied: bool,
}

/// Parameters from the condition tables that drove the verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionParameters {
    pub beta: f64,
    pub rho_star: f64,
    /// `(1 + β⁻¹)/2`: excess regularity needed for asymptotic normality.
    pub normality_threshold: f64,
    /// Excess regularity from `(S_rho)`.
    pub epsilon_rho: Option<f64>,
    /// Excess regularity from `(S'_rho)`.
    pub epsilon_prime_rho: Option<f64>,
    pub delta_rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub example: Example,
    pub hypotheses: Vec<Hypothesis>,
    /// Regularity assumptions on the solution that are taken for granted.
    pub assumptions: Vec<String>,
    pub conditions: ConditionParameters,
    pub estimators: BTreeMap<String, EstimatorAdvice>,
}

impl Advice {
    pub fn failed_hypotheses(&self) -> Vec<&str> {
        self.hypotheses
            .iter()
            .filter(|h| !h.satisfied)
            .map(|h| h.name.as_str())
            .collect()
    }

    pub fn estimator(&self, name: &str) -> &EstimatorAdvice {
        &self.estimators[name]
    }
}

fn hyp(name: &str, satisfied: bool) -> Hypothesis {
    Hypothesis {
        name: name.to_string(),
        satisfied,
    }
}

/// `V` for reaction–diffusion in dimension `n` (`β = 2/n`).
pub fn reaction_diffusion_variance(theta: f64, t: f64, lambda: f64, n: usize, gamma: f64, alpha: f64) -> f64 {
    let n = n as f64;
    let d = alpha - gamma;
    2.0 * theta * (4.0 * d + n + 2.0).powi(2)
        / (t * lambda * n * (8.0 * d + n + 2.0))
}

/// `V` for the viscous Burgers equation.
pub fn burgers_variance(theta: f64, t: f64, lambda: f64, gamma: f64, alpha: f64) -> f64 {
    let d = alpha - gamma;
    2.0 * theta * (4.0 * d + 3.0).powi(2) / (t * lambda * (8.0 * d + 3.0))
}

/// `V` for Cahn–Hilliard in dimension `n` (`β = 4/n`).
pub fn cahn_hilliard_variance(theta: f64, t: f64, lambda: f64, n: usize, gamma: f64, alpha: f64) -> f64 {
    let n = n as f64;
    let d = alpha - gamma;
    2.0 * theta * (8.0 * d + n + 4.0).powi(2)
        / (t * lambda * n * (16.0 * d + n + 4.0))
}

/// Rate/variance verdicts for the full, partial and linear estimators.
pub fn advise(q: &AdvisorQuery) -> Result<Advice> {
    let mut problems = Vec::new();
    if q.n == 0 {
        problems.push("n >= 1".to_string());
    }
    if !(q.gamma > 0.0 && q.gamma.is_finite()) {
        problems.push("gamma > 0".to_string());
    }
    if !q.alpha.is_finite() {
        problems.push("alpha finite".to_string());
    }
    for (name, v) in [("theta", q.theta), ("T", q.t_final), ("Lambda", q.lambda_scale)] {
        if !(v > 0.0 && v.is_finite()) {
            problems.push(format!("{name} > 0"));
        }
    }
    match q.example {
        Example::ReactionDiffusion => match q.m_f {
            None => problems.push("reaction_diffusion requires m_F".to_string()),
            Some(m) if m < 2 => problems.push("m_F > 1".to_string()),
            _ => {}
        },
        Example::Burgers => {
            if q.n != 1 {
                problems.push("burgers requires n = 1".to_string());
            }
        }
        Example::CahnHilliard => {
            if q.n > 3 {
                problems.push("cahn_hilliard requires n <= 3".to_string());
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Config(format!(
            "invalid advisor query; violated: {}",
            problems.join(", ")
        )));
    }
    Ok(match q.example {
        Example::ReactionDiffusion => advise_reaction_diffusion(q),
        Example::Burgers => advise_burgers(q),
        Example::CahnHilliard => advise_cahn_hilliard(q),
    })
}

fn estimators(full: EstimatorAdvice, partial: EstimatorAdvice, linear: EstimatorAdvice) -> BTreeMap<String, EstimatorAdvice> {
    BTreeMap::from([
        ("full".to_string(), full),
        ("partial".to_string(), partial),
        ("linear".to_string(), linear),
    ])
}

/// Verdict from an excess regularity `x` against the threshold `(1+β⁻¹)/2`.
fn from_excess(x: f64, beta: f64, rate: f64, v: f64) -> EstimatorAdvice {
    if x > 0.5 * (1.0 + 1.0 / beta) {
        EstimatorAdvice::normal(rate, v)
    } else {
        EstimatorAdvice::with_rate(beta * x)
    }
}

fn better(a: EstimatorAdvice, b: EstimatorAdvice) -> EstimatorAdvice {
    let rank = |e: &EstimatorAdvice| match e.status {
        Status::AsymptoticallyNormal => (3, 0.0),
        Status::ConsistentWithRate => (2, e.rate.unwrap_or(0.0)),
        Status::Consistent => (1, 0.0),
        Status::NotCovered => (0, 0.0),
    };
    let (ra, rb) = (rank(&a), rank(&b));
    if rb.0 > ra.0 || (rb.0 == ra.0 && rb.1 > ra.1) {
        b
    } else {
        a
    }
}

fn advise_reaction_diffusion(q: &AdvisorQuery) -> Advice {
    let n = q.n as f64;
    let m_f = q.m_f.expect("validated");
    let m = m_f as f64;
    let beta = 2.0 / n;
    let rho_star = q.gamma - n / 4.0;
    let rate = 0.5 + 1.0 / n;
    let v = reaction_diffusion_variance(q.theta, q.t_final, q.lambda_scale, q.n, q.gamma, q.alpha);

    let h_alpha = q.alpha > q.gamma - (n + 2.0) / 16.0;
    let h_window = rho_star > (n / 4.0 - 1.0 / m).max(0.0);
    let h_smooth = q.gamma > n / 2.0 + 0.5;
    // (S_rho) must hold on all of [0, rho*) with the tabulated excess regularity.
    let s_covered = if m_f <= 3 { q.n <= 2 } else { m * n < 8.0 };
    let assumption_one = h_smooth && q.m_f_odd && q.leading_coeff_negative && s_covered;
    let epsilon = if m_f <= 3 { 1.0 } else { 0.5 + 2.0 / m };
    // (S'_rho) for every rho > n/4 - 1/m_F; with (A_rho) this gives eta up to it.
    let epsilon_prime = 0.5 + 1.0 / m;

    let hypotheses = vec![
        hyp("alpha > gamma - (n+2)/16", h_alpha),
        hyp("rho* > max(0, n/4 - 1/m_F)", h_window),
        hyp("gamma > n/2 + 1/2", h_smooth),
        hyp("m_F odd", q.m_f_odd),
        hyp("leading coefficient negative", q.leading_coeff_negative),
    ];
    let conditions = ConditionParameters {
        beta,
        rho_star,
        normality_threshold: 0.5 * (1.0 + 1.0 / beta),
        epsilon_rho: assumption_one.then_some(epsilon),
        epsilon_prime_rho: Some(epsilon_prime),
        delta_rho: h_smooth.then_some(1.0),
    };
    let assumptions = vec!["(A_rho) holds for some rho > n/4 - 1/m_F".to_string()];

    let est = if !(h_alpha && h_window) {
        estimators(
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
        )
    } else {
        let full = EstimatorAdvice::normal(rate, v);
        let by_prime = from_excess(epsilon_prime, beta, rate, v);
        let mut partial = better(EstimatorAdvice::consistent(), by_prime.clone());
        let mut linear = better(EstimatorAdvice::consistent(), by_prime);
        if h_smooth {
            // (T_rho) with delta_rho = 1 for rho > n/4 + 1/2.
            partial = better(partial, from_excess(1.0, beta, rate, v));
        }
        if assumption_one {
            let by_eps = from_excess(epsilon, beta, rate, v);
            partial = better(partial, by_eps.clone());
            linear = better(linear, by_eps);
        }
        estimators(full, partial, linear)
    };
    Advice {
        example: Example::ReactionDiffusion,
        hypotheses,
        assumptions,
        conditions,
        estimators: est,
    }
}

fn advise_burgers(q: &AdvisorQuery) -> Advice {
    let beta = 2.0;
    let h_gamma = q.gamma > 0.5;
    let h_alpha = q.alpha > q.gamma - 3.0 / 16.0;
    let v = burgers_variance(q.theta, q.t_final, q.lambda_scale, q.gamma, q.alpha);
    let est = if h_gamma && h_alpha {
        // (S_rho) with epsilon = 1/2 for all rho, (T_rho) with delta = 1/2.
        estimators(
            EstimatorAdvice::normal(1.5, v),
            from_excess(0.5, beta, 1.5, v),
            from_excess(0.5, beta, 1.5, v),
        )
    } else {
        estimators(
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
        )
    };
    Advice {
        example: Example::Burgers,
        hypotheses: vec![hyp("gamma > 1/2", h_gamma), hyp("alpha > gamma - 3/16", h_alpha)],
        assumptions: Vec::new(),
        conditions: ConditionParameters {
            beta,
            rho_star: q.gamma - 0.25,
            normality_threshold: 0.75,
            epsilon_rho: Some(0.5),
            epsilon_prime_rho: Some(0.25),
            delta_rho: Some(0.5),
        },
        estimators: est,
    }
}

fn advise_cahn_hilliard(q: &AdvisorQuery) -> Advice {
    let n = q.n as f64;
    let beta = 4.0 / n;
    let rho_star = q.gamma - n / 8.0;
    let rate = 0.5 + 2.0 / n;
    let v = cahn_hilliard_variance(q.theta, q.t_final, q.lambda_scale, q.n, q.gamma, q.alpha);
    let h_alpha = q.alpha > q.gamma - (n + 4.0) / 32.0;
    let h_dim = q.n <= 2 || q.gamma > 10.0 / 24.0;
    let h_reg = rho_star > n / 8.0;
    let mut hypotheses = vec![hyp("alpha > gamma - (n+4)/32", h_alpha)];
    if q.n == 3 {
        hypotheses.push(hyp("gamma > 10/24", h_dim));
    }
    hypotheses.push(hyp("rho* > n/8", h_reg));
    let est = if !h_alpha {
        estimators(
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
            EstimatorAdvice::not_covered(),
        )
    } else {
        let full = EstimatorAdvice::normal(rate, v);
        let (partial, linear) = if h_dim {
            let base = 4.0 / (3.0 * n);
            let partial = if h_reg { 2.0 / n } else { base };
            (EstimatorAdvice::with_rate(partial), EstimatorAdvice::with_rate(base))
        } else {
            (EstimatorAdvice::not_covered(), EstimatorAdvice::not_covered())
        };
        estimators(full, partial, linear)
    };
    Advice {
        example: Example::CahnHilliard,
        hypotheses,
        assumptions: Vec::new(),
        conditions: ConditionParameters {
            beta,
            rho_star,
            normality_threshold: 0.5 * (1.0 + 1.0 / beta),
            epsilon_rho: None,
            epsilon_prime_rho: Some(1.0 / 3.0),
            delta_rho: Some(0.5),
        },
        estimators: est,
    }
}
