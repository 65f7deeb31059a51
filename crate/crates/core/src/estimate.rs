//! Drift estimators for `θ` built from time integrals of the observed modes.
//!
//! All estimators share the form `θ̂ = -numerator / D_N + bias`, with
//!
//! * `D_N = ∫ Σ_{k≤N} λ_k^{2+2α} (x^k)^2 dt`,
//! * numerator `∫ <(-A)^{1+2α} X^N, dX^N>`, either through the endpoint
//!   (Itô-formula) representation or as a discrete Itô sum,
//! * bias `∫ Σ_{k≤N} λ_k^{1+2α} x^k F^k(U) dt / D_N` where `U` is the full
//!   field (`full`), the truncated field (`partial`) or absent (`linear`).
//!
//! Time integrals are left-endpoint Riemann sums at the resolution at which
//! the path is recorded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridSpec, NonlinearitySpec, Pseudospectral};
use crate::spectrum::{ModeVector, OperatorSpec};

/// Values of `D_N` at or below this are treated as zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Partial,
    Partial1,
    Partial2,
    Linear,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Partial => "partial",
            Variant::Partial1 => "partial1",
            Variant::Partial2 => "partial2",
            Variant::Linear => "linear",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Variant::Full,
            "partial" => Variant::Partial,
            "partial1" => Variant::Partial1,
            "partial2" => Variant::Partial2,
            "linear" => Variant::Linear,
            other => {
                return Err(Error::Config(format!(
                    "estimators.variants: unknown variant `{other}`"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumeratorMode {
    /// Endpoint representation with the quadratic-variation correction.
    #[default]
    Robust,
    /// Discrete Itô sum `Σ_j Σ_k λ_k^{1+2α} x_j^k (x_{j+1}^k - x_j^k)`.
    ItoSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRequest {
    pub alpha: f64,
    pub n_list: Vec<usize>,
    pub variants: Vec<Variant>,
    /// Nonlinearity used inside the bias terms; may differ from the true drift.
    pub bias_model: NonlinearitySpec,
    pub numerator_mode: NumeratorMode,
}

impl EstimatorRequest {
    pub fn new(alpha: f64, n_list: Vec<usize>, bias_model: NonlinearitySpec) -> Self {
        Self {
            alpha,
            n_list,
            variants: vec![Variant::Full, Variant::Partial, Variant::Linear],
            bias_model,
            numerator_mode: NumeratorMode::Robust,
        }
    }

    pub fn coupled(alpha: f64, n_list: Vec<usize>, bias_model: NonlinearitySpec) -> Self {
        Self {
            variants: vec![Variant::Full, Variant::Partial1, Variant::Partial2, Variant::Linear],
            ..Self::new(alpha, n_list, bias_model)
        }
    }

    pub fn max_n(&self) -> usize {
        self.n_list.last().copied().unwrap_or(0)
    }

    pub fn wants(&self, v: Variant) -> bool {
        self.variants.contains(&v)
    }

    fn wants_partial(&self) -> bool {
        self.wants(Variant::Partial) || self.wants(Variant::Partial1)
    }

    pub fn validate(&self, n_sim: usize) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::Config("estimators.alpha must be finite".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("estimators.n_list must be nonempty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "estimators.n_list must be strictly ascending positive integers".into(),
            ));
        }
        if self.max_n() > n_sim {
            return Err(Error::Config(format!(
                "estimators.n_list: N = {} exceeds the simulated mode count n_sim = {n_sim}",
                self.max_n()
            )));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("estimators.variants must be nonempty".into()));
        }
        Ok(())
    }

    /// Logs a warning when `α` is outside the admissible range for the
    /// central limit theorem.
    pub fn warn_if_inadmissible(&self, gamma: f64, beta: f64) -> bool {
        let ok = alpha_admissible(self.alpha, gamma, beta);
        if !ok {
            log::warn!(
                "alpha = {} <= gamma - (1+1/beta)/8 = {}; asymptotic normality not covered",
                self.alpha,
                gamma - (1.0 + 1.0 / beta) / 8.0
            );
        }
        ok
    }
}

/// `α > γ - (1+β⁻¹)/8`.
pub fn alpha_admissible(alpha: f64, gamma: f64, beta: f64) -> bool {
    alpha > gamma - (1.0 + 1.0 / beta) / 8.0
}

/// Running time integrals for every `N` in `n_list`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAccumulator {
    pub operator: OperatorSpec,
    pub alpha: f64,
    pub gamma: f64,
    /// Noise amplitude `σ` in `σ(-A)^{-γ} dW`.
    pub sigma: f64,
    pub t_final: f64,
    pub n_list: Vec<usize>,
    pub denominator: Vec<f64>,
    pub bias_full: Option<Vec<f64>>,
    /// Truncated-field bias (`partial`, or `partial1` for coupled systems).
    pub bias_partial: Option<Vec<f64>>,
    /// Truncated field with the second component set to zero (coupled only).
    pub bias_partial2: Option<Vec<f64>>,
    pub ito_numerator: Vec<f64>,
    pub x0: ModeVector,
    pub x_t: ModeVector,
}

impl EstimatorAccumulator {
    fn index_of(&self, n: usize) -> Result<usize> {
        self.n_list
            .iter()
            .position(|&m| m == n)
            .ok_or_else(|| Error::Config(format!("N = {n} was not in the accumulated n_list")))
    }

    fn bias_for(&self, variant: Variant) -> Result<Option<&Vec<f64>>> {
        let b = match variant {
            Variant::Linear => return Ok(None),
            Variant::Full => self.bias_full.as_ref(),
            Variant::Partial | Variant::Partial1 => self.bias_partial.as_ref(),
            Variant::Partial2 => self.bias_partial2.as_ref(),
        };
        b.map(Some).ok_or_else(|| {
            Error::Config(format!("bias integrals for variant `{variant}` were not accumulated"))
        })
    }
}

/// `½ Σ_{k≤N} λ_k^{1+2α} ((x_T^k)² - (x_0^k)² - T λ_k^{-2γ})`.
pub fn robust_numerator(
    x0: &ModeVector,
    x_t: &ModeVector,
    t_final: f64,
    alpha: f64,
    gamma: f64,
    n: usize,
    spec: &OperatorSpec,
) -> f64 {
    robust_numerator_scaled(x0, x_t, t_final, alpha, gamma, 1.0, n, spec)
}

/// Robust numerator for noise `σ(-A)^{-γ} dW`: the quadratic variation of
/// mode `k` is `σ² T λ_k^{-2γ}`.
#[allow(clippy::too_many_arguments)]
pub fn robust_numerator_scaled(
    x0: &ModeVector,
    x_t: &ModeVector,
    t_final: f64,
    alpha: f64,
    gamma: f64,
    sigma: f64,
    n: usize,
    spec: &OperatorSpec,
) -> f64 {
    let qv = sigma * sigma * t_final;
    let mut sum = 0.0;
    for k in 1..=n {
        let lam = spec.eigenvalue(k);
        let a = x0.get(k - 1).copied().unwrap_or(0.0);
        let b = x_t.get(k - 1).copied().unwrap_or(0.0);
        sum += lam.powf(1.0 + 2.0 * alpha) * (b * b - a * a - qv * lam.powf(-2.0 * gamma));
    }
    0.5 * sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub variant: Variant,
    pub n: usize,
    pub alpha: f64,
    pub theta_hat: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// Bias actually added, i.e. exactly `theta_hat - (-numerator/denominator)`.
    pub bias: f64,
    pub z: Option<f64>,
}

impl EstimateResult {
    /// Attaches the standardized residual.
    pub fn with_z(mut self, theta_true: f64, v: f64, beta: f64) -> Result<Self> {
        self.z = Some(standardize(self.theta_hat, theta_true, v, beta, self.n)?);
        Ok(self)
    }
}

struct Parts {
    numerator: f64,
    denominator: f64,
    linear: f64,
}

fn parts(acc: &EstimatorAccumulator, mode: NumeratorMode, idx: usize) -> Result<Parts> {
    let n = acc.n_list[idx];
    let denominator = acc.denominator[idx];
    if !denominator.is_finite() {
        return Err(Error::BlowUp {
            step: 0,
            mode: n,
            value: denominator,
        });
    }
    if denominator <= DEGENERATE_DENOMINATOR {
        return Err(Error::Degenerate { n, denominator });
    }
    let numerator = match mode {
        NumeratorMode::Robust => robust_numerator_scaled(
            &acc.x0,
            &acc.x_t,
            acc.t_final,
            acc.alpha,
            acc.gamma,
            acc.sigma,
            n,
            &acc.operator,
        ),
        NumeratorMode::ItoSum => acc.ito_numerator[idx],
    };
    Ok(Parts {
        numerator,
        denominator,
        linear: -numerator / denominator,
    })
}

fn assemble(p: &Parts, bias_integral: Option<f64>) -> (f64, f64) {
    match bias_integral {
        None => (p.linear, 0.0),
        Some(b) => {
            let theta = p.linear + b / p.denominator;
            (theta, theta - p.linear)
        }
    }
}

/// `θ̂ = -numerator/D_N + bias` for one variant and truncation level.
pub fn estimate_theta(
    acc: &EstimatorAccumulator,
    req: &EstimatorRequest,
    variant: Variant,
    n: usize,
) -> Result<EstimateResult> {
    let idx = acc.index_of(n)?;
    let p = parts(acc, req.numerator_mode, idx)?;
    let b = acc.bias_for(variant)?.map(|v| v[idx]);
    let (theta_hat, bias) = assemble(&p, b);
    if !theta_hat.is_finite() {
        return Err(Error::BlowUp {
            step: 0,
            mode: n,
            value: theta_hat,
        });
    }
    Ok(EstimateResult {
        variant,
        n,
        alpha: acc.alpha,
        theta_hat,
        numerator: p.numerator,
        denominator: p.denominator,
        bias,
        z: None,
    })
}

/// All three single-equation estimators at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub theta_linear: f64,
    pub theta_full: Option<f64>,
    pub theta_partial: Option<f64>,
    pub bias_full: Option<f64>,
    pub bias_partial: Option<f64>,
}

/// Evaluates the estimators so that `theta_full - theta_linear == bias_full`
/// and `theta_partial - theta_linear == bias_partial` hold exactly in
/// floating point.
pub fn decompose(
    acc: &EstimatorAccumulator,
    req: &EstimatorRequest,
    n: usize,
) -> Result<Decomposition> {
    let idx = acc.index_of(n)?;
    let p = parts(acc, req.numerator_mode, idx)?;
    let full = acc.bias_full.as_ref().map(|b| assemble(&p, Some(b[idx])));
    let partial = acc.bias_partial.as_ref().map(|b| assemble(&p, Some(b[idx])));
    Ok(Decomposition {
        n,
        theta_linear: p.linear,
        theta_full: full.map(|f| f.0),
        theta_partial: partial.map(|f| f.0),
        bias_full: full.map(|f| f.1),
        bias_partial: partial.map(|f| f.1),
    })
}

/// The four estimators of a coupled system, in the order
/// `full, partial1, partial2, linear`.
pub fn coupled_estimates(
    acc: &EstimatorAccumulator,
    req: &EstimatorRequest,
    n: usize,
) -> Result<[EstimateResult; 4]> {
    Ok([
        estimate_theta(acc, req, Variant::Full, n)?,
        estimate_theta(acc, req, Variant::Partial1, n)?,
        estimate_theta(acc, req, Variant::Partial2, n)?,
        estimate_theta(acc, req, Variant::Linear, n)?,
    ])
}

/// `z = N^{(β+1)/2} (θ̂ - θ) / sqrt(V)`.
pub fn standardize(theta_hat: f64, theta_true: f64, v: f64, beta: f64, n: usize) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("asymptotic variance must be positive (got {v})")));
    }
    Ok((n as f64).powf(0.5 * (beta + 1.0)) * (theta_hat - theta_true) / v.sqrt())
}

/// Collects the estimator integrals along a path.
///
/// Call [`record`](Self::record) at every left endpoint and
/// [`record_increment`](Self::record_increment) for every step.
pub struct AccumulatorBuilder {
    operator: OperatorSpec,
    alpha: f64,
    gamma: f64,
    sigma: f64,
    n_list: Vec<usize>,
    weight_den: Vec<f64>,
    weight_pair: Vec<f64>,
    bias_model: NonlinearitySpec,
    reuse_true_drift: bool,
    full_eval: Option<Pseudospectral>,
    partial_evals: Vec<Pseudospectral>,
    want_full: bool,
    want_partial: bool,
    want_partial2: bool,
    denominator: Vec<f64>,
    bias_full: Vec<f64>,
    bias_partial: Vec<f64>,
    bias_partial2: Vec<f64>,
    ito: Vec<f64>,
    drift_buf: Vec<f64>,
    part_buf: Vec<f64>,
}

impl AccumulatorBuilder {
    /// `true_model` is the drift the simulator evaluates; when it equals the
    /// request's bias model the simulator's drift is reused for the
    /// full-field bias.
    pub fn new(
        operator: OperatorSpec,
        n_modes: usize,
        req: &EstimatorRequest,
        true_model: Option<&NonlinearitySpec>,
        gamma: f64,
        sigma: f64,
    ) -> Result<Self> {
        req.validate(n_modes)?;
        let n_max = req.max_n();
        let weight_den = (1..=n_max)
            .map(|k| operator.eigenvalue(k).powf(2.0 + 2.0 * req.alpha))
            .collect();
        let weight_pair = (1..=n_max)
            .map(|k| operator.eigenvalue(k).powf(1.0 + 2.0 * req.alpha))
            .collect();
        let active = !req.bias_model.is_none();
        let want_full = req.wants(Variant::Full);
        let want_partial = req.wants_partial();
        let want_partial2 = req.wants(Variant::Partial2);
        let reuse_true_drift = true_model == Some(&req.bias_model);
        let degree = req.bias_model.dealias_degree();
        let full_eval = if active && want_full && !reuse_true_drift {
            Some(Pseudospectral::new(
                &operator,
                GridSpec::padded(n_modes, degree).n_grid,
            )?)
        } else {
            None
        };
        let partial_evals = if active && (want_partial || want_partial2) {
            req.n_list
                .iter()
                .map(|&n| Pseudospectral::new(&operator, GridSpec::minimal(n, degree).n_grid))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let m = req.n_list.len();
        Ok(Self {
            operator,
            alpha: req.alpha,
            gamma,
            sigma,
            n_list: req.n_list.clone(),
            weight_den,
            weight_pair,
            bias_model: req.bias_model.clone(),
            reuse_true_drift,
            full_eval,
            partial_evals,
            want_full,
            want_partial,
            want_partial2,
            denominator: vec![0.0; m],
            bias_full: vec![0.0; m],
            bias_partial: vec![0.0; m],
            bias_partial2: vec![0.0; m],
            ito: vec![0.0; m],
            drift_buf: vec![0.0; n_modes],
            part_buf: vec![0.0; n_max],
        })
    }

    /// Adds the left-endpoint contributions of state `x` (and second
    /// component `w` for coupled systems) over an interval of length `dt`.
    /// `true_drift` is the drift the simulator computed at `x`, if any.
    pub fn record(
        &mut self,
        x: &[f64],
        w: Option<&[f64]>,
        dt: f64,
        true_drift: Option<&[f64]>,
    ) -> Result<()> {
        let n_max = self.weight_den.len();
        let mut sum = 0.0;
        let mut i = 0;
        for k in 0..n_max {
            sum += self.weight_den[k] * x[k] * x[k];
            if self.n_list[i] == k + 1 {
                self.denominator[i] += dt * sum;
                i += 1;
            }
        }
        if self.bias_model.is_none() {
            return Ok(());
        }
        let is_fhn = matches!(self.bias_model, NonlinearitySpec::Fhn(_));
        if self.want_full {
            let drift: &[f64] = match (self.reuse_true_drift, true_drift) {
                (true, Some(d)) => d,
                _ => {
                    let buf = &mut self.drift_buf[..x.len()];
                    let eval = match self.full_eval.as_mut() {
                        Some(e) => e,
                        None => {
                            let degree = self.bias_model.dealias_degree();
                            self.full_eval.insert(Pseudospectral::new(
                                &self.operator,
                                GridSpec::padded(x.len(), degree).n_grid,
                            )?)
                        }
                    };
                    eval.drift(x, &self.bias_model, buf)?;
                    if let (true, Some(w)) = (is_fhn, w) {
                        buf.iter_mut().zip(w).for_each(|(f, wk)| *f -= wk);
                    }
                    buf
                }
            };
            let mut sum = 0.0;
            let mut i = 0;
            for k in 0..n_max {
                sum += self.weight_pair[k] * x[k] * drift[k];
                if self.n_list[i] == k + 1 {
                    self.bias_full[i] += dt * sum;
                    i += 1;
                }
            }
        }
        if self.want_partial || self.want_partial2 {
            for (i, &n) in self.n_list.iter().enumerate() {
                let buf = &mut self.part_buf[..n];
                self.partial_evals[i].drift(&x[..n], &self.bias_model, buf)?;
                let mut own = 0.0;
                let mut coupling = 0.0;
                for k in 0..n {
                    let wx = self.weight_pair[k] * x[k];
                    own += wx * buf[k];
                    if let (true, Some(w)) = (is_fhn, w) {
                        coupling += wx * w[k];
                    }
                }
                if self.want_partial {
                    self.bias_partial[i] += dt * (own - coupling);
                }
                if self.want_partial2 {
                    self.bias_partial2[i] += dt * own;
                }
            }
        }
        Ok(())
    }

    /// Adds the Itô-sum contribution of one step `x -> x_next`.
    pub fn record_increment(&mut self, x: &[f64], x_next: &[f64]) {
        let n_max = self.weight_pair.len();
        let mut sum = 0.0;
        let mut i = 0;
        for k in 0..n_max {
            sum += self.weight_pair[k] * x[k] * (x_next[k] - x[k]);
            if self.n_list[i] == k + 1 {
                self.ito[i] += sum;
                i += 1;
            }
        }
    }

    pub fn finish(self, x0: ModeVector, x_t: ModeVector, t_final: f64) -> EstimatorAccumulator {
        let keep = |want: bool, v: Vec<f64>| if want { Some(v) } else { None };
        EstimatorAccumulator {
            operator: self.operator,
            alpha: self.alpha,
            gamma: self.gamma,
            sigma: self.sigma,
            t_final,
            n_list: self.n_list,
            denominator: self.denominator,
            bias_full: keep(self.want_full, self.bias_full),
            bias_partial: keep(self.want_partial, self.bias_partial),
            bias_partial2: keep(self.want_partial2, self.bias_partial2),
            ito_numerator: self.ito,
            x0,
            x_t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FhnParams, Polynomial};
    use crate::simulate::{simulate, ModelSpec, SchemeSpec};
    use std::f64::consts::PI;

    fn mv(v: &[f64]) -> ModeVector {
        ModeVector::new(v.to_vec()).unwrap()
    }

    fn allen_cahn() -> NonlinearitySpec {
        NonlinearitySpec::Polynomial(Polynomial::new(vec![0.0, 1.0, 0.0, -1.0]).unwrap())
    }

    #[test]
    fn robust_numerator_examples() {
        let op = OperatorSpec::unit_interval();
        let x = mv(&[0.3, -0.2]);
        assert_eq!(robust_numerator(&x, &x, 0.0, 0.4, 0.4, 2, &op), 0.0);

        let z = ModeVector::zeros(1);
        for gamma in [0.25, 0.5, 1.3] {
            let v = robust_numerator(&z, &z, 1.0, gamma, gamma, 1, &op);
            assert!((v + PI * PI / 2.0).abs() < 1e-12);
        }

        let v = robust_numerator(&mv(&[1.0]), &mv(&[2.0]), 1.0, 0.0, 0.5, 1, &op);
        let want = 0.5 * PI * PI * (3.0 - 1.0 / (PI * PI));
        assert!((v - want).abs() < 1e-12);
        assert!((v - 14.304407).abs() < 1e-6);
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(0.02, 0.02, 0.5, 2.0, 20).unwrap(), 0.0);
        let v: f64 = 0.3;
        assert!((standardize(1.0 + v.sqrt(), 1.0, v, 2.0, 1).unwrap() - 1.0).abs() < 1e-15);
        let z = standardize(0.021, 0.02, 0.012159, 2.0, 20).unwrap();
        assert!((z - 0.8112).abs() < 1e-4, "{z}");
        assert!(matches!(standardize(0.1, 0.1, 0.0, 2.0, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn request_validation() {
        let ok = EstimatorRequest::new(0.4, vec![2, 4, 8], NonlinearitySpec::None);
        assert!(ok.validate(8).is_ok());
        assert!(ok.validate(7).is_err());
        for bad in [vec![], vec![4, 2], vec![2, 2], vec![0, 1]] {
            assert!(EstimatorRequest::new(0.4, bad, NonlinearitySpec::None).validate(8).is_err());
        }
        assert!(ok.warn_if_inadmissible(0.4, 2.0));
        let low = EstimatorRequest::new(0.2, vec![1], NonlinearitySpec::None);
        assert!(!low.warn_if_inadmissible(0.4, 2.0));
        assert_eq!("partial2".parse::<Variant>().unwrap(), Variant::Partial2);
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_trajectory_is_degenerate() {
        let mut model = ModelSpec::linear(1.0, 1.0, 4);
        model.sigma = 0.0;
        let scheme = SchemeSpec::new(1e-2, 1.0, 3);
        let req = EstimatorRequest::new(1.0, vec![1, 4], NonlinearitySpec::None);
        let out = simulate(&model, &scheme, &req).unwrap();
        for v in [Variant::Full, Variant::Partial, Variant::Linear] {
            assert!(matches!(
                estimate_theta(&out.accumulators, &req, v, 4),
                Err(Error::Degenerate { n: 4, .. })
            ));
        }
        assert!(decompose(&out.accumulators, &req, 1).is_err());
    }

    #[test]
    fn linear_model_variants_coincide() {
        let model = ModelSpec::linear(0.1, 0.5, 16);
        let scheme = SchemeSpec::new(1e-3, 1.0, 11);
        let req = EstimatorRequest::new(0.5, vec![2, 8, 16], NonlinearitySpec::None);
        let out = simulate(&model, &scheme, &req).unwrap();
        for &n in &req.n_list {
            let f = estimate_theta(&out.accumulators, &req, Variant::Full, n).unwrap();
            let p = estimate_theta(&out.accumulators, &req, Variant::Partial, n).unwrap();
            let l = estimate_theta(&out.accumulators, &req, Variant::Linear, n).unwrap();
            assert_eq!(f.theta_hat, l.theta_hat);
            assert_eq!(p.theta_hat, l.theta_hat);
            let d = decompose(&out.accumulators, &req, n).unwrap();
            assert_eq!(d.bias_full, Some(0.0));
            assert_eq!(d.bias_partial, Some(0.0));
        }
    }

    #[test]
    fn denominator_is_monotone_in_n() {
        let model = ModelSpec::allen_cahn(0.02, 0.4, 32);
        let scheme = SchemeSpec::new(1e-3, 0.5, 5);
        let req = EstimatorRequest::new(0.4, vec![1, 2, 4, 8, 16, 32], allen_cahn());
        let out = simulate(&model, &scheme, &req).unwrap();
        let d = &out.accumulators.denominator;
        assert!(d.iter().all(|&v| v >= 0.0));
        assert!(d.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn decomposition_is_exact() {
        let model = ModelSpec::allen_cahn(0.02, 0.4, 32);
        let scheme = SchemeSpec::new(1e-3, 1.0, 9);
        let req = EstimatorRequest::new(0.4, vec![4, 8, 16, 32], allen_cahn());
        let out = simulate(&model, &scheme, &req).unwrap();
        let acc = &out.accumulators;
        for (i, &n) in req.n_list.iter().enumerate() {
            let d = decompose(acc, &req, n).unwrap();
            let (full, partial) = (d.theta_full.unwrap(), d.theta_partial.unwrap());
            assert_eq!(full - d.theta_linear, d.bias_full.unwrap());
            assert_eq!(partial - d.theta_linear, d.bias_partial.unwrap());
            // The reported bias is the rounded bias integral ratio.
            let ratio = acc.bias_full.as_ref().unwrap()[i] / acc.denominator[i];
            let tol = 4.0 * f64::EPSILON * (d.theta_linear.abs() + full.abs());
            assert!((d.bias_full.unwrap() - ratio).abs() <= tol);
            let e = estimate_theta(acc, &req, Variant::Full, n).unwrap();
            assert_eq!(e.theta_hat, full);
            assert_eq!(e.theta_hat - (-e.numerator / e.denominator), e.bias);
        }
        // At full resolution the truncated field is the field itself.
        let d = decompose(acc, &req, 32).unwrap();
        let (a, b) = (d.bias_full.unwrap(), d.bias_partial.unwrap());
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn misspecified_none_collapses_to_linear() {
        let model = ModelSpec::allen_cahn(0.02, 0.4, 16);
        let scheme = SchemeSpec::new(1e-3, 0.5, 2);
        let req = EstimatorRequest::new(0.4, vec![4, 16], NonlinearitySpec::None);
        let out = simulate(&model, &scheme, &req).unwrap();
        for n in [4, 16] {
            let d = decompose(&out.accumulators, &req, n).unwrap();
            assert_eq!(d.theta_full, Some(d.theta_linear));
            assert_eq!(d.theta_partial, Some(d.theta_linear));
        }
    }

    #[test]
    fn ito_sum_recovers_deterministic_decay() {
        let theta = 0.1;
        let mut model = ModelSpec::linear(theta, 0.5, 1);
        model.sigma = 0.0;
        model.initial_modes = mv(&[1.0]);
        let scheme = SchemeSpec::new(1e-5, 1.0, 0);
        for alpha in [-0.5, 0.0, 0.7] {
            let mut req = EstimatorRequest::new(alpha, vec![1], NonlinearitySpec::None);
            req.numerator_mode = NumeratorMode::ItoSum;
            let out = simulate(&model, &scheme, &req).unwrap();
            let e = estimate_theta(&out.accumulators, &req, Variant::Linear, 1).unwrap();
            assert!(((e.theta_hat - theta) / theta).abs() < 1e-3, "alpha = {alpha}: {}", e.theta_hat);
        }
    }

    #[test]
    fn coupled_variants() {
        // No coupling and no w-noise: w stays zero.
        let p = FhnParams {
            epsilon: 0.0,
            sigma_w: 0.0,
            ..FhnParams::default()
        };
        let model = ModelSpec::fhn(0.02, 0.8, 16, p);
        let scheme = SchemeSpec::new(1e-3, 0.5, 4);
        let nl = NonlinearitySpec::Fhn(p);
        let req = EstimatorRequest::coupled(0.8, vec![4, 16], nl);
        let out = simulate(&model, &scheme, &req).unwrap();
        for n in [4, 16] {
            let [f, p1, p2, l] = coupled_estimates(&out.accumulators, &req, n).unwrap();
            assert_eq!(p1.theta_hat, p2.theta_hat);
            assert_eq!(l.bias, 0.0);
            assert!(f.theta_hat.is_finite());
        }

        let p = FhnParams::default();
        let model = ModelSpec::fhn(0.02, 0.8, 16, p);
        let req = EstimatorRequest::coupled(0.8, vec![4, 16], NonlinearitySpec::Fhn(p));
        let out = simulate(&model, &scheme, &req).unwrap();
        let [f, p1, p2, _] = coupled_estimates(&out.accumulators, &req, 16).unwrap();
        assert!((f.theta_hat - p1.theta_hat).abs() < 1e-10 * f.theta_hat.abs().max(1.0));
        assert_ne!(p1.theta_hat, p2.theta_hat);
        assert_eq!(
            [f.variant, p1.variant, p2.variant],
            [Variant::Full, Variant::Partial1, Variant::Partial2]
        );
    }

    #[test]
    fn unknown_n_is_rejected() {
        let model = ModelSpec::linear(0.1, 0.5, 4);
        let scheme = SchemeSpec::new(1e-2, 1.0, 1);
        let req = EstimatorRequest::new(0.5, vec![2, 4], NonlinearitySpec::None);
        let out = simulate(&model, &scheme, &req).unwrap();
        assert!(matches!(
            estimate_theta(&out.accumulators, &req, Variant::Linear, 3),
            Err(Error::Config(_))
        ));
    }
}
