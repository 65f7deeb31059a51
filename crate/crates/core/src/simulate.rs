//! Time integration in mode space.
//!
//! The semilinear equation `dX = (θAX + F(X))dt + σ(-A)^{-γ}dW` is stepped
//! with the linear-implicit Euler scheme
//!
//! ```text
//! x_{j+1}^k = (x_j^k + h F^k(X_j) + σ λ_k^{-γ} ΔW_j^k) / (1 + hθλ_k),
//! ```
//!
//! implicit in the stiff linear part and explicit in `F` and the noise. The
//! linear case can also be sampled from its exact Gaussian transition.
//!
//! Noise for mode `k` comes from its own ChaCha stream keyed by
//! `(seed, channel, k)`, so a path depends only on its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{AccumulatorBuilder, EstimatorAccumulator, EstimatorRequest};
use crate::fields::{FhnParams, GridSpec, NonlinearitySpec, Polynomial, Pseudospectral};
use crate::spectrum::{ModeVector, OperatorSpec};

const CHANNEL_PRIMARY: u64 = 0;
const CHANNEL_SECONDARY: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub operator: OperatorSpec,
    pub theta_true: f64,
    /// Noise smoothing exponent of `B = (-A)^{-γ}`.
    pub gamma: f64,
    /// Noise amplitude `σ`; 1 for the standard model, 0 disables the noise.
    pub sigma: f64,
    pub nonlinearity: NonlinearitySpec,
    pub initial_modes: ModeVector,
    /// Initial second component for FitzHugh–Nagumo (zero if absent).
    pub initial_w_modes: Option<ModeVector>,
    pub n_sim: usize,
    /// Collocation grid size; defaults to a padded power-of-two grid.
    pub n_grid: Option<usize>,
}

impl ModelSpec {
    /// Allen–Cahn `f(u) = u - u³` on the unit interval started from `sin(πx)`.
    pub fn allen_cahn(theta: f64, gamma: f64, n_sim: usize) -> Self {
        let op = OperatorSpec::unit_interval();
        Self {
            operator: op,
            theta_true: theta,
            gamma,
            sigma: 1.0,
            nonlinearity: NonlinearitySpec::Polynomial(
                Polynomial::new(vec![0.0, 1.0, 0.0, -1.0]).expect("valid cubic"),
            ),
            initial_modes: sine_initial_condition(&op, 1.0),
            initial_w_modes: None,
            n_sim,
            n_grid: None,
        }
    }

    pub fn linear(theta: f64, gamma: f64, n_sim: usize) -> Self {
        Self {
            nonlinearity: NonlinearitySpec::None,
            initial_modes: ModeVector::zeros(1),
            ..Self::allen_cahn(theta, gamma, n_sim)
        }
    }

    pub fn fhn(theta: f64, gamma: f64, n_sim: usize, params: FhnParams) -> Self {
        Self {
            nonlinearity: NonlinearitySpec::Fhn(params),
            ..Self::allen_cahn(theta, gamma, n_sim)
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let degree = self.nonlinearity.dealias_degree();
        match self.n_grid {
            None => Ok(GridSpec::padded(self.n_sim, degree)),
            Some(n) => {
                let g = GridSpec::new(n, self.n_sim)?;
                if n < degree * self.n_sim {
                    return Err(Error::Config(format!(
                        "model.n_grid = {n} violates dealiasing: need >= m_F * n_sim = {}",
                        degree * self.n_sim
                    )));
                }
                Ok(g)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_true > 0.0 && self.theta_true.is_finite()) {
            return Err(Error::Config(format!(
                "model.theta_true must be positive (got {})",
                self.theta_true
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "model.gamma must be positive (got {})",
                self.gamma
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "model.sigma must be nonnegative (got {})",
                self.sigma
            )));
        }
        if self.n_sim == 0 {
            return Err(Error::Config("model.n_sim must be at least 1".into()));
        }
        if self.initial_modes.modes() > self.n_sim {
            return Err(Error::Config(format!(
                "model.initial_modes has {} entries but n_sim = {}",
                self.initial_modes.modes(),
                self.n_sim
            )));
        }
        if let Some(w) = &self.initial_w_modes {
            if w.modes() > self.n_sim {
                return Err(Error::Config(
                    "model.initial_w_modes has more entries than n_sim".into(),
                ));
            }
        }
        if let NonlinearitySpec::Fhn(p) = &self.nonlinearity {
            p.validate()?;
        }
        self.grid()?;
        Ok(())
    }
}

/// Mode vector of `amplitude · sin(πx/L)`.
pub fn sine_initial_condition(op: &OperatorSpec, amplitude: f64) -> ModeVector {
    ModeVector::new(vec![amplitude * (op.domain_length / 2.0).sqrt()]).expect("finite")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub snapshot_stride: Option<usize>,
}

impl SchemeSpec {
    pub fn new(dt: f64, t_final: f64, seed: u64) -> Self {
        Self {
            dt,
            t_final,
            seed,
            snapshot_stride: None,
        }
    }

    /// Number of steps `T/h`, which must be an integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("scheme.dt must be positive (got {})", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "scheme.t_final must be positive (got {})",
                self.t_final
            )));
        }
        if self.dt > self.t_final {
            return Err(Error::Config("scheme.dt must not exceed scheme.t_final".into()));
        }
        let ratio = self.t_final / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps {
            return Err(Error::Config(format!(
                "scheme.t_final / scheme.dt = {ratio} is not an integer step count"
            )));
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::Config("scheme.snapshot_stride must be positive".into()));
        }
        Ok(steps as usize)
    }
}

/// Independent standard normals, one stream per mode.
pub struct NoiseSource {
    streams: Vec<ChaCha8Rng>,
}

impl NoiseSource {
    pub fn new(seed: u64, channel: u64, modes: usize) -> Self {
        let streams = (0..modes)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((channel << 32) | k as u64);
                rng
            })
            .collect();
        Self { streams }
    }

    /// Writes one `N(0,1)` draw per mode.
    pub fn fill(&mut self, out: &mut [f64]) {
        for (o, rng) in out.iter_mut().zip(self.streams.iter_mut()) {
            *o = rng.sample(StandardNormal);
        }
    }
}

/// Thinned path: `states[i]` is the state at `times[i]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeVector>,
}

impl Trajectory {
    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.push(ModeVector::new(x.to_vec()).expect("finite state"));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub x0: ModeVector,
    pub x_t: ModeVector,
    pub accumulators: EstimatorAccumulator,
    pub trajectory: Option<Trajectory>,
    pub w0: Option<ModeVector>,
    pub w_t: Option<ModeVector>,
    pub w_trajectory: Option<Trajectory>,
}

/// Dispatches to [`simulate_fhn`] or [`simulate_semilinear`].
pub fn simulate(model: &ModelSpec, scheme: &SchemeSpec, req: &EstimatorRequest) -> Result<SimOutput> {
    match model.nonlinearity {
        NonlinearitySpec::Fhn(_) => simulate_fhn(model, scheme, req),
        _ => simulate_semilinear(model, scheme, req),
    }
}

pub fn simulate_semilinear(
    model: &ModelSpec,
    scheme: &SchemeSpec,
    req: &EstimatorRequest,
) -> Result<SimOutput> {
    if matches!(model.nonlinearity, NonlinearitySpec::Fhn(_)) {
        return Err(Error::Config(
            "FitzHugh–Nagumo models are stepped by simulate_fhn".into(),
        ));
    }
    run(model, scheme, req, None)
}

pub fn simulate_fhn(model: &ModelSpec, scheme: &SchemeSpec, req: &EstimatorRequest) -> Result<SimOutput> {
    match model.nonlinearity {
        NonlinearitySpec::Fhn(p) => run(model, scheme, req, Some(p)),
        _ => Err(Error::Config(
            "simulate_fhn requires model.nonlinearity.variant = \"fhn\"".into(),
        )),
    }
}

fn run(
    model: &ModelSpec,
    scheme: &SchemeSpec,
    req: &EstimatorRequest,
    fhn: Option<FhnParams>,
) -> Result<SimOutput> {
    model.validate()?;
    let steps = scheme.n_steps()?;
    let op = model.operator;
    let n = model.n_sim;
    let h = scheme.dt;
    let sqrt_h = h.sqrt();
    let lam = op.eigenvalues(n);
    let amp: Vec<f64> = lam.iter().map(|l| model.sigma * l.powf(-model.gamma)).collect();
    let denom: Vec<f64> = lam.iter().map(|l| 1.0 + h * model.theta_true * l).collect();

    let mut eval = if model.nonlinearity.is_none() {
        None
    } else {
        Some(Pseudospectral::new(&op, model.grid()?.n_grid)?)
    };
    let cubic = fhn.map(|p| p.cubic());
    let mut builder = AccumulatorBuilder::new(
        op,
        n,
        req,
        Some(&model.nonlinearity),
        model.gamma,
        model.sigma,
    )?;
    let mut noise = NoiseSource::new(scheme.seed, CHANNEL_PRIMARY, n);

    let mut x = model.initial_modes.resized(n).into_vec();
    let x0 = ModeVector::new(x.clone())?;
    let mut drift = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut next = vec![0.0; n];

    // Second component (FitzHugh–Nagumo only).
    let mut w_state = fhn.map(|_| {
        model
            .initial_w_modes
            .as_ref()
            .map(|w| w.resized(n).into_vec())
            .unwrap_or_else(|| vec![0.0; n])
    });
    let w0 = w_state.as_ref().map(|w| ModeVector::new(w.clone())).transpose()?;
    let mut w_noise = fhn.map(|_| NoiseSource::new(scheme.seed, CHANNEL_SECONDARY, n));
    let w_amp: Vec<f64> = match fhn {
        Some(p) => lam.iter().map(|l| p.sigma_w * l.powf(-p.gamma_w)).collect(),
        None => Vec::new(),
    };
    let mut w_next = vec![0.0; if fhn.is_some() { n } else { 0 }];
    let mut w_xi = w_next.clone();

    let stride = scheme.snapshot_stride;
    let mut traj = stride.map(|_| Trajectory::default());
    let mut w_traj = stride.and(fhn).map(|_| Trajectory::default());
    if let Some(t) = traj.as_mut() {
        t.push(0.0, &x);
    }
    if let (Some(t), Some(w)) = (w_traj.as_mut(), w_state.as_ref()) {
        t.push(0.0, w);
    }

    for j in 0..steps {
        match (eval.as_mut(), &cubic) {
            (None, _) => {}
            (Some(e), Some(c)) => {
                e.polynomial(&x, c, &mut drift)?;
                if let Some(w) = w_state.as_ref() {
                    drift.iter_mut().zip(w).for_each(|(f, wk)| *f -= wk);
                }
            }
            (Some(e), None) => e.drift(&x, &model.nonlinearity, &mut drift)?,
        }
        builder.record(&x, w_state.as_deref(), h, Some(&drift))?;
        noise.fill(&mut xi);
        for k in 0..n {
            let v = (x[k] + h * drift[k] + amp[k] * sqrt_h * xi[k]) / denom[k];
            if !v.is_finite() {
                return Err(Error::BlowUp {
                    step: j + 1,
                    mode: k + 1,
                    value: v,
                });
            }
            next[k] = v;
        }
        if let (Some(p), Some(w), Some(src)) = (fhn, w_state.as_mut(), w_noise.as_mut()) {
            src.fill(&mut w_xi);
            for k in 0..n {
                let v = w[k] + h * p.epsilon * (x[k] - p.b * w[k]) + w_amp[k] * sqrt_h * w_xi[k];
                if !v.is_finite() {
                    return Err(Error::BlowUp {
                        step: j + 1,
                        mode: k + 1,
                        value: v,
                    });
                }
                w_next[k] = v;
            }
            std::mem::swap(w, &mut w_next);
        }
        builder.record_increment(&x, &next);
        std::mem::swap(&mut x, &mut next);

        if let Some(s) = stride {
            if (j + 1) % s == 0 || j + 1 == steps {
                let t = (j + 1) as f64 * h;
                if let Some(tr) = traj.as_mut() {
                    tr.push(t, &x);
                }
                if let (Some(tr), Some(w)) = (w_traj.as_mut(), w_state.as_ref()) {
                    tr.push(t, w);
                }
            }
        }
    }

    let x_t = ModeVector::new(x)?;
    let accumulators = builder.finish(x0.clone(), x_t.clone(), steps as f64 * h);
    Ok(SimOutput {
        x0,
        x_t,
        accumulators,
        trajectory: traj,
        w_t: w_state.map(ModeVector::new).transpose()?,
        w0,
        w_trajectory: w_traj,
    })
}

/// Exact transition of the Ornstein–Uhlenbeck mode
/// `dx = -θλ x dt + λ^{-γ} dW` over an interval of length `dt`:
/// returns `(e^{-θλ dt}, λ^{-γ} sqrt((1 - e^{-2θλ dt}) / (2θλ)))`.
pub fn ou_transition(theta: f64, gamma: f64, lambda: f64, dt: f64) -> (f64, f64) {
    let rate = theta * lambda;
    let decay = (-rate * dt).exp();
    let sd = lambda.powf(-gamma) * (-(-2.0 * rate * dt).exp_m1() / (2.0 * rate)).sqrt();
    (decay, sd)
}

/// Samples the linear equation (`F = 0`, `X_0 = 0`) exactly at `times`.
pub fn simulate_ou_exact(
    theta: f64,
    gamma: f64,
    spec: &OperatorSpec,
    n_modes: usize,
    times: &[f64],
    seed: u64,
) -> Result<Vec<ModeVector>> {
    if !(theta > 0.0) || !(gamma > 0.0) {
        return Err(Error::Config("theta and gamma must be positive".into()));
    }
    if n_modes == 0 {
        return Err(Error::Config("n_modes must be at least 1".into()));
    }
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "times must be nonnegative and strictly increasing".into(),
        ));
    }
    let lam = spec.eigenvalues(n_modes);
    let mut noise = NoiseSource::new(seed, CHANNEL_PRIMARY, n_modes);
    let mut xi = vec![0.0; n_modes];
    let mut x = vec![0.0; n_modes];
    let mut t_prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            noise.fill(&mut xi);
            for k in 0..n_modes {
                let (decay, sd) = ou_transition(theta, gamma, lam[k], dt);
                x[k] = decay * x[k] + sd * xi[k];
            }
        }
        out.push(ModeVector::new(x.clone())?);
        t_prev = t;
    }
    Ok(out)
}

/// Exact sampling of the linear equation on the uniform grid of `scheme`,
/// collecting the estimator integrals along the way.
pub fn simulate_ou_exact_accumulate(
    theta: f64,
    gamma: f64,
    spec: &OperatorSpec,
    n_modes: usize,
    scheme: &SchemeSpec,
    req: &EstimatorRequest,
) -> Result<SimOutput> {
    if !(theta > 0.0) || !(gamma > 0.0) {
        return Err(Error::Config("theta and gamma must be positive".into()));
    }
    let steps = scheme.n_steps()?;
    let h = scheme.dt;
    let (decay, sd): (Vec<f64>, Vec<f64>) = spec
        .eigenvalues(n_modes)
        .into_iter()
        .map(|l| ou_transition(theta, gamma, l, h))
        .unzip();
    let mut builder = AccumulatorBuilder::new(*spec, n_modes, req, Some(&NonlinearitySpec::None), gamma, 1.0)?;
    let mut noise = NoiseSource::new(scheme.seed, CHANNEL_PRIMARY, n_modes);
    let mut xi = vec![0.0; n_modes];
    let mut x = vec![0.0; n_modes];
    let mut next = vec![0.0; n_modes];
    let zero_drift = vec![0.0; n_modes];
    let mut traj = scheme.snapshot_stride.map(|_| Trajectory::default());
    if let Some(t) = traj.as_mut() {
        t.push(0.0, &x);
    }
    for j in 0..steps {
        builder.record(&x, None, h, Some(&zero_drift))?;
        noise.fill(&mut xi);
        for k in 0..n_modes {
            next[k] = decay[k] * x[k] + sd[k] * xi[k];
        }
        builder.record_increment(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if let (Some(s), Some(tr)) = (scheme.snapshot_stride, traj.as_mut()) {
            if (j + 1) % s == 0 || j + 1 == steps {
                tr.push((j + 1) as f64 * h, &x);
            }
        }
    }
    let x0 = ModeVector::zeros(n_modes);
    let x_t = ModeVector::new(x)?;
    Ok(SimOutput {
        accumulators: builder.finish(x0.clone(), x_t.clone(), steps as f64 * h),
        x0,
        x_t,
        trajectory: traj,
        w0: None,
        w_t: None,
        w_trajectory: None,
    })
}
