//! Monte Carlo studies: independent seeded trials run in parallel, then
//! summarized per `(variant, N)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimate::{estimate_theta, standardize, EstimatorRequest, Variant};
use crate::simulate::{simulate, simulate_ou_exact_accumulate, ModelSpec, SchemeSpec, SimOutput};
use crate::theory::asymptotic_constants;

/// Largest tolerated fraction of failed trials.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Linear-implicit Euler on the full model.
    #[default]
    Semilinear,
    /// Exact Gaussian transitions; linear models only.
    OuExact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub model: ModelSpec,
    /// `scheme.seed` is the master seed.
    pub scheme: SchemeSpec,
    pub est_req: EstimatorRequest,
    pub n_trials: usize,
    pub histogram_n: usize,
    pub histogram_bin_width: f64,
    pub histogram_range: [f64; 2],
    pub backend: Backend,
}

impl StudySpec {
    pub fn new(model: ModelSpec, scheme: SchemeSpec, est_req: EstimatorRequest, n_trials: usize) -> Self {
        let histogram_n = est_req.max_n();
        Self {
            model,
            scheme,
            est_req,
            n_trials,
            histogram_n,
            histogram_bin_width: 0.4,
            histogram_range: [-5.0, 5.0],
            backend: Backend::Semilinear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("study.n_trials must be at least 1".into()));
        }
        self.model.validate()?;
        self.scheme.n_steps()?;
        self.est_req.validate(self.model.n_sim)?;
        if !self.est_req.n_list.contains(&self.histogram_n) {
            return Err(Error::Config(format!(
                "study.histogram_n = {} is not in estimators.n_list",
                self.histogram_n
            )));
        }
        let [lo, hi] = self.histogram_range;
        if !(lo < hi) || !(self.histogram_bin_width > 0.0) {
            return Err(Error::Config(
                "study.histogram_range must be increasing and study.histogram_bin_width positive".into(),
            ));
        }
        if self.backend == Backend::OuExact && !self.model.nonlinearity.is_none() {
            return Err(Error::Config(
                "study.backend = \"ou_exact\" requires model.nonlinearity.variant = \"none\"".into(),
            ));
        }
        if self.backend == Backend::OuExact && self.model.sigma != 1.0 {
            return Err(Error::Config(
                "study.backend = \"ou_exact\" requires model.sigma = 1".into(),
            ));
        }
        Ok(())
    }

    /// `V` for the standardized residuals, if `α` is admissible.
    pub fn asymptotic_variance(&self) -> Option<f64> {
        let op = &self.model.operator;
        asymptotic_constants(
            self.model.theta_true,
            self.scheme.t_final,
            op.lambda_scale(),
            op.beta(),
            self.model.gamma,
            self.est_req.alpha,
        )
        .ok()
        .map(|c| c.v)
    }
}

/// Seed of trial `i`, derived from the master seed without a shared stream.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub trial: usize,
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub theta_hat: f64,
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialOutcome {
    Ok(Vec<EstimateRecord>),
    Failed(TrialFailure),
}

fn run_one(spec: &StudySpec, trial: usize, v: Option<f64>) -> Result<Vec<EstimateRecord>> {
    let scheme = SchemeSpec {
        seed: trial_seed(spec.scheme.seed, trial),
        snapshot_stride: None,
        ..spec.scheme
    };
    let out: SimOutput = match spec.backend {
        Backend::Semilinear => simulate(&spec.model, &scheme, &spec.est_req)?,
        Backend::OuExact => simulate_ou_exact_accumulate(
            spec.model.theta_true,
            spec.model.gamma,
            &spec.model.operator,
            spec.model.n_sim,
            &scheme,
            &spec.est_req,
        )?,
    };
    let beta = spec.model.operator.beta();
    let mut records = Vec::with_capacity(spec.est_req.variants.len() * spec.est_req.n_list.len());
    for &variant in &spec.est_req.variants {
        for &n in &spec.est_req.n_list {
            let e = estimate_theta(&out.accumulators, &spec.est_req, variant, n)?;
            let z = match v {
                Some(v) => Some(standardize(e.theta_hat, spec.model.theta_true, v, beta, n)?),
                None => None,
            };
            records.push(EstimateRecord {
                trial,
                variant,
                n,
                alpha: e.alpha,
                theta_hat: e.theta_hat,
                z,
            });
        }
    }
    Ok(records)
}

/// Runs every trial on a pool of `threads` workers (`0` = rayon default).
/// The outcome list is ordered by trial index.
pub fn run_trials(spec: &StudySpec, threads: usize) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    spec.est_req
        .warn_if_inadmissible(spec.model.gamma, spec.model.operator.beta());
    let v = spec.asymptotic_variance();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Study(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        (0..spec.n_trials)
            .into_par_iter()
            .map(|i| match run_one(spec, i, v) {
                Ok(r) => TrialOutcome::Ok(r),
                Err(e) => {
                    log::warn!("trial {i} failed: {e}");
                    TrialOutcome::Failed(TrialFailure {
                        trial: i,
                        reason: e.to_string(),
                    })
                }
            })
            .collect()
    });
    Ok(outcomes)
}

/// Splits outcomes into estimates and failures, both ordered by trial.
pub fn collect(outcomes: Vec<TrialOutcome>) -> (Vec<EstimateRecord>, Vec<TrialFailure>) {
    let mut est = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            TrialOutcome::Ok(r) => est.extend(r),
            TrialOutcome::Failed(f) => failed.push(f),
        }
    }
    (est, failed)
}

/// Errors when more than [`MAX_FAILURE_FRACTION`] of the trials failed.
pub fn check_failures(n_trials: usize, failures: &[TrialFailure]) -> Result<()> {
    if failures.len() as f64 > MAX_FAILURE_FRACTION * n_trials as f64 {
        let first = failures.first().map(|f| format!("; first: trial {}: {}", f.trial, f.reason));
        return Err(Error::Study(format!(
            "{} of {n_trials} trials failed{}",
            failures.len(),
            first.unwrap_or_default()
        )));
    }
    Ok(())
}

pub fn run_study(spec: &StudySpec, threads: usize) -> Result<MCReport> {
    let (estimates, failures) = collect(run_trials(spec, threads)?);
    check_failures(spec.n_trials, &failures)?;
    let v = spec.asymptotic_variance();
    let opts = SummaryOptions {
        histogram_n: spec.histogram_n,
        bin_width: spec.histogram_bin_width,
        range: spec.histogram_range,
    };
    let mut report = summarize(
        &estimates,
        spec.model.theta_true,
        &|_| v,
        spec.model.operator.beta(),
        &opts,
    )?;
    report.n_trials = spec.n_trials;
    report.n_failed = failures.len();
    report.failures = failures;
    report.estimates = estimates;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub histogram_n: usize,
    pub bin_width: f64,
    pub range: [f64; 2],
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            histogram_n: 0,
            bin_width: 0.4,
            range: [-5.0, 5.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    pub median: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub mean: f64,
    /// Population variance `(1/M) Σ (θ̂ - mean)²`.
    pub variance: f64,
    /// `(1/M) Σ (θ̂ - θ)²`.
    pub mse: f64,
    pub mean_abs_error: f64,
    pub z_mean: Option<f64>,
    /// Sample variance of `z` with divisor `M - 1`.
    pub z_var: Option<f64>,
    pub ks_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub variant: Variant,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub n_trials: usize,
    pub n_failed: usize,
    pub failures: Vec<TrialFailure>,
    pub theta_true: f64,
    pub beta: f64,
    pub rate_exponent: f64,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    pub rows: Vec<SummaryRow>,
    pub histograms: Vec<Histogram>,
    /// Least-squares slope of `log MSE` against `log N` per variant.
    pub mse_slopes: Vec<SlopeFit>,
    #[serde(skip)]
    pub estimates: Vec<EstimateRecord>,
}

impl MCReport {
    pub fn row(&self, variant: Variant, n: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.variant == variant && r.n == n)
    }

    pub fn histogram(&self, variant: Variant) -> Option<&Histogram> {
        self.histograms.iter().find(|h| h.variant == variant)
    }

    /// MSE slope of `variant` restricted to the truncation levels `ns`.
    pub fn mse_slope_over(&self, variant: Variant, ns: &[usize]) -> Option<f64> {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| self.row(variant, n).map(|r| ((n as f64).ln(), r.mse.ln())))
            .collect::<Option<_>>()?;
        least_squares(&pts).map(|(s, _)| s)
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut v: Vec<Variant> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.variant) {
                v.push(r.variant);
            }
        }
        v
    }
}

/// Type-7 quantile (linear interpolation between order statistics) of a
/// sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov–Smirnov distance between the sample and `N(0,1)`.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Fixed-width histogram over `range`; values outside fall into the end bins.
pub fn histogram(values: &[f64], bin_width: f64, range: [f64; 2]) -> (Vec<f64>, Vec<usize>) {
    let [lo, hi] = range;
    let bins = (((hi - lo) / bin_width).round() as usize).max(1);
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * (hi - lo) / bins as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        if v.is_nan() {
            continue;
        }
        let i = ((v - lo) / (hi - lo) * bins as f64).floor();
        let i = (i.max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    (edges, counts)
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Per-`(variant, N)` statistics. `v_by_n` supplies `V` for the residuals
/// (`None` skips them); residuals are histogrammed at `opts.histogram_n`.
pub fn summarize(
    estimates: &[EstimateRecord],
    theta_true: f64,
    v_by_n: &dyn Fn(usize) -> Option<f64>,
    beta: f64,
    opts: &SummaryOptions,
) -> Result<MCReport> {
    if estimates.is_empty() {
        return Err(Error::Study("no estimates to summarize".into()));
    }
    let mut keys: Vec<(Variant, usize)> = estimates.iter().map(|e| (e.variant, e.n)).collect();
    keys.sort();
    keys.dedup();

    let mut rows = Vec::new();
    let mut histograms = Vec::new();
    for &(variant, n) in &keys {
        let mut sel: Vec<&EstimateRecord> = estimates
            .iter()
            .filter(|e| e.variant == variant && e.n == n && e.theta_hat.is_finite())
            .collect();
        if sel.is_empty() {
            log::warn!("no finite estimates for variant {variant}, N = {n}; omitted");
            continue;
        }
        sel.sort_by_key(|e| e.trial);
        let vals: Vec<f64> = sel.iter().map(|e| e.theta_hat).collect();
        let m = vals.len() as f64;
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = vals.iter().sum::<f64>() / m;
        let variance = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
        let mse = vals.iter().map(|x| (x - theta_true).powi(2)).sum::<f64>() / m;
        let mean_abs_error = vals.iter().map(|x| (x - theta_true).abs()).sum::<f64>() / m;

        let z: Option<Vec<f64>> = match v_by_n(n) {
            Some(v) => Some(
                vals.iter()
                    .map(|&x| standardize(x, theta_true, v, beta, n))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };
        let (z_mean, z_var, ks) = match &z {
            Some(z) => {
                let zm = z.iter().sum::<f64>() / m;
                let zv = if z.len() > 1 {
                    Some(z.iter().map(|x| (x - zm).powi(2)).sum::<f64>() / (m - 1.0))
                } else {
                    None
                };
                (Some(zm), zv, Some(ks_distance_normal(z)))
            }
            None => (None, None, None),
        };
        if n == opts.histogram_n {
            if let Some(z) = &z {
                let (edges, counts) = histogram(z, opts.bin_width, opts.range);
                histograms.push(Histogram {
                    variant,
                    n,
                    edges,
                    counts,
                });
            }
        }
        rows.push(SummaryRow {
            variant,
            n,
            count: vals.len(),
            median: quantile_sorted(&sorted, 0.5),
            p2_5: quantile_sorted(&sorted, 0.025),
            p97_5: quantile_sorted(&sorted, 0.975),
            mean,
            variance,
            mse,
            mean_abs_error,
            z_mean,
            z_var,
            ks_distance: ks,
        });
    }

    let mut mse_slopes = Vec::new();
    let mut variants: Vec<Variant> = rows.iter().map(|r| r.variant).collect();
    variants.dedup();
    for variant in variants {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.variant == variant && r.mse > 0.0)
            .map(|r| ((r.n as f64).ln(), r.mse.ln()))
            .collect();
        if let Some((slope, intercept)) = least_squares(&pts) {
            mse_slopes.push(SlopeFit {
                variant,
                slope,
                intercept,
            });
        }
    }

    let mut trials: Vec<usize> = estimates.iter().map(|e| e.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    Ok(MCReport {
        n_trials: trials.len(),
        n_failed: 0,
        failures: Vec::new(),
        theta_true,
        beta,
        rate_exponent: 0.5 * (beta + 1.0),
        v: keys.first().and_then(|&(_, n)| v_by_n(n)),
        rows,
        histograms,
        mse_slopes,
        estimates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::NonlinearitySpec;
    use rand_distr::{Distribution, StandardNormal};

    fn rec(trial: usize, variant: Variant, n: usize, theta_hat: f64) -> EstimateRecord {
        EstimateRecord {
            trial,
            variant,
            n,
            alpha: 0.5,
            theta_hat,
            z: None,
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0], 0.5), 2.0);
        let lo = quantile_sorted(&[1.0, 2.0, 3.0], 0.025);
        let hi = quantile_sorted(&[1.0, 2.0, 3.0], 0.975);
        assert!((1.0..=3.0).contains(&lo) && (1.0..=3.0).contains(&hi));
        assert!((lo - 1.05).abs() < 1e-15 && (hi - 2.95).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn ks_of_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let z: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_distance_normal(&z) < 0.05);
        let shifted: Vec<f64> = z.iter().map(|x| x + 1.0).collect();
        assert!(ks_distance_normal(&shifted) > 0.3);
        assert!((ks_distance_normal(&[0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn histogram_outliers_go_to_end_bins() {
        let (edges, counts) = histogram(&[-9.0, -5.0, -0.1, 0.0, 4.99, 5.0, 12.0, f64::NAN], 0.4, [-5.0, 5.0]);
        assert_eq!(counts.len(), 25);
        assert_eq!(edges.len(), 26);
        assert_eq!(counts[0], 2);
        assert_eq!(counts[24], 3);
        assert_eq!(counts[12], 2);
        assert_eq!(counts.iter().sum::<usize>(), 7);
    }

    #[test]
    fn exact_estimates_summarize_to_zero_error() {
        let est: Vec<_> = (0..5).map(|i| rec(i, Variant::Linear, 4, 0.1)).collect();
        let r = summarize(&est, 0.1, &|_| Some(0.3), 2.0, &SummaryOptions::default()).unwrap();
        let row = r.row(Variant::Linear, 4).unwrap();
        assert_eq!(row.mse, 0.0);
        assert_eq!(row.z_mean, Some(0.0));
        assert_eq!(row.z_var, Some(0.0));
        assert!(summarize(&[], 0.1, &|_| None, 2.0, &SummaryOptions::default()).is_err());
    }

    #[test]
    fn mse_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let est: Vec<_> = (0..200)
            .map(|i| {
                let x: f64 = StandardNormal.sample(&mut rng);
                rec(i, Variant::Full, 8, 0.3 + 0.05 * x)
            })
            .collect();
        let r = summarize(&est, 0.25, &|_| None, 2.0, &SummaryOptions::default()).unwrap();
        let row = r.row(Variant::Full, 8).unwrap();
        let rhs = row.variance + (row.mean - 0.25).powi(2);
        assert!((row.mse - rhs).abs() <= 1e-12 * row.mse);
        assert!(row.p2_5 <= row.median && row.median <= row.p97_5);
        assert!(row.z_mean.is_none() && row.ks_distance.is_none());
    }

    #[test]
    fn slope_of_power_law() {
        let mut est = Vec::new();
        for (i, n) in [4usize, 8, 16, 32].into_iter().enumerate() {
            let err = (n as f64).powf(-1.5);
            est.push(rec(2 * i, Variant::Full, n, 1.0 + err));
            est.push(rec(2 * i + 1, Variant::Full, n, 1.0 - err));
        }
        let r = summarize(&est, 1.0, &|_| None, 2.0, &SummaryOptions::default()).unwrap();
        assert!((r.mse_slopes[0].slope + 3.0).abs() < 1e-9);
        assert!((r.mse_slope_over(Variant::Full, &[4, 8, 16, 32]).unwrap() + 3.0).abs() < 1e-9);
        assert!(r.mse_slope_over(Variant::Full, &[5]).is_none());
    }

    #[test]
    fn seeds_differ_per_trial() {
        let s: Vec<u64> = (0..100).map(|i| trial_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_eq!(trial_seed(7, 3), s[3]);
        assert_ne!(trial_seed(8, 3), s[3]);
    }

    fn small_linear_study(m: usize) -> StudySpec {
        let model = ModelSpec::linear(0.1, 0.5, 8);
        let scheme = SchemeSpec::new(1e-3, 1.0, 99);
        let req = EstimatorRequest::new(0.5, vec![2, 4, 8], NonlinearitySpec::None);
        StudySpec::new(model, scheme, req, m)
    }

    #[test]
    fn single_trial_medians_equal_estimates() {
        let spec = small_linear_study(1);
        let r = run_study(&spec, 1).unwrap();
        for e in &r.estimates {
            let row = r.row(e.variant, e.n).unwrap();
            assert_eq!(row.median, e.theta_hat);
            assert_eq!(row.p2_5, e.theta_hat);
        }
    }

    #[test]
    fn linear_model_rows_match_across_variants() {
        let r = run_study(&small_linear_study(6), 2).unwrap();
        for n in [2, 4, 8] {
            let f = r.row(Variant::Full, n).unwrap();
            let mut p = r.row(Variant::Partial, n).unwrap().clone();
            let mut l = r.row(Variant::Linear, n).unwrap().clone();
            p.variant = Variant::Full;
            l.variant = Variant::Full;
            assert_eq!(&p, f);
            assert_eq!(&l, f);
        }
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let spec = small_linear_study(8);
        let a = run_study(&spec, 1).unwrap();
        let b = run_study(&spec, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let f = |t| TrialFailure {
            trial: t,
            reason: "x".into(),
        };
        assert!(check_failures(10, &[f(1)]).is_ok());
        assert!(matches!(check_failures(10, &[f(1), f(2)]), Err(Error::Study(_))));
    }

    #[test]
    fn degenerate_trials_are_recorded() {
        let mut spec = small_linear_study(3);
        spec.model.sigma = 0.0;
        let (est, failed) = collect(run_trials(&spec, 1).unwrap());
        assert!(est.is_empty());
        assert_eq!(failed.len(), 3);
        assert!(failed[0].reason.contains("denominator"), "{}", failed[0].reason);
        assert!(run_study(&spec, 1).is_err());
    }

    #[test]
    fn study_validation() {
        let mut spec = small_linear_study(0);
        assert!(spec.validate().is_err());
        spec.n_trials = 2;
        spec.histogram_n = 3;
        assert!(spec.validate().is_err());
        spec.histogram_n = 4;
        spec.backend = Backend::OuExact;
        assert!(spec.validate().is_ok());
        spec.model = ModelSpec::allen_cahn(0.02, 0.4, 8);
        assert!(spec.validate().is_err());
    }
}
