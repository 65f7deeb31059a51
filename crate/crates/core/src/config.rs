//! TOML run configuration shared by the command line subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{EstimatorRequest, NumeratorMode, Variant};
use crate::fields::{FhnParams, NonlinearitySpec, Polynomial};
use crate::mc::{Backend, StudySpec};
use crate::simulate::{sine_initial_condition, ModelSpec, SchemeSpec};
use crate::spectrum::{ModeVector, OperatorKind, OperatorSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub scheme: SchemeConfig,
    pub estimators: EstimatorsConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "one")]
    pub domain_length: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            domain_length: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub operator: OperatorConfig,
    pub theta_true: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    pub nonlinearity: NonlinearityConfig,
    /// Defaults to the coefficients of `sin(πx/L)`.
    #[serde(default)]
    pub initial_modes: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_w_modes: Option<Vec<f64>>,
    pub n_sim: usize,
    #[serde(default)]
    pub n_grid: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub variant: String,
    #[serde(default)]
    pub poly_coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub fhn_params: Option<FhnParamsConfig>,
}

/// Missing entries take the [`FhnParams`] defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhnParamsConfig {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma_w: Option<f64>,
    pub gamma_w: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorsConfig {
    /// Defaults to `model.gamma`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(alias = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub variants: Option<Vec<String>>,
    /// Defaults to the simulated nonlinearity.
    #[serde(default)]
    pub bias_model: Option<NonlinearityConfig>,
    #[serde(default)]
    pub numerator_mode: NumeratorMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n_trials: usize,
    #[serde(default, alias = "histogram_N")]
    pub histogram_n: Option<usize>,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
    #[serde(default = "default_range")]
    pub histogram_range: [f64; 2],
    #[serde(default)]
    pub backend: Backend,
}

fn default_kind() -> String {
    "dirichlet_laplacian_1d".into()
}

fn one() -> f64 {
    1.0
}

fn default_bin_width() -> f64 {
    0.4
}

fn default_range() -> [f64; 2] {
    [-5.0, 5.0]
}

impl NonlinearityConfig {
    pub fn to_spec(&self, key: &str) -> Result<NonlinearitySpec> {
        let spec = match self.variant.as_str() {
            "none" => NonlinearitySpec::None,
            "polynomial" => {
                let coeffs = self.poly_coeffs.clone().ok_or_else(|| {
                    Error::Config(format!("{key}.poly_coeffs is required for variant \"polynomial\""))
                })?;
                NonlinearitySpec::Polynomial(
                    Polynomial::new(coeffs).map_err(|e| prefix(key, e))?,
                )
            }
            "burgers" => NonlinearitySpec::Burgers,
            "fhn" => {
                let d = FhnParams::default();
                let c = self.fhn_params.clone().unwrap_or_default();
                let p = FhnParams {
                    a: c.a.unwrap_or(d.a),
                    b: c.b.unwrap_or(d.b),
                    epsilon: c.epsilon.unwrap_or(d.epsilon),
                    sigma_w: c.sigma_w.unwrap_or(d.sigma_w),
                    gamma_w: c.gamma_w.unwrap_or(d.gamma_w),
                };
                p.validate().map_err(|e| prefix(key, e))?;
                NonlinearitySpec::Fhn(p)
            }
            other => {
                return Err(Error::Config(format!(
                    "{key}.variant: unknown variant `{other}` (expected none, polynomial, burgers or fhn)"
                )))
            }
        };
        if self.poly_coeffs.is_some() && self.variant != "polynomial" {
            return Err(Error::Config(format!(
                "{key}.poly_coeffs is only valid for variant \"polynomial\""
            )));
        }
        if self.fhn_params.is_some() && self.variant != "fhn" {
            return Err(Error::Config(format!(
                "{key}.fhn_params is only valid for variant \"fhn\""
            )));
        }
        Ok(spec)
    }
}

fn prefix(key: &str, e: Error) -> Error {
    match e {
        Error::Config(m) if !m.starts_with("model.") => Error::Config(format!("{key}: {m}")),
        other => other,
    }
}

fn mode_vector(v: &[f64], key: &str) -> Result<ModeVector> {
    ModeVector::new(v.to_vec()).map_err(|_| Error::Config(format!("{key} must be finite")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.study_spec_unchecked()?;
        Ok(cfg)
    }

    /// Reads and validates a configuration file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::parse(&text)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let kind: OperatorKind = m.operator.kind.parse()?;
        let operator = match kind {
            OperatorKind::DirichletLaplacian1d => {
                OperatorSpec::dirichlet_laplacian_1d(m.operator.domain_length)?
            }
        };
        let nonlinearity = m.nonlinearity.to_spec("model.nonlinearity")?;
        let initial_modes = match &m.initial_modes {
            Some(v) => mode_vector(v, "model.initial_modes")?,
            None => sine_initial_condition(&operator, 1.0),
        };
        let initial_w_modes = match &m.initial_w_modes {
            Some(v) => Some(mode_vector(v, "model.initial_w_modes")?),
            None => None,
        };
        if initial_w_modes.is_some() && !matches!(nonlinearity, NonlinearitySpec::Fhn(_)) {
            return Err(Error::Config(
                "model.initial_w_modes is only valid with nonlinearity variant \"fhn\"".into(),
            ));
        }
        let spec = ModelSpec {
            operator,
            theta_true: m.theta_true,
            gamma: m.gamma,
            sigma: m.sigma,
            nonlinearity,
            initial_modes,
            initial_w_modes,
            n_sim: m.n_sim,
            n_grid: m.n_grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scheme_spec(&self) -> Result<SchemeSpec> {
        let s = SchemeSpec {
            dt: self.scheme.dt,
            t_final: self.scheme.t_final,
            seed: self.scheme.seed,
            snapshot_stride: self.scheme.snapshot_stride,
        };
        s.n_steps()?;
        Ok(s)
    }

    pub fn estimator_request(&self, model: &ModelSpec) -> Result<EstimatorRequest> {
        let e = &self.estimators;
        let bias_model = match &e.bias_model {
            Some(b) => b.to_spec("estimators.bias_model")?,
            None => model.nonlinearity.clone(),
        };
        let alpha = e.alpha.unwrap_or(model.gamma);
        let coupled = matches!(bias_model, NonlinearitySpec::Fhn(_));
        let mut req = if coupled {
            EstimatorRequest::coupled(alpha, e.n_list.clone(), bias_model)
        } else {
            EstimatorRequest::new(alpha, e.n_list.clone(), bias_model)
        };
        if let Some(names) = &e.variants {
            if names.is_empty() {
                return Err(Error::Config("estimators.variants must be nonempty".into()));
            }
            let mut variants = Vec::with_capacity(names.len());
            for name in names {
                let v: Variant = name.parse()?;
                let allowed = if coupled {
                    v != Variant::Partial
                } else {
                    !matches!(v, Variant::Partial1 | Variant::Partial2)
                };
                if !allowed {
                    return Err(Error::Config(format!(
                        "estimators.variants: `{name}` does not apply to this bias model"
                    )));
                }
                if !variants.contains(&v) {
                    variants.push(v);
                }
            }
            req.variants = variants;
        }
        req.numerator_mode = e.numerator_mode;
        req.validate(model.n_sim)?;
        Ok(req)
    }

    /// Study parameters; a missing `[study]` section means a single trial.
    pub fn study_spec(&self) -> Result<StudySpec> {
        let spec = self.study_spec_unchecked()?;
        spec.validate()?;
        Ok(spec)
    }

    fn study_spec_unchecked(&self) -> Result<StudySpec> {
        let model = self.model_spec()?;
        let scheme = self.scheme_spec()?;
        let req = self.estimator_request(&model)?;
        let n_trials = self.study.as_ref().map_or(1, |s| s.n_trials);
        let mut spec = StudySpec::new(model, scheme, req, n_trials);
        if let Some(s) = &self.study {
            if let Some(n) = s.histogram_n {
                spec.histogram_n = n;
            }
            spec.histogram_bin_width = s.histogram_bin_width;
            spec.histogram_range = s.histogram_range;
            spec.backend = s.backend;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALLEN_CAHN: &str = r#"
[model]
theta_true = 0.02
gamma = 0.4
n_sim = 16

[model.nonlinearity]
variant = "polynomial"
poly_coeffs = [0.0, 1.0, 0.0, -1.0]

[scheme]
dt = 0.001
t_final = 0.1
seed = 7

[estimators]
n_list = [2, 4, 8]

[study]
n_trials = 4
"#;

    #[test]
    fn parses_allen_cahn() {
        let cfg = RunConfig::parse(ALLEN_CAHN).unwrap();
        let spec = cfg.study_spec().unwrap();
        assert_eq!(spec.model, ModelSpec::allen_cahn(0.02, 0.4, 16));
        assert_eq!(spec.est_req.alpha, 0.4);
        assert_eq!(spec.est_req.variants, vec![Variant::Full, Variant::Partial, Variant::Linear]);
        assert_eq!(spec.histogram_n, 8);
        assert_eq!(spec.n_trials, 4);
        assert_eq!(spec.scheme.seed, 7);
    }

    #[test]
    fn negative_theta_names_key() {
        let text = ALLEN_CAHN.replace("theta_true = 0.02", "theta_true = -1.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = ALLEN_CAHN.replace("n_sim = 16", "n_sim = 16\nthetta = 1.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("thetta"), "{err}");
    }

    #[test]
    fn non_integer_step_count_rejected() {
        let text = ALLEN_CAHN.replace("dt = 0.001", "dt = 0.003");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("scheme"), "{err}");
    }

    #[test]
    fn fhn_defaults_to_coupled_variants() {
        let text = ALLEN_CAHN
            .replace("variant = \"polynomial\"\npoly_coeffs = [0.0, 1.0, 0.0, -1.0]", "variant = \"fhn\"\n[model.nonlinearity.fhn_params]\nepsilon = 0.2");
        let spec = RunConfig::parse(&text).unwrap().study_spec().unwrap();
        assert_eq!(
            spec.est_req.variants,
            vec![Variant::Full, Variant::Partial1, Variant::Partial2, Variant::Linear]
        );
        match spec.model.nonlinearity {
            NonlinearitySpec::Fhn(p) => {
                assert_eq!(p.epsilon, 0.2);
                assert_eq!(p.a, FhnParams::default().a);
            }
            _ => panic!("expected fhn"),
        }
    }

    #[test]
    fn misplaced_variant_rejected() {
        let text = ALLEN_CAHN.replace("n_list = [2, 4, 8]", "n_list = [2, 4, 8]\nvariants = [\"partial1\"]");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn histogram_n_must_be_requested() {
        let text = ALLEN_CAHN.replace("n_trials = 4", "n_trials = 4\nhistogram_n = 5");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("histogram_n"), "{err}");
    }

    #[test]
    fn ou_exact_requires_linear_model() {
        let text = ALLEN_CAHN.replace("n_trials = 4", "n_trials = 4\nbackend = \"ou_exact\"");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn readme_example_parses() {
        let readme = include_str!("../../../README.md");
        let block = readme
            .split("```toml\n")
            .nth(1)
            .and_then(|b| b.split("```").next())
            .unwrap();
        let spec = RunConfig::parse(block).unwrap().study_spec().unwrap();
        assert_eq!(spec.n_trials, 1000);
        assert_eq!(spec.scheme.n_steps().unwrap(), 40_000);
        assert_eq!(spec.model.grid().unwrap().n_grid, 1023);
    }

    #[test]
    fn missing_file_is_io() {
        let err = RunConfig::from_path(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
