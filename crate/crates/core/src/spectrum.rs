//! Eigenstructure of `-A` and the Sobolev-type scale built on it.
//!
//! Fields are represented by their coefficients in the orthonormal
//! eigenbasis `Φ_k(x) = sqrt(2/L) sin(kπx/L)`, `k = 1, 2, ...`. The norm
//! `|x|_ρ = |(-A)^ρ x|_H` is then a weighted Euclidean norm of the
//! coefficient vector.

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Laplacian on `[0, L]` with homogeneous Dirichlet conditions.
    DirichletLaplacian1d,
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet_laplacian_1d" => Ok(OperatorKind::DirichletLaplacian1d),
            other => Err(Error::Config(format!(
                "model.operator.kind: unsupported operator kind `{other}`"
            ))),
        }
    }
}

/// The diagonal operator `A` through its eigenvalue law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub domain_length: f64,
}

impl OperatorSpec {
    pub fn dirichlet_laplacian_1d(domain_length: f64) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::Config(format!(
                "model.operator.domain_length must be positive (got {domain_length})"
            )));
        }
        Ok(Self {
            kind: OperatorKind::DirichletLaplacian1d,
            domain_length,
        })
    }

    /// Unit interval, the setting of the Allen–Cahn experiment.
    pub fn unit_interval() -> Self {
        Self {
            kind: OperatorKind::DirichletLaplacian1d,
            domain_length: 1.0,
        }
    }

    /// `λ_k` for `k >= 1`.
    #[inline]
    pub fn eigenvalue(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.kind {
            OperatorKind::DirichletLaplacian1d => {
                let s = PI * k as f64 / self.domain_length;
                s * s
            }
        }
    }

    /// Growth exponent `β` in `λ_k ≍ Λ k^β`.
    pub fn beta(&self) -> f64 {
        match self.kind {
            OperatorKind::DirichletLaplacian1d => 2.0,
        }
    }

    /// Growth constant `Λ` in `λ_k ≍ Λ k^β`.
    pub fn lambda_scale(&self) -> f64 {
        match self.kind {
            OperatorKind::DirichletLaplacian1d => {
                let s = PI / self.domain_length;
                s * s
            }
        }
    }

    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|k| self.eigenvalue(k)).collect()
    }
}

/// Returns `λ_1, ..., λ_count`.
pub fn eigenvalues(spec: &OperatorSpec, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Config("eigenvalue count must be at least 1".into()));
    }
    Ok(spec.eigenvalues(count))
}

/// Coefficients `(x^1, ..., x^M)` of a field in the eigenbasis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModeVector(Vec<f64>);

impl ModeVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("mode vector must have at least one mode".into()));
        }
        if let Some((i, v)) = coeffs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!(
                "mode vector entry {} is not finite ({v})",
                i + 1
            )));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(modes: usize) -> Self {
        Self(vec![0.0; modes.max(1)])
    }

    /// Copy of `coeffs` padded with zeros (or truncated) to `modes` entries.
    pub fn resized(&self, modes: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(modes.max(1), 0.0);
        Self(v)
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ModeVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ModeVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ModeVector::new(v)
    }
}

impl From<ModeVector> for Vec<f64> {
    fn from(m: ModeVector) -> Self {
        m.0
    }
}

/// Applies `(-A)^ρ`: entry `k` becomes `λ_k^ρ x^k`.
pub fn frac_power_apply(x: &ModeVector, rho: f64, spec: &OperatorSpec) -> ModeVector {
    ModeVector(
        x.iter()
            .enumerate()
            .map(|(i, &v)| spec.eigenvalue(i + 1).powf(rho) * v)
            .collect(),
    )
}

/// `|x|_ρ = (Σ_k λ_k^{2ρ} (x^k)^2)^{1/2}`.
pub fn sobolev_norm(x: &ModeVector, rho: f64, spec: &OperatorSpec) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let y = spec.eigenvalue(i + 1).powf(rho) * v;
            y * y
        })
        .sum::<f64>()
        .sqrt()
}

/// Regularity limit `ρ* = γ - 1/(2β)`.
pub fn regularity_limit(gamma: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive (got {beta})")));
    }
    Ok(gamma - 0.5 / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mv(v: &[f64]) -> ModeVector {
        ModeVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_eigenvalues() {
        let unit = OperatorSpec::unit_interval();
        let l1 = eigenvalues(&unit, 1).unwrap();
        assert!((l1[0] - 9.869_604_401_089_358).abs() < 1e-12);
        let l3 = eigenvalues(&unit, 3).unwrap();
        let p2 = PI * PI;
        assert_eq!(l3, vec![p2, 4.0 * p2, 9.0 * p2]);
        let half = OperatorSpec::dirichlet_laplacian_1d(2.0).unwrap();
        assert!((half.eigenvalue(1) - 2.467_401_100_272_339_6).abs() < 1e-12);
        assert!(eigenvalues(&unit, 0).is_err());
        assert_eq!(unit.beta(), 2.0);
        assert_eq!(unit.lambda_scale(), unit.eigenvalue(1));
    }

    #[test]
    fn eigenvalues_strictly_increase() {
        let l = OperatorSpec::dirichlet_laplacian_1d(3.7).unwrap().eigenvalues(500);
        assert!(l[0] > 0.0);
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(OperatorSpec::dirichlet_laplacian_1d(0.0).is_err());
        assert!(ModeVector::new(vec![]).is_err());
        assert!(ModeVector::new(vec![1.0, f64::NAN]).is_err());
        assert!("neumann".parse::<OperatorKind>().is_err());
    }

    #[test]
    fn fractional_powers() {
        let unit = OperatorSpec::unit_interval();
        assert_eq!(frac_power_apply(&mv(&[1.0, 0.0, 0.0]), 0.0, &unit).as_slice(), &[1.0, 0.0, 0.0]);
        let p = frac_power_apply(&mv(&[1.0, 1.0]), 1.0, &unit);
        assert!((p[0] - PI * PI).abs() < 1e-12 && (p[1] - 4.0 * PI * PI).abs() < 1e-12);
        let s = frac_power_apply(&mv(&[1.0]), -0.5, &unit);
        assert!((s[0] - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let unit = OperatorSpec::unit_interval();
        assert_eq!(sobolev_norm(&mv(&[0.0, 0.0, 0.0]), 0.7, &unit), 0.0);
        assert_eq!(sobolev_norm(&mv(&[1.0]), 0.0, &unit), 1.0);
        let n = sobolev_norm(&mv(&[1.0, 1.0]), 0.5, &unit);
        assert!((n - PI * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regularity_limits() {
        assert!((regularity_limit(0.4, 2.0).unwrap() - 0.15).abs() < 1e-15);
        assert!((regularity_limit(0.8, 2.0).unwrap() - 0.55).abs() < 1e-15);
        assert_eq!(regularity_limit(0.25, 2.0).unwrap(), 0.0);
        assert!(regularity_limit(0.4, 0.0).is_err());
    }

    fn coeffs(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..=max)
    }

    proptest! {
        #[test]
        fn poincare_forward(x in coeffs(64), pair in 0usize..2) {
            let (r1, r2) = [(0.0, 0.5), (0.25, 1.0)][pair];
            let spec = OperatorSpec::unit_interval();
            let v = mv(&x);
            let lam_n = spec.eigenvalue(x.len());
            let lhs = sobolev_norm(&v, r2, &spec);
            let rhs = lam_n.powf(r2 - r1) * sobolev_norm(&v, r1, &spec);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn poincare_tail(x in coeffs(64), cut in 0usize..32, pair in 0usize..2) {
            let (r1, r2) = [(0.0, 0.5), (0.25, 1.0)][pair];
            let spec = OperatorSpec::unit_interval();
            let cut = cut.min(x.len() - 1);
            let mut tail = x.clone();
            tail[..cut].iter_mut().for_each(|v| *v = 0.0);
            let v = mv(&tail);
            let lhs = sobolev_norm(&v, r1, &spec);
            let rhs = spec.eigenvalue(cut + 1).powf(r1 - r2) * sobolev_norm(&v, r2, &spec);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn frac_power_round_trip(x in coeffs(256), rho in -2.0f64..2.0) {
            let spec = OperatorSpec::unit_interval();
            let v = mv(&x);
            let back = frac_power_apply(&frac_power_apply(&v, rho, &spec), -rho, &spec);
            for (a, b) in v.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn norm_is_power_then_h_norm(x in coeffs(128), rho in -1.5f64..1.5) {
            let spec = OperatorSpec::unit_interval();
            let v = mv(&x);
            prop_assert_eq!(
                sobolev_norm(&v, rho, &spec),
                sobolev_norm(&frac_power_apply(&v, rho, &spec), 0.0, &spec)
            );
        }
    }
}
