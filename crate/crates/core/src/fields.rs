//! Pseudospectral evaluation of nonlinearities in sine-mode space.
//!
//! A field with sine coefficients `x^k` is sampled on the interior grid
//! `x_j = jL/(M_g+1)` by a type-I discrete sine transform, the nonlinearity
//! is applied pointwise and the result is projected back. Padding the grid
//! (`M_g >= m_F · max(K, n_out)` for `K` active modes) makes every product of
//! trigonometric polynomials exact.
//!
//! Odd powers of a sine series are again finite sine series and go straight
//! through the DST. Even powers (and the constant term) are finite *cosine*
//! series; their cosine coefficients are recovered exactly by a type-I DCT
//! and then projected onto the sine basis in closed form.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{ModeVector, OperatorSpec};

/// Polynomial `f(u) = Σ_j c_j u^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Config(
                "nonlinearity.poly_coeffs needs degree >= 1".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("nonlinearity.poly_coeffs must be finite".into()));
        }
        if *coeffs.last().unwrap() == 0.0 {
            return Err(Error::Config(
                "nonlinearity.poly_coeffs: leading coefficient must be nonzero".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    fn has_even_part(&self) -> bool {
        self.coeffs.iter().step_by(2).any(|&c| c != 0.0)
    }

    fn has_odd_part(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).any(|&c| c != 0.0)
    }

    fn max_even_degree(&self) -> usize {
        (0..self.coeffs.len())
            .step_by(2)
            .filter(|&j| self.coeffs[j] != 0.0)
            .max()
            .unwrap_or(0)
    }

    /// Odd part `Σ_{j odd} c_j u^j`.
    fn eval_odd(&self, u: f64) -> f64 {
        let u2 = u * u;
        let mut acc = 0.0;
        for j in (1..self.coeffs.len()).step_by(2).rev() {
            acc = acc * u2 + self.coeffs[j];
        }
        acc * u
    }

    /// Even part `Σ_{j even} c_j u^j`.
    fn eval_even(&self, u: f64) -> f64 {
        let u2 = u * u;
        let mut acc = 0.0;
        for j in (0..self.coeffs.len()).step_by(2).rev() {
            acc = acc * u2 + self.coeffs[j];
        }
        acc
    }
}

/// Parameters of the FitzHugh–Nagumo drift
/// `F_v = v(1-v)(v-a) - w`, `F_w = ε(v - b w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FhnParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub sigma_w: f64,
    pub gamma_w: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 1.0,
            epsilon: 0.1,
            sigma_w: 0.05,
            gamma_w: 1.0,
        }
    }
}

impl FhnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Config(format!("fhn_params.a must lie in (0,1) (got {})", self.a)));
        }
        if !(self.b >= 0.0) {
            return Err(Error::Config(format!("fhn_params.b must be nonnegative (got {})", self.b)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "fhn_params.epsilon must be nonnegative (got {})",
                self.epsilon
            )));
        }
        if !(self.sigma_w >= 0.0) || !(self.gamma_w >= 0.0) {
            return Err(Error::Config(
                "fhn_params.sigma_w and fhn_params.gamma_w must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `u(1-u)(u-a) = -u^3 + (1+a)u^2 - a u`.
    pub fn cubic(&self) -> Polynomial {
        Polynomial {
            coeffs: vec![0.0, -self.a, 1.0 + self.a, -1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NonlinearitySpec {
    None,
    Polynomial(Polynomial),
    /// `F(v) = -v ∂_x v`.
    Burgers,
    Fhn(FhnParams),
}

impl NonlinearitySpec {
    /// Degree used for the dealiasing bound (`m_F`).
    pub fn dealias_degree(&self) -> usize {
        match self {
            NonlinearitySpec::None => 1,
            NonlinearitySpec::Polynomial(p) => p.degree(),
            NonlinearitySpec::Burgers => 2,
            NonlinearitySpec::Fhn(_) => 3,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NonlinearitySpec::None)
    }
}

/// Collocation grid: `n_grid` interior points, first `n_modes_keep` modes retained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_grid: usize,
    pub n_modes_keep: usize,
}

impl GridSpec {
    pub fn new(n_grid: usize, n_modes_keep: usize) -> Result<Self> {
        if n_grid == 0 || n_modes_keep == 0 || n_modes_keep > n_grid {
            return Err(Error::Config(format!(
                "grid: need 1 <= n_modes_keep <= n_grid (got n_modes_keep={n_modes_keep}, n_grid={n_grid})"
            )));
        }
        Ok(Self { n_grid, n_modes_keep })
    }

    /// Smallest `2^p - 1` grid with twice the dealiasing margin for `modes`
    /// modes of a degree-`degree` nonlinearity.
    pub fn padded(modes: usize, degree: usize) -> Self {
        let need = 2 * degree.max(1) * modes.max(1);
        let mut n = 1usize;
        while n < need {
            n = 2 * n + 1;
        }
        Self {
            n_grid: n,
            n_modes_keep: modes.max(1),
        }
    }

    /// Smallest `2^p - 1` grid satisfying the bare dealiasing bound.
    pub fn minimal(modes: usize, degree: usize) -> Self {
        let need = degree.max(1) * modes.max(1);
        let mut n = 1usize;
        while n < need {
            n = 2 * n + 1;
        }
        Self {
            n_grid: n,
            n_modes_keep: modes.max(1),
        }
    }
}

/// Type-I sine and cosine transforms on a fixed grid, backed by one complex
/// FFT of length `2(M_g+1)`. Holds scratch buffers, so use one per worker.
pub struct Pseudospectral {
    n: usize,
    length: f64,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    grid_a: Vec<f64>,
    grid_b: Vec<f64>,
    cos_coeffs: Vec<f64>,
}

impl std::fmt::Debug for Pseudospectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pseudospectral")
            .field("n_grid", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl Pseudospectral {
    pub fn new(operator: &OperatorSpec, n_grid: usize) -> Result<Self> {
        if n_grid == 0 {
            return Err(Error::Config("grid.n_grid must be positive".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (n_grid + 1));
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            n: n_grid,
            length: operator.domain_length,
            buf: vec![Complex::default(); 2 * (n_grid + 1)],
            scratch,
            fft,
            grid_a: vec![0.0; n_grid],
            grid_b: vec![0.0; n_grid],
            cos_coeffs: vec![0.0; n_grid + 2],
        })
    }

    pub fn n_grid(&self) -> usize {
        self.n
    }

    /// Interior collocation points.
    pub fn points(&self) -> Vec<f64> {
        let h = self.length / (self.n + 1) as f64;
        (1..=self.n).map(|j| j as f64 * h).collect()
    }

    /// `out_k = Σ_{j=1}^{n} x_j sin(π j k/(n+1))` for `k = 1..=out.len()`.
    fn dst1(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        self.buf.iter_mut().for_each(|c| *c = Complex::default());
        for (j, &v) in x.iter().enumerate().take(n) {
            self.buf[j + 1].re = v;
            self.buf[m - j - 1].re = -v;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -0.5 * self.buf[k + 1].im;
        }
    }

    /// Cosine evaluation/analysis pair: for `y` indexed `0..=n+1`,
    /// `out_m = y_0 + (-1)^m y_{n+1} + 2 Σ_{j=1}^{n} y_j cos(π j m/(n+1))`.
    fn dct1(&mut self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        self.buf.iter_mut().for_each(|c| *c = Complex::default());
        for (j, &v) in y.iter().enumerate().take(n + 2) {
            self.buf[j].re = v;
            if j > 0 && j <= n {
                self.buf[m - j].re = v;
            }
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.buf[k].re;
        }
    }

    fn check_modes(&self, modes: usize) -> Result<()> {
        if modes > self.n {
            return Err(Error::Config(format!(
                "{modes} modes exceed the {} grid points",
                self.n
            )));
        }
        Ok(())
    }

    fn check_dealias(&self, degree: usize, modes: usize, n_out: usize) -> Result<()> {
        let need = degree * modes.max(n_out);
        if self.n < need {
            return Err(Error::Config(format!(
                "dealiasing violated: n_grid = {} < m_F * max(modes, n_out) = {need}",
                self.n
            )));
        }
        Ok(())
    }

    /// Field values `u(x_j)` at the interior points.
    pub fn modes_to_grid(&mut self, modes: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_modes(modes.len())?;
        if out.len() != self.n {
            return Err(Error::Config("output buffer must match the grid size".into()));
        }
        let scale = (2.0 / self.length).sqrt();
        self.dst1(modes, out);
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }

    /// `(u, Φ_k)_H` for `k = 1..=out.len()` by DST quadrature.
    pub fn grid_to_modes(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::Config(format!(
                "grid values have length {} but the grid has {} points",
                u.len(),
                self.n
            )));
        }
        self.check_modes(out.len())?;
        let scale = (2.0 / self.length).sqrt() * self.length / (self.n + 1) as f64;
        self.dst1(u, out);
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }

    /// First `out.len()` sine coefficients of `f(u)` for the field with modes `x`.
    pub fn polynomial(&mut self, x: &[f64], poly: &Polynomial, out: &mut [f64]) -> Result<()> {
        self.check_dealias(poly.degree(), x.len(), out.len())?;
        let mut u = std::mem::take(&mut self.grid_a);
        let mut g = std::mem::take(&mut self.grid_b);
        let res = self.polynomial_inner(x, poly, out, &mut u, &mut g);
        self.grid_a = u;
        self.grid_b = g;
        res
    }

    fn polynomial_inner(
        &mut self,
        x: &[f64],
        poly: &Polynomial,
        out: &mut [f64],
        u: &mut [f64],
        g: &mut [f64],
    ) -> Result<()> {
        self.modes_to_grid(x, u)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        if poly.has_odd_part() {
            for (gj, &uj) in g.iter_mut().zip(u.iter()) {
                *gj = poly.eval_odd(uj);
            }
            self.grid_to_modes(g, out)?;
        }
        if poly.has_even_part() {
            self.project_even(x.len(), poly, u, out);
        }
        Ok(())
    }

    /// Adds the sine projection of the even part of `poly` evaluated on `u`.
    fn project_even(&mut self, modes: usize, poly: &Polynomial, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let top = (poly.max_even_degree() * modes).min(n);
        let mut y = std::mem::take(&mut self.cos_coeffs);
        // Boundary values: u vanishes there.
        let edge = poly.eval_even(0.0);
        y[0] = edge;
        y[n + 1] = edge;
        for j in 0..n {
            y[j + 1] = poly.eval_even(u[j]);
        }
        let mut a = vec![0.0; top + 1];
        self.dct1(&y, &mut a);
        // Cosine coefficients of g(x) = Σ_m a_m cos(mπx/L).
        let norm = 1.0 / (n + 1) as f64;
        a[0] *= 0.5 * norm;
        a[1..].iter_mut().for_each(|v| *v *= norm);
        // (cos(mπx/L), Φ_k) = sqrt(2/L) L/π · 2k/(k²-m²) when k+m is odd.
        let c = (2.0 / self.length).sqrt() * self.length / PI;
        for (i, o) in out.iter_mut().enumerate() {
            let k = (i + 1) as i64;
            let start = if k % 2 == 0 { 1 } else { 0 };
            let mut acc = 0.0;
            for m in (start..=top as i64).step_by(2) {
                acc += a[m as usize] * (2 * k) as f64 / (k * k - m * m) as f64;
            }
            *o += c * acc;
        }
        self.cos_coeffs = y;
    }

    /// First `out.len()` sine coefficients of `-v ∂_x v`.
    pub fn burgers(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dealias(2, x.len(), out.len())?;
        let n = self.n;
        let mut v = std::mem::take(&mut self.grid_a);
        let mut g = std::mem::take(&mut self.grid_b);
        self.modes_to_grid(x, &mut v)?;
        // v_x = Σ_k x^k sqrt(2/L)(kπ/L) cos(kπx/L), evaluated at the interior points.
        let mut y = std::mem::take(&mut self.cos_coeffs);
        y.iter_mut().for_each(|c| *c = 0.0);
        let s = (2.0 / self.length).sqrt() * PI / self.length;
        for (i, &c) in x.iter().enumerate() {
            y[i + 1] = 0.5 * s * (i + 1) as f64 * c;
        }
        let mut vx = vec![0.0; n + 1];
        self.dct1(&y, &mut vx);
        for j in 0..n {
            g[j] = -v[j] * vx[j + 1];
        }
        self.cos_coeffs = y;
        let res = self.grid_to_modes(&g, out);
        self.grid_a = v;
        self.grid_b = g;
        res
    }

    /// Drift of the nonlinearity `nl` (without FHN coupling) into `out`.
    pub fn drift(&mut self, x: &[f64], nl: &NonlinearitySpec, out: &mut [f64]) -> Result<()> {
        match nl {
            NonlinearitySpec::None => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            NonlinearitySpec::Polynomial(p) => self.polynomial(x, p, out),
            NonlinearitySpec::Burgers => self.burgers(x, out),
            NonlinearitySpec::Fhn(p) => self.polynomial(x, &p.cubic(), out),
        }
    }
}

fn check_grid_for(x: &ModeVector, grid: &GridSpec) -> Result<()> {
    if x.modes() > grid.n_grid {
        return Err(Error::Config(format!(
            "{} modes exceed the {} grid points",
            x.modes(),
            grid.n_grid
        )));
    }
    Ok(())
}

/// Field values at `x_j = jL/(M_g+1)`, `j = 1..=M_g`.
pub fn modes_to_grid(x: &ModeVector, grid: &GridSpec, spec: &OperatorSpec) -> Result<Vec<f64>> {
    check_grid_for(x, grid)?;
    let mut ps = Pseudospectral::new(spec, grid.n_grid)?;
    let mut out = vec![0.0; grid.n_grid];
    ps.modes_to_grid(x, &mut out)?;
    Ok(out)
}

/// First `n_modes_keep` coefficients `(u, Φ_k)_H`.
pub fn grid_to_modes(u: &[f64], grid: &GridSpec, spec: &OperatorSpec) -> Result<ModeVector> {
    let mut ps = Pseudospectral::new(spec, grid.n_grid)?;
    let mut out = vec![0.0; grid.n_modes_keep];
    ps.grid_to_modes(u, &mut out)?;
    ModeVector::new(out)
}

pub fn nemytskii_modes(
    x: &ModeVector,
    nl: &NonlinearitySpec,
    grid: &GridSpec,
    spec: &OperatorSpec,
    n_out: usize,
) -> Result<ModeVector> {
    let poly = match nl {
        NonlinearitySpec::Polynomial(p) => p,
        _ => {
            return Err(Error::Config(
                "nemytskii_modes requires a polynomial nonlinearity".into(),
            ))
        }
    };
    let mut ps = Pseudospectral::new(spec, grid.n_grid)?;
    let mut out = vec![0.0; n_out];
    ps.polynomial(x, poly, &mut out)?;
    ModeVector::new(out)
}

pub fn burgers_modes(
    x: &ModeVector,
    grid: &GridSpec,
    spec: &OperatorSpec,
    n_out: usize,
) -> Result<ModeVector> {
    let mut ps = Pseudospectral::new(spec, grid.n_grid)?;
    let mut out = vec![0.0; n_out];
    ps.burgers(x, &mut out)?;
    ModeVector::new(out)
}

/// `(F_v, F_w)` of the FitzHugh–Nagumo system in mode space.
pub fn fhn_drift(
    v: &ModeVector,
    w: &ModeVector,
    p: &FhnParams,
    grid: &GridSpec,
    spec: &OperatorSpec,
    n_out: usize,
) -> Result<(ModeVector, ModeVector)> {
    let mut ps = Pseudospectral::new(spec, grid.n_grid)?;
    let mut fv = vec![0.0; n_out];
    ps.polynomial(v, &p.cubic(), &mut fv)?;
    let mut fw = vec![0.0; n_out];
    for k in 0..n_out {
        let vk = v.get(k).copied().unwrap_or(0.0);
        let wk = w.get(k).copied().unwrap_or(0.0);
        fv[k] -= wk;
        fw[k] = p.epsilon * (vk - p.b * wk);
    }
    Ok((ModeVector::new(fv)?, ModeVector::new(fw)?))
}
