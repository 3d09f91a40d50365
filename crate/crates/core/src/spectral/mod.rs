//! Eigenbasis bookkeeping: operator spectra, spectral fields, fractional
//! norms, grid transforms and spectral series.

mod series;
mod transform;

pub use series::{hs_decay_integral, z_series, SeriesOutcome, DEFAULT_MODE_CAP};
pub use transform::{
    evaluate, from_physical, grid_points, to_physical, SpectralGrid, Trig,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenfunction family on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `e_k = √2 sin(kπξ)`, `k ≥ 1`.
    DirichletSine,
    /// `e_k = √2 cos(kπξ)`, `k ≥ 1`; constants are projected out.
    NeumannCosineMeanzero,
}

impl BasisKind {
    pub fn trig(self) -> Trig {
        match self {
            BasisKind::DirichletSine => Trig::Sine,
            BasisKind::NeumannCosineMeanzero => Trig::Cosine,
        }
    }
}

/// Analytic law behind the eigenvalues, used to continue the spectrum past
/// the materialized modes when summing series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpectrumLaw {
    /// `λ_k = π²k²`.
    DirichletLaplacian,
    /// `λ_k = 4π²k²(4π²k² + ν)`.
    ThinFilm { nu: f64 },
    /// Only the listed eigenvalues are known.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseLaw {
    Unit,
    /// `q_k = λ_k^{-2γ₀}`.
    PowerLaw { gamma0: f64 },
    /// Listed weights; beyond them only the ℓ^∞ bound is known.
    Explicit,
}

/// Requested noise covariance for [`make_noise_weights`].
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    PowerLaw(f64),
    Explicit(Vec<f64>),
}

/// Spectrum of `-A` and of the noise covariance `Q` on a shared eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperatorSpec {
    eigenvalues: Vec<f64>,
    noise_weights: Vec<f64>,
    basis: BasisKind,
    nu: f64,
    spectrum: SpectrumLaw,
    noise: NoiseLaw,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (i, &q) in weights.iter().enumerate() {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::InvalidWeight { index: i + 1, value: q });
        }
    }
    Ok(())
}

/// Dirichlet Laplacian on `[0, 1]` with unit noise weights.
pub fn make_dirichlet_laplacian(n_modes: usize) -> Result<DiagonalOperatorSpec> {
    if n_modes == 0 {
        return Err(Error::ZeroModes);
    }
    let eigenvalues = (1..=n_modes).map(|k| PI * PI * (k * k) as f64).collect();
    Ok(DiagonalOperatorSpec {
        eigenvalues,
        noise_weights: vec![1.0; n_modes],
        basis: BasisKind::DirichletSine,
        nu: 0.0,
        spectrum: SpectrumLaw::DirichletLaplacian,
        noise: NoiseLaw::Unit,
    })
}

/// Thin-film operator `-∂⁴ + ν∂²`, multiplicity-one Neumann branch.
pub fn make_thinfilm_operator(n_modes: usize, nu: f64) -> Result<DiagonalOperatorSpec> {
    if n_modes == 0 {
        return Err(Error::ZeroModes);
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::NegativeViscosity(nu));
    }
    let eigenvalues = (1..=n_modes).map(|k| thinfilm_eigenvalue(k as f64, nu)).collect();
    Ok(DiagonalOperatorSpec {
        eigenvalues,
        noise_weights: vec![1.0; n_modes],
        basis: BasisKind::NeumannCosineMeanzero,
        nu,
        spectrum: SpectrumLaw::ThinFilm { nu },
        noise: NoiseLaw::Unit,
    })
}

fn thinfilm_eigenvalue(k: f64, nu: f64) -> f64 {
    let a = 4.0 * PI * PI * k * k;
    a * (a + nu)
}

pub fn make_noise_weights(op: &DiagonalOperatorSpec, kind: NoiseKind) -> Result<DiagonalOperatorSpec> {
    let mut out = op.clone();
    match kind {
        NoiseKind::PowerLaw(gamma0) => {
            if !(gamma0 >= 0.0) || !gamma0.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "power-law exponent gamma0 = {gamma0} must be finite and nonnegative"
                )));
            }
            out.noise_weights = op.eigenvalues.iter().map(|&l| l.powf(-2.0 * gamma0)).collect();
            out.noise = NoiseLaw::PowerLaw { gamma0 };
        }
        NoiseKind::Explicit(weights) => {
            if weights.len() != op.n_modes() {
                return Err(Error::LengthMismatch { expected: op.n_modes(), found: weights.len() });
            }
            check_weights(&weights)?;
            out.noise_weights = weights;
            out.noise = NoiseLaw::Explicit;
        }
    }
    Ok(out)
}

impl DiagonalOperatorSpec {
    /// Arbitrary diagonal spectrum; no analytic continuation past `n_modes`.
    pub fn explicit(eigenvalues: Vec<f64>, noise_weights: Vec<f64>, basis: BasisKind) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::ZeroModes);
        }
        if noise_weights.len() != eigenvalues.len() {
            return Err(Error::LengthMismatch { expected: eigenvalues.len(), found: noise_weights.len() });
        }
        let mut prev = 0.0;
        for &l in &eigenvalues {
            if !(l.is_finite() && l > 0.0 && l >= prev) {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalues must be positive, finite and nondecreasing (got {l} after {prev})"
                )));
            }
            prev = l;
        }
        check_weights(&noise_weights)?;
        Ok(Self {
            eigenvalues,
            noise_weights,
            basis,
            nu: 0.0,
            spectrum: SpectrumLaw::Explicit,
            noise: NoiseLaw::Explicit,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn noise_weights(&self) -> &[f64] {
        &self.noise_weights
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn spectrum_law(&self) -> SpectrumLaw {
        self.spectrum
    }

    pub fn noise_law(&self) -> &NoiseLaw {
        &self.noise
    }

    /// Exponential decay rate of the semigroup, `ω = λ_1`.
    pub fn omega(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn max_noise_weight(&self) -> f64 {
        self.noise_weights.iter().cloned().fold(0.0, f64::max)
    }

    /// Same spectrum laws, different truncation.
    pub fn with_modes(&self, n_modes: usize) -> Result<Self> {
        let base = match self.spectrum {
            SpectrumLaw::DirichletLaplacian => make_dirichlet_laplacian(n_modes)?,
            SpectrumLaw::ThinFilm { nu } => make_thinfilm_operator(n_modes, nu)?,
            SpectrumLaw::Explicit => {
                return Err(Error::InvalidParameter("explicit spectra cannot be re-truncated".into()))
            }
        };
        match self.noise {
            NoiseLaw::Unit => Ok(base),
            NoiseLaw::PowerLaw { gamma0 } => make_noise_weights(&base, NoiseKind::PowerLaw(gamma0)),
            NoiseLaw::Explicit => {
                Err(Error::InvalidParameter("explicit noise weights cannot be re-truncated".into()))
            }
        }
    }

    pub(crate) fn check_field(&self, x: &SpectralField) -> Result<()> {
        if x.len() != self.n_modes() {
            return Err(Error::LengthMismatch { expected: self.n_modes(), found: x.len() });
        }
        if x.basis() != self.basis {
            return Err(Error::BasisMismatch { expected: self.basis, found: x.basis() });
        }
        Ok(())
    }
}

/// Coordinates `⟨x, e_k⟩`, `k = 1..=n`, of a field in a truncated eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
    basis: BasisKind,
}

impl SpectralField {
    pub fn zeros(n_modes: usize, basis: BasisKind) -> Self {
        Self { coeffs: vec![0.0; n_modes], basis }
    }

    /// The eigenfunction `e_mode` (modes are numbered from 1).
    pub fn unit(n_modes: usize, mode: usize, basis: BasisKind) -> Result<Self> {
        if mode == 0 || mode > n_modes {
            return Err(Error::IndexOutOfRange { index: mode, len: n_modes });
        }
        let mut f = Self::zeros(n_modes, basis);
        f.coeffs[mode - 1] = 1.0;
        Ok(f)
    }

    pub fn from_coeffs(coeffs: Vec<f64>, basis: BasisKind) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("spectral coefficients"));
        }
        Ok(Self { coeffs, basis })
    }

    pub(crate) fn from_coeffs_unchecked(coeffs: Vec<f64>, basis: BasisKind) -> Self {
        Self { coeffs, basis }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|v| v * c).collect(), basis: self.basis }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            basis: self.basis,
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            basis: self.basis,
        }
    }
}

/// `‖x‖_θ = (Σ λ_k^{2θ} x_k²)^{1/2}`; `θ = 0` is the `H` norm and negative
/// `θ` is allowed.
pub fn fractional_norm(x: &SpectralField, theta: f64, op: &DiagonalOperatorSpec) -> Result<f64> {
    op.check_field(x)?;
    if x.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("spectral coefficients"));
    }
    Ok(fractional_norm_sq_raw(&x.coeffs, theta, &op.eigenvalues).sqrt())
}

/// Squared fractional norm on bare slices; callers guarantee matching lengths.
pub(crate) fn fractional_norm_sq_raw(coeffs: &[f64], theta: f64, eigenvalues: &[f64]) -> f64 {
    if theta == 0.0 {
        return coeffs.iter().map(|c| c * c).sum();
    }
    let e = 2.0 * theta;
    coeffs.iter().zip(eigenvalues).map(|(c, l)| l.powf(e) * c * c).sum()
}

/// Precomputed weights `λ_k^{2θ}` for repeated norm evaluation.
#[derive(Debug, Clone)]
pub struct NormWeights {
    theta: f64,
    weights: Vec<f64>,
}

impl NormWeights {
    pub fn new(op: &DiagonalOperatorSpec, theta: f64) -> Self {
        Self { theta, weights: op.eigenvalues.iter().map(|l| l.powf(2.0 * theta)).collect() }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn norm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.weights).map(|(c, w)| w * c * c).sum()
    }

    pub fn norm(&self, coeffs: &[f64]) -> f64 {
        self.norm_sq(coeffs).sqrt()
    }
}
