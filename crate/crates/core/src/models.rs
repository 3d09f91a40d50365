//! Concrete drifts: stochastic Burgers `B(u) = ∂_x(u²)` on the Dirichlet sine
//! basis, thin-film growth `B(u) = -∂_x²((∂_x u)²)` on the mean-zero Neumann
//! cosine basis, the cubic comparison field `C(u) = u³`, and residuals of the
//! structural inequalities these drifts satisfy.
//!
//! All products are evaluated pseudospectrally on cell-centred grids large
//! enough for the projected product to be exact (3N points for quadratic,
//! 4N for cubic terms).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::{Channel, GaussianStream, StreamKey};
use crate::spectral::{BasisKind, DiagonalOperatorSpec, NormWeights, SpectralField, SpectralGrid, Trig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Burgers,
    Thinfilm,
}

impl ModelKind {
    pub fn basis(self) -> BasisKind {
        match self {
            ModelKind::Burgers => BasisKind::DirichletSine,
            ModelKind::Thinfilm => BasisKind::NeumannCosineMeanzero,
        }
    }
}

/// Calibrated constants of the Lyapunov majorant.
///
/// Burgers: `-½‖y‖²_{1/2} + coupled·‖w‖²_{1/8}‖y‖²_{1/2} + free·‖w‖⁴_{1/8}`.
/// Thin film: `-¼‖y‖²_{1/2} + coupled·‖w‖⁸_{5/16}‖y‖² + free·‖w‖²_{5/16}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub coupled: f64,
    pub free: f64,
}

/// Scratch buffers for allocation-free nonlinearity evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    quad: Vec<f64>,
    quad2: Vec<f64>,
    cubic: Vec<f64>,
    scaled: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    operator: DiagonalOperatorSpec,
    nonlinear: bool,
    lyapunov: Option<LyapunovConstants>,
    quad_grid: SpectralGrid,
    cubic_grid: SpectralGrid,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, operator: DiagonalOperatorSpec) -> Result<Self> {
        let n = operator.n_modes();
        Self::with_grids(kind, operator, 3 * n, 4 * n)
    }

    pub fn with_grids(
        kind: ModelKind,
        operator: DiagonalOperatorSpec,
        dealias_grid: usize,
        cubic_grid: usize,
    ) -> Result<Self> {
        if operator.basis() != kind.basis() {
            return Err(Error::BasisMismatch { expected: kind.basis(), found: operator.basis() });
        }
        let n = operator.n_modes();
        if dealias_grid < 3 * n {
            return Err(Error::GridTooCoarse { grid: dealias_grid, required: 3 * n });
        }
        if cubic_grid < 4 * n {
            return Err(Error::GridTooCoarse { grid: cubic_grid, required: 4 * n });
        }
        Ok(Self {
            kind,
            quad_grid: SpectralGrid::new(n, dealias_grid)?,
            cubic_grid: SpectralGrid::new(n, cubic_grid)?,
            operator,
            nonlinear: true,
            lyapunov: None,
        })
    }

    /// The same model with `B ≡ 0`.
    pub fn linearized(&self) -> Self {
        Self { nonlinear: false, ..self.clone() }
    }

    pub fn with_lyapunov(mut self, constants: LyapunovConstants) -> Self {
        self.lyapunov = Some(constants);
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn operator(&self) -> &DiagonalOperatorSpec {
        &self.operator
    }

    pub fn n_modes(&self) -> usize {
        self.operator.n_modes()
    }

    pub fn basis(&self) -> BasisKind {
        self.operator.basis()
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    pub fn dealias_grid(&self) -> usize {
        self.quad_grid.n_grid()
    }

    pub fn cubic_grid(&self) -> usize {
        self.cubic_grid.n_grid()
    }

    pub fn lyapunov(&self) -> Option<LyapunovConstants> {
        self.lyapunov
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            quad: vec![0.0; self.quad_grid.n_grid()],
            quad2: vec![0.0; self.quad_grid.n_grid()],
            cubic: vec![0.0; self.cubic_grid.n_grid()],
            scaled: vec![0.0; self.n_modes()],
        }
    }

    fn check(&self, u: &SpectralField) -> Result<()> {
        self.operator.check_field(u)
    }

    /// `B(u)` into `out`; zero when the model is linearized.
    pub fn drift_nonlinearity_into(&self, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
        if !self.nonlinear {
            out.fill(0.0);
            return;
        }
        match self.kind {
            ModelKind::Burgers => burgers_into(&self.quad_grid, u, out, ws),
            ModelKind::Thinfilm => thinfilm_into(&self.quad_grid, u, out, ws),
        }
    }

    /// `u³` projected onto the basis.
    pub fn cubic_into(&self, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let trig = self.basis().trig();
        self.cubic_grid.synthesize(trig, u, &mut ws.cubic);
        for v in ws.cubic.iter_mut() {
            *v = *v * *v * *v;
        }
        self.cubic_grid.analyze(trig, &ws.cubic, out);
    }

    /// Samples of `u` on the cubic grid (used for `Lᵖ` functionals).
    pub fn physical_samples<'a>(&self, u: &[f64], ws: &'a mut Workspace) -> &'a [f64] {
        self.cubic_grid.synthesize(self.basis().trig(), u, &mut ws.cubic);
        &ws.cubic
    }
}

// B(u)_k = ⟨∂_x(u²), √2 sin kπx⟩ = -kπ ⟨u², √2 cos kπx⟩.
fn burgers_into(grid: &SpectralGrid, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
    grid.synthesize(Trig::Sine, u, &mut ws.quad);
    for v in ws.quad.iter_mut() {
        *v *= *v;
    }
    grid.analyze(Trig::Cosine, &ws.quad, out);
    for (k, o) in out.iter_mut().enumerate() {
        *o *= -((k + 1) as f64) * PI;
    }
}

// ∂_x u is a sine series; B(u)_k = ⟨-∂²f, √2 cos kπx⟩ = (kπ)² ⟨f, √2 cos kπx⟩
// for f = (∂_x u)², whose derivative vanishes at both ends.
fn thinfilm_into(grid: &SpectralGrid, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
    for (k, (s, &c)) in ws.scaled.iter_mut().zip(u).enumerate() {
        *s = -((k + 1) as f64) * PI * c;
    }
    grid.synthesize(Trig::Sine, &ws.scaled, &mut ws.quad2);
    for (q, d) in ws.quad.iter_mut().zip(&ws.quad2) {
        *q = d * d;
    }
    grid.analyze(Trig::Cosine, &ws.quad, out);
    for (k, o) in out.iter_mut().enumerate() {
        let kp = (k + 1) as f64 * PI;
        *o *= kp * kp;
    }
}

fn apply(m: &ModelSpec, u: &SpectralField, f: impl Fn(&ModelSpec, &[f64], &mut [f64], &mut Workspace)) -> SpectralField {
    let mut ws = m.workspace();
    let mut out = vec![0.0; m.n_modes()];
    f(m, u.coeffs(), &mut out, &mut ws);
    SpectralField::from_coeffs_unchecked(out, m.basis())
}

fn require_kind(m: &ModelSpec, kind: ModelKind) -> Result<()> {
    if m.kind != kind {
        return Err(Error::BasisMismatch { expected: kind.basis(), found: m.basis() });
    }
    Ok(())
}

/// Sine coefficients of `∂_x(u²)`, truncated to `n_modes`.
pub fn burgers_nonlinearity(u: &SpectralField, m: &ModelSpec) -> Result<SpectralField> {
    require_kind(m, ModelKind::Burgers)?;
    m.check(u)?;
    Ok(apply(m, u, |m, u, o, ws| burgers_into(&m.quad_grid, u, o, ws)))
}

/// Mean-zero cosine coefficients of `-∂_x²((∂_x u)²)`, truncated to `n_modes`.
pub fn thinfilm_nonlinearity(u: &SpectralField, m: &ModelSpec) -> Result<SpectralField> {
    require_kind(m, ModelKind::Thinfilm)?;
    m.check(u)?;
    Ok(apply(m, u, |m, u, o, ws| thinfilm_into(&m.quad_grid, u, o, ws)))
}

/// The model's `B(u)` (zero for a linearized model).
pub fn nonlinearity(u: &SpectralField, m: &ModelSpec) -> Result<SpectralField> {
    m.check(u)?;
    Ok(apply(m, u, |m, u, o, ws| m.drift_nonlinearity_into(u, o, ws)))
}

pub fn cubic_field(u: &SpectralField, m: &ModelSpec) -> Result<SpectralField> {
    m.check(u)?;
    Ok(apply(m, u, |m, u, o, ws| m.cubic_into(u, o, ws)))
}

/// `u³` on an explicit grid; rejects grids below `4·n_modes`.
pub fn cubic_field_on_grid(u: &SpectralField, n_grid: usize) -> Result<SpectralField> {
    let n = u.len();
    if n_grid < 4 * n {
        return Err(Error::GridTooCoarse { grid: n_grid, required: 4 * n });
    }
    let grid = SpectralGrid::new(n, n_grid)?;
    let trig = u.basis().trig();
    let mut samples = vec![0.0; n_grid];
    grid.synthesize(trig, u.coeffs(), &mut samples);
    for v in samples.iter_mut() {
        *v = *v * *v * *v;
    }
    let mut out = vec![0.0; n];
    grid.analyze(trig, &samples, &mut out);
    Ok(SpectralField::from_coeffs_unchecked(out, u.basis()))
}

/// `(a³ - b³)(a - b) - ½(a + b)²(a - b)²`, nonnegative for all reals.
pub fn elementary_cubic_gap(a: f64, b: f64) -> f64 {
    (a * a * a - b * b * b) * (a - b) - 0.5 * (a + b) * (a + b) * (a - b) * (a - b)
}

/// Pieces of a Lyapunov check: `lhs = ⟨Ay + B(y+w), y⟩` against
/// `-dissipation + c₁·coupled + c₂·free`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovTerms {
    pub lhs: f64,
    pub dissipation: f64,
    pub coupled: f64,
    pub free: f64,
}

impl LyapunovTerms {
    /// Excess that the two calibrated terms must absorb.
    pub fn excess(&self) -> f64 {
        self.lhs + self.dissipation
    }

    pub fn residual(&self, c: LyapunovConstants) -> f64 {
        self.lhs - (-self.dissipation + c.coupled * self.coupled + c.free * self.free)
    }
}

pub fn lyapunov_terms(y: &SpectralField, w: &SpectralField, m: &ModelSpec) -> Result<LyapunovTerms> {
    m.check(y)?;
    m.check(w)?;
    let op = m.operator();
    let sum = y.add(w);
    let b = nonlinearity(&sum, m)?;
    let half = NormWeights::new(op, 0.5);
    let y_half_sq = half.norm_sq(y.coeffs());
    let lhs = -y_half_sq + b.dot(y);
    Ok(match m.kind {
        ModelKind::Burgers => {
            let w18 = NormWeights::new(op, 0.125).norm_sq(w.coeffs());
            LyapunovTerms { lhs, dissipation: 0.5 * y_half_sq, coupled: w18 * y_half_sq, free: w18 * w18 }
        }
        ModelKind::Thinfilm => {
            let w516 = NormWeights::new(op, 5.0 / 16.0).norm_sq(w.coeffs());
            let y0 = y.dot(y);
            LyapunovTerms { lhs, dissipation: 0.25 * y_half_sq, coupled: w516.powi(4) * y0, free: w516 }
        }
    })
}

/// `lhs - rhs` of the model's Lyapunov inequality; `≤ 0` means satisfied.
pub fn lyapunov_residual(y: &SpectralField, w: &SpectralField, m: &ModelSpec) -> Result<f64> {
    let c = m.lyapunov.ok_or(Error::MissingCalibration)?;
    Ok(lyapunov_terms(y, w, m)?.residual(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneSidedForm {
    /// `⟨B(u)-B(v), u-v⟩ - ½‖u-v‖²_{1/2} - ⟨u³-v³, u-v⟩`.
    Dissipativity,
    /// `⟨(Au + Bu - Cu) - (Av + Bv - Cv), u-v⟩`.
    GalerkinDrift,
}

pub fn onesided_residual(u: &SpectralField, v: &SpectralField, m: &ModelSpec, form: OneSidedForm) -> Result<f64> {
    require_kind(m, ModelKind::Burgers)?;
    m.check(u)?;
    m.check(v)?;
    let e = u.sub(v);
    let db = burgers_nonlinearity(u, m)?.sub(&burgers_nonlinearity(v, m)?).dot(&e);
    let dc = cubic_field(u, m)?.sub(&cubic_field(v, m)?).dot(&e);
    let e_half_sq = NormWeights::new(m.operator(), 0.5).norm_sq(e.coeffs());
    Ok(match form {
        OneSidedForm::Dissipativity => db - 0.5 * e_half_sq - dc,
        OneSidedForm::GalerkinDrift => -e_half_sq + db - dc,
    })
}

/// Gaussian spectral field `c_k = amplitude · k^{-decay} · z_k`.
pub fn random_field(
    n_modes: usize,
    basis: BasisKind,
    decay: f64,
    amplitude: f64,
    stream: &mut GaussianStream,
) -> SpectralField {
    let coeffs = (1..=n_modes).map(|k| amplitude * (k as f64).powf(-decay) * stream.normal()).collect();
    SpectralField::from_coeffs_unchecked(coeffs, basis)
}

/// Sampling design for the Lyapunov calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDesign {
    pub samples: usize,
    pub decay_exponents: Vec<f64>,
    /// Amplitudes are log-uniform on `10^[lo, hi]`, independently for `y` and `w`.
    pub log10_amplitude: (f64, f64),
    pub safety_factor: f64,
    /// Share of pairs whose `y` points along `(-A)^{-1}B(w)`, the direction
    /// that maximizes the term linear in `y`.
    pub aligned_fraction: f64,
    pub seed: u64,
}

impl Default for CalibrationDesign {
    fn default() -> Self {
        Self {
            samples: 10_000,
            decay_exponents: vec![1.0, 1.5, 2.0],
            log10_amplitude: (-2.0, 2.0),
            safety_factor: 1.5,
            aligned_fraction: 0.5,
            seed: 0x5eed,
        }
    }
}

fn sample_pair(m: &ModelSpec, design: &CalibrationDesign, replica: u64, i: usize) -> (SpectralField, SpectralField) {
    let mut s = StreamKey::new(design.seed, replica, i as u64).stream(Channel::Sampling);
    let (lo, hi) = design.log10_amplitude;
    let n_decay = design.decay_exponents.len();
    let draw = |s: &mut GaussianStream| {
        let decay = design.decay_exponents[((s.uniform() * n_decay as f64) as usize).min(n_decay - 1)];
        let amp = 10f64.powf(lo + (hi - lo) * s.uniform());
        (random_field(m.n_modes(), m.basis(), decay, amp, s), amp)
    };
    let (y, amp) = draw(&mut s);
    let (w, _) = draw(&mut s);
    if s.uniform() >= design.aligned_fraction {
        return (y, w);
    }
    let mut d = vec![0.0; m.n_modes()];
    m.drift_nonlinearity_into(w.coeffs(), &mut d, &mut m.workspace());
    for (v, l) in d.iter_mut().zip(m.operator().eigenvalues()) {
        *v /= l;
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return (y, w);
    }
    let scale = amp / norm;
    let aligned = d.iter().zip(y.coeffs()).map(|(v, r)| scale * v + 0.1 * r).collect();
    (SpectralField::from_coeffs_unchecked(aligned, m.basis()), w)
}

/// Terms of the Lyapunov inequality on the design's sample set `replica`.
pub fn lyapunov_sample(
    m: &ModelSpec,
    design: &CalibrationDesign,
    replica: u64,
    policy: Execution,
) -> Result<Vec<LyapunovTerms>> {
    if design.decay_exponents.is_empty() || design.samples == 0 {
        return Err(Error::InvalidParameter("empty calibration design".into()));
    }
    map_indexed(policy, design.samples, |i| {
        let (y, w) = sample_pair(m, design, replica, i);
        lyapunov_terms(&y, &w, m)
    })
    .into_iter()
    .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Fits the two constants on a log grid of `coupled` values: each candidate
/// gets the smallest `free` constant covering every sample, and the pair
/// with the least typical majorant `c₁·median(coupled) + c₂·median(free)` is
/// kept before both are inflated by the safety factor.
pub fn fit_lyapunov_constants(terms: &[LyapunovTerms], safety_factor: f64) -> LyapunovConstants {
    let required_free = |c1: f64| {
        terms
            .iter()
            .map(|t| {
                let need = t.excess() - c1 * t.coupled;
                if need <= 0.0 {
                    0.0
                } else if t.free > 0.0 {
                    need / t.free
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    };
    let ma = median(terms.iter().map(|t| t.coupled).collect()).max(f64::MIN_POSITIVE);
    let mb = median(terms.iter().map(|t| t.free).collect()).max(f64::MIN_POSITIVE);
    let cost = |c: &LyapunovConstants| c.coupled * ma + c.free * mb;
    let mut best = LyapunovConstants { coupled: 0.0, free: required_free(0.0) };
    for i in 0..=480 {
        let c1 = 10f64.powf(-12.0 + 0.05 * i as f64);
        let cand = LyapunovConstants { coupled: c1, free: required_free(c1) };
        if cost(&cand) < cost(&best) {
            best = cand;
        }
    }
    LyapunovConstants { coupled: safety_factor * best.coupled, free: safety_factor * best.free }
}

pub fn calibrate_lyapunov(m: &ModelSpec, design: &CalibrationDesign, policy: Execution) -> Result<LyapunovConstants> {
    let terms = lyapunov_sample(m, design, 0, policy)?;
    Ok(fit_lyapunov_constants(&terms, design.safety_factor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: usize,
    pub max_residual: f64,
}

/// Residuals on a sample set disjoint from the calibration set.
pub fn validate_lyapunov(m: &ModelSpec, design: &CalibrationDesign, policy: Execution) -> Result<ValidationReport> {
    let c = m.lyapunov.ok_or(Error::MissingCalibration)?;
    let terms = lyapunov_sample(m, design, 1, policy)?;
    let residuals: Vec<f64> = terms.iter().map(|t| t.residual(c)).collect();
    Ok(ValidationReport {
        samples: residuals.len(),
        violations: residuals.iter().filter(|&&r| r > 0.0).count(),
        max_residual: residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_dirichlet_laplacian, make_noise_weights, make_thinfilm_operator, NoiseKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn burgers(n: usize) -> ModelSpec {
        let op = make_noise_weights(&make_dirichlet_laplacian(n).unwrap(), NoiseKind::PowerLaw(0.125)).unwrap();
        ModelSpec::new(ModelKind::Burgers, op).unwrap()
    }

    fn thinfilm(n: usize) -> ModelSpec {
        ModelSpec::new(ModelKind::Thinfilm, make_thinfilm_operator(n, 0.0).unwrap()).unwrap()
    }

    fn rand_field(n: usize, basis: BasisKind, seed: u64) -> SpectralField {
        let mut s = StreamKey::new(seed, 0, 0).stream(Channel::Sampling);
        random_field(n, basis, 1.0, 1.0, &mut s)
    }

    #[test]
    fn burgers_unit_mode() {
        let m = burgers(6);
        let e1 = SpectralField::unit(6, 1, BasisKind::DirichletSine).unwrap();
        let b = burgers_nonlinearity(&e1, &m).unwrap();
        // u² = 1 - cos 2πx, so ∂_x(u²) = 2π sin 2πx = √2π e_2.
        let expect = [0.0, SQRT_2 * PI, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in b.coeffs().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let z = SpectralField::zeros(6, BasisKind::DirichletSine);
        assert!(burgers_nonlinearity(&z, &m).unwrap().coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn burgers_quadratic_homogeneity() {
        let m = burgers(16);
        let u = rand_field(16, BasisKind::DirichletSine, 3);
        let b1 = burgers_nonlinearity(&u, &m).unwrap();
        let b3 = burgers_nonlinearity(&u.scaled(3.0), &m).unwrap();
        for (a, b) in b1.coeffs().iter().zip(b3.coeffs()) {
            assert_abs_diff_eq!(9.0 * a, *b, epsilon = 1e-11);
        }
    }

    #[test]
    fn thinfilm_unit_mode() {
        let m = thinfilm(5);
        let e1 = SpectralField::unit(5, 1, BasisKind::NeumannCosineMeanzero).unwrap();
        let b = thinfilm_nonlinearity(&e1, &m).unwrap();
        // (∂u)² = π²(1 - cos 2πx); -∂²(·) = -4π⁴ cos 2πx = -2√2π⁴ e_2.
        let expect = [0.0, -2.0 * SQRT_2 * PI.powi(4), 0.0, 0.0, 0.0];
        for (a, b) in b.coeffs().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert!(thinfilm_nonlinearity(&SpectralField::zeros(5, m.basis()), &m)
            .unwrap()
            .coeffs()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn thinfilm_output_is_mean_zero() {
        // The mean is not representable in the basis; check the physical field.
        let m = thinfilm(8);
        let u = rand_field(8, BasisKind::NeumannCosineMeanzero, 5);
        let b = thinfilm_nonlinearity(&u, &m).unwrap();
        let g = crate::spectral::to_physical(&b, 64).unwrap();
        assert_abs_diff_eq!(g.iter().sum::<f64>() / 64.0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kind_mismatch() {
        let m = burgers(4);
        let c = SpectralField::zeros(4, BasisKind::NeumannCosineMeanzero);
        assert!(matches!(thinfilm_nonlinearity(&c, &m), Err(Error::BasisMismatch { .. })));
        assert!(matches!(burgers_nonlinearity(&c, &m), Err(Error::BasisMismatch { .. })));
        let op = make_thinfilm_operator(4, 0.0).unwrap();
        assert!(ModelSpec::new(ModelKind::Burgers, op).is_err());
    }

    #[test]
    fn cubic_identity() {
        let m = burgers(6);
        let e1 = SpectralField::unit(6, 1, BasisKind::DirichletSine).unwrap();
        let c = cubic_field(&e1, &m).unwrap();
        // (√2 sin θ)³ = 2√2 (3 sin θ - sin 3θ)/4 = (3/2) e_1 - (1/2) e_3.
        let expect = [1.5, 0.0, -0.5, 0.0, 0.0, 0.0];
        for (a, b) in c.coeffs().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let u = rand_field(6, BasisKind::DirichletSine, 9);
        let p = cubic_field(&u, &m).unwrap();
        let n = cubic_field(&u.scaled(-1.0), &m).unwrap();
        for (a, b) in p.coeffs().iter().zip(n.coeffs()) {
            assert_abs_diff_eq!(*a, -b, epsilon = 1e-14);
        }
        assert!(matches!(cubic_field_on_grid(&u, 23), Err(Error::GridTooCoarse { required: 24, .. })));
    }

    #[test]
    fn dealiasing_is_exact() {
        for n in [8, 16, 32] {
            let op = make_dirichlet_laplacian(n).unwrap();
            let coarse = ModelSpec::new(ModelKind::Burgers, op.clone()).unwrap();
            let fine = ModelSpec::with_grids(ModelKind::Burgers, op, 6 * n, 8 * n).unwrap();
            let u = rand_field(n, BasisKind::DirichletSine, n as u64);
            let a = burgers_nonlinearity(&u, &coarse).unwrap();
            let b = burgers_nonlinearity(&u, &fine).unwrap();
            let scale = b.dot(&b).sqrt();
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).abs() <= 1e-12 * scale.max(1.0));
            }
            let a = cubic_field(&u, &coarse).unwrap();
            let b = cubic_field(&u, &fine).unwrap();
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn burgers_orthogonality() {
        let m = burgers(32);
        for seed in 0..50 {
            let u = rand_field(32, BasisKind::DirichletSine, seed);
            let b = burgers_nonlinearity(&u, &m).unwrap();
            let scale = u.dot(&u).sqrt().powi(3);
            assert!(b.dot(&u).abs() <= 1e-10 * scale.max(1.0), "seed {seed}");
        }
    }

    #[test]
    fn elementary_inequality() {
        assert_eq!(elementary_cubic_gap(1.3, 1.3), 0.0);
        let mut s = StreamKey::new(1, 0, 0).stream(Channel::Sampling);
        for _ in 0..10_000 {
            let (a, b) = (5.0 * s.normal(), 5.0 * s.normal());
            assert!(elementary_cubic_gap(a, b) >= -1e-12 * (a.abs() + b.abs()).powi(4));
        }
    }

    #[test]
    fn lyapunov_zero_y() {
        let m = burgers(8).with_lyapunov(LyapunovConstants { coupled: 1.0, free: 1.0 });
        let y = SpectralField::zeros(8, BasisKind::DirichletSine);
        let w = rand_field(8, BasisKind::DirichletSine, 4);
        let t = lyapunov_terms(&y, &w, &m).unwrap();
        assert_eq!(t.lhs, 0.0);
        assert!(lyapunov_residual(&y, &w, &m).unwrap() <= 0.0);
        assert!(matches!(lyapunov_residual(&y, &w, &burgers(8)), Err(Error::MissingCalibration)));
    }

    #[test]
    fn lyapunov_zero_w_burgers() {
        let m = burgers(16).with_lyapunov(LyapunovConstants { coupled: 2.0, free: 3.0 });
        let y = rand_field(16, BasisKind::DirichletSine, 8);
        let w = SpectralField::zeros(16, BasisKind::DirichletSine);
        let half_sq = NormWeights::new(m.operator(), 0.5).norm_sq(y.coeffs());
        let r = lyapunov_residual(&y, &w, &m).unwrap();
        assert_abs_diff_eq!(r, -0.5 * half_sq, epsilon = 1e-10 * half_sq);
    }

    #[test]
    fn onesided_examples() {
        let m = burgers(16);
        let u = rand_field(16, BasisKind::DirichletSine, 12);
        for form in [OneSidedForm::Dissipativity, OneSidedForm::GalerkinDrift] {
            assert_eq!(onesided_residual(&u, &u, &m, form).unwrap(), 0.0);
        }
        // v = 0: ⟨B(u), u⟩ = 0 and ⟨u³, u⟩ = ∫u⁴.
        let z = SpectralField::zeros(16, BasisKind::DirichletSine);
        let r = onesided_residual(&u, &z, &m, OneSidedForm::Dissipativity).unwrap();
        let half_sq = NormWeights::new(m.operator(), 0.5).norm_sq(u.coeffs());
        let g = crate::spectral::to_physical(&u, 4096).unwrap();
        let quartic = g.iter().map(|v| v.powi(4)).sum::<f64>() / 4096.0;
        assert_abs_diff_eq!(r, -0.5 * half_sq - quartic, epsilon = 1e-9 * (half_sq + quartic));
        let tf = thinfilm(4);
        let c = SpectralField::zeros(4, BasisKind::NeumannCosineMeanzero);
        assert!(onesided_residual(&c, &c, &tf, OneSidedForm::Dissipativity).is_err());
    }

    #[test]
    fn calibration_fit_covers_samples() {
        let terms = vec![
            LyapunovTerms { lhs: 1.0, dissipation: 0.0, coupled: 1.0, free: 0.01 },
            LyapunovTerms { lhs: 1.0, dissipation: 0.0, coupled: 0.01, free: 1.0 },
            LyapunovTerms { lhs: -1.0, dissipation: 0.0, coupled: 0.0, free: 1.0 },
        ];
        let c = fit_lyapunov_constants(&terms, 1.0);
        assert!(terms.iter().all(|t| t.residual(c) <= 1e-12));
        assert!(c.coupled + c.free < 2.5);
        let inflated = fit_lyapunov_constants(&terms, 1.5);
        assert_abs_diff_eq!(inflated.coupled, 1.5 * c.coupled, epsilon = 1e-12);
    }
}
