//! Exponential-Euler integration of the spectral Galerkin system
//! `dX = (AX + B(X)) dt + √Q dβ`, optionally split as `X = Y_λ + W_{A-λ}`,
//! with the shift selection rule and the trajectory-level check of the
//! differential inequality for `Ψ(‖Y_λ‖²)`.
//!
//! Per mode and step the scheme draws `(ΔB, Z_a, Z_b)` jointly, where
//! `Z_c = ∫ e^{-c(h-r)} dB(r)`, `a = λ_k` and `b = λ + λ_k`. Then
//!
//! * `X ← e^{-ah} X + φ_a(h) B(X) + √q_k Z_a`,
//! * `W ← e^{-bh} W + √q_k Z_b`,
//! * `Y ← e^{-ah} Y + (e^{-ah} - e^{-bh}) W + √q_k (Z_a - Z_b) + φ_a(h) B(Y + W)`.
//!
//! The `Y` update integrates the forcing `λW` exactly, so `Y + W` is the same
//! recursion as `X` and the split holds to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec, Workspace};
use crate::rng::{Channel, GaussianStream, StreamKey};
use crate::spectral::{BasisKind, DiagonalOperatorSpec, NormWeights, SpectralField};
use crate::stoch_conv::{c_delta, check_delta, decay_integral, m_random, span_profile, ConvolutionPath, HolderRecord, EXACT_HOLDER_MAX_POINTS};

/// Constants of the structural condition and the shift `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RLambdaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Exponent on `‖w‖_{γ₂}` in the term multiplying `‖y‖²_{γ₁}`.
    pub s_y: f64,
    /// Exponent on the free `‖w‖_{γ₂}` term.
    pub s_free: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

pub const DEFAULT_STRUCTURAL_DELTA: f64 = 1e-2;
pub const DEFAULT_EPSILON: f64 = 0.1;

impl RLambdaParams {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.alpha, "alpha"),
            (self.beta, "beta"),
            (self.gamma, "gamma"),
            (self.delta, "delta"),
            (self.epsilon, "epsilon"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.s_y >= 2.0 && self.s_free >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "exponents s_y = {}, s_free = {} must be at least 2",
                self.s_y, self.s_free
            )));
        }
        // No ordering between γ₁ and γ₂ is imposed: the Burgers reading has
        // γ₁ = ½ > γ₂ = ⅛, and ‖w‖_{-γ₁} ≤ ‖w‖_{γ₂} holds regardless.
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma1 = {} and gamma2 = {} must be nonnegative",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {} must be nonnegative", self.lambda)));
        }
        Ok(())
    }

    /// Reads the calibrated model inequality in structural form.
    ///
    /// Burgers: `α = ½`, `γ₁ = ½`, `γ₂ = ⅛`, `s_y = 2`, `s_free = 4`.
    /// Thin film: `α = ¼`, `γ₁ = ½`, `γ₂ = 5/16`, `s_y = 8`, `s_free = 2`;
    /// the `‖y‖²` factor is bounded by `‖y‖²_{1/2}/λ_1`.
    pub fn from_model(m: &ModelSpec, delta: f64, epsilon: f64) -> Result<Self> {
        let c = m.lyapunov().ok_or(Error::MissingCalibration)?;
        let p = match m.kind() {
            ModelKind::Burgers => Self {
                alpha: 0.5,
                beta: c.coupled,
                gamma: c.free,
                delta,
                s_y: 2.0,
                s_free: 4.0,
                gamma1: 0.5,
                gamma2: 0.125,
                epsilon,
                lambda: 0.0,
            },
            ModelKind::Thinfilm => Self {
                alpha: 0.25,
                beta: c.coupled / m.operator().omega(),
                gamma: c.free,
                delta,
                s_y: 8.0,
                s_free: 2.0,
                gamma1: 0.5,
                gamma2: 5.0 / 16.0,
                epsilon,
                lambda: 0.0,
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// `λ = ((4/α)(β M_T + 1))^{1/(εs)}`, so that `λ^{-εs} β M_T ≤ α/4`.
pub fn lambda_rule(alpha: f64, beta: f64, epsilon: f64, s: f64, m_t: f64) -> Result<f64> {
    for (v, name) in [(alpha, "alpha"), (epsilon, "epsilon"), (s, "s")] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive(name));
        }
    }
    if !(beta >= 0.0) || !(m_t >= 0.0) || !m_t.is_finite() {
        return Err(Error::InvalidParameter(format!("beta = {beta}, M_T = {m_t} must be nonnegative")));
    }
    let lambda = ((4.0 / alpha) * (beta * m_t + 1.0)).powf(1.0 / (epsilon * s));
    if !lambda.is_finite() {
        return Err(Error::NonFinite("shift lambda"));
    }
    debug_assert!(lambda.powf(-epsilon * s) * beta * m_t <= (alpha / 4.0) * (1.0 + 1e-12));
    Ok(lambda)
}

/// `R_λ` for one snapshot of `W`.
pub fn r_lambda_coeffs(w: &[f64], op: &DiagonalOperatorSpec, p: &RLambdaParams) -> f64 {
    let g2 = NormWeights::new(op, p.gamma2).norm(w);
    let neg = NormWeights::new(op, -p.gamma1).norm_sq(w);
    p.delta + p.gamma * g2.powf(p.s_free) + p.lambda * p.lambda / (2.0 * p.alpha) * neg
}

/// `R_λ(t) = δ + γ‖W(t)‖^{s_free}_{γ₂} + (λ²/2α)‖W(t)‖²_{-γ₁}`.
pub fn r_lambda(t_index: usize, w: &ConvolutionPath, op: &DiagonalOperatorSpec, p: &RLambdaParams) -> Result<f64> {
    if t_index >= w.n_times() {
        return Err(Error::IndexOutOfRange { index: t_index, len: w.n_times() });
    }
    if w.n_modes() != op.n_modes() {
        return Err(Error::LengthMismatch { expected: op.n_modes(), found: w.n_modes() });
    }
    let coeffs: Vec<f64> = w.values.iter().map(|m| m[t_index]).collect();
    Ok(r_lambda_coeffs(&coeffs, op, p))
}

/// Lower-triangular factor of `Cov(ΔB, Z_a, Z_b)`, row-major.
fn joint_factor(a: f64, b: f64, h: f64) -> [f64; 6] {
    let cov = [
        [h, decay_integral(a, h), decay_integral(b, h)],
        [decay_integral(a, h), decay_integral(2.0 * a, h), decay_integral(a + b, h)],
        [decay_integral(b, h), decay_integral(a + b, h), decay_integral(2.0 * b, h)],
    ];
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (cov[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 1e-300 {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    [l[0][0], l[1][0], l[1][1], l[2][0], l[2][1], l[2][2]]
}

#[derive(Debug, Clone, Copy)]
struct ModeStep {
    decay_a: f64,
    decay_b: f64,
    phi_a: f64,
    sqrt_q: f64,
    factor: [f64; 6],
}

/// Per-mode random streams: `ΔB` first from the Brownian channel, then the
/// two residuals from the Coupled and State channels.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    brownian: Vec<GaussianStream>,
    coupled: Vec<GaussianStream>,
    shifted: Vec<GaussianStream>,
}

impl NoiseStreams {
    /// Mode `k` (1-based) uses key `(seed, replica, k)`, matching the
    /// stochastic-convolution sampler.
    pub fn new(seed: u64, replica: u64, n_modes: usize) -> Self {
        let key = |k: usize| StreamKey::new(seed, replica, k as u64 + 1);
        Self {
            brownian: (0..n_modes).map(|k| key(k).stream(Channel::Brownian)).collect(),
            coupled: (0..n_modes).map(|k| key(k).stream(Channel::Coupled)).collect(),
            shifted: (0..n_modes).map(|k| key(k).stream(Channel::State)).collect(),
        }
    }
}

/// Precomputed exponential-Euler step for a fixed model, `dt` and shift.
#[derive(Debug, Clone)]
pub struct Stepper<'m> {
    model: &'m ModelSpec,
    dt: f64,
    shift: Option<f64>,
    modes: Vec<ModeStep>,
    ws: Workspace,
    drift: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m ModelSpec, dt: f64, shift: Option<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositive("dt"));
        }
        if let Some(l) = shift {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidParameter(format!("shift lambda {l} must be nonnegative")));
            }
        }
        let op = model.operator();
        let modes = op
            .eigenvalues()
            .iter()
            .zip(op.noise_weights())
            .map(|(&a, &q)| {
                let b = a + shift.unwrap_or(0.0);
                ModeStep {
                    decay_a: (-a * dt).exp(),
                    decay_b: (-b * dt).exp(),
                    phi_a: decay_integral(a, dt),
                    sqrt_q: q.sqrt(),
                    factor: joint_factor(a, b, dt),
                }
            })
            .collect();
        Ok(Self { model, dt, shift, modes, ws: model.workspace(), drift: vec![0.0; op.n_modes()] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `x` by one step; `w` is advanced too when the stepper has a
    /// shift, and `y` is then `x - w`.
    pub fn advance(&mut self, x: &mut [f64], w: Option<&mut [f64]>, streams: &mut NoiseStreams) {
        self.model.drift_nonlinearity_into(x, &mut self.drift, &mut self.ws);
        match (self.shift, w) {
            (Some(_), Some(w)) => {
                for (k, m) in self.modes.iter().enumerate() {
                    let g1 = streams.brownian[k].normal();
                    let g2 = streams.coupled[k].normal();
                    let g3 = streams.shifted[k].normal();
                    let f = &m.factor;
                    let za = f[1] * g1 + f[2] * g2;
                    let zb = f[3] * g1 + f[4] * g2 + f[5] * g3;
                    x[k] = m.decay_a * x[k] + m.phi_a * self.drift[k] + m.sqrt_q * za;
                    w[k] = m.decay_b * w[k] + m.sqrt_q * zb;
                }
            }
            _ => {
                for (k, m) in self.modes.iter().enumerate() {
                    let g1 = streams.brownian[k].normal();
                    let g2 = streams.coupled[k].normal();
                    let za = m.factor[1] * g1 + m.factor[2] * g2;
                    x[k] = m.decay_a * x[k] + m.phi_a * self.drift[k] + m.sqrt_q * za;
                }
            }
        }
    }
}

/// One exponential-Euler step of the full equation.
pub fn step(x: &SpectralField, dt: f64, m: &ModelSpec, streams: &mut NoiseStreams) -> Result<SpectralField> {
    m.operator().check_field(x)?;
    let mut s = Stepper::new(m, dt, None)?;
    let mut c = x.coeffs().to_vec();
    s.advance(&mut c, None, streams);
    SpectralField::from_coeffs(c, x.basis())
}

pub const DEFAULT_GUARD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Discarded initial segment; `None` means a quarter of `t_final`.
    pub burn_in: Option<f64>,
    pub stride: usize,
    /// Shift `λ` of the split `X = Y_λ + W_{A-λ}`; `None` disables it.
    pub decomposition: Option<f64>,
    pub seed: u64,
    pub replica: u64,
    pub x0: Option<Vec<f64>>,
    /// Integration aborts once `‖X‖₀` exceeds this.
    pub guard: f64,
}

impl TrajectoryConfig {
    pub fn new(t_final: f64, dt: f64, seed: u64) -> Self {
        Self { t_final, dt, burn_in: None, stride: 1, decomposition: None, seed, replica: 0, x0: None, guard: DEFAULT_GUARD }
    }

    pub fn burn_in_time(&self) -> f64 {
        self.burn_in.unwrap_or(0.25 * self.t_final)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::NonPositive("dt"));
        }
        let b = self.burn_in_time();
        if !(self.t_final > b) || !(b >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need T = {} > burn_in = {} >= 0",
                self.t_final, b
            )));
        }
        if self.n_steps() == 0 {
            return Err(Error::InvalidParameter("T / dt rounds to zero steps".into()));
        }
        if self.stride == 0 {
            return Err(Error::NonPositive("stride"));
        }
        if !(self.guard > 0.0) {
            return Err(Error::NonPositive("guard"));
        }
        Ok(())
    }
}

/// Norms cached per retained snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormCache {
    pub l2: f64,
    pub half: f64,
    /// `‖X‖_{γ₂}` with the model's `γ₂` (`⅛` Burgers, `5/16` thin film).
    pub gamma2: f64,
}

pub fn model_gamma2(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Burgers => 0.125,
        ModelKind::Thinfilm => 5.0 / 16.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub n_modes: usize,
    pub basis: BasisKind,
    x: Vec<f64>,
    y: Option<Vec<f64>>,
    w: Option<Vec<f64>>,
    pub norms: Vec<NormCache>,
    pub seed: u64,
    pub replica: u64,
    pub dt: f64,
    pub shift_lambda: Option<f64>,
}

struct NormSet {
    l2: NormWeights,
    half: NormWeights,
    g2: NormWeights,
}

impl NormSet {
    fn new(m: &ModelSpec) -> Self {
        let op = m.operator();
        Self {
            l2: NormWeights::new(op, 0.0),
            half: NormWeights::new(op, 0.5),
            g2: NormWeights::new(op, model_gamma2(m.kind())),
        }
    }

    fn cache(&self, x: &[f64]) -> NormCache {
        NormCache { l2: self.l2.norm(x), half: self.half.norm(x), gamma2: self.g2.norm(x) }
    }
}

impl TrajectoryRecord {
    /// A record from explicit snapshots (no split data).
    pub fn from_snapshots(times: Vec<f64>, snapshots: &[SpectralField], m: &ModelSpec) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::LengthMismatch { expected: times.len(), found: snapshots.len() });
        }
        if times.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidParameter("snapshot times must be strictly increasing".into()));
        }
        let norms = NormSet::new(m);
        let mut x = Vec::with_capacity(snapshots.len() * m.n_modes());
        let mut cache = Vec::with_capacity(snapshots.len());
        for s in snapshots {
            m.operator().check_field(s)?;
            x.extend_from_slice(s.coeffs());
            cache.push(norms.cache(s.coeffs()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self {
            times,
            n_modes: m.n_modes(),
            basis: m.basis(),
            x,
            y: None,
            w: None,
            norms: cache,
            seed: 0,
            replica: 0,
            dt,
            shift_lambda: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_decomposition(&self) -> bool {
        self.y.is_some()
    }

    pub fn x_at(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn y_at(&self, i: usize) -> Option<&[f64]> {
        self.y.as_ref().map(|y| &y[i * self.n_modes..(i + 1) * self.n_modes])
    }

    pub fn w_at(&self, i: usize) -> Option<&[f64]> {
        self.w.as_ref().map(|w| &w[i * self.n_modes..(i + 1) * self.n_modes])
    }

    pub fn field_at(&self, i: usize) -> Result<SpectralField> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        SpectralField::from_coeffs(self.x_at(i).to_vec(), self.basis)
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_modes)
    }

    /// `max_t ‖X - (Y + W)‖₀`, or `None` without split data.
    pub fn decomposition_defect(&self) -> Option<f64> {
        let (y, w) = (self.y.as_ref()?, self.w.as_ref()?);
        let mut worst = 0.0f64;
        for ((xs, ys), ws) in self.x.chunks_exact(self.n_modes).zip(y.chunks_exact(self.n_modes)).zip(w.chunks_exact(self.n_modes)) {
            let d: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| (x - y - w).powi(2)).sum();
            worst = worst.max(d.sqrt());
        }
        Some(worst)
    }
}

/// Integrates from `X₀` (zero by default), discards the burn-in and keeps
/// every `stride`-th state. Deterministic in `(seed, replica)`.
pub fn simulate_trajectory(m: &ModelSpec, config: &TrajectoryConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let n = m.n_modes();
    let mut x = match &config.x0 {
        Some(v) => SpectralField::from_coeffs(v.clone(), m.basis()).and_then(|f| {
            m.operator().check_field(&f)?;
            Ok(f.into_coeffs())
        })?,
        None => vec![0.0; n],
    };
    let mut stepper = Stepper::new(m, config.dt, config.decomposition)?;
    let mut streams = NoiseStreams::new(config.seed, config.replica, n);
    let split = config.decomposition.is_some();
    let mut w = vec![0.0; n];
    let norms = NormSet::new(m);
    let n_steps = config.n_steps();
    let first = (config.burn_in_time() / config.dt).round() as usize;
    let kept = (n_steps.saturating_sub(first)) / config.stride + 1;
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(kept),
        n_modes: n,
        basis: m.basis(),
        x: Vec::with_capacity(kept * n),
        y: split.then(|| Vec::with_capacity(kept * n)),
        w: split.then(|| Vec::with_capacity(kept * n)),
        norms: Vec::with_capacity(kept),
        seed: config.seed,
        replica: config.replica,
        dt: config.dt,
        shift_lambda: config.decomposition,
    };
    for i in 0..=n_steps {
        if i > 0 {
            stepper.advance(&mut x, split.then_some(&mut w[..]), &mut streams);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm <= config.guard) {
                return Err(Error::BlowUp { time: i as f64 * config.dt, norm, guard: config.guard });
            }
        }
        if i >= first && (i - first).is_multiple_of(config.stride) {
            rec.times.push(i as f64 * config.dt);
            rec.x.extend_from_slice(&x);
            rec.norms.push(norms.cache(&x));
            if let (Some(ys), Some(ws)) = (rec.y.as_mut(), rec.w.as_mut()) {
                ys.extend(x.iter().zip(&w).map(|(x, w)| x - w));
                ws.extend_from_slice(&w);
            }
        }
    }
    Ok(rec)
}

/// Positive increasing test functions applied to `‖Y‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Identity,
    /// `(1 + t)^{p/2}`.
    OnePlusPower { p: f64 },
}

impl Psi {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Psi::Identity => t,
            Psi::OnePlusPower { p } => (1.0 + t).powf(0.5 * p),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Psi::Identity => 1.0,
            Psi::OnePlusPower { p } => 0.5 * p * (1.0 + t).powf(0.5 * p - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialInequalityReport {
    pub psi: Psi,
    pub lambda: f64,
    pub tolerance: f64,
    /// Step residuals divided by `Ψ′(‖Y(t_n)‖²)`.
    pub residuals: Vec<f64>,
    pub violations: usize,
    pub violation_fraction: f64,
    pub max_residual: f64,
}

/// Residuals `[Ψ(‖Y_{n+1}‖²) - Ψ(‖Y_n‖²)] / (2Δt Ψ′) + (α/4)‖Y_n‖²_{γ₁} - R_λ(t_n)`
/// counted against `τ = c·√Δt`.
pub fn differential_inequality_report(
    traj: &TrajectoryRecord,
    op: &DiagonalOperatorSpec,
    p: &RLambdaParams,
    psi: Psi,
    tolerance_constant: f64,
) -> Result<DifferentialInequalityReport> {
    p.validate()?;
    if !traj.has_decomposition() {
        return Err(Error::MissingDecomposition);
    }
    if traj.len() < 2 {
        return Err(Error::EmptyPath);
    }
    if traj.n_modes != op.n_modes() {
        return Err(Error::LengthMismatch { expected: op.n_modes(), found: traj.n_modes });
    }
    let l2 = NormWeights::new(op, 0.0);
    let g1 = NormWeights::new(op, p.gamma1);
    let mut residuals = Vec::with_capacity(traj.len() - 1);
    let mut dtmax = 0.0f64;
    for i in 0..traj.len() - 1 {
        let (y0, y1) = (traj.y_at(i).unwrap_or_default(), traj.y_at(i + 1).unwrap_or_default());
        let w0 = traj.w_at(i).unwrap_or_default();
        let dt = traj.times[i + 1] - traj.times[i];
        dtmax = dtmax.max(dt);
        let (n0, n1) = (l2.norm_sq(y0), l2.norm_sq(y1));
        let quotient = (psi.value(n1) - psi.value(n0)) / (2.0 * dt * psi.derivative(n0));
        residuals.push(quotient + 0.25 * p.alpha * g1.norm_sq(y0) - r_lambda_coeffs(w0, op, p));
    }
    let tolerance = tolerance_constant * dtmax.sqrt();
    let violations = residuals.iter().filter(|&&r| r > tolerance).count();
    Ok(DifferentialInequalityReport {
        psi,
        lambda: p.lambda,
        tolerance,
        violation_fraction: violations as f64 / residuals.len() as f64,
        max_residual: residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        residuals,
        violations,
    })
}

/// Output of the shift-selection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionRun {
    pub params: RLambdaParams,
    pub holder_delta: f64,
    pub m_random: f64,
    pub m_t: f64,
    pub trajectory: TrajectoryRecord,
}

/// Pilot pass over the driving Brownian motions for `M_k(δ,T)`, then
/// `M_T = M_{δ,γ₂,ε}^{s_y/2}`, `λ` by [`lambda_rule`], then the split run.
pub fn decomposition_pipeline(
    m: &ModelSpec,
    base: RLambdaParams,
    holder_delta: f64,
    config: &TrajectoryConfig,
) -> Result<DecompositionRun> {
    base.validate()?;
    check_delta(holder_delta)?;
    c_delta(holder_delta)?;
    config.validate()?;
    let n_steps = config.n_steps();
    let h = config.dt;
    let mut per_mode_m = Vec::with_capacity(m.n_modes());
    let mut restricted = false;
    let mut path = Vec::with_capacity(n_steps + 1);
    for k in 0..m.n_modes() {
        let mut s = StreamKey::new(config.seed, config.replica, k as u64 + 1).stream(Channel::Brownian);
        let sqrt_h = h.sqrt();
        path.clear();
        let mut b = 0.0;
        path.push(b);
        for _ in 0..n_steps {
            b += sqrt_h * s.normal();
            path.push(b);
        }
        let prof = span_profile(&path, h, EXACT_HOLDER_MAX_POINTS)?;
        restricted |= prof.restricted;
        per_mode_m.push(prof.quotient(holder_delta));
    }
    let holder = HolderRecord {
        delta: holder_delta,
        horizon: n_steps as f64 * h,
        scalar_m: per_mode_m[0],
        per_mode_m,
        grid_size: n_steps + 1,
        restricted,
    };
    let mr = m_random(m.operator(), base.gamma2, base.epsilon, &holder)?;
    let m_t = mr.powf(0.5 * base.s_y);
    let lambda = lambda_rule(base.alpha, base.beta, base.epsilon, base.s_y, m_t)?;
    let params = base.with_lambda(lambda);
    let cfg = TrajectoryConfig { decomposition: Some(lambda), ..config.clone() };
    let trajectory = simulate_trajectory(m, &cfg)?;
    Ok(DecompositionRun { params, holder_delta, m_random: mr, m_t, trajectory })
}
