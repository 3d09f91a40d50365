//! Exact Ornstein–Uhlenbeck simulation of stochastic convolutions, Hölder
//! quotients of the driving Brownian motions, and the pathwise bounds
//!
//! ```text
//! sup_t |W_{-λ}(t)| ≤ λ^{-δ} C_δ M(δ,T),
//! sup_t ‖W_{A-λ}(t)‖²_γ ≤ C_δ² Σ_k λ_k^{2γ} q_k (λ+λ_k)^{-2δ} M_k(δ,T)² ≤ λ^{-2ε} M_{δ,γ,ε}.
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{Channel, StreamKey};
use crate::spectral::{BasisKind, DiagonalOperatorSpec, SpectralField};

/// Paths with at most this many grid points get the exact O(n²) Hölder sup.
pub const EXACT_HOLDER_MAX_POINTS: usize = 4096;

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

/// `C_δ = Γ(δ+1) + δ^δ e^{-δ}`.
pub fn c_delta(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(libm::tgamma(delta + 1.0) + delta.powf(delta) * (-delta).exp())
}

/// `∫₀ʰ e^{-a s} ds`, continuous at `a = 0`.
pub fn decay_integral(a: f64, h: f64) -> f64 {
    if a <= 0.0 {
        h
    } else {
        -(-a * h).exp_m1() / a
    }
}

/// One exact step of `dW = -aW dt + dβ` together with its Brownian increment.
///
/// `ΔB ~ N(0, h)` is drawn first; the OU innovation is its regression on `ΔB`
/// plus an independent residual, so `(η, ΔB)` has the exact joint law with
/// `Cov(η, ΔB) = (1 - e^{-ah})/a`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledOuStep {
    pub decay: f64,
    pub sqrt_h: f64,
    pub regression: f64,
    pub residual_sd: f64,
}

impl CoupledOuStep {
    pub fn new(rate: f64, h: f64) -> Self {
        let a = rate.max(0.0);
        let c = decay_integral(a, h);
        let v = decay_integral(2.0 * a, h);
        Self {
            decay: (-a * h).exp(),
            sqrt_h: h.sqrt(),
            regression: c / h,
            residual_sd: (v - c * c / h).max(0.0).sqrt(),
        }
    }

    /// Marginal variance of one OU innovation.
    pub fn innovation_var(&self) -> f64 {
        let h = self.sqrt_h * self.sqrt_h;
        self.regression * self.regression * h + self.residual_sd * self.residual_sd
    }
}

/// A real-valued path on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch { expected: times.len(), found: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every `factor`-th point, keeping the endpoint grid aligned.
    pub fn subsample(&self, factor: usize) -> Self {
        let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        Self { times: pick(&self.times), values: pick(&self.values) }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn uniform_times(t: f64, n_steps: usize) -> Vec<f64> {
    let h = t / n_steps as f64;
    (0..=n_steps).map(|i| i as f64 * h).collect()
}

fn check_horizon(t: f64, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::NonPositive("n_steps"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositive("horizon T"));
    }
    Ok(())
}

/// Standard Brownian motion on the uniform grid of `[0, T]`, drawn from the
/// `Brownian` channel of `key`.
pub fn simulate_brownian(t: f64, n_steps: usize, key: StreamKey) -> Result<ScalarPath> {
    check_horizon(t, n_steps)?;
    let h = t / n_steps as f64;
    let sqrt_h = h.sqrt();
    let mut stream = key.stream(Channel::Brownian);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..n_steps {
        b += sqrt_h * stream.normal();
        values.push(b);
    }
    Ok(ScalarPath { times: uniform_times(t, n_steps), values })
}

/// `W_{-λ}(t) = ∫₀ᵗ e^{-λ(t-s)} dβ(s)` on the grid of `bm`, driven by the very
/// increments of `bm`. Residual Gaussians come from the `Coupled` channel.
pub fn coupled_ou(bm: &ScalarPath, rate: f64, key: StreamKey) -> Result<ScalarPath> {
    if bm.len() < 2 {
        return Err(Error::EmptyPath);
    }
    let h = bm.times[1] - bm.times[0];
    let step = CoupledOuStep::new(rate, h);
    let mut stream = key.stream(Channel::Coupled);
    let mut values = Vec::with_capacity(bm.len());
    let mut w = 0.0;
    values.push(w);
    for pair in bm.values.windows(2) {
        let db = pair[1] - pair[0];
        w = step.decay * w + step.regression * db + step.residual_sd * stream.normal();
        values.push(w);
    }
    Ok(ScalarPath { times: bm.times.clone(), values })
}

/// A scalar OU path and the Brownian motion driving it.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledOuPath {
    pub rate: f64,
    pub ou: ScalarPath,
    pub brownian: ScalarPath,
}

/// Exact grid simulation of `W_{-λ}`; `λ ≤ 0` degenerates to Brownian motion.
pub fn simulate_ou_path(lambda_total: f64, t: f64, n_steps: usize, key: StreamKey) -> Result<CoupledOuPath> {
    let brownian = simulate_brownian(t, n_steps, key)?;
    let ou = coupled_ou(&brownian, lambda_total, key)?;
    Ok(CoupledOuPath { rate: lambda_total.max(0.0), ou, brownian })
}

/// Largest increment `max_i |x_{i+s} - x_i|` for each span `s` on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct SpanProfile {
    pub h: f64,
    pub spans: Vec<usize>,
    pub max_increment: Vec<f64>,
    /// True when only dyadic spans were examined.
    pub restricted: bool,
}

/// Spans `1, 2, 3, 4, 6, 8, 12, …` (powers of two and their 3/2 neighbours)
/// plus the full span.
pub fn dyadic_spans(n_points: usize) -> Vec<usize> {
    let full = n_points.saturating_sub(1);
    let mut spans = Vec::new();
    let mut p = 1usize;
    while p <= full {
        spans.push(p);
        let mid = p + p / 2;
        if p >= 2 && mid <= full {
            spans.push(mid);
        }
        p *= 2;
    }
    if spans.last() != Some(&full) && full > 0 {
        spans.push(full);
    }
    spans.sort_unstable();
    spans.dedup();
    spans
}

fn max_increment(values: &[f64], span: usize) -> f64 {
    values.iter().zip(&values[span..]).fold(0.0, |m, (a, b)| m.max((b - a).abs()))
}

pub fn span_profile(values: &[f64], h: f64, exact_max_points: usize) -> Result<SpanProfile> {
    if values.len() < 2 {
        return Err(Error::EmptyPath);
    }
    let restricted = values.len() > exact_max_points;
    let spans: Vec<usize> =
        if restricted { dyadic_spans(values.len()) } else { (1..values.len()).collect() };
    let max_increment = spans.iter().map(|&s| max_increment(values, s)).collect();
    Ok(SpanProfile { h, spans, max_increment, restricted })
}

impl SpanProfile {
    /// `max_s D(s) / (s h)^δ`.
    pub fn quotient(&self, delta: f64) -> f64 {
        self.spans
            .iter()
            .zip(&self.max_increment)
            .fold(0.0, |m, (&s, &d)| m.max(d / (s as f64 * self.h).powf(delta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderQuotient {
    pub value: f64,
    pub restricted: bool,
}

fn is_uniform(times: &[f64]) -> Option<f64> {
    let h = times[1] - times[0];
    let ok = times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    ok.then_some(h)
}

/// `M(δ) = sup_{s<t} |x(t) - x(s)| / (t - s)^δ` over grid pairs.
pub fn holder_quotient(path: &ScalarPath, delta: f64) -> Result<HolderQuotient> {
    holder_quotient_with(path, delta, EXACT_HOLDER_MAX_POINTS)
}

pub fn holder_quotient_with(path: &ScalarPath, delta: f64, exact_max_points: usize) -> Result<HolderQuotient> {
    check_delta(delta)?;
    if path.len() < 2 {
        return Err(Error::EmptyPath);
    }
    if let Some(h) = is_uniform(&path.times) {
        let prof = span_profile(&path.values, h, exact_max_points)?;
        return Ok(HolderQuotient { value: prof.quotient(delta), restricted: prof.restricted });
    }
    let n = path.len();
    let restricted = n > exact_max_points;
    let spans: Vec<usize> = if restricted { dyadic_spans(n) } else { (1..n).collect() };
    let mut best: f64 = 0.0;
    for &s in &spans {
        for i in 0..n - s {
            let dt = path.times[i + s] - path.times[i];
            best = best.max((path.values[i + s] - path.values[i]).abs() / dt.powf(delta));
        }
    }
    Ok(HolderQuotient { value: best, restricted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathwiseBound {
    pub lhs_sup: f64,
    pub rhs_bound: f64,
    pub slack_ratio: f64,
    pub holder_restricted: bool,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Compares `sup |W_{-λ}|` with `λ^{-δ} C_δ M(δ,T)` on one coupled path.
pub fn pathwise_bound_report(ou: &ScalarPath, bm: &ScalarPath, lambda: f64, delta: f64) -> Result<PathwiseBound> {
    if ou.times != bm.times {
        return Err(Error::GridMismatch);
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositive("lambda"));
    }
    let m = holder_quotient(bm, delta)?;
    Ok(bound_from_quotient(ou.sup_abs(), lambda, delta, m))
}

/// As [`pathwise_bound_report`] with the Brownian span profile computed once
/// and shared across `(δ, λ)`.
pub fn pathwise_bound_from_profile(ou: &ScalarPath, profile: &SpanProfile, lambda: f64, delta: f64) -> Result<PathwiseBound> {
    check_delta(delta)?;
    if !(lambda > 0.0) {
        return Err(Error::NonPositive("lambda"));
    }
    let m = HolderQuotient { value: profile.quotient(delta), restricted: profile.restricted };
    Ok(bound_from_quotient(ou.sup_abs(), lambda, delta, m))
}

pub(crate) fn bound_from_quotient(lhs_sup: f64, lambda: f64, delta: f64, m: HolderQuotient) -> PathwiseBound {
    let rhs_bound = lambda.powf(-delta) * c_delta(delta).expect("checked delta") * m.value;
    PathwiseBound { lhs_sup, rhs_bound, slack_ratio: ratio(lhs_sup, rhs_bound), holder_restricted: m.restricted }
}

/// `W_{A-λ}` per mode together with the driving Brownian motions.
#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionPath {
    pub times: Vec<f64>,
    /// `values[k][i] = ⟨W_{A-λ}(t_i), e_{k+1}⟩`.
    pub values: Vec<Vec<f64>>,
    /// `brownian[k][i] = β_{k+1}(t_i)` (unit variance, before `√q_k`).
    pub brownian: Vec<Vec<f64>>,
    pub shift_lambda: f64,
    pub basis: BasisKind,
}

impl ConvolutionPath {
    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn field_at(&self, i: usize) -> Result<SpectralField> {
        if i >= self.n_times() {
            return Err(Error::IndexOutOfRange { index: i, len: self.n_times() });
        }
        Ok(SpectralField::from_coeffs_unchecked(self.values.iter().map(|v| v[i]).collect(), self.basis))
    }

    /// `sup_i ‖W(t_i)‖²_γ`.
    pub fn sup_norm_sq(&self, op: &DiagonalOperatorSpec, gamma: f64) -> f64 {
        let w: Vec<f64> = op.eigenvalues().iter().map(|l| l.powf(2.0 * gamma)).collect();
        (0..self.n_times())
            .map(|i| self.values.iter().zip(&w).map(|(v, wk)| wk * v[i] * v[i]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Independent per-mode OU paths with rates `λ + λ_k` and diffusion `√q_k`;
/// mode `k` uses stream `(seed, replica, k)`.
pub fn simulate_convolution(
    op: &DiagonalOperatorSpec,
    shift_lambda: f64,
    t: f64,
    n_steps: usize,
    seed: u64,
    replica: u64,
) -> Result<ConvolutionPath> {
    if !(shift_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("shift lambda {shift_lambda} must be nonnegative")));
    }
    check_horizon(t, n_steps)?;
    let mut values = Vec::with_capacity(op.n_modes());
    let mut brownian = Vec::with_capacity(op.n_modes());
    for (k, (&l, &q)) in op.eigenvalues().iter().zip(op.noise_weights()).enumerate() {
        let key = StreamKey::new(seed, replica, k as u64 + 1);
        let path = simulate_ou_path(shift_lambda + l, t, n_steps, key)?;
        let sq = q.sqrt();
        values.push(path.ou.values.iter().map(|v| sq * v).collect());
        brownian.push(path.brownian.values);
    }
    Ok(ConvolutionPath { times: uniform_times(t, n_steps), values, brownian, shift_lambda, basis: op.basis() })
}

/// Hölder quotients `M_k(δ,T)` of the driving Brownian motions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderRecord {
    pub delta: f64,
    pub horizon: f64,
    pub per_mode_m: Vec<f64>,
    /// `M(δ,T)` of the first driving Brownian motion.
    pub scalar_m: f64,
    pub grid_size: usize,
    pub restricted: bool,
}

impl HolderRecord {
    pub fn from_brownian(brownian: &[Vec<f64>], horizon: f64, delta: f64) -> Result<Self> {
        Self::from_brownian_with(brownian, horizon, delta, EXACT_HOLDER_MAX_POINTS)
    }

    pub fn from_brownian_with(
        brownian: &[Vec<f64>],
        horizon: f64,
        delta: f64,
        exact_max_points: usize,
    ) -> Result<Self> {
        check_delta(delta)?;
        let first = brownian.first().ok_or(Error::EmptyPath)?;
        if first.len() < 2 {
            return Err(Error::EmptyPath);
        }
        let h = horizon / (first.len() - 1) as f64;
        let mut per_mode_m = Vec::with_capacity(brownian.len());
        let mut restricted = false;
        for b in brownian {
            let prof = span_profile(b, h, exact_max_points)?;
            restricted |= prof.restricted;
            per_mode_m.push(prof.quotient(delta));
        }
        Ok(Self { delta, horizon, scalar_m: per_mode_m[0], per_mode_m, grid_size: first.len(), restricted })
    }

    pub fn for_path(path: &ConvolutionPath, delta: f64) -> Result<Self> {
        let horizon = *path.times.last().ok_or(Error::EmptyPath)?;
        Self::from_brownian(&path.brownian, horizon, delta)
    }
}

/// `M_{δ,γ,ε} = C_δ² Σ_k λ_k^{-2(δ-γ-ε)} q_k M_k(δ,T)²`.
pub fn m_random(op: &DiagonalOperatorSpec, gamma: f64, epsilon: f64, holder: &HolderRecord) -> Result<f64> {
    if holder.per_mode_m.len() < op.n_modes() {
        return Err(Error::MissingHolder(holder.per_mode_m.len() + 1));
    }
    let c = c_delta(holder.delta)?;
    let e = -2.0 * (holder.delta - gamma - epsilon);
    let s: f64 = op
        .eigenvalues()
        .iter()
        .zip(op.noise_weights())
        .zip(&holder.per_mode_m)
        .map(|((l, q), m)| l.powf(e) * q * m * m)
        .sum();
    Ok(c * c * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionBound {
    pub lhs_sup_sq: f64,
    /// `C_δ² Σ λ_k^{2γ} q_k (λ+λ_k)^{-2δ} M_k²`.
    pub sharp_rhs: f64,
    pub m_random: f64,
    /// `λ^{-2ε} M_{δ,γ,ε}`.
    pub rhs: f64,
    pub slack_ratio: f64,
    pub holder_restricted: bool,
}

pub fn convolution_bound_report(
    path: &ConvolutionPath,
    op: &DiagonalOperatorSpec,
    gamma: f64,
    epsilon: f64,
    holder: &HolderRecord,
) -> Result<ConvolutionBound> {
    if path.n_modes() != op.n_modes() {
        return Err(Error::LengthMismatch { expected: op.n_modes(), found: path.n_modes() });
    }
    if holder.per_mode_m.len() < path.n_modes() {
        return Err(Error::MissingHolder(holder.per_mode_m.len() + 1));
    }
    let delta = holder.delta;
    let c = c_delta(delta)?;
    let lam = path.shift_lambda;
    let lhs_sup_sq = path.sup_norm_sq(op, gamma);
    let sharp_rhs = c
        * c
        * op.eigenvalues()
            .iter()
            .zip(op.noise_weights())
            .zip(&holder.per_mode_m)
            .map(|((&l, &q), &m)| l.powf(2.0 * gamma) * q * (lam + l).powf(-2.0 * delta) * m * m)
            .sum::<f64>();
    let m_random = m_random(op, gamma, epsilon, holder)?;
    let rhs = if lam > 0.0 { lam.powf(-2.0 * epsilon) * m_random } else { f64::INFINITY };
    Ok(ConvolutionBound {
        lhs_sup_sq,
        sharp_rhs,
        m_random,
        rhs,
        slack_ratio: ratio(lhs_sup_sq, rhs),
        holder_restricted: holder.restricted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{map_indexed, Execution};
    use crate::spectral::{hs_decay_integral, make_dirichlet_laplacian, make_noise_weights, NoiseKind};
    use approx::assert_relative_eq;

    #[test]
    fn c_delta_values() {
        let c = c_delta(1e-8).unwrap();
        assert!(c > 1.999 && c < 2.001);
        // Γ(1.25) = 0.9064024770554771
        let expect = 0.906_402_477_055_477 + 0.25f64.powf(0.25) * (-0.25f64).exp();
        assert_relative_eq!(c_delta(0.25).unwrap(), expect, max_relative = 1e-12);
        assert_relative_eq!(c_delta(0.25).unwrap(), 1.4571, epsilon = 1e-4);
        // Γ(1.4) = 0.8872638175030753
        let expect = 0.887_263_817_503_075_3 + 0.4f64.powf(0.4) * (-0.4f64).exp();
        assert_relative_eq!(c_delta(0.4).unwrap(), expect, max_relative = 1e-12);
        for bad in [0.0, 0.5, -0.1, 0.7] {
            assert!(matches!(c_delta(bad), Err(Error::DeltaOutOfRange(_))));
        }
    }

    #[test]
    fn holder_examples() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let flat = ScalarPath::new(times.clone(), vec![2.5; 101]).unwrap();
        assert_eq!(holder_quotient(&flat, 0.3).unwrap().value, 0.0);

        let linear = ScalarPath::new(times.clone(), times.clone()).unwrap();
        assert_relative_eq!(holder_quotient(&linear, 0.3).unwrap().value, 1.0, epsilon = 1e-12);

        let h = 0.01;
        let two = ScalarPath::new(vec![0.0, h], vec![0.0, -0.7]).unwrap();
        assert_relative_eq!(holder_quotient(&two, 0.25).unwrap().value, 0.7 / h.powf(0.25), max_relative = 1e-14);

        let one = ScalarPath::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(holder_quotient(&one, 0.25), Err(Error::EmptyPath)));
    }

    #[test]
    fn holder_nonuniform_matches_brute_force() {
        let times: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.3) * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| (7.0 * t).sin() + t).collect();
        let p = ScalarPath::new(times.clone(), values.clone()).unwrap();
        let mut best: f64 = 0.0;
        for i in 0..40 {
            for j in i + 1..40 {
                best = best.max((values[j] - values[i]).abs() / (times[j] - times[i]).powf(0.2));
            }
        }
        assert_relative_eq!(holder_quotient(&p, 0.2).unwrap().value, best, max_relative = 1e-14);
    }

    #[test]
    fn dyadic_restriction_is_flagged_and_lower() {
        let bm = simulate_brownian(1.0, 1 << 11, StreamKey::new(3, 0, 0)).unwrap();
        let exact = holder_quotient_with(&bm, 0.25, usize::MAX).unwrap();
        let dy = holder_quotient_with(&bm, 0.25, 16).unwrap();
        assert!(!exact.restricted && dy.restricted);
        assert!(dy.value <= exact.value);
        assert!(dy.value >= 0.8 * exact.value);
    }

    #[test]
    fn dyadic_spans_shape() {
        assert_eq!(dyadic_spans(18), vec![1, 2, 3, 4, 6, 8, 12, 16, 17]);
        assert_eq!(dyadic_spans(2), vec![1]);
    }

    #[test]
    fn ou_brownian_limit() {
        let n = 20_000;
        let t = 1.5;
        let ends: Vec<f64> = map_indexed(Execution::default(), n, |r| {
            let p = simulate_ou_path(0.0, t, 4, StreamKey::new(11, r as u64, 0)).unwrap();
            assert_eq!(p.ou.values, p.brownian.values);
            *p.ou.values.last().unwrap()
        });
        let var = ends.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let se = t * (2.0 / n as f64).sqrt();
        assert!((var - t).abs() < 4.0 * se, "var {var}");
    }

    #[test]
    fn ou_stationary_variance() {
        let n = 100_000;
        let sq: Vec<f64> = map_indexed(Execution::default(), n, |r| {
            let p = simulate_ou_path(1.0, 20.0, 8, StreamKey::new(5, r as u64, 0)).unwrap();
            p.ou.values.last().unwrap().powi(2)
        });
        let mean = sq.iter().sum::<f64>() / n as f64;
        let sd = (sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let target = 0.5 * (1.0 - (-40.0f64).exp());
        assert!((mean - target).abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ou_coupling_covariance() {
        // Cov(W(h), β(h)) = (1 - e^{-λh})/λ after a single step.
        let (lam, h, n) = (3.0, 0.5, 100_000);
        let pairs: Vec<(f64, f64)> = map_indexed(Execution::default(), n, |r| {
            let p = simulate_ou_path(lam, h, 1, StreamKey::new(9, r as u64, 0)).unwrap();
            (p.ou.values[1], p.brownian.values[1])
        });
        let mean_w = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        assert!(mean_w.abs() < 4.0 * (0.16f64 / n as f64).sqrt());
        let cov = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / n as f64;
        let target = (1.0 - (-lam * h).exp()) / lam;
        assert!((cov - target).abs() < 0.01, "cov {cov} vs {target}");
    }

    #[test]
    fn zero_noise_bound() {
        let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let z = ScalarPath::new(times.clone(), vec![0.0; 9]).unwrap();
        let r = pathwise_bound_report(&z, &z, 2.0, 0.25).unwrap();
        assert_eq!((r.lhs_sup, r.slack_ratio), (0.0, 0.0));
        let other = ScalarPath::new(times.iter().map(|t| 2.0 * t).collect(), vec![0.0; 9]).unwrap();
        assert!(matches!(pathwise_bound_report(&z, &other, 2.0, 0.25), Err(Error::GridMismatch)));
    }

    #[test]
    fn rhs_decreases_in_lambda() {
        let key = StreamKey::new(21, 0, 0);
        let bm = simulate_brownian(1.0, 1024, key).unwrap();
        let mut last = f64::INFINITY;
        for lam in [0.5, 1.0, 10.0, 100.0, 1000.0] {
            let ou = coupled_ou(&bm, lam, key).unwrap();
            let r = pathwise_bound_report(&ou, &bm, lam, 0.3).unwrap();
            assert!(r.rhs_bound < last);
            assert!(r.slack_ratio <= 1.02);
            last = r.rhs_bound;
        }
    }

    fn burgers(n: usize, g0: f64) -> DiagonalOperatorSpec {
        make_noise_weights(&make_dirichlet_laplacian(n).unwrap(), NoiseKind::PowerLaw(g0)).unwrap()
    }

    #[test]
    fn zero_noise_convolution() {
        let op = make_noise_weights(&make_dirichlet_laplacian(4).unwrap(), NoiseKind::Explicit(vec![0.0; 4])).unwrap();
        let p = simulate_convolution(&op, 1.0, 1.0, 64, 1, 0).unwrap();
        assert!(p.values.iter().flatten().all(|&v| v == 0.0));
        let h = HolderRecord::for_path(&p, 0.3).unwrap();
        let r = convolution_bound_report(&p, &op, 0.1, 0.05, &h).unwrap();
        assert_eq!(r.lhs_sup_sq, 0.0);
        assert_eq!(r.m_random, 0.0);
        assert_eq!(r.slack_ratio, 0.0);
    }

    #[test]
    fn single_mode_reduces_to_scalar() {
        let op = burgers(1, 0.2);
        let (lam, seed, rep) = (5.0, 4, 2);
        let p = simulate_convolution(&op, lam, 1.0, 256, seed, rep).unwrap();
        let scalar = simulate_ou_path(lam + op.eigenvalues()[0], 1.0, 256, StreamKey::new(seed, rep, 1)).unwrap();
        let q = op.noise_weights()[0];
        for (a, b) in p.values[0].iter().zip(&scalar.ou.values) {
            assert_relative_eq!(*a, q.sqrt() * b, max_relative = 1e-15);
        }
        let (g, d) = (0.1, 0.3);
        let hr = HolderRecord::for_path(&p, d).unwrap();
        let r = convolution_bound_report(&p, &op, g, 0.05, &hr).unwrap();
        let s = pathwise_bound_report(&scalar.ou, &scalar.brownian, lam + op.eigenvalues()[0], d).unwrap();
        let l1 = op.eigenvalues()[0];
        let w = l1.powf(2.0 * g) * q;
        assert_relative_eq!(r.lhs_sup_sq, w * s.lhs_sup * s.lhs_sup, max_relative = 1e-12);
        assert_relative_eq!(r.sharp_rhs, w * s.rhs_bound * s.rhs_bound, max_relative = 1e-12);
    }

    #[test]
    fn convolution_second_moment_matches_closed_form() {
        // With λ = 0 the stationary E‖W_A‖²_γ is the HS decay integral.
        let op = burgers(4, 0.2);
        let gamma = 0.1;
        let n = 20_000;
        let t = 2.0; // e^{-2λ_1 T} ≈ 1e-17
        let vals: Vec<f64> = map_indexed(Execution::default(), n, |r| {
            let p = simulate_convolution(&op, 0.0, t, 4, 77, r as u64).unwrap();
            let f = p.field_at(p.n_times() - 1).unwrap();
            crate::spectral::fractional_norm(&f, gamma, &op).unwrap().powi(2)
        });
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let target = hs_decay_integral(&op, gamma).unwrap().value().unwrap();
        assert!((mean - target).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {target}");
    }
}
