//! Spectral series `Σ_k q_k λ_k^e` over the full (untruncated) spectrum.
//!
//! Past the materialized modes the summand is continued through the
//! operator's analytic law and bracketed between `c_lo·k^{-p}` and
//! `c_hi·k^{-p}`; the integral test then brackets the remaining tail.

use std::f64::consts::PI;

use serde::Serialize;

use super::{DiagonalOperatorSpec, NoiseLaw, SpectrumLaw};
use crate::error::{Error, Result};

/// Largest mode index the series engine is willing to sum up to.
pub const DEFAULT_MODE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SeriesOutcome {
    /// `value` is accurate to `±tail_bound`; `terms` were summed explicitly.
    Finite { value: f64, tail_bound: f64, terms: u64 },
    /// The summand decays like `k^{-p}` with `p = decay_exponent ≤ 1`, or
    /// too slowly to meet the tolerance within the mode cap.
    Divergent { decay_exponent: f64 },
}

impl SeriesOutcome {
    pub fn value(&self) -> Option<f64> {
        match *self {
            SeriesOutcome::Finite { value, .. } => Some(value),
            SeriesOutcome::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, SeriesOutcome::Divergent { .. })
    }
}

/// Power-law envelope of `q(k) λ(k)^e` for `k` past the materialized modes.
#[derive(Debug, Clone, Copy)]
struct Envelope {
    p: f64,
    c_hi: f64,
    // λ(k)^E ≥ coef^E k^{-p} (1 + corr/k²)^E; only the thin-film law has corr > 0.
    corr: f64,
    c_base_lo: f64,
    exponent: f64,
    // Explicit weights beyond the truncation are only known through ‖q‖_∞.
    known_terms: bool,
}

impl Envelope {
    fn c_lo(&self, k: f64) -> f64 {
        self.c_base_lo * (1.0 + self.corr / (k * k)).powf(self.exponent)
    }

    /// Bracket for `Σ_{j>k} f(j)`.
    fn tail(&self, k: u64) -> (f64, f64) {
        let k = k as f64;
        let q = self.p - 1.0;
        let lo = if self.known_terms { self.c_lo(k + 1.0) * (k + 1.0).powf(-q) / q } else { 0.0 };
        let hi = self.c_hi * k.powf(-q) / q;
        (lo, hi)
    }
}

enum Continuation {
    None,
    Divergent(f64),
    Envelope(Envelope),
}

fn continuation(op: &DiagonalOperatorSpec, lambda_exp: f64) -> Continuation {
    let (growth, coef, corr) = match op.spectrum_law() {
        SpectrumLaw::DirichletLaplacian => (2.0, PI * PI, 0.0),
        SpectrumLaw::ThinFilm { nu } => (4.0, 16.0 * PI.powi(4), nu / (4.0 * PI * PI)),
        SpectrumLaw::Explicit => return Continuation::None,
    };
    let (exponent, q_hi, q_lo, known_terms) = match op.noise_law() {
        NoiseLaw::Unit => (lambda_exp, 1.0, 1.0, true),
        NoiseLaw::PowerLaw { gamma0 } => (lambda_exp - 2.0 * gamma0, 1.0, 1.0, true),
        NoiseLaw::Explicit => (lambda_exp, op.max_noise_weight(), 0.0, false),
    };
    if q_hi == 0.0 {
        return Continuation::Envelope(Envelope {
            p: f64::INFINITY,
            c_hi: 0.0,
            corr: 0.0,
            c_base_lo: 0.0,
            exponent: 0.0,
            known_terms,
        });
    }
    let p = -growth * exponent;
    if p <= 1.0 {
        return Continuation::Divergent(p);
    }
    let base = coef.powf(exponent);
    Continuation::Envelope(Envelope {
        p,
        c_hi: q_hi * base,
        corr,
        c_base_lo: q_lo * base,
        exponent,
        known_terms,
    })
}

fn law_eigenvalue(op: &DiagonalOperatorSpec, k: u64) -> f64 {
    let k = k as f64;
    match op.spectrum_law() {
        SpectrumLaw::DirichletLaplacian => PI * PI * k * k,
        SpectrumLaw::ThinFilm { nu } => {
            let a = 4.0 * PI * PI * k * k;
            a * (a + nu)
        }
        SpectrumLaw::Explicit => unreachable!("explicit spectra are not continued"),
    }
}

fn law_term(op: &DiagonalOperatorSpec, k: u64, lambda_exp: f64) -> f64 {
    let l = law_eigenvalue(op, k);
    match op.noise_law() {
        NoiseLaw::Unit => l.powf(lambda_exp),
        NoiseLaw::PowerLaw { gamma0 } => l.powf(lambda_exp - 2.0 * gamma0),
        NoiseLaw::Explicit => unreachable!("explicit weights are not continued"),
    }
}

fn galerkin_sum(op: &DiagonalOperatorSpec, lambda_exp: f64) -> f64 {
    op.eigenvalues().iter().zip(op.noise_weights()).map(|(l, q)| q * l.powf(lambda_exp)).sum()
}

/// `Σ_{k≥1} q_k λ_k^e`, accurate to `tol`, continuing past the truncation.
fn full_series(op: &DiagonalOperatorSpec, lambda_exp: f64, tol: f64, cap: u64) -> SeriesOutcome {
    let n = op.n_modes() as u64;
    let mut partial = galerkin_sum(op, lambda_exp);
    let env = match continuation(op, lambda_exp) {
        Continuation::None => return SeriesOutcome::Finite { value: partial, tail_bound: 0.0, terms: n },
        Continuation::Divergent(p) => return SeriesOutcome::Divergent { decay_exponent: p },
        Continuation::Envelope(env) => env,
    };
    if env.c_hi == 0.0 {
        return SeriesOutcome::Finite { value: partial, tail_bound: 0.0, terms: n };
    }
    if !env.known_terms {
        let (_, hi) = env.tail(n);
        return SeriesOutcome::Finite { value: partial + 0.5 * hi, tail_bound: 0.5 * hi, terms: n };
    }
    let mut k = n;
    loop {
        let (lo, hi) = env.tail(k);
        let half = 0.5 * (hi - lo);
        if half <= tol {
            return SeriesOutcome::Finite { value: partial + 0.5 * (lo + hi), tail_bound: half, terms: k };
        }
        if k >= cap {
            return SeriesOutcome::Divergent { decay_exponent: env.p };
        }
        let next = (2 * k).max(16).min(cap);
        // Sum the block smallest-first so it is not swamped by the partial sum.
        let block: f64 = ((k + 1)..=next).rev().map(|j| law_term(op, j, lambda_exp)).sum();
        partial += block;
        k = next;
    }
}

/// `M = ∫₀^∞ ‖(-A)^γ e^{tA} √Q‖²_HS dt = Σ_k q_k λ_k^{2γ-1} / 2`.
///
/// The value is the sum over the materialized modes; `tail_bound` bounds the
/// contribution of the modes beyond the truncation.
pub fn hs_decay_integral(op: &DiagonalOperatorSpec, gamma: f64) -> Result<SeriesOutcome> {
    if !gamma.is_finite() {
        return Err(Error::NonFinite("gamma"));
    }
    let e = 2.0 * gamma - 1.0;
    let value = 0.5 * galerkin_sum(op, e);
    let n = op.n_modes() as u64;
    let tail_bound = match continuation(op, e) {
        Continuation::None => 0.0,
        Continuation::Divergent(p) => return Ok(SeriesOutcome::Divergent { decay_exponent: p }),
        Continuation::Envelope(env) => {
            if env.c_hi == 0.0 {
                0.0
            } else {
                0.5 * env.tail(n).1
            }
        }
    };
    Ok(SeriesOutcome::Finite { value, tail_bound, terms: n })
}

/// `Z_{γ,δ,ε} = Σ_k λ_k^{-2(δ-γ-ε)} q_k` over the full spectrum, to `tol`.
pub fn z_series(
    op: &DiagonalOperatorSpec,
    gamma: f64,
    delta: f64,
    epsilon: f64,
    tol: f64,
) -> Result<SeriesOutcome> {
    z_series_with_cap(op, gamma, delta, epsilon, tol, DEFAULT_MODE_CAP)
}

pub fn z_series_with_cap(
    op: &DiagonalOperatorSpec,
    gamma: f64,
    delta: f64,
    epsilon: f64,
    tol: f64,
    cap: u64,
) -> Result<SeriesOutcome> {
    if ![gamma, delta, epsilon, tol].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("series parameters"));
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositive("tol"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive("epsilon"));
    }
    Ok(full_series(op, -2.0 * (delta - gamma - epsilon), tol, cap))
}
