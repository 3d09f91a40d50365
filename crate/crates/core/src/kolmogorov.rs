//! The Kolmogorov operator `Lφ = ½ Σ q_k ∂²_kφ + Σ (-λ_k x_k + B(x)_k) ∂_kφ`
//! on cylindrical test functions of finitely many coordinates, and its
//! Monte Carlo invariance check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;
use crate::models::{onesided_residual, ModelSpec, OneSidedForm};
use crate::moments::{batch_means, DEFAULT_BATCHES};
use crate::spectral::{DiagonalOperatorSpec, SpectralField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `f(z) = z`; unbounded, test-only.
    Coordinate,
    /// `f(z) = z²`; unbounded, test-only.
    CoordinateSquare,
    /// `f(z) = exp(-(z - c)² / 2w²)`.
    GaussianBump { center: f64, width: f64 },
    /// `f(z) = Π_i exp(-(z_i - c_i)² / 2w_i²)`.
    ProductOfBumps { centers: Vec<f64>, widths: Vec<f64> },
}

/// `φ(x) = f(x_{k_1}, …, x_{k_m})` with 1-based modes `k_1 < … < k_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylindricalFunction {
    modes: Vec<usize>,
    profile: Profile,
}

impl CylindricalFunction {
    pub fn new(modes: Vec<usize>, profile: Profile) -> Result<Self> {
        if modes.is_empty() || modes[0] == 0 || modes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!("modes {modes:?} must be strictly increasing and 1-based")));
        }
        let arity = match &profile {
            Profile::Coordinate | Profile::CoordinateSquare => 1,
            Profile::GaussianBump { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::NonPositive("bump width"));
                }
                1
            }
            Profile::ProductOfBumps { centers, widths } => {
                if centers.len() != widths.len() {
                    return Err(Error::LengthMismatch { expected: centers.len(), found: widths.len() });
                }
                if widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::NonPositive("bump width"));
                }
                centers.len()
            }
        };
        if arity != modes.len() {
            return Err(Error::LengthMismatch { expected: arity, found: modes.len() });
        }
        Ok(Self { modes, profile })
    }

    pub fn coordinate(mode: usize) -> Result<Self> {
        Self::new(vec![mode], Profile::Coordinate)
    }

    pub fn coordinate_square(mode: usize) -> Result<Self> {
        Self::new(vec![mode], Profile::CoordinateSquare)
    }

    pub fn bump(mode: usize, center: f64, width: f64) -> Result<Self> {
        Self::new(vec![mode], Profile::GaussianBump { center, width })
    }

    pub fn product_of_bumps(modes: Vec<usize>, centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        Self::new(modes, Profile::ProductOfBumps { centers, widths })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.profile, Profile::Coordinate | Profile::CoordinateSquare)
    }

    pub fn id(&self) -> String {
        let modes: Vec<String> = self.modes.iter().map(|k| k.to_string()).collect();
        let name = match self.profile {
            Profile::Coordinate => "coordinate",
            Profile::CoordinateSquare => "coordinate_square",
            Profile::GaussianBump { .. } => "bump",
            Profile::ProductOfBumps { .. } => "product_of_bumps",
        };
        format!("{name}[{}]", modes.join(","))
    }

    fn check(&self, n_modes: usize) -> Result<()> {
        match self.modes.last() {
            Some(&k) if k > n_modes => Err(Error::IndexOutOfRange { index: k, len: n_modes }),
            _ => Ok(()),
        }
    }

    fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|&k| x[k - 1]).collect()
    }

    /// `f(z)`, `∇f(z)` and the diagonal of `∇²f(z)`.
    pub fn profile_derivatives(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        match &self.profile {
            Profile::Coordinate => (z[0], vec![1.0], vec![0.0]),
            Profile::CoordinateSquare => (z[0] * z[0], vec![2.0 * z[0]], vec![2.0]),
            Profile::GaussianBump { center, width } => {
                let (f, g, h) = bump(z[0], *center, *width);
                (f, vec![g], vec![h])
            }
            Profile::ProductOfBumps { centers, widths } => {
                let parts: Vec<(f64, f64, f64)> =
                    z.iter().zip(centers).zip(widths).map(|((&z, &c), &w)| bump(z, c, w)).collect();
                let value: f64 = parts.iter().map(|p| p.0).product();
                let others = |i: usize| parts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.0).product::<f64>();
                let grad = (0..parts.len()).map(|i| parts[i].1 * others(i)).collect();
                let hess = (0..parts.len()).map(|i| parts[i].2 * others(i)).collect();
                (value, grad, hess)
            }
        }
    }

    pub fn value(&self, x: &SpectralField) -> Result<f64> {
        self.check(x.len())?;
        Ok(self.profile_derivatives(&self.coords(x.coeffs())).0)
    }

    /// `Lφ(x)` given a precomputed `B(x)`.
    pub fn generator_with_drift(&self, x: &[f64], drift: &[f64], op: &DiagonalOperatorSpec) -> f64 {
        let (_, grad, hess) = self.profile_derivatives(&self.coords(x));
        let (lam, q) = (op.eigenvalues(), op.noise_weights());
        self.modes
            .iter()
            .enumerate()
            .map(|(i, &k)| 0.5 * q[k - 1] * hess[i] + (-lam[k - 1] * x[k - 1] + drift[k - 1]) * grad[i])
            .sum()
    }
}

fn bump(z: f64, c: f64, w: f64) -> (f64, f64, f64) {
    let d = z - c;
    let w2 = w * w;
    let f = (-0.5 * d * d / w2).exp();
    (f, -d / w2 * f, (d * d / (w2 * w2) - 1.0 / w2) * f)
}

/// `Lφ(x)` for the model's drift.
pub fn apply_generator(phi: &CylindricalFunction, x: &SpectralField, m: &ModelSpec) -> Result<f64> {
    m.operator().check_field(x)?;
    phi.check(m.n_modes())?;
    let mut drift = vec![0.0; m.n_modes()];
    m.drift_nonlinearity_into(x.coeffs(), &mut drift, &mut m.workspace());
    Ok(phi.generator_with_drift(x.coeffs(), &drift, m.operator()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceRow {
    pub id: String,
    pub mean: f64,
    pub std_error: f64,
    pub z_score: f64,
}

/// Batch-means estimate of `∫ Lφ dμ` along a stationary trajectory.
pub fn invariance_residual(suite: &[CylindricalFunction], traj: &TrajectoryRecord, m: &ModelSpec) -> Result<Vec<InvarianceRow>> {
    if suite.is_empty() {
        return Err(Error::InvalidParameter("empty test-function suite".into()));
    }
    if traj.n_modes != m.n_modes() {
        return Err(Error::LengthMismatch { expected: m.n_modes(), found: traj.n_modes });
    }
    for phi in suite {
        phi.check(m.n_modes())?;
    }
    let mut ws = m.workspace();
    let mut drift = vec![0.0; m.n_modes()];
    let mut series = vec![Vec::with_capacity(traj.len()); suite.len()];
    for x in traj.snapshots() {
        m.drift_nonlinearity_into(x, &mut drift, &mut ws);
        for (s, phi) in series.iter_mut().zip(suite) {
            s.push(phi.generator_with_drift(x, &drift, m.operator()));
        }
    }
    suite
        .iter()
        .zip(&series)
        .map(|(phi, s)| {
            let b = batch_means(s, DEFAULT_BATCHES)?;
            let z_score = if b.std_error > 0.0 {
                b.mean / b.std_error
            } else if b.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(InvarianceRow { id: phi.id(), mean: b.mean, std_error: b.std_error, z_score })
        })
        .collect()
}

/// `⟨(Aⁿu + Bⁿu - Cⁿu) - (Aⁿv + Bⁿv - Cⁿv), u - v⟩`.
pub fn galerkin_drift_residual(u: &SpectralField, v: &SpectralField, m: &ModelSpec) -> Result<f64> {
    onesided_residual(u, v, m, OneSidedForm::GalerkinDrift)
}

/// Ten bounded test functions scaled by the linear stationary deviations
/// `s_k = √(q_k / 2λ_k)`: single bumps on modes 1–5 and products of bumps
/// on five mode pairs.
pub fn bump_suite(op: &DiagonalOperatorSpec) -> Result<Vec<CylindricalFunction>> {
    let sd = |k: usize| (op.noise_weights()[k - 1] / (2.0 * op.eigenvalues()[k - 1])).sqrt().max(1e-12);
    let n = op.n_modes();
    let mut suite = Vec::with_capacity(10);
    for k in 1..=5.min(n) {
        suite.push(CylindricalFunction::bump(k, 0.5 * sd(k), sd(k))?);
    }
    for (a, b) in [(1, 2), (1, 3), (2, 3), (2, 4), (3, 5)] {
        if b <= n {
            suite.push(CylindricalFunction::product_of_bumps(
                vec![a, b],
                vec![0.5 * sd(a), -0.5 * sd(b)],
                vec![1.5 * sd(a), 1.5 * sd(b)],
            )?);
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::rng::{Channel, StreamKey};
    use crate::spectral::{make_dirichlet_laplacian, make_noise_weights, BasisKind, NoiseKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn burgers(n: usize, gamma0: f64) -> ModelSpec {
        let op = make_noise_weights(&make_dirichlet_laplacian(n).unwrap(), NoiseKind::PowerLaw(gamma0)).unwrap();
        ModelSpec::new(ModelKind::Burgers, op).unwrap()
    }

    #[test]
    fn generator_examples() {
        let m = burgers(6, 0.25);
        let e1 = SpectralField::unit(6, 1, BasisKind::DirichletSine).unwrap();
        let phi = CylindricalFunction::coordinate(1).unwrap();
        assert_abs_diff_eq!(apply_generator(&phi, &e1, &m).unwrap(), -PI * PI, epsilon = 1e-12);
        let z = SpectralField::zeros(6, BasisKind::DirichletSine);
        let phi = CylindricalFunction::coordinate_square(1).unwrap();
        assert_abs_diff_eq!(apply_generator(&phi, &z, &m).unwrap(), 1.0 / PI, epsilon = 1e-12);
        // At the bump's centre only the second-order term survives.
        let phi = CylindricalFunction::bump(2, 0.0, 0.3).unwrap();
        let expect = 0.5 * m.operator().noise_weights()[1] * (-1.0 / 0.09);
        assert_abs_diff_eq!(apply_generator(&phi, &z, &m).unwrap(), expect, epsilon = 1e-12);
        assert!(matches!(
            apply_generator(&CylindricalFunction::coordinate(7).unwrap(), &z, &m),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(CylindricalFunction::new(vec![2, 1], Profile::ProductOfBumps { centers: vec![0.0; 2], widths: vec![1.0; 2] }).is_err());
        assert!(CylindricalFunction::new(vec![0], Profile::Coordinate).is_err());
        assert!(CylindricalFunction::bump(1, 0.0, 0.0).is_err());
        assert!(CylindricalFunction::new(vec![1, 2], Profile::Coordinate).is_err());
        assert!(!CylindricalFunction::coordinate(1).unwrap().is_bounded());
        assert!(CylindricalFunction::bump(1, 0.0, 1.0).unwrap().is_bounded());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut s = StreamKey::new(8, 0, 0).stream(Channel::Sampling);
        let h = 1e-4;
        let family = [
            CylindricalFunction::coordinate(1).unwrap(),
            CylindricalFunction::coordinate_square(1).unwrap(),
            CylindricalFunction::bump(1, 0.2, 0.7).unwrap(),
            CylindricalFunction::product_of_bumps(vec![1, 2, 3], vec![0.1, -0.3, 0.0], vec![0.5, 0.9, 1.3]).unwrap(),
        ];
        for phi in &family {
            let m = phi.modes().len();
            for _ in 0..100 {
                let z: Vec<f64> = (0..m).map(|_| 0.8 * s.normal()).collect();
                let (f, g, hd) = phi.profile_derivatives(&z);
                let scale = f.abs().max(1e-3);
                for i in 0..m {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += h;
                    zm[i] -= h;
                    let (fp, fm) = (phi.profile_derivatives(&zp).0, phi.profile_derivatives(&zm).0);
                    let dg = (fp - fm) / (2.0 * h);
                    let dh = (fp - 2.0 * f + fm) / (h * h);
                    assert!((dg - g[i]).abs() <= 1e-6 * g[i].abs().max(scale), "{} grad", phi.id());
                    assert!((dh - hd[i]).abs() <= 1e-6 * hd[i].abs().max(scale).max(1.0), "{} hess", phi.id());
                }
            }
        }
    }

    #[test]
    fn generator_is_linear() {
        let m = burgers(8, 0.125);
        let mut s = StreamKey::new(2, 0, 0).stream(Channel::Sampling);
        let x = SpectralField::from_coeffs((0..8).map(|_| 0.3 * s.normal()).collect(), BasisKind::DirichletSine).unwrap();
        let a = CylindricalFunction::bump(2, 0.1, 0.4).unwrap();
        let b = CylindricalFunction::coordinate_square(2).unwrap();
        let la = apply_generator(&a, &x, &m).unwrap();
        let lb = apply_generator(&b, &x, &m).unwrap();
        // L(2a + 3b) from the combined profile derivatives.
        let z = [x.coeffs()[1]];
        let (_, ga, ha) = a.profile_derivatives(&z);
        let (_, gb, hb) = b.profile_derivatives(&z);
        let mut drift = vec![0.0; 8];
        m.drift_nonlinearity_into(x.coeffs(), &mut drift, &mut m.workspace());
        let (lam, q) = (m.operator().eigenvalues()[1], m.operator().noise_weights()[1]);
        let direct = 0.5 * q * (2.0 * ha[0] + 3.0 * hb[0]) + (-lam * z[0] + drift[1]) * (2.0 * ga[0] + 3.0 * gb[0]);
        assert_abs_diff_eq!(2.0 * la + 3.0 * lb, direct, epsilon = 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn galerkin_drift_examples() {
        let m = burgers(8, 0.125);
        let mut s = StreamKey::new(4, 0, 0).stream(Channel::Sampling);
        let u = SpectralField::from_coeffs((0..8).map(|_| s.normal()).collect(), BasisKind::DirichletSine).unwrap();
        assert_eq!(galerkin_drift_residual(&u, &u, &m).unwrap(), 0.0);
        let z = SpectralField::zeros(8, BasisKind::DirichletSine);
        assert!(galerkin_drift_residual(&u, &z, &m).unwrap() <= 0.0);
    }

    #[test]
    fn suite_shape() {
        let m = burgers(8, 0.125);
        let suite = bump_suite(m.operator()).unwrap();
        assert_eq!(suite.len(), 10);
        assert!(suite.iter().all(|p| p.is_bounded()));
    }
}
