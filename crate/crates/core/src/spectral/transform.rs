//! Physical ↔ spectral transforms on the cell-centred grid
//! `ξ_j = (j + 1/2)/G`, `j = 0..G`.
//!
//! On this grid the discrete sine and cosine families are orthogonal for
//! wavenumbers `1 ≤ k < G`, and `cos(mπξ_j)` folds onto `-cos((2G-m)πξ_j)`.
//! Products of band-limited fields are therefore projected exactly as long
//! as the product's top wavenumber stays below `2G - n_modes`.

use std::f64::consts::{PI, SQRT_2};

use super::{BasisKind, SpectralField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sine,
    Cosine,
}

pub fn grid_points(n_grid: usize) -> Vec<f64> {
    (0..n_grid).map(|j| (j as f64 + 0.5) / n_grid as f64).collect()
}

fn basis_value(trig: Trig, k: usize, xi: f64) -> f64 {
    let arg = k as f64 * PI * xi;
    match trig {
        Trig::Sine => SQRT_2 * arg.sin(),
        Trig::Cosine => SQRT_2 * arg.cos(),
    }
}

/// Point evaluation `Σ x_k e_k(ξ)`.
pub fn evaluate(x: &SpectralField, xi: f64) -> f64 {
    let trig = x.basis().trig();
    x.coeffs().iter().enumerate().map(|(i, c)| c * basis_value(trig, i + 1, xi)).sum()
}

/// Basis tables for one `(n_modes, n_grid)` pair.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    n_modes: usize,
    n_grid: usize,
    // Row k-1 holds √2 sin(kπξ_j) resp. √2 cos(kπξ_j).
    sine: Vec<f64>,
    cosine: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(n_modes: usize, n_grid: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        if n_grid <= n_modes {
            return Err(Error::GridTooCoarse { grid: n_grid, required: n_modes + 1 });
        }
        let xs = grid_points(n_grid);
        let mut sine = Vec::with_capacity(n_modes * n_grid);
        let mut cosine = Vec::with_capacity(n_modes * n_grid);
        for k in 1..=n_modes {
            for &xi in &xs {
                sine.push(basis_value(Trig::Sine, k, xi));
                cosine.push(basis_value(Trig::Cosine, k, xi));
            }
        }
        Ok(Self { n_modes, n_grid, sine, cosine })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    fn table(&self, trig: Trig) -> &[f64] {
        match trig {
            Trig::Sine => &self.sine,
            Trig::Cosine => &self.cosine,
        }
    }

    /// `out_j = Σ_k coeffs_k · e_k(ξ_j)` for the first `coeffs.len()` modes.
    pub fn synthesize(&self, trig: Trig, coeffs: &[f64], out: &mut [f64]) {
        debug_assert!(coeffs.len() <= self.n_modes);
        debug_assert_eq!(out.len(), self.n_grid);
        out.fill(0.0);
        let table = self.table(trig);
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &table[k * self.n_grid..(k + 1) * self.n_grid];
            for (o, &b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
    }

    /// Discrete projection `out_k = G⁻¹ Σ_j samples_j · e_k(ξ_j)`.
    pub fn analyze(&self, trig: Trig, samples: &[f64], out: &mut [f64]) {
        debug_assert!(out.len() <= self.n_modes);
        debug_assert_eq!(samples.len(), self.n_grid);
        let table = self.table(trig);
        let scale = 1.0 / self.n_grid as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let row = &table[k * self.n_grid..(k + 1) * self.n_grid];
            *o = scale * row.iter().zip(samples).map(|(b, s)| b * s).sum::<f64>();
        }
    }

    /// Midpoint-rule approximation of `∫₀¹ f`, exact for trigonometric
    /// polynomials of cosine degree below `2G`.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        samples.iter().sum::<f64>() / self.n_grid as f64
    }
}

/// Samples of `Σ x_k e_k` on the `n_grid`-point cell-centred grid.
pub fn to_physical(x: &SpectralField, n_grid: usize) -> Result<Vec<f64>> {
    let required = 2 * x.len();
    if n_grid < required {
        return Err(Error::GridTooCoarse { grid: n_grid, required });
    }
    let grid = SpectralGrid::new(x.len(), n_grid)?;
    let mut out = vec![0.0; n_grid];
    grid.synthesize(x.basis().trig(), x.coeffs(), &mut out);
    Ok(out)
}

/// Projection of cell-centred samples onto the first `n_modes` eigenfunctions.
pub fn from_physical(samples: &[f64], n_modes: usize, basis: BasisKind) -> Result<SpectralField> {
    let required = 2 * n_modes;
    if samples.len() < required {
        return Err(Error::GridTooCoarse { grid: samples.len(), required });
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("physical samples"));
    }
    let grid = SpectralGrid::new(n_modes, samples.len())?;
    let mut coeffs = vec![0.0; n_modes];
    grid.analyze(basis.trig(), samples, &mut coeffs);
    Ok(SpectralField::from_coeffs_unchecked(coeffs, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn point_values() {
        let s = SpectralField::unit(3, 1, BasisKind::DirichletSine).unwrap();
        assert_abs_diff_eq!(evaluate(&s, 0.5), SQRT_2, epsilon = 1e-15);
        let c = SpectralField::unit(3, 1, BasisKind::NeumannCosineMeanzero).unwrap();
        assert_abs_diff_eq!(evaluate(&c, 0.0), SQRT_2, epsilon = 1e-15);

        // 3 cells: the middle one sits at ξ = 1/2.
        let v = to_physical(&SpectralField::unit(1, 1, BasisKind::DirichletSine).unwrap(), 3).unwrap();
        assert_abs_diff_eq!(v[1], SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn zero_field() {
        let z = SpectralField::zeros(4, BasisKind::DirichletSine);
        assert!(to_physical(&z, 12).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projections() {
        let g = 16;
        let xs = grid_points(g);
        let s1: Vec<f64> = xs.iter().map(|x| SQRT_2 * (PI * x).sin()).collect();
        let f = from_physical(&s1, 4, BasisKind::DirichletSine).unwrap();
        assert_abs_diff_eq!(f.coeffs()[0], 1.0, epsilon = 1e-12);
        for &c in &f.coeffs()[1..] {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }

        let constant = vec![3.7; g];
        let f = from_physical(&constant, 4, BasisKind::NeumannCosineMeanzero).unwrap();
        assert!(f.coeffs().iter().all(|c| c.abs() < 1e-12));

        let s3: Vec<f64> = xs.iter().map(|x| SQRT_2 * (3.0 * PI * x).sin()).collect();
        let f = from_physical(&s3, 2, BasisKind::DirichletSine).unwrap();
        assert!(f.coeffs().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn coarse_grids_rejected() {
        let x = SpectralField::zeros(8, BasisKind::DirichletSine);
        assert!(matches!(to_physical(&x, 15), Err(Error::GridTooCoarse { grid: 15, required: 16 })));
        assert!(matches!(
            from_physical(&[0.0; 7], 4, BasisKind::DirichletSine),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    proptest! {
        #[test]
        fn parseval_round_trip(
            c in proptest::collection::vec(-5.0f64..5.0, 1..24),
            cosine in any::<bool>(),
            extra in 0usize..20,
        ) {
            let basis = if cosine { BasisKind::NeumannCosineMeanzero } else { BasisKind::DirichletSine };
            let n = c.len();
            let x = SpectralField::from_coeffs(c, basis).unwrap();
            let samples = to_physical(&x, 2 * n + extra).unwrap();
            let back = from_physical(&samples, n, basis).unwrap();
            let scale = x.coeffs().iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in x.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
            let n0 = x.dot(&x).sqrt();
            let n1 = back.dot(&back).sqrt();
            prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
        }
    }
}
