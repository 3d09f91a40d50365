use proptest::prelude::*;

use spdelab::config::ExperimentConfig;
use spdelab::exec::Execution;
use spdelab::integrator::{lambda_rule, simulate_trajectory, TrajectoryConfig};
use spdelab::models::{
    burgers_nonlinearity, elementary_cubic_gap, onesided_residual, ModelKind, ModelSpec, OneSidedForm,
};
use spdelab::moments::{combined_z, estimate_functional, Functional};
use spdelab::spectral::{make_dirichlet_laplacian, make_noise_weights, BasisKind, NoiseKind, SpectralField};
use spdelab::stoch_conv::simulate_convolution;

fn burgers(n: usize) -> ModelSpec {
    let op = make_noise_weights(&make_dirichlet_laplacian(n).unwrap(), NoiseKind::PowerLaw(0.125)).unwrap();
    ModelSpec::new(ModelKind::Burgers, op).unwrap()
}

fn sine_field(c: Vec<f64>) -> SpectralField {
    SpectralField::from_coeffs(c, BasisKind::DirichletSine).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cubic_gap_is_nonnegative(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let scale = (a.abs() + b.abs()).powi(4).max(1.0);
        prop_assert!(elementary_cubic_gap(a, b) >= -1e-13 * scale);
    }

    #[test]
    fn lambda_rule_postcondition(
        alpha in 0.01f64..2.0,
        beta in 0.0f64..1e3,
        epsilon in 0.01f64..0.5,
        s in 2.0f64..8.0,
        m_t in 0.0f64..1e4,
    ) {
        let l = lambda_rule(alpha, beta, epsilon, s, m_t).unwrap();
        prop_assert!(l.powf(-epsilon * s) * beta * m_t <= alpha / 4.0 * (1.0 + 1e-12));
    }

    #[test]
    fn burgers_orthogonality(c in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let m = burgers(16);
        let u = sine_field(c);
        let b = burgers_nonlinearity(&u, &m).unwrap();
        prop_assert!(b.dot(&u).abs() <= 1e-10 * (1.0 + u.dot(&u).powf(1.5)));
    }

    #[test]
    fn galerkin_drift_is_one_sided(
        n in prop::sample::select(vec![8usize, 16, 32, 64]),
        seed in proptest::collection::vec(-2.0f64..2.0, 128),
    ) {
        let m = burgers(n);
        let u = sine_field(seed[..n].to_vec());
        let v = sine_field(seed[64..64 + n].to_vec());
        prop_assert!(onesided_residual(&u, &v, &m, OneSidedForm::GalerkinDrift).unwrap() <= 1e-10);
        prop_assert!(onesided_residual(&u, &v, &m, OneSidedForm::Dissipativity).unwrap() <= 1e-10);
    }

    #[test]
    fn config_round_trip(
        n in 1usize..128,
        gamma0 in 0.0f64..1.0,
        delta in 0.01f64..0.49,
        seed in any::<u64>(),
        lambdas in proptest::collection::vec(0.1f64..1e3, 1..5),
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.model.n_modes = n;
        cfg.model.gamma0 = gamma0;
        cfg.bound.delta = delta;
        cfg.bound.lambdas = lambdas;
        cfg.run.seed = seed;
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text, &[]).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trajectories_do_not_depend_on_scheduling(seed in any::<u64>(), replica in 0u64..100) {
        let m = burgers(8);
        let cfg = TrajectoryConfig { replica, ..TrajectoryConfig::new(0.2, 1e-3, seed) };
        let runs = spdelab::exec::map_indexed(Execution::Parallel, 3, |_| simulate_trajectory(&m, &cfg).unwrap());
        prop_assert_eq!(runs[0].snapshots().collect::<Vec<_>>(), runs[2].snapshots().collect::<Vec<_>>());
        let seq = spdelab::exec::map_indexed(Execution::Sequential, 1, |_| simulate_trajectory(&m, &cfg).unwrap());
        prop_assert_eq!(runs[1].snapshots().collect::<Vec<_>>(), seq[0].snapshots().collect::<Vec<_>>());
    }
}

// Endpoints of distinct modes are uncorrelated across replicas.
#[test]
fn modes_are_independent() {
    let op = make_noise_weights(&make_dirichlet_laplacian(4).unwrap(), NoiseKind::PowerLaw(0.0)).unwrap();
    let ends: Vec<Vec<f64>> = (0..10_000)
        .map(|r| {
            let p = simulate_convolution(&op, 1.0, 0.5, 16, 41, r).unwrap();
            p.values.iter().map(|v| *v.last().unwrap()).collect()
        })
        .collect();
    let n = ends.len() as f64;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let col = |k: usize| ends.iter().map(move |e| e[k]);
            let (ma, mb) = (col(a).sum::<f64>() / n, col(b).sum::<f64>() / n);
            let sa = (col(a).map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
            let sb = (col(b).map(|x| (x - mb).powi(2)).sum::<f64>() / n).sqrt();
            let rho = col(a).zip(col(b)).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n * sa * sb);
            // SE of a null correlation is 1/√n.
            assert!(rho.abs() <= 3.0 / n.sqrt(), "modes {a},{b}: rho {rho}");
        }
    }
}

#[test]
fn jensen_and_burn_in_on_linear_model() {
    let m = burgers(16).linearized();
    let base = TrajectoryConfig { stride: 10, ..TrajectoryConfig::new(100.0, 1e-3, 43) };
    let t = simulate_trajectory(&m, &base).unwrap();
    let e2 = estimate_functional(&t, Functional::NormPower { p: 1.0 }, &m).unwrap();
    let e4 = estimate_functional(&t, Functional::NormPower { p: 2.0 }, &m).unwrap();
    assert!(e2.value * e2.value <= e4.value + 3.0 * e4.std_error);
    let longer = simulate_trajectory(&m, &TrajectoryConfig { burn_in: Some(50.0), ..base }).unwrap();
    let e2b = estimate_functional(&longer, Functional::NormPower { p: 1.0 }, &m).unwrap();
    assert!(combined_z(&e2, &e2b) <= 2.0, "burn-in shift z {}", combined_z(&e2, &e2b));
}
