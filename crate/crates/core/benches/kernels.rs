//! Sequential vs rayon execution of the replica loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spdelab::exec::{map_indexed, Execution};
use spdelab::integrator::{simulate_trajectory, TrajectoryConfig};
use spdelab::models::{nonlinearity, random_field, ModelKind, ModelSpec};
use spdelab::rng::{Channel, StreamKey};
use spdelab::spectral::{make_dirichlet_laplacian, make_noise_weights, NoiseKind};
use spdelab::stoch_conv::simulate_convolution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn burgers(n: usize) -> ModelSpec {
    let op = make_noise_weights(&make_dirichlet_laplacian(n).unwrap(), NoiseKind::PowerLaw(0.125)).unwrap();
    ModelSpec::new(ModelKind::Burgers, op).unwrap()
}

fn replica_ou(c: &mut Criterion) {
    let m = burgers(32);
    let mut g = c.benchmark_group("replica_ou");
    g.sample_size(10);
    for (name, p) in POLICIES {
        g.bench_function(BenchmarkId::new(name, 64), |b| {
            b.iter(|| map_indexed(p, 64, |r| simulate_convolution(m.operator(), 10.0, 1.0, 1024, 1, r as u64).unwrap()))
        });
    }
    g.finish();
}

fn burgers_kernel(c: &mut Criterion) {
    let m = burgers(64);
    let fields: Vec<_> = (0..256)
        .map(|i| random_field(64, m.basis(), 1.0, 1.0, &mut StreamKey::new(1, i, 0).stream(Channel::Sampling)))
        .collect();
    let mut g = c.benchmark_group("burgers_nonlinearity");
    for (name, p) in POLICIES {
        g.bench_function(BenchmarkId::new(name, 256), |b| {
            b.iter(|| map_indexed(p, fields.len(), |i| nonlinearity(&fields[i], &m).unwrap()))
        });
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let m = burgers(32);
    let mut g = c.benchmark_group("trajectory");
    g.sample_size(10);
    for (name, p) in POLICIES {
        g.bench_function(BenchmarkId::new(name, 8), |b| {
            b.iter(|| {
                map_indexed(p, 8, |r| {
                    let cfg = TrajectoryConfig { replica: r as u64, ..TrajectoryConfig::new(1.0, 5e-4, 1) };
                    simulate_trajectory(&m, &cfg).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, replica_ou, burgers_kernel, trajectories);
criterion_main!(benches);
