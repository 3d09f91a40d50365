//! Ergodic averages of invariant-measure functionals with batch-means
//! standard errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::integrator::{simulate_trajectory, TrajectoryConfig, TrajectoryRecord};
use crate::models::ModelSpec;
use crate::spectral::NormWeights;

pub const DEFAULT_BATCHES: usize = 32;
pub const MIN_BATCHES: usize = 8;
/// Lag-1 batch autocorrelation above which the SE is inflated.
pub const RHO_THRESHOLD: f64 = 0.2;

/// Registered functionals of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// `‖x‖₀^{2p}`.
    NormPower { p: f64 },
    /// `‖x‖²_σ ‖x‖₀^{2p}`.
    WeightedNormPower { sigma: f64, p: f64 },
    /// `‖B(x)‖₀`.
    DriftNorm,
    /// `‖x³‖²_β`.
    CubicNormSq { beta: f64 },
    /// `∫|x|ᵖ` on the physical grid.
    LpNorm { p: f64 },
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::NormPower { p } => write!(f, "norm_pow[p={p}]"),
            Functional::WeightedNormPower { sigma, p } => write!(f, "weighted_norm_pow[sigma={sigma},p={p}]"),
            Functional::DriftNorm => write!(f, "drift_norm"),
            Functional::CubicNormSq { beta } => write!(f, "cubic_norm_sq[beta={beta}]"),
            Functional::LpNorm { p } => write!(f, "lp_norm[p={p}]"),
        }
    }
}

/// Evaluates a functional over all snapshots of a trajectory.
pub fn functional_series(traj: &TrajectoryRecord, g: Functional, m: &ModelSpec) -> Result<Vec<f64>> {
    if traj.n_modes != m.n_modes() || traj.basis != m.basis() {
        return Err(Error::LengthMismatch { expected: m.n_modes(), found: traj.n_modes });
    }
    let op = m.operator();
    let l2 = NormWeights::new(op, 0.0);
    let mut ws = m.workspace();
    let mut buf = vec![0.0; m.n_modes()];
    let values: Vec<f64> = match g {
        Functional::NormPower { p } => traj.snapshots().map(|x| l2.norm_sq(x).powf(p)).collect(),
        Functional::WeightedNormPower { sigma, p } => {
            let ws = NormWeights::new(op, sigma);
            traj.snapshots().map(|x| ws.norm_sq(x) * l2.norm_sq(x).powf(p)).collect()
        }
        Functional::DriftNorm => traj
            .snapshots()
            .map(|x| {
                m.drift_nonlinearity_into(x, &mut buf, &mut ws);
                l2.norm(&buf)
            })
            .collect(),
        Functional::CubicNormSq { beta } => {
            let wb = NormWeights::new(op, beta);
            traj.snapshots()
                .map(|x| {
                    m.cubic_into(x, &mut buf, &mut ws);
                    wb.norm_sq(&buf)
                })
                .collect()
        }
        Functional::LpNorm { p } => traj
            .snapshots()
            .map(|x| {
                let s = m.physical_samples(x, &mut ws);
                s.iter().map(|v| v.abs().powf(p)).sum::<f64>() / s.len() as f64
            })
            .collect(),
    };
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFunctional { functional: g.to_string(), index });
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub mean: f64,
    pub std_error: f64,
    pub lag1: f64,
    pub batch_length: usize,
    pub batch_means: Vec<f64>,
}

/// Batch means over the trailing `n_batches · ⌊n / n_batches⌋` values.
pub fn batch_means(values: &[f64], n_batches: usize) -> Result<BatchStats> {
    if n_batches < MIN_BATCHES {
        return Err(Error::InsufficientBatches { required: MIN_BATCHES, available: n_batches });
    }
    let len = values.len() / n_batches;
    if len == 0 {
        return Err(Error::InsufficientBatches { required: n_batches, available: values.len() });
    }
    let used = &values[values.len() - len * n_batches..];
    let means: Vec<f64> = used.chunks_exact(len).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let nb = n_batches as f64;
    let mean = means.iter().sum::<f64>() / nb;
    let var = means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    let lag1 = if var > 0.0 {
        means.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / ((nb - 1.0) * var)
    } else {
        0.0
    };
    let mut std_error = (var / nb).sqrt();
    if lag1 > RHO_THRESHOLD {
        std_error *= ((1.0 + lag1) / (1.0 - lag1).max(1e-6)).sqrt();
    }
    Ok(BatchStats { mean, std_error, lag1, batch_length: len, batch_means: means })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub functional_id: String,
    pub value: f64,
    pub std_error: f64,
    pub n_batches: usize,
    /// Batch length in time units.
    pub batch_length: f64,
    pub burn_in: f64,
    pub effective_samples: f64,
}

fn snapshot_spacing(traj: &TrajectoryRecord) -> f64 {
    if traj.len() > 1 {
        traj.times[1] - traj.times[0]
    } else {
        0.0
    }
}

pub fn estimate_functional(traj: &TrajectoryRecord, g: Functional, m: &ModelSpec) -> Result<MomentEstimate> {
    estimate_functional_with(traj, g, m, DEFAULT_BATCHES)
}

pub fn estimate_functional_with(
    traj: &TrajectoryRecord,
    g: Functional,
    m: &ModelSpec,
    n_batches: usize,
) -> Result<MomentEstimate> {
    let values = functional_series(traj, g, m)?;
    let stats = batch_means(&values, n_batches)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let effective_samples = if stats.std_error > 0.0 { var / stats.std_error.powi(2) } else { n };
    Ok(MomentEstimate {
        functional_id: g.to_string(),
        value: stats.mean,
        std_error: stats.std_error,
        n_batches,
        batch_length: stats.batch_length as f64 * snapshot_spacing(traj),
        burn_in: traj.times.first().copied().unwrap_or(0.0),
        effective_samples,
    })
}

/// Pools the batch means of independent replicas of equal length. The mean
/// of a heavy-tailed functional is far less skewed than on a single run.
pub fn pooled_estimate(trajs: &[TrajectoryRecord], g: Functional, m: &ModelSpec) -> Result<MomentEstimate> {
    let first = trajs.first().ok_or(Error::EmptyPath)?;
    let mut means = Vec::with_capacity(trajs.len() * DEFAULT_BATCHES);
    let mut lag1 = 0.0;
    let mut length = usize::MAX;
    let mut raw_var = 0.0;
    for t in trajs {
        let values = functional_series(t, g, m)?;
        let stats = batch_means(&values, DEFAULT_BATCHES)?;
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        raw_var += values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        lag1 += stats.lag1;
        length = length.min(stats.batch_length);
        means.extend(stats.batch_means);
    }
    let r = trajs.len() as f64;
    let nb = means.len() as f64;
    let mean = means.iter().sum::<f64>() / nb;
    let var = means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    let lag1 = lag1 / r;
    let mut std_error = (var / nb).sqrt();
    if lag1 > RHO_THRESHOLD {
        std_error *= ((1.0 + lag1) / (1.0 - lag1).max(1e-6)).sqrt();
    }
    Ok(MomentEstimate {
        functional_id: g.to_string(),
        value: mean,
        std_error,
        n_batches: means.len(),
        batch_length: length as f64 * snapshot_spacing(first),
        burn_in: first.times.first().copied().unwrap_or(0.0),
        effective_samples: if std_error > 0.0 { raw_var / r / std_error.powi(2) } else { nb },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityReport {
    pub first_half: f64,
    pub second_half: f64,
    pub z_score: f64,
}

/// Compares the batch means of the first and second halves of the run.
pub fn stationarity_diagnostic(traj: &TrajectoryRecord, g: Functional, m: &ModelSpec) -> Result<StationarityReport> {
    let values = functional_series(traj, g, m)?;
    let stats = batch_means(&values, DEFAULT_BATCHES)?;
    let (a, b) = stats.batch_means.split_at(DEFAULT_BATCHES / 2);
    let half = |h: &[f64]| {
        let n = h.len() as f64;
        let mean = h.iter().sum::<f64>() / n;
        let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let ((m1, v1), (m2, v2)) = (half(a), half(b));
    let z_score = if v1 + v2 > 0.0 { (m2 - m1) / (v1 + v2).sqrt() } else { 0.0 };
    Ok(StationarityReport { first_half: m1, second_half: m2, z_score })
}

/// `|a - b| / √(se_a² + se_b²)`, zero when both are exact and equal.
pub fn combined_z(a: &MomentEstimate, b: &MomentEstimate) -> f64 {
    let s = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let d = (a.value - b.value).abs();
    if s > 0.0 {
        d / s
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Whether the run's batch means, pooled into eight blocks, rise strictly.
pub fn monotone_growth(batch_means: &[f64]) -> bool {
    let blocks = 8;
    let len = batch_means.len() / blocks;
    if len == 0 {
        return false;
    }
    let pooled: Vec<f64> = batch_means[batch_means.len() - len * blocks..]
        .chunks_exact(len)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    pooled.windows(2).all(|w| w[1] > w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub functional: Functional,
    pub estimates: [MomentEstimate; 2],
    pub combined_z: f64,
    pub monotone_growth: bool,
    pub stable: bool,
}

pub const DEFAULT_P_LIST: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Functionals of the sweep: `‖x‖^{2p}` for each `p`, then `‖x‖²_σ‖x‖^{2p}`
/// for each `(σ, p)`.
pub fn sweep_functionals(p_list: &[f64], sigma_list: &[f64]) -> Result<Vec<Functional>> {
    if let Some(s) = sigma_list.iter().find(|s| !(0.0..=0.5).contains(*s)) {
        return Err(Error::InvalidParameter(format!("sigma = {s} outside [0, 1/2]")));
    }
    if let Some(p) = p_list.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must be nonnegative")));
    }
    let mut out: Vec<Functional> = p_list.iter().map(|&p| Functional::NormPower { p }).collect();
    for &sigma in sigma_list {
        for &p in p_list {
            out.push(Functional::WeightedNormPower { sigma, p });
        }
    }
    Ok(out)
}

/// Two-seed stability protocol for a list of functionals.
pub fn stability_table(
    trajs: [&TrajectoryRecord; 2],
    functionals: &[Functional],
    m: &ModelSpec,
) -> Result<Vec<SweepRow>> {
    functionals
        .iter()
        .map(|&g| {
            let va = functional_series(trajs[0], g, m)?;
            let vb = functional_series(trajs[1], g, m)?;
            let a = estimate_functional(trajs[0], g, m)?;
            let b = estimate_functional(trajs[1], g, m)?;
            let growth = monotone_growth(&batch_means(&va, DEFAULT_BATCHES)?.batch_means)
                || monotone_growth(&batch_means(&vb, DEFAULT_BATCHES)?.batch_means);
            let z = combined_z(&a, &b);
            Ok(SweepRow { functional: g, estimates: [a, b], combined_z: z, monotone_growth: growth, stable: z <= 3.0 && !growth })
        })
        .collect()
}

/// Runs two independent seeds of `run` and applies the stability protocol to
/// every `‖x‖^{2p}` and `‖x‖²_σ‖x‖^{2p}`.
pub fn finiteness_sweep(
    m: &ModelSpec,
    p_list: &[f64],
    sigma_list: &[f64],
    run: &TrajectoryConfig,
    seeds: [u64; 2],
    policy: Execution,
) -> Result<Vec<SweepRow>> {
    let functionals = sweep_functionals(p_list, sigma_list)?;
    let trajs = run_seeds(m, run, seeds, policy)?;
    stability_table([&trajs[0], &trajs[1]], &functionals, m)
}

/// One trajectory per seed, in seed order.
pub fn run_seeds(m: &ModelSpec, run: &TrajectoryConfig, seeds: [u64; 2], policy: Execution) -> Result<Vec<TrajectoryRecord>> {
    map_indexed(policy, 2, |i| simulate_trajectory(m, &TrajectoryConfig { seed: seeds[i], ..run.clone() }))
        .into_iter()
        .collect()
}
