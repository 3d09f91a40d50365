//! Experiment runners behind the command-line subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, try_map_indexed};
use crate::integrator::{
    differential_inequality_report, decomposition_pipeline, simulate_trajectory, Psi, RLambdaParams, TrajectoryConfig,
    TrajectoryRecord,
};
use crate::kolmogorov::{bump_suite, invariance_residual};
use crate::models::{
    calibrate_lyapunov, elementary_cubic_gap, nonlinearity, onesided_residual, random_field, validate_lyapunov,
    ModelKind, ModelSpec, OneSidedForm,
};
use crate::moments::{combined_z, estimate_functional, stationarity_diagnostic, sweep_functionals, Functional};
use crate::report::{write_results_file, write_summary_file, Assertion, ResultRow, RowSink, Summary};
use crate::rng::{Channel, StreamKey};
use crate::spectral::{hs_decay_integral, z_series, SeriesOutcome};
use crate::stoch_conv::{
    convolution_bound_report, coupled_ou, pathwise_bound_from_profile, simulate_brownian, simulate_convolution,
    span_profile, HolderRecord, EXACT_HOLDER_MAX_POINTS,
};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn trajectory_config(cfg: &ExperimentConfig, replica: u64) -> TrajectoryConfig {
    let r = &cfg.run;
    TrajectoryConfig {
        t_final: r.t_final,
        dt: r.dt,
        burn_in: r.burn_in,
        stride: r.stride,
        decomposition: None,
        seed: r.seed,
        replica,
        x0: None,
        guard: r.guard,
    }
}

fn replicas(cfg: &ExperimentConfig, m: &ModelSpec, count: usize) -> Result<Vec<TrajectoryRecord>> {
    try_map_indexed(cfg.run.execution, count, |i| simulate_trajectory(m, &trajectory_config(cfg, i as u64)))
}

fn conv_bound(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let b = &cfg.bound;
    let seed = cfg.run.seed;
    // Scalar pathwise bound: per path, slack for every (δ, λ).
    let per_path = try_map_indexed(cfg.run.execution, b.paths, |p| -> Result<Vec<f64>> {
        let key = StreamKey::new(seed, p as u64, 0);
        let bm = simulate_brownian(b.horizon, b.n_steps, key)?;
        let prof = span_profile(&bm.values, bm.times[1] - bm.times[0], EXACT_HOLDER_MAX_POINTS)?;
        let mut out = Vec::with_capacity(b.deltas.len() * b.lambdas.len());
        for &l in &b.lambdas {
            let ou = coupled_ou(&bm, l, key)?;
            for &d in &b.deltas {
                out.push(pathwise_bound_from_profile(&ou, &prof, l, d)?.slack_ratio);
            }
        }
        Ok(out)
    })?;
    let mut worst = 0.0f64;
    for (li, &l) in b.lambdas.iter().enumerate() {
        for (di, &d) in b.deltas.iter().enumerate() {
            let col: Vec<f64> = per_path.iter().map(|v| v[li * b.deltas.len() + di]).collect();
            let n = col.len() as f64;
            let max = col.iter().cloned().fold(0.0, f64::max);
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
            let viol = col.iter().filter(|&&v| v > 1.0).count();
            let param = format!("delta={d}");
            let status = if max <= b.max_slack { "ok" } else { "violated" };
            sink.push("max_slack", None, &param, Some(l), max, None, status);
            sink.push("mean_slack", None, &param, Some(l), mean, Some(sd / n.sqrt()), "ok");
            sink.push("violations_at_1", None, &param, Some(l), viol as f64, None, "ok");
            worst = worst.max(max);
        }
    }
    // Hilbert-space bound on the model spectrum.
    let op = m.operator();
    let hilbert = try_map_indexed(cfg.run.execution, cfg.run.replicas, |r| -> Result<Vec<f64>> {
        b.lambdas
            .iter()
            .map(|&l| {
                let path = simulate_convolution(op, l, b.horizon, b.n_steps, seed, r as u64)?;
                let h = HolderRecord::for_path(&path, b.delta)?;
                Ok(convolution_bound_report(&path, op, b.gamma, b.epsilon, &h)?.slack_ratio)
            })
            .collect()
    })?;
    let mut worst_h = 0.0f64;
    for (r, row) in hilbert.iter().enumerate() {
        for (&l, &s) in b.lambdas.iter().zip(row) {
            sink.push("hilbert_slack", Some(r as u64), &format!("delta={}", b.delta), Some(l), s, None, if s <= b.max_slack { "ok" } else { "violated" });
            worst_h = worst_h.max(s);
        }
    }
    Ok(vec![
        Assertion::new("pathwise_slack", worst <= b.max_slack, format!("max slack {worst:.6} (limit {})", b.max_slack)),
        Assertion::new("hilbert_slack", worst_h <= b.max_slack, format!("max slack {worst_h:.6} (limit {})", b.max_slack)),
    ])
}

fn series_row(sink: &mut RowSink, series: &str, param: &str, out: &SeriesOutcome) -> bool {
    match *out {
        SeriesOutcome::Finite { value, tail_bound, .. } => {
            sink.push(series, None, param, None, value, Some(tail_bound), "finite");
            true
        }
        SeriesOutcome::Divergent { decay_exponent } => {
            sink.push(series, None, param, Some(decay_exponent), f64::INFINITY, None, "divergent");
            false
        }
    }
}

fn z_series_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let b = &cfg.bound;
    let kappa = b.delta + cfg.model.gamma0 - b.gamma - b.epsilon;
    let z = z_series(m.operator(), b.gamma, b.delta, b.epsilon, 1e-10)?;
    let finite = series_row(sink, "z", &format!("kappa={kappa}"), &z);
    let hs = hs_decay_integral(m.operator(), b.gamma)?;
    series_row(sink, "hs_decay", &format!("gamma={}", b.gamma), &hs);
    Ok(vec![Assertion::new("z_series_finite", finite, format!("kappa = {kappa}"))])
}

fn simulate_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let trajs = replicas(cfg, m, cfg.run.replicas)?;
    for (r, t) in trajs.iter().enumerate() {
        for (time, n) in t.times.iter().zip(&t.norms) {
            sink.push("norm_l2", Some(r as u64), "", Some(*time), n.l2, None, "ok");
            sink.push("norm_half", Some(r as u64), "", Some(*time), n.half, None, "ok");
            sink.push("norm_gamma2", Some(r as u64), "", Some(*time), n.gamma2, None, "ok");
        }
    }
    Ok(vec![Assertion::new("integration_completed", true, format!("{} replicas", trajs.len()))])
}

fn moments_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let mut fs = sweep_functionals(&cfg.moments.p_list, &cfg.moments.sigma_list)?;
    fs.push(Functional::DriftNorm);
    fs.push(Functional::CubicNormSq { beta: cfg.cubic_beta() });
    let trajs = replicas(cfg, m, cfg.run.replicas.max(2))?;
    let mut stable = true;
    let mut stationary = true;
    for g in fs {
        let est: Vec<_> = trajs.iter().map(|t| estimate_functional(t, g, m)).collect::<Result<_>>()?;
        let id = g.to_string();
        for (r, e) in est.iter().enumerate() {
            sink.push("estimate", Some(r as u64), &id, None, e.value, Some(e.std_error), "ok");
            let s = stationarity_diagnostic(&trajs[r], g, m)?;
            let ok = s.z_score.abs() <= 3.0;
            stationary &= ok;
            sink.push("stationarity_z", Some(r as u64), &id, None, s.z_score, None, if ok { "ok" } else { "nonstationary" });
        }
        let z = combined_z(&est[0], &est[1]);
        let ok = z <= 3.0;
        stable &= ok;
        sink.push("two_seed_z", None, &id, None, z, None, if ok { "stable" } else { "unstable" });
    }
    Ok(vec![
        Assertion::new("two_seed_stability", stable, "all functionals within 3 combined SE"),
        Assertion::new("stationarity", stationary, "all half-run z-scores within 3"),
    ])
}

fn lyapunov_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let design = cfg.calibration_design();
    let c = calibrate_lyapunov(m, &design, cfg.run.execution)?;
    let m = m.clone().with_lyapunov(c);
    let v = validate_lyapunov(&m, &design, cfg.run.execution)?;
    sink.push("constant", None, "coupled", None, c.coupled, None, "calibrated");
    sink.push("constant", None, "free", None, c.free, None, "calibrated");
    sink.push("validation_violations", None, "", None, v.violations as f64, None, if v.violations == 0 { "ok" } else { "violated" });
    sink.push("validation_max_residual", None, "", None, v.max_residual, None, "ok");
    let l = &cfg.lyapunov;
    let base = RLambdaParams::from_model(&m, l.structural_delta, l.epsilon)?;
    let run_cfg = TrajectoryConfig {
        burn_in: Some(0.0),
        stride: 1,
        ..TrajectoryConfig { t_final: l.decomposition_t_final, dt: l.decomposition_dt, ..trajectory_config(cfg, 0) }
    };
    let run = decomposition_pipeline(&m, base, l.holder_delta, &run_cfg)?;
    sink.push("lambda", None, "", None, run.params.lambda, None, "ok");
    sink.push("m_random", None, "", None, run.m_random, None, "ok");
    let defect = run.trajectory.decomposition_defect().unwrap_or(f64::INFINITY);
    sink.push("decomposition_defect", None, "", None, defect, None, if defect <= 1e-10 { "ok" } else { "violated" });
    let mut worst = 0.0f64;
    for psi in [Psi::Identity, Psi::OnePlusPower { p: 1.0 }, Psi::OnePlusPower { p: 2.0 }] {
        let rep = differential_inequality_report(&run.trajectory, m.operator(), &run.params, psi, l.tolerance_constant)?;
        let label = match psi {
            Psi::Identity => "psi=t".to_string(),
            Psi::OnePlusPower { p } => format!("psi=(1+t)^{}", p / 2.0),
        };
        sink.push("violation_fraction", None, &label, None, rep.violation_fraction, None, "ok");
        sink.push("max_residual", None, &label, None, rep.max_residual, None, "ok");
        worst = worst.max(rep.violation_fraction);
    }
    Ok(vec![
        Assertion::new("lyapunov_validation", v.violations == 0, format!("{} of {} samples violate", v.violations, v.samples)),
        Assertion::new("decomposition_identity", defect <= 1e-10, format!("max defect {defect:e}")),
        Assertion::new("differential_inequality", worst < 0.01, format!("worst violation fraction {worst}")),
    ])
}

fn onesided_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let seed = cfg.run.seed;
    let samples = cfg.lyapunov.samples;
    let field = |i: usize, j: u64| {
        let mut s = StreamKey::new(seed, 2 + j, i as u64).stream(Channel::Sampling);
        let amp = 10f64.powf(-1.0 + 2.0 * s.uniform());
        random_field(m.n_modes(), m.basis(), 1.0, amp, &mut s)
    };
    let mut asserts = Vec::new();
    let orth = map_indexed(cfg.run.execution, samples.min(1000), |i| -> Result<f64> {
        let u = field(i, 0);
        let b = nonlinearity(&u, m)?;
        Ok(b.dot(&u).abs() / u.dot(&u).powf(1.5).max(f64::MIN_POSITIVE))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .fold(0.0, f64::max);
    sink.push("orthogonality_relative", None, "", None, orth, None, if orth <= 1e-10 { "ok" } else { "violated" });
    asserts.push(Assertion::new("orthogonality", orth <= 1e-10, format!("max relative {orth:e}")));
    let mut s = StreamKey::new(seed, 4, 0).stream(Channel::Sampling);
    let mut elem = 0usize;
    for _ in 0..100_000 {
        let (a, b) = (3.0 * s.normal(), 3.0 * s.normal());
        if elementary_cubic_gap(a, b) < -1e-12 * (a.abs() + b.abs()).powi(4) {
            elem += 1;
        }
    }
    sink.push("elementary_violations", None, "", None, elem as f64, None, if elem == 0 { "ok" } else { "violated" });
    asserts.push(Assertion::new("elementary_inequality", elem == 0, format!("{elem} violations")));
    if m.kind() != ModelKind::Burgers {
        sink.push("onesided", None, "", None, f64::NAN, None, "not_applicable");
        return Ok(asserts);
    }
    for (form, name) in [(OneSidedForm::Dissipativity, "dissipativity"), (OneSidedForm::GalerkinDrift, "galerkin_drift")] {
        let worst = map_indexed(cfg.run.execution, samples, |i| onesided_residual(&field(i, 0), &field(i, 1), m, form))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let ok = worst <= 1e-10;
        sink.push("max_residual", None, name, None, worst, None, if ok { "ok" } else { "violated" });
        asserts.push(Assertion::new(name, ok, format!("max residual {worst:e}")));
    }
    Ok(asserts)
}

fn invariance_experiment(cfg: &ExperimentConfig, m: &ModelSpec, sink: &mut RowSink) -> Result<Vec<Assertion>> {
    let traj = simulate_trajectory(m, &trajectory_config(cfg, 0))?;
    let rows = invariance_residual(&bump_suite(m.operator())?, &traj, m)?;
    let mut ok = true;
    for r in &rows {
        let pass = r.z_score.abs() <= 3.0;
        ok &= pass;
        sink.push("generator_mean", Some(0), &r.id, Some(r.z_score), r.mean, Some(r.std_error), if pass { "ok" } else { "violated" });
    }
    Ok(vec![Assertion::new("infinitesimal_invariance", ok, format!("{} test functions", rows.len()))])
}

fn run_single(exp: Experiment, cfg: &ExperimentConfig, m: &ModelSpec) -> Result<Outcome> {
    let mut sink = RowSink::new(exp.tag());
    let assertions = match exp {
        Experiment::ConvBound => conv_bound(cfg, m, &mut sink)?,
        Experiment::ZSeries => z_series_experiment(cfg, m, &mut sink)?,
        Experiment::Simulate => simulate_experiment(cfg, m, &mut sink)?,
        Experiment::Moments => moments_experiment(cfg, m, &mut sink)?,
        Experiment::Lyapunov => lyapunov_experiment(cfg, m, &mut sink)?,
        Experiment::Onesided => onesided_experiment(cfg, m, &mut sink)?,
        Experiment::Invariance => invariance_experiment(cfg, m, &mut sink)?,
        Experiment::All => unreachable!("expanded by run_experiment"),
    };
    let assertions = assertions
        .into_iter()
        .map(|a| Assertion { name: format!("{}.{}", exp.tag(), a.name), ..a })
        .collect();
    Ok(Outcome { rows: sink.into_rows(), assertions })
}

/// Runs the configured experiment (every experiment for `all`).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let m = cfg.model_spec()?;
    let list: Vec<Experiment> = match cfg.experiment {
        Experiment::All => Experiment::SINGLE.to_vec(),
        e => vec![e],
    };
    let mut out = Outcome { rows: Vec::new(), assertions: Vec::new() };
    for e in list {
        let o = run_single(e, cfg, &m)?;
        out.rows.extend(o.rows);
        out.assertions.extend(o.assertions);
    }
    Ok(out)
}

/// Files written by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
}

pub fn output_files(cfg: &ExperimentConfig, dir: &Path) -> RunFiles {
    let tag = cfg.experiment.tag();
    RunFiles { results: dir.join(format!("{tag}.csv")), summary: dir.join(format!("{tag}.summary.json")) }
}

/// Runs the experiment and writes the results CSV and JSON summary.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<(Summary, RunFiles)> {
    let start = Instant::now();
    let outcome = run_experiment(cfg)?;
    std::fs::create_dir_all(dir)?;
    let files = output_files(cfg, dir);
    write_results_file(&files.results, &outcome.rows)?;
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.tag().to_string(),
        seed: cfg.run.seed,
        config: serde_json::to_value(cfg)?,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        passed: outcome.passed(),
        assertions: outcome.assertions,
    };
    write_summary_file(&files.summary, &summary)?;
    Ok((summary, files))
}

/// Process exit status for a finished run or its error.
pub fn exit_status(result: &Result<Summary>) -> i32 {
    match result {
        Ok(s) if s.passed => 0,
        Ok(_) => 1,
        Err(Error::Config(_)) => 2,
        Err(Error::BlowUp { .. }) => 3,
        Err(_) => 1,
    }
}
