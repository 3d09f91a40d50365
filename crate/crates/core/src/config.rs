//! Experiment configuration: a TOML file plus dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::{CalibrationDesign, ModelKind, ModelSpec};
use crate::spectral::{make_dirichlet_laplacian, make_noise_weights, make_thinfilm_operator, NoiseKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ConvBound,
    ZSeries,
    Simulate,
    Moments,
    Lyapunov,
    Onesided,
    Invariance,
    All,
}

impl Experiment {
    pub const SINGLE: [Experiment; 7] = [
        Experiment::ConvBound,
        Experiment::ZSeries,
        Experiment::Simulate,
        Experiment::Moments,
        Experiment::Lyapunov,
        Experiment::Onesided,
        Experiment::Invariance,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::ConvBound => "conv-bound",
            Experiment::ZSeries => "z-series",
            Experiment::Simulate => "simulate",
            Experiment::Moments => "moments",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Onesided => "onesided",
            Experiment::Invariance => "invariance",
            Experiment::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_modes: usize,
    /// Noise exponent: `q_k = λ_k^{-2γ₀}`.
    pub gamma0: f64,
    pub nu: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Burgers, n_modes: 32, gamma0: 0.125, nu: 0.0 }
    }
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written as
/// decimal strings. Both forms are accepted on input.
mod seed_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(i) => u64::try_from(i).map_err(|_| de::Error::custom(format!("seed {i} is negative"))),
            Raw::Text(t) => t.trim().parse().map_err(|_| de::Error::custom(format!("seed `{t}` is not a u64"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub t_final: f64,
    pub dt: f64,
    pub burn_in: Option<f64>,
    pub stride: usize,
    pub replicas: usize,
    #[serde(with = "seed_serde")]
    pub seed: u64,
    pub guard: f64,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_final: 50.0,
            dt: 5e-4,
            burn_in: None,
            stride: 10,
            replicas: 2,
            seed: 1,
            guard: crate::integrator::DEFAULT_GUARD,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Hölder exponents of the scalar pathwise check.
    pub deltas: Vec<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub lambdas: Vec<f64>,
    /// Scalar coupled paths for the pathwise bound.
    pub paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    /// Accepted slack ratio.
    pub max_slack: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 0.25, 0.4],
            delta: 0.45,
            gamma: 0.025,
            epsilon: 0.05,
            lambdas: vec![1.0, 10.0, 100.0],
            paths: 200,
            n_steps: 1024,
            horizon: 1.0,
            max_slack: 1.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub p_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
    /// `β` of `‖u³‖²_β`; `None` uses `¼ + γ₀/2`.
    pub cubic_beta: Option<f64>,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self { p_list: crate::moments::DEFAULT_P_LIST.to_vec(), sigma_list: vec![0.25, 0.5], cubic_beta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub samples: usize,
    pub safety_factor: f64,
    pub structural_delta: f64,
    pub epsilon: f64,
    /// Hölder exponent of the pilot pass.
    pub holder_delta: f64,
    pub decomposition_t_final: f64,
    pub decomposition_dt: f64,
    pub tolerance_constant: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            safety_factor: 1.5,
            structural_delta: crate::integrator::DEFAULT_STRUCTURAL_DELTA,
            epsilon: crate::integrator::DEFAULT_EPSILON,
            holder_delta: 0.45,
            decomposition_t_final: 1.0,
            decomposition_dt: 1e-4,
            tolerance_constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[allow(clippy::derivable_impls)]
impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelConfig,
    pub run: RunConfig,
    pub bound: BoundConfig,
    pub moments: MomentsConfig,
    pub lyapunov: LyapunovConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::All,
            model: ModelConfig::default(),
            run: RunConfig::default(),
            bound: BoundConfig::default(),
            moments: MomentsConfig::default(),
            lyapunov: LyapunovConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let m = &self.model;
        if m.n_modes == 0 {
            return bad("model.n_modes must be at least 1".into());
        }
        if !(m.nu >= 0.0) {
            return bad(format!("model.nu = {} must be nonnegative", m.nu));
        }
        match m.kind {
            ModelKind::Burgers if !(m.gamma0 > 0.0) => return bad(format!("model.gamma0 = {} must be positive for Burgers", m.gamma0)),
            _ if !(m.gamma0 >= 0.0) || !m.gamma0.is_finite() => return bad(format!("model.gamma0 = {} must be nonnegative", m.gamma0)),
            _ => {}
        }
        let r = &self.run;
        if !(r.dt > 0.0) || !r.dt.is_finite() {
            return bad(format!("run.dt = {} must be positive", r.dt));
        }
        let burn = r.burn_in.unwrap_or(0.25 * r.t_final);
        if !(r.t_final > burn && burn >= 0.0) {
            return bad(format!("need run.t_final = {} > run.burn_in = {burn} >= 0", r.t_final));
        }
        if r.stride == 0 || r.replicas == 0 {
            return bad("run.stride and run.replicas must be at least 1".into());
        }
        if !(r.guard > 0.0) {
            return bad("run.guard must be positive".into());
        }
        let b = &self.bound;
        if !(b.delta > 0.0 && b.delta < 0.5) {
            return bad(format!("bound.delta = {} violates delta in (0, 1/2)", b.delta));
        }
        if b.deltas.is_empty() || b.deltas.iter().any(|d| !(*d > 0.0 && *d < 0.5)) {
            return bad(format!("bound.deltas = {:?} violates delta in (0, 1/2)", b.deltas));
        }
        if !(b.epsilon > 0.0) || !(b.gamma >= 0.0) {
            return bad(format!("need bound.epsilon = {} > 0 and bound.gamma = {} >= 0", b.epsilon, b.gamma));
        }
        if b.lambdas.is_empty() || b.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("bound.lambdas must be a nonempty list of positive reals".into());
        }
        if b.paths == 0 || b.n_steps < 2 || !(b.horizon > 0.0) || !(b.max_slack > 0.0) {
            return bad("bound.paths, bound.n_steps (>= 2), bound.horizon and bound.max_slack must be positive".into());
        }
        let mo = &self.moments;
        if mo.p_list.iter().any(|p| !(*p >= 0.0)) {
            return bad("moments.p_list entries must be nonnegative".into());
        }
        if mo.sigma_list.iter().any(|s| !(0.0..=0.5).contains(s)) {
            return bad("moments.sigma_list entries must lie in [0, 1/2]".into());
        }
        let l = &self.lyapunov;
        if l.samples == 0 || !(l.safety_factor >= 1.0) || !(l.structural_delta > 0.0) || !(l.epsilon > 0.0) {
            return bad("lyapunov.samples > 0, safety_factor >= 1, structural_delta > 0 and epsilon > 0 are required".into());
        }
        if !(l.holder_delta > 0.0 && l.holder_delta < 0.5) {
            return bad(format!("lyapunov.holder_delta = {} violates delta in (0, 1/2)", l.holder_delta));
        }
        if !(l.decomposition_dt > 0.0) || !(l.decomposition_t_final > l.decomposition_dt) || !(l.tolerance_constant >= 0.0) {
            return bad("lyapunov.decomposition_t_final > decomposition_dt > 0 and tolerance_constant >= 0 are required".into());
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let base = match m.kind {
            ModelKind::Burgers => make_dirichlet_laplacian(m.n_modes)?,
            ModelKind::Thinfilm => make_thinfilm_operator(m.n_modes, m.nu)?,
        };
        let op = make_noise_weights(&base, NoiseKind::PowerLaw(m.gamma0))?;
        ModelSpec::new(m.kind, op)
    }

    pub fn calibration_design(&self) -> CalibrationDesign {
        CalibrationDesign {
            samples: self.lyapunov.samples,
            safety_factor: self.lyapunov.safety_factor,
            seed: self.run.seed,
            ..CalibrationDesign::default()
        }
    }

    pub fn cubic_beta(&self) -> f64 {
        self.moments.cubic_beta.unwrap_or(0.25 + 0.5 * self.model.gamma0)
    }
}
