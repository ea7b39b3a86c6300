//! Versioned JSON experiment configs, one file per run.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use jumpflow::drift::DriftSpec;
use jumpflow::grid::Lattice;
use jumpflow::levy_models::LevyModel;
use jumpflow::resolvent::{McConfig, PicardConfig};
use jumpflow::samplers::{MarginalMethod, PathSpec};
use jumpflow::sde_engine::{NoiseConfig, SmallJumpMap};
use jumpflow::semigroup::TestFunction;

pub const CONFIG_VERSION: u32 = 1;

/// Top-level config file: `{"version": 1, "seed": …, "experiment": "…", …}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    /// Root of every random stream used by the run.
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    SymbolCheck(SymbolCheckConfig),
    Sample(SampleConfig),
    SemigroupDecay(SemigroupDecayConfig),
    Resolvent(ResolventConfig),
    Transform(TransformRunConfig),
    Simulate(SimulateConfig),
    Flow(FlowRunConfig),
    Dispersion(DispersionRunConfig),
    RegimeSweep(RegimeSweepConfig),
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::SymbolCheck(_) => "symbol-check",
            Self::Sample(_) => "sample",
            Self::SemigroupDecay(_) => "semigroup-decay",
            Self::Resolvent(_) => "resolvent",
            Self::Transform(_) => "transform",
            Self::Simulate(_) => "simulate",
            Self::Flow(_) => "flow",
            Self::Dispersion(_) => "dispersion",
            Self::RegimeSweep(_) => "regime-sweep",
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(CONFIG_VERSION) => {}
            Some(v) => bail!("unsupported config version {v}, expected {CONFIG_VERSION}"),
            None => bail!("config is missing \"version\""),
        }
        serde_json::from_value(value).context("config does not match the experiment schema")
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `Lattice::with_spacing(dimension, radius, spacing)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub radius: f64,
    pub spacing: f64,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        Ok(Lattice::with_spacing(self.dimension, self.radius, self.spacing)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolCheckConfig {
    pub model: LevyModel,
    /// Sector bounds are probed on `|y| ∈ (m, 100m]`.
    #[serde(default = "default_sector_m")]
    pub m: f64,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    /// Expected `c1 = c2` (isotropic models), checked to 1e-6.
    #[serde(default)]
    pub expected_sector_constant: Option<f64>,
    /// `(σ, expected ∫_{|x|≤1} |x|^σ ν(dx))`, checked to 1e-6.
    #[serde(default)]
    pub expected_moment: Option<(f64, f64)>,
}

fn default_sector_m() -> f64 {
    10.0
}

fn default_probes() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub model: LevyModel,
    pub t: f64,
    pub n_samples: usize,
    pub method: MarginalMethod,
    pub probes: Vec<Vec<f64>>,
    /// Also write one sampled path.
    #[serde(default)]
    pub path: Option<PathSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupDecayConfig {
    pub model: LevyModel,
    pub f: TestFunction,
    pub t_list: Vec<f64>,
    pub lattice: LatticeSpec,
    pub n_mc: usize,
    #[serde(default = "default_step_factor")]
    pub step_factor: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_step_factor() -> f64 {
    0.1
}

fn default_slack() -> f64 {
    0.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchauderSpec {
    pub k_list: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventConfig {
    pub model: LevyModel,
    /// Hölder drift; ignored when `k` is given.
    #[serde(default)]
    pub drift: Option<DriftSpec>,
    /// Constant drift vector.
    #[serde(default)]
    pub k: Option<Vec<f64>>,
    pub f: TestFunction,
    pub lambda: f64,
    pub lattice: LatticeSpec,
    #[serde(default = "default_picard")]
    pub picard: PicardSettings,
    #[serde(default)]
    pub schauder: Option<SchauderSpec>,
}

/// Picard and Monte Carlo settings; the seed comes from the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub quad_tol: f64,
    pub noise_tol: f64,
    pub n_mc: usize,
    pub batches: usize,
}

pub fn default_picard() -> PicardSettings {
    let p = PicardConfig::default();
    PicardSettings {
        tol: p.tol,
        max_iter: p.max_iter,
        quad_tol: p.quad_tol,
        noise_tol: p.noise_tol,
        n_mc: p.mc.n_mc,
        batches: p.mc.batches,
    }
}

impl PicardSettings {
    pub fn with_seed(&self, seed: u64) -> PicardConfig {
        PicardConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            quad_tol: self.quad_tol,
            noise_tol: self.noise_tol,
            mc: McConfig {
                n_mc: self.n_mc,
                batches: self.batches,
                seed,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRunConfig {
    pub model: LevyModel,
    pub drift: DriftSpec,
    pub lattice: LatticeSpec,
    #[serde(default = "jumpflow::zvonkin::default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default = "default_picard")]
    pub picard: PicardSettings,
    #[serde(default)]
    pub allow_counterexample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub transform: TransformRunConfig,
    pub x0: Vec<f64>,
    pub h_list: Vec<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    pub eps_cut: f64,
    #[serde(default)]
    pub map: SmallJumpMap,
    /// Allowed relative increase per halving before the gate fails.
    #[serde(default = "default_allowance")]
    pub allowance: f64,
}

fn default_allowance() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRunConfig {
    pub model: LevyModel,
    pub drift: DriftSpec,
    pub starts: Vec<f64>,
    pub horizon: f64,
    pub h: f64,
    pub n_runs: usize,
    pub noise: NoiseConfig,
    #[serde(default = "default_fd_delta")]
    pub fd_delta: f64,
    #[serde(default)]
    pub keep_runs: usize,
}

fn default_fd_delta() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRunConfig {
    pub model: LevyModel,
    pub drift: DriftSpec,
    pub x0: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub h_list: Vec<f64>,
    pub horizon: f64,
    pub n_mc: usize,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub allow_counterexample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSweepConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Isotropic noise scale.
    #[serde(default = "one")]
    pub scale: f64,
    pub kappa: f64,
    pub bound: f64,
    pub delta_list: Vec<f64>,
    pub h: f64,
    pub horizon: f64,
    pub n_mc: usize,
    /// A cell is flagged as a plateau when the log-log slope of the
    /// statistic against the offset falls below this value.
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
}

fn one() -> f64 {
    1.0
}

fn default_slope_threshold() -> f64 {
    0.85
}
