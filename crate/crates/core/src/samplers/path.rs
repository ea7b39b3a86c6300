//! Jump paths from the Lévy–Itô decomposition.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::increments::{has_exact_marginal, sample_marginal};
use super::radial_sampler::RadialSampler;
use crate::error::{Error, Result};
use crate::levy_models::{normalized, Angular, Decomposition, LevyModel};
use crate::rng::{SeedTree, Stream};

/// How jumps of size at most `eps_cut` are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpScheme {
    /// Exact increments of the whole process; no jumps are recorded.
    Exact,
    /// Gaussian with covariance `∫_{|z|≤ε} z zᵀ ν(dz)` per unit time.
    GaussianAr,
    /// Small jumps are discarded.
    Drop,
    /// `GaussianAr` when σ(ε)/ε ≥ 1, otherwise `Drop`, where
    /// σ(ε)² = tr ∫_{|z|≤ε} z zᵀ ν(dz) / d.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub horizon: f64,
    pub n_steps: usize,
    /// Required unless the scheme is `Exact`.
    pub eps_cut: Option<f64>,
    pub scheme: SmallJumpScheme,
    /// Upper bound on the expected number of recorded jumps per path.
    #[serde(default = "default_jump_budget")]
    pub jump_budget: f64,
}

fn default_jump_budget() -> f64 {
    1e6
}

impl PathSpec {
    pub fn levy_ito(horizon: f64, n_steps: usize, eps_cut: f64, scheme: SmallJumpScheme) -> Self {
        Self {
            horizon,
            n_steps,
            eps_cut: Some(eps_cut),
            scheme,
            jump_budget: default_jump_budget(),
        }
    }

    pub fn exact(horizon: f64, n_steps: usize) -> Self {
        Self {
            horizon,
            n_steps,
            eps_cut: None,
            scheme: SmallJumpScheme::Exact,
            jump_budget: default_jump_budget(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub eps_cut: Option<f64>,
    /// Scheme actually used (`Auto` is resolved).
    pub scheme: SmallJumpScheme,
    /// Drift `−∫_{ε<|z|≤1} z ν(dz)` added per unit time; zero for symmetric ν.
    pub compensation_drift: Vec<f64>,
    /// `ν({|z| > ε})`.
    pub big_jump_intensity: f64,
    /// `tr ∫_{|z|≤ε} z zᵀ ν(dz)`.
    pub small_jump_variance_rate: f64,
    /// `sqrt(T · tr ∫_{|z|≤ε} z zᵀ ν(dz))`: L² size of what `Drop` discards
    /// (and of what `GaussianAr` replaces).
    pub small_jump_l2_bound: f64,
    pub seed: u64,
}

/// A sampled noise trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpPath {
    pub dimension: usize,
    pub horizon: f64,
    /// `n_steps + 1` points, `grid[0] = 0`, `grid[n] = T`.
    pub grid: Vec<f64>,
    /// Row-major `n_steps × d`: total increment per cell.
    pub increments: Vec<f64>,
    /// Row-major `n_steps × d`: increment per cell without recorded jumps
    /// and without compensation drift.
    pub small_increments: Vec<f64>,
    /// Sorted jump times in (0, T].
    pub jump_times: Vec<f64>,
    /// Row-major `n_jumps × d`.
    pub jump_sizes: Vec<f64>,
    pub meta: PathMeta,
}

impl JumpPath {
    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn small_increment(&self, k: usize) -> &[f64] {
        &self.small_increments[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn jump(&self, j: usize) -> &[f64] {
        &self.jump_sizes[j * self.dimension..(j + 1) * self.dimension]
    }

    /// Grid cell containing time `t`: `grid[k] < t ≤ grid[k+1]`.
    pub fn cell_of(&self, t: f64) -> usize {
        let n = self.n_steps();
        let k = (t / self.step()).ceil() as usize;
        k.clamp(1, n) - 1
    }

    /// `L_{t_k}` for every grid point, row-major `(n+1) × d`.
    pub fn values(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut out = vec![0.0; (self.n_steps() + 1) * d];
        for k in 0..self.n_steps() {
            for i in 0..d {
                out[(k + 1) * d + i] = out[k * d + i] + self.increments[k * d + i];
            }
        }
        out
    }

    /// `L_T`.
    pub fn terminal(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut out = vec![0.0; d];
        for k in 0..self.n_steps() {
            for i in 0..d {
                out[i] += self.increments[k * d + i];
            }
        }
        out
    }

    /// Same noise on a grid `factor` times coarser. Increments are summed;
    /// recorded jumps are unchanged.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let n = self.n_steps();
        if factor == 0 || n % factor != 0 {
            return Err(Error::InvalidArgument(format!("cannot coarsen {n} steps by {factor}")));
        }
        let d = self.dimension;
        let m = n / factor;
        let mut inc = vec![0.0; m * d];
        let mut small = vec![0.0; m * d];
        for k in 0..n {
            for i in 0..d {
                inc[(k / factor) * d + i] += self.increments[k * d + i];
                small[(k / factor) * d + i] += self.small_increments[k * d + i];
            }
        }
        Ok(Self {
            grid: uniform_grid(self.horizon, m),
            increments: inc,
            small_increments: small,
            ..self.clone()
        })
    }
}

pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 }).collect()
}

/// Precomputed pieces of the Lévy–Itô sampler for one `(model, ε)`.
#[derive(Clone, Debug)]
pub struct JumpSampler {
    dimension: usize,
    eps: f64,
    intensity: f64,
    radius: RadialSampler,
    directions: DirectionSampler,
    /// Lower Cholesky factor of the small-jump covariance rate.
    chol: Vec<f64>,
    variance_rate: f64,
    drift: Vec<f64>,
}

#[derive(Clone, Debug)]
enum DirectionSampler {
    Uniform,
    Discrete { dirs: Vec<Vec<f64>>, index: WeightedIndex<f64> },
}

impl JumpSampler {
    pub fn new(model: &LevyModel, eps: f64) -> Result<Self> {
        model.validate()?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps_cut = {eps} outside (0, 1]")));
        }
        let dec = model.decomposition();
        let d = model.dimension;
        let intensity = dec.tail_intensity(eps)?;
        let cov = dec.small_jump_covariance(eps)?;
        let variance_rate = (0..d).map(|i| cov[i * d + i]).sum();
        let chol = cholesky(&cov, d);
        let drift = compensation_drift(&dec, eps, d)?;
        let directions = match &dec.angular {
            Angular::Uniform { .. } => DirectionSampler::Uniform,
            Angular::Discrete(m) => DirectionSampler::Discrete {
                dirs: m.directions.clone(),
                index: WeightedIndex::new(&m.weights).map_err(|e| Error::InvalidModel(e.to_string()))?,
            },
        };
        Ok(Self {
            dimension: d,
            eps,
            intensity,
            radius: RadialSampler::new(&dec.profile, eps)?,
            directions,
            chol,
            variance_rate,
            drift,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn variance_rate(&self) -> f64 {
        self.variance_rate
    }

    /// One jump drawn from ν restricted to |z| > ε and normalized.
    pub fn sample_jump(&self, rng: &mut Stream) -> Vec<f64> {
        let s = self.radius.sample(rng);
        let xi = match &self.directions {
            DirectionSampler::Uniform => loop {
                let g: Vec<f64> = (0..self.dimension).map(|_| rng.sample(StandardNormal)).collect();
                if g.iter().any(|v: &f64| *v != 0.0) {
                    break normalized(&g);
                }
            },
            DirectionSampler::Discrete { dirs, index } => dirs[index.sample(rng)].clone(),
        };
        xi.into_iter().map(|v| v * s).collect()
    }

    /// Gaussian with covariance `dt · Σ(ε)`.
    pub fn sample_small(&self, dt: f64, rng: &mut Stream) -> Vec<f64> {
        let d = self.dimension;
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let sd = dt.sqrt();
        (0..d)
            .map(|i| sd * (0..=i).map(|j| self.chol[i * d + j] * g[j]).sum::<f64>())
            .collect()
    }
}

fn compensation_drift(dec: &Decomposition, eps: f64, d: usize) -> Result<Vec<f64>> {
    match &dec.angular {
        Angular::Uniform { .. } => Ok(vec![0.0; d]),
        Angular::Discrete(m) => {
            if m.is_symmetric() {
                return Ok(vec![0.0; d]);
            }
            let radial = dec.profile.moment_between(1.0, eps, 1.0)?;
            let mut out = vec![0.0; d];
            for (xi, w) in m.directions.iter().zip(&m.weights) {
                for i in 0..d {
                    out[i] -= radial * w * xi[i];
                }
            }
            Ok(out)
        }
    }
}

/// Lower Cholesky factor of a positive semidefinite matrix; rows or
/// columns with vanishing pivots are zeroed.
fn cholesky(a: &[f64], d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                l[i * d + i] = if s > 0.0 { s.sqrt() } else { 0.0 };
            } else if l[j * d + j] > 0.0 {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    l
}

/// Smallest ε (to about 1%) with `T·ν(|z|>ε) ≤ budget`.
fn suggest_eps(dec: &Decomposition, horizon: f64, budget: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    if horizon * dec.tail_intensity(hi)? > budget {
        return Ok(1.0);
    }
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        if horizon * dec.tail_intensity(mid)? > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Samples a path on `spec.n_steps` uniform cells.
pub fn sample_path(model: &LevyModel, spec: &PathSpec, seed: SeedTree) -> Result<JumpPath> {
    model.validate()?;
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) || spec.n_steps == 0 {
        return Err(Error::InvalidArgument("horizon must be positive and n_steps >= 1".into()));
    }
    let mut rng = seed.stream();
    if spec.scheme == SmallJumpScheme::Exact {
        return sample_exact_path(model, spec, seed.seed(), &mut rng);
    }
    let eps = spec
        .eps_cut
        .ok_or_else(|| Error::InvalidArgument("eps_cut is required for Lévy–Itô paths".into()))?;
    let sampler = JumpSampler::new(model, eps)?;
    sample_levy_ito(&sampler, spec, seed.seed(), &mut rng, model)
}

/// Lévy–Itô path with a prebuilt sampler (tables reused across paths).
pub fn sample_path_with(model: &LevyModel, sampler: &JumpSampler, spec: &PathSpec, seed: SeedTree) -> Result<JumpPath> {
    let mut rng = seed.stream();
    sample_levy_ito(sampler, spec, seed.seed(), &mut rng, model)
}

fn sample_exact_path(model: &LevyModel, spec: &PathSpec, seed: u64, rng: &mut Stream) -> Result<JumpPath> {
    if !has_exact_marginal(model) {
        return Err(Error::NotApplicable(format!(
            "{:?} has no exact increment sampler; choose gaussian_ar or drop",
            model.class
        )));
    }
    let d = model.dimension;
    let n = spec.n_steps;
    let dt = spec.horizon / n as f64;
    let mut inc = Vec::with_capacity(n * d);
    for _ in 0..n {
        inc.extend(sample_marginal(model, dt, rng)?);
    }
    Ok(JumpPath {
        dimension: d,
        horizon: spec.horizon,
        grid: uniform_grid(spec.horizon, n),
        small_increments: inc.clone(),
        increments: inc,
        jump_times: Vec::new(),
        jump_sizes: Vec::new(),
        meta: PathMeta {
            eps_cut: None,
            scheme: SmallJumpScheme::Exact,
            compensation_drift: vec![0.0; d],
            big_jump_intensity: 0.0,
            small_jump_variance_rate: 0.0,
            small_jump_l2_bound: 0.0,
            seed,
        },
    })
}

fn sample_levy_ito(sampler: &JumpSampler, spec: &PathSpec, seed: u64, rng: &mut Stream, model: &LevyModel) -> Result<JumpPath> {
    let d = sampler.dimension;
    let n = spec.n_steps;
    let horizon = spec.horizon;
    let dt = horizon / n as f64;
    let expected = sampler.intensity * horizon;
    if expected > spec.jump_budget {
        let dec = model.decomposition();
        return Err(Error::JumpBudget {
            intensity: sampler.intensity,
            budget: spec.jump_budget / horizon,
            suggested_eps: suggest_eps(&dec, horizon, spec.jump_budget)?,
        });
    }
    let scheme = match spec.scheme {
        SmallJumpScheme::Auto => {
            let sigma = (sampler.variance_rate / d as f64).sqrt();
            if sigma >= sampler.eps {
                SmallJumpScheme::GaussianAr
            } else {
                SmallJumpScheme::Drop
            }
        }
        SmallJumpScheme::Exact => unreachable!(),
        s => s,
    };

    // Jumps: Poisson count, uniform times, then sizes in time order.
    let count = if expected > 0.0 {
        Poisson::new(expected).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut jump_times: Vec<f64> = (0..count).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
    jump_times.sort_by(f64::total_cmp);
    let mut jump_sizes = Vec::with_capacity(count * d);
    for _ in 0..count {
        jump_sizes.extend(sampler.sample_jump(rng));
    }

    let mut small = vec![0.0; n * d];
    if scheme == SmallJumpScheme::GaussianAr {
        for k in 0..n {
            let g = sampler.sample_small(dt, rng);
            small[k * d..(k + 1) * d].copy_from_slice(&g);
        }
    }
    let mut inc = small.clone();
    for k in 0..n {
        for i in 0..d {
            inc[k * d + i] += sampler.drift[i] * dt;
        }
    }
    let grid = uniform_grid(horizon, n);
    let mut path = JumpPath {
        dimension: d,
        horizon,
        grid,
        increments: Vec::new(),
        small_increments: small,
        jump_times,
        jump_sizes,
        meta: PathMeta {
            eps_cut: Some(sampler.eps),
            scheme,
            compensation_drift: sampler.drift.clone(),
            big_jump_intensity: sampler.intensity,
            small_jump_variance_rate: sampler.variance_rate,
            small_jump_l2_bound: (horizon * sampler.variance_rate).sqrt(),
            seed,
        },
    };
    for j in 0..path.n_jumps() {
        let k = path.cell_of(path.jump_times[j]);
        for i in 0..d {
            inc[k * d + i] += path.jump_sizes[j * d + i];
        }
    }
    path.increments = inc;
    Ok(path)
}

/// `n` independent paths; path `i` uses `seeds.child(i)`.
pub fn sample_paths(model: &LevyModel, spec: &PathSpec, seeds: SeedTree, n: usize) -> Result<Vec<JumpPath>> {
    if spec.scheme == SmallJumpScheme::Exact {
        return (0..n)
            .into_par_iter()
            .map(|i| sample_path(model, spec, seeds.child(i as u64)))
            .collect();
    }
    let eps = spec
        .eps_cut
        .ok_or_else(|| Error::InvalidArgument("eps_cut is required for Lévy–Itô paths".into()))?;
    let sampler = JumpSampler::new(model, eps)?;
    (0..n)
        .into_par_iter()
        .map(|i| sample_path_with(model, &sampler, spec, seeds.child(i as u64)))
        .collect()
}
