//! Monte Carlo evaluation of `R_t f(x) = E f(x + L_t)`, its drift-shifted
//! version `P_t f(x) = R_t f(· + t k)(x)`, and an empirical check of the
//! gradient bound `‖D R_t f‖₀ ≤ c t^{−1/α} ‖f‖₀`.
//!
//! Every node reuses one batch of `L_t` draws (common random numbers), so
//! differences between nearby nodes carry much less noise than the values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Lattice, Provenance};
use crate::levy_models::LevyModel;
use crate::rng::SeedTree;
use crate::samplers::{sample_marginals, MarginalMethod};

/// A bounded function on ℝ^d that can be evaluated anywhere.
pub trait Field: Sync {
    fn eval(&self, x: &[f64]) -> f64;

    /// Value plus whether the evaluation had to clamp `x` into a box.
    fn eval_checked(&self, x: &[f64]) -> (f64, bool) {
        (self.eval(x), false)
    }

    /// An upper bound for `|f|`.
    fn bound(&self) -> f64;
}

/// Closed-form test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `cos⟨ω, x⟩`
    Cos { freq: Vec<f64> },
    /// `sin⟨ω, x⟩`
    Sin { freq: Vec<f64> },
    /// Radial plateau: 1 for `|x − c| ≤ a − w/2`, 0 beyond `a + w/2`,
    /// cubic smoothstep in between.
    Bump { center: Vec<f64>, half_width: f64, edge: f64 },
    /// `clamp(x_axis, −cap, cap)`
    Ramp { axis: usize, cap: f64 },
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Field for TestFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Cos { freq } => dot(freq, x).cos(),
            Self::Sin { freq } => dot(freq, x).sin(),
            Self::Bump {
                center,
                half_width,
                edge,
            } => {
                let r = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                smoothstep((half_width + 0.5 * edge - r) / edge)
            }
            Self::Ramp { axis, cap } => x[*axis].clamp(-cap, *cap),
        }
    }

    fn bound(&self) -> f64 {
        match self {
            Self::Constant { value } => value.abs(),
            Self::Cos { .. } | Self::Sin { .. } | Self::Bump { .. } => 1.0,
            Self::Ramp { cap, .. } => *cap,
        }
    }
}

impl Field for GridFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        GridFunction::eval(self, x)
    }

    fn eval_checked(&self, x: &[f64]) -> (f64, bool) {
        let mut out = [0.0; 64];
        let clamped = self.eval_into(x, &mut out[..self.components]);
        (out[0], clamped)
    }

    fn bound(&self) -> f64 {
        self.sup_norm()
    }
}

/// Wraps a closure with a caller-asserted bound.
pub struct FnField<F> {
    pub f: F,
    pub bound: f64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Field for FnField<F> {
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn bound(&self) -> f64 {
        self.bound
    }
}

/// `n` draws of `L_t`, reused for every node.
#[derive(Clone, Debug)]
pub struct NoiseBatch {
    pub dimension: usize,
    pub t: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl NoiseBatch {
    pub fn draw(model: &LevyModel, t: f64, n: usize, seeds: SeedTree) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n_mc must be positive".into()));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        let samples = sample_marginals(model, t, n, MarginalMethod::default_for(model), seeds)?;
        Ok(Self {
            dimension: model.dimension,
            t,
            samples,
            seed: seeds.seed(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dimension..(j + 1) * self.dimension]
    }
}

struct NodeStat {
    mean: f64,
    se: f64,
    clamped: usize,
}

/// Mean and standard error of `g(j)` over the batch, summed in index order.
fn batch_mean(n: usize, mut g: impl FnMut(usize) -> (f64, bool)) -> NodeStat {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut clamped = 0;
    for j in 0..n {
        let (v, c) = g(j);
        sum += v;
        sum2 += v * v;
        clamped += c as usize;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    NodeStat {
        mean,
        se: (var / n as f64).sqrt(),
        clamped,
    }
}

/// `E f(x + shift + L)` at every lattice node with the given batch.
pub fn apply_batch(f: &dyn Field, lattice: &Lattice, batch: &NoiseBatch, shift: &[f64]) -> Result<GridFunction> {
    let d = lattice.dimension;
    if batch.dimension != d || shift.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if batch.dimension != d { batch.dimension } else { shift.len() },
        });
    }
    let n = batch.len();
    let stats: Vec<NodeStat> = (0..lattice.len())
        .into_par_iter()
        .map(|node| {
            let base: Vec<f64> = lattice.point(node).iter().zip(shift).map(|(x, s)| x + s).collect();
            let mut y = vec![0.0; d];
            batch_mean(n, |j| {
                for (k, l) in batch.sample(j).iter().enumerate() {
                    y[k] = base[k] + l;
                }
                f.eval_checked(&y)
            })
        })
        .collect();
    let clamped: usize = stats.iter().map(|s| s.clamped).sum();
    let provenance = Provenance {
        description: format!("E f(x + L_t), t = {}", batch.t),
        n_mc: n,
        seed: Some(batch.seed),
        standard_error: stats.iter().map(|s| s.se).fold(0.0, f64::max),
        out_of_box_fraction: clamped as f64 / (n * lattice.len()) as f64,
        noise_warning: false,
    };
    GridFunction::new(*lattice, 1, stats.iter().map(|s| s.mean).collect(), provenance)
}

/// `R_t f` on `lattice` from `n_mc` common draws of `L_t`. At `t = 0` this is
/// the restriction of `f` to the lattice.
pub fn apply_semigroup(model: &LevyModel, f: &dyn Field, t: f64, lattice: &Lattice, n_mc: usize, seeds: SeedTree) -> Result<GridFunction> {
    apply_shifted(model, f, t, &vec![0.0; model.dimension], lattice, n_mc, seeds)
}

/// `P_t f(x) = E f(x + t k + L_t)`.
pub fn apply_shifted(
    model: &LevyModel,
    f: &dyn Field,
    t: f64,
    k: &[f64],
    lattice: &Lattice,
    n_mc: usize,
    seeds: SeedTree,
) -> Result<GridFunction> {
    if lattice.dimension != model.dimension {
        return Err(Error::DimensionMismatch {
            expected: model.dimension,
            got: lattice.dimension,
        });
    }
    if t == 0.0 && n_mc > 0 {
        let mut g = GridFunction::from_fn(*lattice, 1, |x, o| o[0] = f.eval(x));
        g.provenance.n_mc = n_mc;
        g.provenance.seed = Some(seeds.seed());
        return Ok(g);
    }
    let batch = NoiseBatch::draw(model, t, n_mc, seeds)?;
    let shift: Vec<f64> = k.iter().map(|v| v * t).collect();
    apply_batch(f, lattice, &batch, &shift)
}

/// Central differences `(R_t f(x + s e_a) − R_t f(x − s e_a)) / 2s` at every
/// node, with one batch for both sides. Output has d components per node.
/// The provenance noise flag is set when the largest standard error exceeds
/// `noise_tol` times the sup norm of the result.
#[allow(clippy::too_many_arguments)]
pub fn gradient_semigroup(
    model: &LevyModel,
    f: &dyn Field,
    t: f64,
    lattice: &Lattice,
    n_mc: usize,
    seeds: SeedTree,
    fd_step: f64,
    noise_tol: f64,
) -> Result<GridFunction> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("gradient needs t > 0, got {t}")));
    }
    if !(fd_step > 0.0) {
        return Err(Error::InvalidArgument("fd_step must be positive".into()));
    }
    let d = model.dimension;
    if lattice.dimension != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: lattice.dimension,
        });
    }
    let batch = NoiseBatch::draw(model, t, n_mc, seeds)?;
    let n = batch.len();
    let stats: Vec<Vec<NodeStat>> = (0..lattice.len())
        .into_par_iter()
        .map(|node| {
            let x = lattice.point(node);
            let mut y = vec![0.0; d];
            (0..d)
                .map(|a| {
                    batch_mean(n, |j| {
                        let l = batch.sample(j);
                        for k in 0..d {
                            y[k] = x[k] + l[k];
                        }
                        y[a] += fd_step;
                        let (hi, c1) = f.eval_checked(&y);
                        y[a] -= 2.0 * fd_step;
                        let (lo, c2) = f.eval_checked(&y);
                        ((hi - lo) / (2.0 * fd_step), c1 || c2)
                    })
                })
                .collect()
        })
        .collect();
    let values: Vec<f64> = stats.iter().flat_map(|s| s.iter().map(|v| v.mean)).collect();
    let se = stats.iter().flatten().map(|s| s.se).fold(0.0, f64::max);
    let clamped: usize = stats.iter().flatten().map(|s| s.clamped).sum();
    let mut g = GridFunction::new(
        *lattice,
        d,
        values,
        Provenance {
            description: format!("central differences of E f(x + L_t), t = {t}, step = {fd_step}"),
            n_mc: n,
            seed: Some(batch.seed),
            standard_error: se,
            out_of_box_fraction: clamped as f64 / (n * d * lattice.len()) as f64,
            noise_warning: false,
        },
    )?;
    g.provenance.noise_warning = se > noise_tol * g.sup_norm();
    Ok(g)
}

/// Settings for [`verify_gradient_decay`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayConfig {
    pub lattice: Lattice,
    pub n_mc: usize,
    pub seed: u64,
    /// Finite-difference step as a multiple of `t^{1/α}` (never below the
    /// lattice spacing). Keeping the step proportional to the natural
    /// length scale makes the relative noise the same at every `t`.
    pub step_factor: f64,
    /// Allowed excess over the exponent `−1/α`.
    pub slack: f64,
}

impl DecayConfig {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            n_mc: 100_000,
            seed: 0,
            step_factor: 0.1,
            slack: 0.15,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub slope: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit("non-positive values cannot be fitted on a log scale".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Fits `log ‖D R_t f‖₀` against `log t` and passes when the slope is at
/// least `−1/α − slack`.
pub fn verify_gradient_decay(model: &LevyModel, f: &dyn Field, t_list: &[f64], config: &DecayConfig) -> Result<DecayReport> {
    if t_list.len() < 4 {
        return Err(Error::InvalidArgument("gradient decay needs at least 4 times".into()));
    }
    if t_list.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::InvalidArgument("times must lie in (0, 1]".into()));
    }
    let alpha = model.alpha;
    let h = config.lattice.spacing();
    let seeds = SeedTree::new(config.seed);
    let mut norms = Vec::new();
    let mut ses = Vec::new();
    for (i, &t) in t_list.iter().enumerate() {
        let step = (config.step_factor * t.powf(1.0 / alpha)).max(h);
        let g = gradient_semigroup(model, f, t, &config.lattice, config.n_mc, seeds.child(i as u64), step, 0.1)?;
        norms.push(g.sup_norm());
        ses.push(g.provenance.standard_error);
    }
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || (max - min) <= 1e-12 * max {
        return Err(Error::DegenerateFit("gradient norms are constant".into()));
    }
    let slope = log_log_slope(t_list, &norms)?;
    let threshold = -1.0 / alpha - config.slack;
    Ok(DecayReport {
        times: t_list.to_vec(),
        norms,
        standard_errors: ses,
        slope,
        threshold,
        pass: slope >= threshold,
    })
}
