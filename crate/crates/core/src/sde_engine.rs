//! Jump-adapted Euler schemes for `dX = b(X) dt + dL` and for the
//! auxiliary equation of [`crate::zvonkin`], plus the flow and uniqueness
//! experiments built on them.


use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blob::Blob;
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::levy_models::LevyModel;
use crate::rng::SeedTree;
use crate::samplers::{sample_path, JumpPath, PathSpec, SmallJumpScheme};
use crate::samplers::stats::median;
use crate::zvonkin::{psi_inverse_from, AuxiliaryCoeffs};

/// States on the jump-adapted time grid. Every recorded jump contributes a
/// pre-jump and a post-jump entry at the same time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dimension: usize,
    pub times: Vec<f64>,
    /// Row-major `times.len() × d`.
    pub states: Vec<f64>,
    /// Entry index of each point of the path's uniform grid.
    pub grid_index: Vec<usize>,
}

impl Trajectory {
    fn start(x0: &[f64]) -> Self {
        Self {
            dimension: x0.len(),
            times: vec![0.0],
            states: x0.to_vec(),
            grid_index: vec![0],
        }
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// States at the uniform grid points, row-major.
    pub fn grid_states(&self) -> Vec<f64> {
        self.grid_index.iter().flat_map(|&i| self.state(i).to_vec()).collect()
    }

    /// `max_i |x_i − y_i|` over entries; the time grids must agree.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times != other.times || self.dimension != other.dimension {
            return Err(Error::InvalidArgument("trajectories live on different time grids".into()));
        }
        Ok((0..self.len())
            .map(|i| euclid(self.state(i), other.state(i)))
            .fold(0.0, f64::max))
    }

    /// Indices `i` with `times[i] == times[i+1]` and a state change: the
    /// pre-jump entries.
    pub fn discontinuities(&self) -> Vec<usize> {
        (0..self.len().saturating_sub(1))
            .filter(|&i| self.times[i] == self.times[i + 1] && self.state(i) != self.state(i + 1))
            .collect()
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One event of the jump-adapted walk over a path.
#[derive(Clone, Copy, Debug)]
enum Event {
    /// Advance by `dt` inside cell `cell`, taking fraction `frac` of its
    /// continuous increment.
    Advance { dt: f64, cell: usize, frac: f64 },
    Jump(usize),
    /// End of cell `k − 1`, i.e. grid point `k`.
    Mark(usize),
}

fn events(path: &JumpPath) -> Vec<Event> {
    let n = path.n_steps();
    let mut out = Vec::with_capacity(n + 3 * path.n_jumps());
    let mut j = 0;
    for k in 0..n {
        let (a, b) = (path.grid[k], path.grid[k + 1]);
        let width = b - a;
        let mut t = a;
        while j < path.n_jumps() && path.cell_of(path.jump_times[j]) == k {
            let s = path.jump_times[j].clamp(t, b);
            if s > t {
                out.push(Event::Advance {
                    dt: s - t,
                    cell: k,
                    frac: (s - t) / width,
                });
            }
            out.push(Event::Jump(j));
            t = s;
            j += 1;
        }
        if b > t {
            out.push(Event::Advance {
                dt: b - t,
                cell: k,
                frac: (b - t) / width,
            });
        }
        out.push(Event::Mark(k + 1));
    }
    out
}

/// Per-cell increment of `L` without recorded jumps.
fn continuous_increment(path: &JumpPath, cell: usize, out: &mut [f64]) {
    let dt = path.step();
    for (i, o) in out.iter_mut().enumerate() {
        *o = path.small_increment(cell)[i] + path.meta.compensation_drift[i] * dt;
    }
}

fn check_dims(path: &JumpPath, x0: &[f64], d: usize) -> Result<()> {
    for got in [path.dimension, x0.len()] {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    Ok(())
}

/// Euler scheme for `dX = b(X) dt + dL` with the path's jump times
/// inserted into the grid, so each recorded jump is applied at its own time.
pub fn euler_solve(path: &JumpPath, b: &DriftSpec, x0: &[f64]) -> Result<Trajectory> {
    let d = path.dimension;
    check_dims(path, x0, d)?;
    b.validate(d)?;
    let mut traj = Trajectory::start(x0);
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut inc = vec![0.0; d];
    for ev in events(path) {
        match ev {
            Event::Advance { dt, cell, frac } => {
                b.eval(&x, &mut drift);
                continuous_increment(path, cell, &mut inc);
                for i in 0..d {
                    x[i] += drift[i] * dt + inc[i] * frac;
                }
            }
            Event::Jump(j) => {
                let t = path.jump_times[j];
                traj.push(t, &x);
                for (xi, z) in x.iter_mut().zip(path.jump(j)) {
                    *xi += z;
                }
                traj.push(t, &x);
            }
            Event::Mark(k) => {
                traj.push(path.grid[k], &x);
                traj.grid_index.push(traj.len() - 1);
            }
        }
    }
    Ok(traj)
}

/// How increments of size at most `r` enter the auxiliary equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMap {
    /// `Δ ↦ (I + Du(x)) Δ`, the first-order expansion of `g(y, Δ)`.
    #[default]
    Linearized,
    /// `Δ ↦ Δ`.
    Raw,
}

/// Auxiliary trajectory together with `x = ψ⁻¹(y)` at every entry.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryRun {
    pub y: Trajectory,
    pub x: Trajectory,
    /// Fraction of `u` evaluations clamped into the lattice box.
    pub leakage: f64,
    pub evaluations: u64,
}

/// Default bound on the leakage fraction before a run is rejected.
pub const LEAKAGE_THRESHOLD: f64 = 0.05;

/// Jump-adapted Euler scheme for the auxiliary equation. Between recorded
/// jumps `Y` moves by `b̃ dt` plus the mapped continuous increment; recorded
/// jumps `z` with `|z| > r` move it by exactly `g(Y−, z)`, smaller recorded
/// jumps go through `map`.
pub fn solve_auxiliary(path: &JumpPath, coeffs: &AuxiliaryCoeffs, y0: &[f64], map: SmallJumpMap) -> Result<AuxiliaryRun> {
    solve_auxiliary_with(path, coeffs, y0, map, LEAKAGE_THRESHOLD)
}

pub fn solve_auxiliary_with(
    path: &JumpPath,
    coeffs: &AuxiliaryCoeffs,
    y0: &[f64],
    map: SmallJumpMap,
    leakage_threshold: f64,
) -> Result<AuxiliaryRun> {
    let t = &coeffs.transform;
    let d = t.dimension();
    check_dims(path, y0, d)?;
    let eps = match (path.meta.scheme, path.meta.eps_cut) {
        (SmallJumpScheme::Exact, _) | (_, None) => {
            return Err(Error::InvalidArgument(
                "the auxiliary scheme needs a path with recorded jumps".into(),
            ))
        }
        (_, Some(e)) => e,
    };
    if eps > coeffs.r * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "path cut ε = {eps} exceeds the auxiliary cutoff r = {}",
            coeffs.r
        )));
    }
    let tol = coeffs.inverse_tol;
    let mut evals = 0u64;
    let mut clamped = 0u64;
    let lattice = t.u.lattice;
    let mut note = |x: &[f64]| {
        evals += 1;
        if !lattice.contains(x) {
            clamped += 1;
        }
    };
    let mut x = psi_inverse_from(t, y0, y0, tol)?.x;
    note(&x);
    let mut y = y0.to_vec();
    let mut ytraj = Trajectory::start(y0);
    let mut xtraj = Trajectory::start(&x);
    let mut drift = vec![0.0; d];
    let mut inc = vec![0.0; d];
    let mut du = vec![0.0; d * d];
    let apply_map = |x: &[f64], delta: &[f64], y: &mut [f64], du: &mut [f64]| match map {
        SmallJumpMap::Raw => {
            for (yi, z) in y.iter_mut().zip(delta) {
                *yi += z;
            }
        }
        SmallJumpMap::Linearized => {
            t.du_at(x, du);
            for i in 0..d {
                y[i] += delta[i] + (0..d).map(|l| du[i * d + l] * delta[l]).sum::<f64>();
            }
        }
    };
    for ev in events(path) {
        match ev {
            Event::Advance { dt, cell, frac } => {
                coeffs.btilde_at(&x, &mut drift);
                continuous_increment(path, cell, &mut inc);
                for v in inc.iter_mut() {
                    *v *= frac;
                }
                for i in 0..d {
                    y[i] += drift[i] * dt;
                }
                apply_map(&x, &inc, &mut y, &mut du);
                x = psi_inverse_from(t, &y, &x, tol)?.x;
                note(&x);
            }
            Event::Jump(j) => {
                let time = path.jump_times[j];
                ytraj.push(time, &y);
                xtraj.push(time, &x);
                let z = path.jump(j);
                if z.iter().map(|v| v * v).sum::<f64>().sqrt() > coeffs.r {
                    let g = coeffs.g_at(&x, &y, z);
                    for (yi, gi) in y.iter_mut().zip(&g) {
                        *yi += gi;
                    }
                } else {
                    apply_map(&x, z, &mut y, &mut du);
                }
                x = psi_inverse_from(t, &y, &x, tol)?.x;
                note(&x);
                ytraj.push(time, &y);
                xtraj.push(time, &x);
            }
            Event::Mark(k) => {
                let time = path.grid[k];
                ytraj.push(time, &y);
                xtraj.push(time, &x);
                ytraj.grid_index.push(ytraj.len() - 1);
                xtraj.grid_index.push(xtraj.len() - 1);
            }
        }
    }
    let leakage = clamped as f64 / evals as f64;
    if leakage > leakage_threshold {
        return Err(Error::Leakage {
            fraction: leakage,
            threshold: leakage_threshold,
        });
    }
    Ok(AuxiliaryRun {
        y: ytraj,
        x: xtraj,
        leakage,
        evaluations: evals,
    })
}

/// Number of uniform steps of size `h` in `[0, T]`.
pub fn steps_for(horizon: f64, h: f64) -> Result<usize> {
    if !(horizon > 0.0 && h > 0.0 && h <= horizon) {
        return Err(Error::InvalidArgument(format!("need 0 < h ≤ T, got h = {h}, T = {horizon}")));
    }
    let n = (horizon / h).round();
    if ((n * h - horizon) / horizon).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("T = {horizon} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// Coarsening factors that turn the finest step of `h_list` into each `h`.
fn coarsening_factors(horizon: f64, h_list: &[f64]) -> Result<(usize, Vec<usize>)> {
    if h_list.is_empty() {
        return Err(Error::InvalidArgument("h_list is empty".into()));
    }
    let steps: Vec<usize> = h_list.iter().map(|&h| steps_for(horizon, h)).collect::<Result<_>>()?;
    let fine = *steps.iter().max().unwrap();
    let factors = steps
        .iter()
        .map(|&n| {
            if fine % n == 0 {
                Ok(fine / n)
            } else {
                Err(Error::InvalidArgument(format!("{n} steps do not divide the finest grid of {fine}")))
            }
        })
        .collect::<Result<_>>()?;
    Ok((fine, factors))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub x0: Vec<f64>,
    pub h_list: Vec<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    /// Jumps above this size are recorded; the rest are Gaussian.
    pub eps_cut: f64,
    pub seed: u64,
    pub map: SmallJumpMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub h_list: Vec<f64>,
    /// Mean over paths of `sup_t |X_t − ψ⁻¹(Y_t)|`, one per `h`.
    pub sup_errors: Vec<f64>,
    pub median_errors: Vec<f64>,
    /// Mean over paths of the largest Itô-identity defect, one per `h`.
    pub ito_defects: Vec<f64>,
    /// Fraction of `u` evaluations, over all runs, outside the lattice box.
    pub leakage: f64,
}

/// Simulates `X` directly and `Y` from `ψ(x0)` on the same noise (one fine
/// path per repetition, coarsened to each `h`) and compares `X` with
/// `ψ⁻¹(Y)`. The Itô-identity defect of `X` is measured on the same runs.
pub fn transform_consistency(
    model: &LevyModel,
    b: &DriftSpec,
    coeffs: &AuxiliaryCoeffs,
    config: &ConsistencyConfig,
) -> Result<ConsistencyReport> {
    let (fine, factors) = coarsening_factors(config.horizon, &config.h_list)?;
    if config.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be positive".into()));
    }
    let spec = PathSpec::levy_ito(config.horizon, fine, config.eps_cut, SmallJumpScheme::GaussianAr);
    let y0 = crate::zvonkin::psi_forward(&coeffs.transform, &config.x0);
    let seeds = SeedTree::new(config.seed).named("consistency");
    let rows: Vec<(Vec<f64>, Vec<f64>, (f64, f64))> = (0..config.n_paths)
        .into_par_iter()
        .map(|m| {
            let path = sample_path(model, &spec, seeds.child(m as u64))?;
            let mut errs = Vec::new();
            let mut defects = Vec::new();
            let mut leak = (0.0, 0.0);
            for &f in &factors {
                let p = if f == 1 { path.clone() } else { path.coarsen(f)? };
                let x = euler_solve(&p, b, &config.x0)?;
                // leakage is judged over all repetitions below
                let aux = solve_auxiliary_with(&p, coeffs, &y0, config.map, 1.0)?;
                errs.push(x.sup_distance(&aux.x)?);
                defects.push(ito_defects(coeffs, &p, &x)?.max_defect);
                leak.0 += aux.leakage * aux.evaluations as f64;
                leak.1 += aux.evaluations as f64;
            }
            Ok((errs, defects, leak))
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let leakage = rows.iter().map(|r| r.2 .0).sum::<f64>() / rows.iter().map(|r| r.2 .1).sum::<f64>();
    if leakage > LEAKAGE_THRESHOLD {
        return Err(Error::Leakage {
            fraction: leakage,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    let col = |i: usize, which: usize| -> Vec<f64> {
        rows.iter().map(|r| if which == 0 { r.0[i] } else { r.1[i] }).collect()
    };
    let k = factors.len();
    Ok(ConsistencyReport {
        h_list: config.h_list.clone(),
        sup_errors: (0..k).map(|i| col(i, 0).iter().sum::<f64>() / n).collect(),
        median_errors: (0..k).map(|i| median(&col(i, 0))).collect(),
        ito_defects: (0..k).map(|i| col(i, 1).iter().sum::<f64>() / n).collect(),
        leakage,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItoReport {
    pub max_defect: f64,
    /// Defect at each point of the uniform grid.
    pub defects: Vec<f64>,
}

/// Solves `X` by [`euler_solve`] and compares both sides of
/// `u(X_t) − u(x) = x + L_t − X_t + λ∫u(X) dr + Σ_{|z|>r}[u(X−+z) − u(X−)]
///  − ∫ J_{>r}(X) dr + Σ Du(X)·ΔL_{≤r}`
/// where `J_{>r}` is the big-jump mean of `coeffs` and `ΔL_{≤r}` collects
/// the continuous increments and recorded jumps of size at most `r`.
pub fn ito_identity_check(coeffs: &AuxiliaryCoeffs, b: &DriftSpec, path: &JumpPath, x0: &[f64]) -> Result<ItoReport> {
    let x = euler_solve(path, b, x0)?;
    ito_defects(coeffs, path, &x)
}

fn ito_defects(coeffs: &AuxiliaryCoeffs, path: &JumpPath, x: &Trajectory) -> Result<ItoReport> {
    let t = &coeffs.transform;
    let d = t.dimension();
    if path.meta.scheme == SmallJumpScheme::Exact {
        return Err(Error::InvalidArgument("the Itô identity needs a path with recorded jumps".into()));
    }
    let lambda = t.lambda;
    let x0 = x.state(0).to_vec();
    let mut u = vec![0.0; d];
    let mut u2 = vec![0.0; d];
    let mut jm = vec![0.0; d];
    let mut du = vec![0.0; d * d];
    let mut inc = vec![0.0; d];
    let mut u0 = vec![0.0; d];
    t.u_at(&x0, &mut u0);
    // running RHS terms other than x + L_t − X_t
    let mut acc = vec![0.0; d];
    let mut l = vec![0.0; d];
    // index of the entry holding the current state
    let mut i = 0usize;
    let mut defects = vec![0.0];
    let linear = |xs: &[f64], delta: &[f64], acc: &mut [f64], du: &mut [f64]| {
        t.du_at(xs, du);
        for a in 0..d {
            acc[a] += (0..d).map(|c| du[a * d + c] * delta[c]).sum::<f64>();
        }
    };
    for ev in events(path) {
        match ev {
            Event::Advance { dt, cell, frac } => {
                let xs = x.state(i);
                t.u_at(xs, &mut u);
                coeffs.big_jump_mean.eval_into(xs, &mut jm);
                continuous_increment(path, cell, &mut inc);
                for v in inc.iter_mut() {
                    *v *= frac;
                }
                for a in 0..d {
                    acc[a] += (lambda * u[a] - jm[a]) * dt;
                    l[a] += inc[a];
                }
                linear(xs, &inc, &mut acc, &mut du);
            }
            Event::Jump(j) => {
                let z = path.jump(j);
                let pre = x.state(i + 1);
                for a in 0..d {
                    l[a] += z[a];
                }
                if z.iter().map(|v| v * v).sum::<f64>().sqrt() > coeffs.r {
                    let moved: Vec<f64> = pre.iter().zip(z).map(|(p, q)| p + q).collect();
                    t.u_at(pre, &mut u);
                    t.u_at(&moved, &mut u2);
                    for a in 0..d {
                        acc[a] += u2[a] - u[a];
                    }
                } else {
                    linear(pre, z, &mut acc, &mut du);
                }
                i += 2;
            }
            Event::Mark(_) => {
                i += 1;
                let xs = x.state(i);
                t.u_at(xs, &mut u);
                let defect = (0..d)
                    .map(|a| {
                        let lhs = u[a] - u0[a];
                        let rhs = x0[a] + l[a] - xs[a] + acc[a];
                        (lhs - rhs).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                defects.push(defect);
            }
        }
    }
    Ok(ItoReport {
        max_defect: defects.iter().copied().fold(0.0, f64::max),
        defects,
    })
}

/// Noise used by the flow and dispersion experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub scheme: SmallJumpScheme,
    /// Required unless `scheme` is `Exact`.
    pub eps_cut: Option<f64>,
}

impl NoiseConfig {
    pub fn exact() -> Self {
        Self {
            scheme: SmallJumpScheme::Exact,
            eps_cut: None,
        }
    }

    fn spec(&self, horizon: f64, n_steps: usize) -> PathSpec {
        PathSpec {
            eps_cut: self.eps_cut,
            scheme: self.scheme,
            ..PathSpec::exact(horizon, n_steps)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub model: LevyModel,
    pub drift: DriftSpec,
    /// Sorted starting points (row-major, `d` each).
    pub starts: Vec<f64>,
    pub horizon: f64,
    pub h: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// Offset for the finite-difference flow derivative.
    pub fd_delta: f64,
    /// Runs whose grid states are kept in the result.
    pub keep_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    /// `d = 1`: pairs `x_i < x_j` with `X^{x_i} > X^{x_j}` at some entry,
    /// summed over runs.
    pub order_violations: u64,
    /// Smallest distance between trajectories of distinct starts.
    pub min_gap: f64,
    /// Range over runs and starts of the first diagonal entry of
    /// `(X_T^{x+δe₁} − X_T^x)/δ`.
    pub fd_derivative_min: f64,
    pub fd_derivative_max: f64,
}

/// Output of [`flow_simulation`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub config: FlowConfig,
    /// Uniform grid times.
    pub times: Vec<f64>,
    /// Row-major `[run][start][grid point][d]` for the kept runs.
    pub paths: Vec<f64>,
    pub kept_runs: usize,
    pub diagnostics: FlowDiagnostics,
}

impl SimResult {
    pub fn n_starts(&self) -> usize {
        self.config.starts.len() / self.config.model.dimension
    }

    pub fn to_blob(&self) -> Result<Blob> {
        Ok(Blob::new(
            "sim_result",
            serde_json::json!({
                "config": self.config,
                "kept_runs": self.kept_runs,
                "n_starts": self.n_starts(),
                "diagnostics": self.diagnostics,
            }),
        )
        .with_array("times", self.times.clone())
        .with_array("paths", self.paths.clone()))
    }

    /// Writes `paths.blob` and `diagnostics.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let blob = dir.join("paths.blob");
        let diag = dir.join("diagnostics.json");
        self.to_blob()?.write(&blob)?;
        std::fs::write(&diag, serde_json::to_string_pretty(&self.diagnostics)?)?;
        Ok(vec![blob, diag])
    }
}

/// Simulates every start, and every start shifted by `fd_delta·e₁`, on one
/// common path per run.
pub fn flow_simulation(config: &FlowConfig) -> Result<SimResult> {
    let d = config.model.dimension;
    config.drift.validate(d)?;
    if config.starts.is_empty() || config.starts.len() % d != 0 {
        return Err(Error::InvalidArgument("starts must hold a positive multiple of d values".into()));
    }
    if config.n_runs == 0 || !(config.fd_delta > 0.0) {
        return Err(Error::InvalidArgument("n_runs and fd_delta must be positive".into()));
    }
    let n_starts = config.starts.len() / d;
    if d == 1 && config.starts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("starts must be strictly increasing in d = 1".into()));
    }
    let n = steps_for(config.horizon, config.h)?;
    let spec = config.noise.spec(config.horizon, n);
    let seeds = SeedTree::new(config.seed).named("flow");
    struct Run {
        grid: Vec<f64>,
        violations: u64,
        min_gap: f64,
        fd: (f64, f64),
    }
    let runs: Vec<Run> = (0..config.n_runs)
        .into_par_iter()
        .map(|m| {
            let path = sample_path(&config.model, &spec, seeds.child(m as u64))?;
            let trajs: Vec<Trajectory> = (0..n_starts)
                .map(|s| euler_solve(&path, &config.drift, &config.starts[s * d..(s + 1) * d]))
                .collect::<Result<_>>()?;
            let mut violations = 0;
            let mut min_gap = f64::INFINITY;
            for a in 0..n_starts {
                for c in a + 1..n_starts {
                    let (ta, tc) = (&trajs[a], &trajs[c]);
                    if d == 1 && (0..ta.len()).any(|i| ta.state(i)[0] > tc.state(i)[0]) {
                        violations += 1;
                    }
                    for i in 0..ta.len() {
                        min_gap = min_gap.min(euclid(ta.state(i), tc.state(i)));
                    }
                }
            }
            let mut fd = (f64::INFINITY, f64::NEG_INFINITY);
            for s in 0..n_starts {
                let mut shifted = config.starts[s * d..(s + 1) * d].to_vec();
                shifted[0] += config.fd_delta;
                let moved = euler_solve(&path, &config.drift, &shifted)?;
                let v = (moved.terminal()[0] - trajs[s].terminal()[0]) / config.fd_delta;
                fd = (fd.0.min(v), fd.1.max(v));
            }
            let grid = if m < config.keep_runs {
                trajs.iter().flat_map(|t| t.grid_states()).collect()
            } else {
                Vec::new()
            };
            Ok(Run {
                grid,
                violations,
                min_gap,
                fd,
            })
        })
        .collect::<Result<_>>()?;
    let kept_runs = config.keep_runs.min(config.n_runs);
    Ok(SimResult {
        config: config.clone(),
        times: crate::samplers::uniform_grid(config.horizon, n),
        paths: runs.iter().take(kept_runs).flat_map(|r| r.grid.iter().copied()).collect(),
        kept_runs,
        diagnostics: FlowDiagnostics {
            order_violations: runs.iter().map(|r| r.violations).sum(),
            min_gap: runs.iter().map(|r| r.min_gap).fold(f64::INFINITY, f64::min),
            fd_derivative_min: runs.iter().map(|r| r.fd.0).fold(f64::INFINITY, f64::min),
            fd_derivative_max: runs.iter().map(|r| r.fd.1).fold(f64::NEG_INFINITY, f64::max),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionConfig {
    pub model: LevyModel,
    pub drift: DriftSpec,
    pub x0: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub h_list: Vec<f64>,
    pub horizon: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// Run even when `α + β ≤ 1`, where pathwise uniqueness is not expected.
    pub allow_counterexample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub delta: f64,
    pub h: f64,
    /// Median over pairs of `sup_t |X_t^{x0+δe₁} − X_t^{x0}|`.
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    pub rows: Vec<DispersionRow>,
}

impl DispersionTable {
    pub fn get(&self, delta: f64, h: f64) -> Option<&DispersionRow> {
        self.rows.iter().find(|r| r.delta == delta && r.h == h)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,h,median,q25,q75\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.delta, r.h, r.median, r.q25, r.q75));
        }
        out
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// For every `(δ, h)`, pairs started at `x0` and `x0 + δe₁` on common noise.
/// One fine path per pair is coarsened to each `h`.
pub fn uniqueness_dispersion(config: &DispersionConfig) -> Result<DispersionTable> {
    let d = config.model.dimension;
    config.drift.validate(d)?;
    if config.x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: config.x0.len(),
        });
    }
    if config.n_mc == 0 || config.delta_list.is_empty() || config.delta_list.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("need n_mc > 0 and positive offsets".into()));
    }
    if !config.allow_counterexample {
        if let Some(beta) = config.drift.holder_exponent() {
            if config.model.alpha + beta <= 1.0 {
                return Err(Error::Regime(format!(
                    "α + β = {} ≤ 1: pathwise uniqueness is not expected; pass allow_counterexample to run the contrast study",
                    config.model.alpha + beta
                )));
            }
        }
    }
    let (fine, factors) = coarsening_factors(config.horizon, &config.h_list)?;
    let spec = config.noise.spec(config.horizon, fine);
    let seeds = SeedTree::new(config.seed).named("dispersion");
    // samples[m][hi * n_delta + di]
    let samples: Vec<Vec<f64>> = (0..config.n_mc)
        .into_par_iter()
        .map(|m| {
            let path = sample_path(&config.model, &spec, seeds.child(m as u64))?;
            let mut out = Vec::new();
            for &f in &factors {
                let p = if f == 1 { path.clone() } else { path.coarsen(f)? };
                let base = euler_solve(&p, &config.drift, &config.x0)?;
                for &delta in &config.delta_list {
                    let mut x1 = config.x0.clone();
                    x1[0] += delta;
                    out.push(euler_solve(&p, &config.drift, &x1)?.sup_distance(&base)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let nd = config.delta_list.len();
    let mut rows = Vec::new();
    for (hi, &h) in config.h_list.iter().enumerate() {
        for (di, &delta) in config.delta_list.iter().enumerate() {
            let mut col: Vec<f64> = samples.iter().map(|s| s[hi * nd + di]).collect();
            col.sort_by(f64::total_cmp);
            rows.push(DispersionRow {
                delta,
                h,
                median: median(&col),
                q25: quantile(&col, 0.25),
                q75: quantile(&col, 0.75),
            });
        }
    }
    Ok(DispersionTable { rows })
}
