//! Resolvent equations `λv − ℒv − b·Dv = f` on a lattice.
//!
//! The constant-drift solution `v = ∫₀^∞ e^{−λt} P_t f dt` is represented by
//! a lattice kernel: every time-quadrature node `t_q` and every Monte Carlo
//! draw `L_{t_q}` deposits the weight `w_q / n` multilinearly at the offset
//! `(t_q k + L_{t_q}) / h`. Applying the kernel is then a discrete
//! convolution. Non-constant drifts are handled by Picard iteration
//! `v ← K(f + b·Dv)` with the `k = 0` kernel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::generator::jump_integral;
use crate::grid::{GridFunction, Lattice, Provenance};
use crate::levy_models::LevyModel;
use crate::quad::GaussRule;
use crate::rng::SeedTree;
use crate::samplers::{sample_marginals, MarginalMethod};
use crate::semigroup::Field;

/// Weights for `∫₀^{T*} e^{−λt} φ(t) dt`: dyadic levels `[T* 2^{−j−1}, T* 2^{−j}]`,
/// each split into panels no longer than `1/λ` and integrated with
/// 4-point Gauss–Legendre. The innermost cell `[0, T* 2^{−J}]` is taken
/// as `φ(0)` times its exact weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub lambda: f64,
    pub horizon: f64,
    pub identity_weight: f64,
    pub nodes: Vec<(f64, f64)>,
}

impl TimeQuadrature {
    pub const LEVELS: usize = 40;

    /// `T*` is chosen so that the truncated tail `e^{−λT*}/λ` is below
    /// `0.1·tol`.
    pub fn new(lambda: f64, tol: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerance must be positive".into()));
        }
        let horizon = (10.0 / (lambda * tol)).ln().max(1.0) / lambda;
        let rule = GaussRule::new(4);
        let mut nodes = Vec::new();
        for j in (0..Self::LEVELS).rev() {
            let hi = horizon * 0.5f64.powi(j as i32);
            let lo = 0.5 * hi;
            let panels = ((hi - lo) * lambda).ceil().max(1.0) as usize;
            let width = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * width;
                nodes.extend(rule.on(a, a + width).map(|(t, w)| (t, w * (-lambda * t).exp())));
            }
        }
        let t0 = horizon * 0.5f64.powi(Self::LEVELS as i32);
        Ok(Self {
            lambda,
            horizon,
            identity_weight: -(-lambda * t0).exp_m1() / lambda,
            nodes,
        })
    }

    /// Bound on `∫_{T*}^∞ e^{−λt} dt`.
    pub fn tail_bound(&self) -> f64 {
        (-self.lambda * self.horizon).exp() / self.lambda
    }

    pub fn total_weight(&self) -> f64 {
        self.identity_weight + self.nodes.iter().map(|n| n.1).sum::<f64>()
    }

    /// `|Σ w − ∫₀^{T*} e^{−λt} dt|`.
    pub fn weight_error(&self) -> f64 {
        (self.total_weight() + (-self.lambda * self.horizon).exp_m1() / self.lambda).abs()
    }
}

/// Monte Carlo settings for kernel construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_mc: usize,
    /// Independent sub-kernels used for standard errors.
    pub batches: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_mc: 1 << 18,
            batches: 8,
            seed: 0,
        }
    }
}

type Sparse = Vec<(Vec<isize>, f64)>;

/// Fewest draws used at any time node.
const MIN_NODE_DRAWS: usize = 256;

#[derive(Clone, Debug)]
struct KernelPart {
    /// Dense weights on offsets `[−M, M]^d`.
    window: Vec<f64>,
    /// Deposits that fell outside the window: position in units of h.
    far: Vec<(Vec<f64>, f64)>,
}

/// Discrete resolvent kernel for `(λ − ℒ − k·D)^{-1}` on one lattice.
#[derive(Clone, Debug)]
pub struct ResolventKernel {
    pub lattice: Lattice,
    pub lambda: f64,
    pub shift: Vec<f64>,
    pub quad: TimeQuadrature,
    pub mc: McConfig,
    window_radius: usize,
    parts: Vec<KernelPart>,
    total_window: Sparse,
    total_far: Vec<(Vec<f64>, f64)>,
    total_lumped: Sparse,
    parts_lumped: Vec<Sparse>,
}

fn window_factor(d: usize) -> usize {
    match d {
        1 => 32,
        2 => 2,
        _ => 1,
    }
}

impl ResolventKernel {
    pub fn build(model: &LevyModel, k: &[f64], lambda: f64, lattice: &Lattice, quad_tol: f64, mc: McConfig) -> Result<Self> {
        model.validate()?;
        let d = model.dimension;
        if lattice.dimension != d || k.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if lattice.dimension != d { lattice.dimension } else { k.len() },
            });
        }
        if mc.n_mc == 0 || mc.batches == 0 || mc.n_mc < mc.batches {
            return Err(Error::InvalidArgument("need n_mc >= batches >= 1".into()));
        }
        let quad = TimeQuadrature::new(lambda, quad_tol)?;
        let n = lattice.points_per_axis;
        let m = window_factor(d) * (n - 1);
        let h = lattice.spacing();
        let per_part = mc.n_mc / mc.batches;
        let seeds = SeedTree::new(mc.seed).named("resolvent-kernel");
        let self_similar = model.is_self_similar();
        // Draws per time node, proportional to the node weight once it
        // falls below 1% of the largest weight. Low-weight nodes add
        // little variance, and each node stays unbiased.
        let w_max = quad.nodes.iter().map(|n| n.1).fold(0.0, f64::max);
        let counts: Vec<usize> = quad
            .nodes
            .iter()
            .map(|&(_, w)| {
                let share = (w / (0.01 * w_max)).min(1.0);
                ((per_part as f64 * share).ceil() as usize).clamp(MIN_NODE_DRAWS.min(per_part), per_part)
            })
            .collect();
        let method = MarginalMethod::default_for(model);
        let parts: Vec<KernelPart> = (0..mc.batches)
            .into_par_iter()
            .map(|p| -> Result<KernelPart> {
                let pseeds = seeds.child(p as u64);
                let mut part = KernelPart {
                    window: vec![0.0; (2 * m + 1).pow(d as u32)],
                    far: Vec::new(),
                };
                let origin = vec![0.0; d];
                deposit(&mut part, m, &origin, quad.identity_weight, d);
                let mut pos = vec![0.0; d];
                if self_similar {
                    let unit = sample_marginals(model, 1.0, per_part, method, pseeds)?;
                    for (&(t, w), &nq) in quad.nodes.iter().zip(&counts) {
                        let scale = t.powf(1.0 / model.alpha) / h;
                        let wq = w / nq as f64;
                        for l in unit.chunks_exact(d).take(nq) {
                            for a in 0..d {
                                pos[a] = t * k[a] / h + scale * l[a];
                            }
                            deposit(&mut part, m, &pos, wq, d);
                        }
                    }
                } else {
                    for (q, (&(t, w), &nq)) in quad.nodes.iter().zip(&counts).enumerate() {
                        let draws = sample_marginals(model, t, nq, method, pseeds.child(q as u64))?;
                        let inv = 1.0 / nq as f64;
                        for l in draws.chunks_exact(d) {
                            for a in 0..d {
                                pos[a] = (t * k[a] + l[a]) / h;
                            }
                            deposit(&mut part, m, &pos, w * inv, d);
                        }
                    }
                }
                Ok(part)
            })
            .collect::<Result<_>>()?;

        let b = mc.batches as f64;
        let mut total = vec![0.0; (2 * m + 1).pow(d as u32)];
        for part in &parts {
            for (t, w) in total.iter_mut().zip(&part.window) {
                *t += w / b;
            }
        }
        let total_far: Vec<(Vec<f64>, f64)> = parts
            .iter()
            .flat_map(|p| p.far.iter().map(move |(x, w)| (x.clone(), w / b)))
            .collect();
        let total_window = sparse(&total, m, d);
        let total_lumped = lump(&total, &total_far, m, n, d);
        let parts_lumped = parts.iter().map(|p| lump(&p.window, &p.far, m, n, d)).collect();
        Ok(Self {
            lattice: *lattice,
            lambda,
            shift: k.to_vec(),
            quad,
            mc,
            window_radius: m,
            parts,
            total_window,
            total_far,
            total_lumped,
            parts_lumped,
        })
    }

    /// Fraction of kernel mass deposited outside the offset window.
    pub fn far_mass_fraction(&self) -> f64 {
        self.total_far.iter().map(|f| f.1).sum::<f64>() / self.quad.total_weight()
    }

    /// `K g` for a lattice function extended by clamping; `g` holds
    /// `components` values per node.
    pub fn apply_lattice(&self, g: &[f64], components: usize) -> Vec<f64> {
        apply_sparse(&self.lattice, &self.total_lumped, g, components)
    }

    /// Per-batch applications: returns the mean and the node-wise largest
    /// standard error.
    pub fn apply_lattice_batches(&self, g: &[f64], components: usize) -> (Vec<f64>, f64) {
        let runs: Vec<Vec<f64>> = self
            .parts_lumped
            .iter()
            .map(|k| apply_sparse(&self.lattice, k, g, components))
            .collect();
        mean_and_se(&runs)
    }

    /// `K f` for a function defined everywhere. Window offsets use `f`
    /// sampled on the extended lattice; far deposits evaluate `f` exactly.
    pub fn apply_field(&self, f: &dyn Field) -> Vec<f64> {
        let ext = self.extended_values(f);
        self.apply_field_with(&ext, &self.total_window, &self.total_far, f)
    }

    pub fn apply_field_batches(&self, f: &dyn Field) -> (Vec<f64>, f64) {
        let ext = self.extended_values(f);
        let runs: Vec<Vec<f64>> = self
            .parts
            .iter()
            .map(|p| self.apply_field_with(&ext, &sparse(&p.window, self.window_radius, self.lattice.dimension), &p.far, f))
            .collect();
        mean_and_se(&runs)
    }

    fn extended_values(&self, f: &dyn Field) -> (Lattice, Vec<f64>) {
        let lat = self.lattice;
        let m = self.window_radius;
        let h = lat.spacing();
        let ext = Lattice {
            dimension: lat.dimension,
            radius: lat.radius + m as f64 * h,
            points_per_axis: lat.points_per_axis + 2 * m,
        };
        let values = (0..ext.len()).into_par_iter().map(|i| f.eval(&ext.point(i))).collect();
        (ext, values)
    }

    fn apply_field_with(&self, ext: &(Lattice, Vec<f64>), window: &Sparse, far: &[(Vec<f64>, f64)], f: &dyn Field) -> Vec<f64> {
        let lat = self.lattice;
        let d = lat.dimension;
        let m = self.window_radius as isize;
        let h = lat.spacing();
        let (elat, evals) = ext;
        if d == 1 {
            let (lo, dense) = dense_1d(window);
            let start = (lo + m) as usize;
            return (0..lat.len())
                .into_par_iter()
                .map(|node| {
                    let seg = &evals[node + start..node + start + dense.len()];
                    let mut acc: f64 = dense.iter().zip(seg).map(|(w, v)| w * v).sum();
                    let x = -lat.radius + node as f64 * h;
                    for (p, w) in far {
                        acc += w * f.eval(&[x + p[0] * h]);
                    }
                    acc
                })
                .collect();
        }
        (0..lat.len())
            .into_par_iter()
            .map(|node| {
                let idx = lat.index(node);
                let mut acc = 0.0;
                let mut e = vec![0usize; d];
                for (o, w) in window {
                    for a in 0..d {
                        e[a] = (idx[a] as isize + o[a] + m) as usize;
                    }
                    acc += w * evals[elat.flat(&e)];
                }
                let x = lat.point(node);
                let mut y = vec![0.0; d];
                for (p, w) in far {
                    for a in 0..d {
                        y[a] = x[a] + p[a] * h;
                    }
                    acc += w * f.eval(&y);
                }
                acc
            })
            .collect()
    }

    /// `‖D K‖` from central differences of the kernel weights:
    /// `sqrt(Σ_a (Σ_o |W_{o−e_a} − W_{o+e_a}|/2h)²)`. Monte Carlo noise can
    /// only increase this value.
    pub fn derivative_norm(&self) -> f64 {
        let d = self.lattice.dimension;
        let m = self.window_radius;
        let side = 2 * m + 1;
        let h = self.lattice.spacing();
        let mut dense = vec![0.0; side.pow(d as u32)];
        let strides: Vec<usize> = (0..d).map(|a| side.pow((d - 1 - a) as u32)).collect();
        for (o, w) in &self.total_window {
            let flat: usize = o.iter().zip(&strides).map(|(oi, s)| (*oi + m as isize) as usize * s).sum();
            dense[flat] = *w;
        }
        let mut total = 0.0;
        for a in 0..d {
            let s = strides[a];
            let mut sum = 0.0;
            for (flat, _) in dense.iter().enumerate() {
                let coord = (flat / s) % side;
                let lo = if coord >= 1 { dense[flat - s] } else { 0.0 };
                let hi = if coord + 1 < side { dense[flat + s] } else { 0.0 };
                sum += (lo - hi).abs();
            }
            let axis = sum / (2.0 * h);
            total += axis * axis;
        }
        total.sqrt()
    }
}

fn mean_and_se(runs: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let b = runs.len() as f64;
    let len = runs[0].len();
    let mut mean = vec![0.0; len];
    for r in runs {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / b;
        }
    }
    if runs.len() < 2 {
        return (mean, 0.0);
    }
    let mut se: f64 = 0.0;
    for i in 0..len {
        let var = runs.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (b - 1.0);
        se = se.max((var / b).sqrt());
    }
    (mean, se)
}

fn deposit(part: &mut KernelPart, m: usize, pos: &[f64], w: f64, d: usize) {
    let side = 2 * m + 1;
    let mi = m as isize;
    let mut base = [0isize; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..d {
        let f = pos[a].floor();
        if !(f >= -(mi as f64) && f + 1.0 <= mi as f64) {
            part.far.push((pos.to_vec(), w));
            return;
        }
        base[a] = f as isize;
        frac[a] = pos[a] - f;
    }
    for mask in 0..(1usize << d) {
        let mut wt = w;
        let mut flat = 0usize;
        for a in 0..d {
            let up = mask >> a & 1;
            wt *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
            flat = flat * side + (base[a] + up as isize + mi) as usize;
        }
        part.window[flat] += wt;
    }
}

fn sparse(dense: &[f64], m: usize, d: usize) -> Sparse {
    let side = 2 * m + 1;
    dense
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(flat, w)| {
            let mut rem = flat;
            let mut o = vec![0isize; d];
            for a in (0..d).rev() {
                o[a] = (rem % side) as isize - m as isize;
                rem /= side;
            }
            (o, *w)
        })
        .collect()
}

/// Folds window and far deposits onto offsets `[−(n−1), n−1]^d`; beyond
/// that range a clamped lattice function is constant.
fn lump(window: &[f64], far: &[(Vec<f64>, f64)], m: usize, n: usize, d: usize) -> Sparse {
    let r = (n - 1) as isize;
    let side = (2 * r + 1) as usize;
    let mut dense = vec![0.0; side.pow(d as u32)];
    for (o, w) in sparse(window, m, d) {
        let flat = o.iter().fold(0usize, |acc, oi| acc * side + (oi.clamp(&-r, &r) + r) as usize);
        dense[flat] += w;
    }
    for (p, w) in far {
        let mut base = [0isize; 8];
        let mut frac = [0.0f64; 8];
        for a in 0..d {
            let c = p[a].clamp(-(r as f64), r as f64);
            let mut f = c.floor() as isize;
            if f == r {
                f = r - 1;
            }
            base[a] = f;
            frac[a] = c - f as f64;
        }
        for mask in 0..(1usize << d) {
            let mut wt = *w;
            let mut flat = 0usize;
            for a in 0..d {
                let up = mask >> a & 1;
                wt *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * side + (base[a] + up as isize + r) as usize;
            }
            dense[flat] += wt;
        }
    }
    sparse(&dense, r as usize, d)
}

/// Contiguous weights covering the occupied offsets of a 1D kernel, and
/// the first offset.
fn dense_1d(kernel: &Sparse) -> (isize, Vec<f64>) {
    if kernel.is_empty() {
        return (0, Vec::new());
    }
    let lo = kernel.iter().map(|(o, _)| o[0]).min().unwrap();
    let hi = kernel.iter().map(|(o, _)| o[0]).max().unwrap();
    let mut dense = vec![0.0; (hi - lo + 1) as usize];
    for (o, w) in kernel {
        dense[(o[0] - lo) as usize] += w;
    }
    (lo, dense)
}

fn apply_sparse(lat: &Lattice, kernel: &Sparse, g: &[f64], components: usize) -> Vec<f64> {
    let d = lat.dimension;
    let n = lat.points_per_axis as isize;
    let c = components;
    if d == 1 {
        // pad each component by clamping and take dot products
        let (lo, dense) = dense_1d(kernel);
        let pad = n - 1;
        let mut out = vec![0.0; lat.len() * c];
        for comp in 0..c {
            let padded: Vec<f64> = (-pad..n + pad)
                .map(|j| g[j.clamp(0, n - 1) as usize * c + comp])
                .collect();
            let col: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let start = (i + lo + pad) as usize;
                    dense.iter().zip(&padded[start..start + dense.len()]).map(|(w, v)| w * v).sum()
                })
                .collect();
            for (i, v) in col.into_iter().enumerate() {
                out[i * c + comp] = v;
            }
        }
        return out;
    }
    let out: Vec<Vec<f64>> = (0..lat.len())
        .into_par_iter()
        .map(|node| {
            let idx = lat.index(node);
            let mut acc = vec![0.0; c];
            if d == 1 {
                let i = idx[0] as isize;
                for (o, w) in kernel {
                    let j = (i + o[0]).clamp(0, n - 1) as usize;
                    for (a, v) in acc.iter_mut().zip(&g[j * c..(j + 1) * c]) {
                        *a += w * v;
                    }
                }
            } else {
                for (o, w) in kernel {
                    let j = idx
                        .iter()
                        .zip(o)
                        .fold(0usize, |f, (i, oi)| f * n as usize + (*i as isize + oi).clamp(0, n - 1) as usize);
                    for (a, v) in acc.iter_mut().zip(&g[j * c..(j + 1) * c]) {
                        *a += w * v;
                    }
                }
            }
            acc
        })
        .collect();
    out.concat()
}

/// Sup norms and seminorm of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionNorms {
    pub v_sup: f64,
    pub dv_sup: f64,
    /// `[Dv]_θ` with `θ = α + β − 1`.
    pub dv_seminorm: f64,
    pub theta: f64,
}

/// Maximum principle check `λ‖v‖₀ ≤ ‖f‖₀ + λ·error_budget`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPrinciple {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub v: GridFunction,
    pub dv: GridFunction,
    pub lambda: f64,
    pub alpha: f64,
    /// Hölder exponent used for `θ = α + β − 1`.
    pub beta: f64,
    pub norms: SolutionNorms,
    /// C¹ distance between successive Picard iterates (empty for constant drift).
    pub iterations: Vec<f64>,
    /// Measured contraction factor of the Picard map, when iterated.
    pub contraction: Option<f64>,
    /// Bound on the sup-norm error of `v`: time truncation, quadrature
    /// weight error and 3 standard errors.
    pub error_budget: f64,
    pub standard_error: f64,
    pub f_sup: f64,
    pub max_principle: MaxPrinciple,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    lambda: f64,
    alpha: f64,
    beta: f64,
    norms: &'a SolutionNorms,
    iterations: &'a [f64],
    contraction: Option<f64>,
    error_budget: f64,
    standard_error: f64,
    f_sup: f64,
    max_principle: &'a MaxPrinciple,
}

impl ResolventSolution {
    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Diagnostics {
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            norms: &self.norms,
            iterations: &self.iterations,
            contraction: self.contraction,
            error_budget: self.error_budget,
            standard_error: self.standard_error,
            f_sup: self.f_sup,
            max_principle: &self.max_principle,
        })?)
    }

    /// Writes `v.blob`, `dv.blob` and `diagnostics.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let paths = [dir.join("v.blob"), dir.join("dv.blob"), dir.join("diagnostics.json")];
        self.v.to_blob()?.write(&paths[0])?;
        self.dv.to_blob()?.write(&paths[1])?;
        std::fs::write(&paths[2], self.diagnostics_json()?)?;
        Ok(paths.to_vec())
    }
}

/// Largest Hölder exponent the solution theory uses for drift regularity
/// `β` at noise index `α`: since `C^β ⊂ C^{β'}` for `β' < β`, a drift with
/// `α + β ≥ 2` is treated as `β'`-Hölder with `α + β' < 2`.
pub fn effective_beta(alpha: f64, beta: f64) -> f64 {
    beta.min(0.95 * (2.0 - alpha)).min(0.99)
}

fn field_sup_on(f: &dyn Field, lattice: &Lattice) -> f64 {
    (0..lattice.len())
        .into_par_iter()
        .map(|i| f.eval(&lattice.point(i)).abs())
        .reduce(|| 0.0, f64::max)
}

/// Solution of `λv − ℒv − k·Dv = f` with the kernel of [`ResolventKernel`].
#[allow(clippy::too_many_arguments)]
pub fn resolvent_constant_drift(
    model: &LevyModel,
    k: &[f64],
    f: &dyn Field,
    lambda: f64,
    lattice: &Lattice,
    quad_tol: f64,
    mc: McConfig,
    beta: f64,
) -> Result<ResolventSolution> {
    let kernel = ResolventKernel::build(model, k, lambda, lattice, quad_tol, mc)?;
    solve_with_kernel(model, &kernel, f, beta)
}

/// Constant-drift solve with a prebuilt kernel.
pub fn solve_with_kernel(model: &LevyModel, kernel: &ResolventKernel, f: &dyn Field, beta: f64) -> Result<ResolventSolution> {
    let (values, se) = kernel.apply_field_batches(f);
    let v = GridFunction::new(
        kernel.lattice,
        1,
        values,
        provenance(kernel, se, "resolvent with constant drift"),
    )?;
    finish(model, kernel, v, f, beta, Vec::new(), None)
}

fn provenance(kernel: &ResolventKernel, se: f64, what: &str) -> Provenance {
    Provenance {
        description: format!("{what}, λ = {}", kernel.lambda),
        n_mc: kernel.mc.n_mc,
        seed: Some(kernel.mc.seed),
        standard_error: se,
        out_of_box_fraction: kernel.far_mass_fraction(),
        noise_warning: false,
    }
}

fn finish(
    model: &LevyModel,
    kernel: &ResolventKernel,
    v: GridFunction,
    f: &dyn Field,
    beta: f64,
    iterations: Vec<f64>,
    contraction: Option<f64>,
) -> Result<ResolventSolution> {
    let dv = v.gradient();
    let theta = (model.alpha + beta - 1.0).clamp(1e-6, 1.0);
    let f_sup = field_sup_on(f, &kernel.lattice);
    let se = v.provenance.standard_error;
    let error_budget = kernel.quad.tail_bound() * f_sup + kernel.quad.weight_error() * f_sup + 3.0 * se;
    let v_sup = v.sup_norm();
    let lhs = kernel.lambda * v_sup;
    let rhs = f_sup + kernel.lambda * error_budget;
    Ok(ResolventSolution {
        norms: SolutionNorms {
            v_sup,
            dv_sup: dv.sup_norm(),
            dv_seminorm: estimate_holder_seminorm(&dv, theta),
            theta,
        },
        v,
        dv,
        lambda: kernel.lambda,
        alpha: model.alpha,
        beta,
        iterations,
        contraction,
        error_budget,
        standard_error: se,
        f_sup,
        max_principle: MaxPrinciple {
            lhs,
            rhs,
            pass: lhs <= rhs,
        },
    })
}

/// Settings for the Picard solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Stop when `‖v_{n+1} − v_n‖₀ + ‖Dv_{n+1} − Dv_n‖₀ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub quad_tol: f64,
    /// Largest acceptable standard error of the converged `v`.
    pub noise_tol: f64,
    pub mc: McConfig,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            quad_tol: 1e-6,
            noise_tol: 1e-3,
            mc: McConfig::default(),
        }
    }
}

/// Contraction factor of `w ↦ K(b·Dw)`: `‖b‖₀ ‖D K‖`.
pub fn contraction_factor(kernel: &ResolventKernel, b: &DriftSpec) -> f64 {
    b.sup_bound(kernel.lattice.dimension) * kernel.derivative_norm()
}

/// Checks the drift regularity preconditions of the Hölder-drift solve and
/// returns the Hölder exponent to use.
pub fn check_holder_regime(alpha: f64, b: &DriftSpec) -> Result<f64> {
    if alpha < 1.0 {
        return Err(Error::Regime(format!("the Hölder-drift resolvent needs α >= 1, got {alpha}")));
    }
    let beta = b.holder_exponent().unwrap_or(0.99);
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Regime(format!("drift exponent must lie in (0, 1), got {beta}")));
    }
    let eff = effective_beta(alpha, beta);
    let s = alpha + eff;
    if !(s > 1.0 && s < 2.0) {
        return Err(Error::Regime(format!("α + β = {s} outside (1, 2)")));
    }
    Ok(eff)
}

/// Solves `λv − ℒv − b·Dv = f` componentwise (`f` has `components` entries
/// per node when given as lattice values) by Picard iteration on the
/// `k = 0` kernel.
pub fn resolvent_holder_drift(
    model: &LevyModel,
    b: &DriftSpec,
    f: &dyn Field,
    lambda: f64,
    lattice: &Lattice,
    config: &PicardConfig,
) -> Result<ResolventSolution> {
    let beta = check_holder_regime(model.alpha, b)?;
    b.validate(model.dimension)?;
    let zero = vec![0.0; model.dimension];
    let kernel = ResolventKernel::build(model, &zero, lambda, lattice, config.quad_tol, config.mc)?;
    let q = contraction_factor(&kernel, b);
    if q >= 1.0 {
        return Err(non_contraction(model, b, lambda, lattice, config, q));
    }
    let fields: [&dyn Field; 1] = [f];
    let (v, iterations) = picard(&kernel, b, &fields, config)?;
    finish(model, &kernel, v.component(0), f, beta, iterations, Some(q))
}

fn non_contraction(model: &LevyModel, b: &DriftSpec, lambda: f64, lattice: &Lattice, config: &PicardConfig, q: f64) -> Error {
    let zero = vec![0.0; model.dimension];
    let mut trial = lambda;
    let mut suggested = None;
    for _ in 0..20 {
        trial *= 2.0;
        match ResolventKernel::build(model, &zero, trial, lattice, config.quad_tol, config.mc) {
            Ok(k) if contraction_factor(&k, b) < 0.9 => {
                suggested = Some(trial);
                break;
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    Error::NonContraction {
        q,
        lambda,
        suggested_lambda: suggested,
    }
}

/// Picard iteration for the vector problem `λv_j − ℒv_j − b·Dv_j = f_j`
/// with one right-hand side field per component.
pub(crate) fn picard(kernel: &ResolventKernel, b: &DriftSpec, f: &[&dyn Field], config: &PicardConfig) -> Result<(GridFunction, Vec<f64>)> {
    let lat = kernel.lattice;
    let d = lat.dimension;
    let c = f.len();
    let mut kf = Vec::with_capacity(c);
    let mut kf_se: f64 = 0.0;
    for field in f {
        let (vals, se) = kernel.apply_field_batches(*field);
        kf.push(vals);
        kf_se = kf_se.max(se);
    }
    // node-major layout
    let mut base = vec![0.0; lat.len() * c];
    for (j, vals) in kf.iter().enumerate() {
        for (node, v) in vals.iter().enumerate() {
            base[node * c + j] = *v;
        }
    }
    let bvals: Vec<f64> = (0..lat.len()).flat_map(|i| b.eval_vec(&lat.point(i))).collect();
    let drift_term = |v: &GridFunction| -> Vec<f64> {
        let dv = v.gradient();
        let mut out = vec![0.0; lat.len() * c];
        for node in 0..lat.len() {
            let bn = &bvals[node * d..(node + 1) * d];
            let g = dv.node(node);
            for j in 0..c {
                out[node * c + j] = (0..d).map(|a| bn[a] * g[j * d + a]).sum();
            }
        }
        out
    };
    let mut v = GridFunction::new(lat, c, base.clone(), provenance(kernel, kf_se, "Picard iterate"))?;
    let mut dv = v.gradient();
    let mut residuals = Vec::new();
    let is_zero = bvals.iter().all(|x| *x == 0.0);
    for _ in 0..config.max_iter {
        if is_zero {
            break;
        }
        let corr = kernel.apply_lattice(&drift_term(&v), c);
        let next_vals: Vec<f64> = base.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let next = GridFunction::new(lat, c, next_vals, v.provenance.clone())?;
        let next_dv = next.gradient();
        let dist = next.max_abs_diff(&v) + next_dv.max_abs_diff(&dv);
        residuals.push(dist);
        v = next;
        dv = next_dv;
        if dist < config.tol {
            break;
        }
    }
    if !is_zero && residuals.last().is_none_or(|r| *r >= config.tol) {
        return Err(Error::IterationCap {
            cap: config.max_iter,
            last_step: residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    // standard error of the converged fixed point through the batch kernels
    let se = if is_zero {
        kf_se
    } else {
        let (_, corr_se) = kernel.apply_lattice_batches(&drift_term(&v), c);
        kf_se + corr_se
    };
    if se > config.noise_tol {
        return Err(Error::NoiseFloor {
            floor: se,
            tol: config.noise_tol,
        });
    }
    v.provenance.standard_error = se;
    Ok((v, residuals))
}

/// `max |g(x) − g(x′)| / |x − x′|^θ` over node pairs at distance ≥ 2h:
/// all axis-aligned pairs up to 32 spacings apart plus 20 000 random pairs
/// drawn with a fixed seed.
pub fn estimate_holder_seminorm(g: &GridFunction, theta: f64) -> f64 {
    use rand::Rng;
    let lat = g.lattice;
    let d = lat.dimension;
    let n = lat.points_per_axis;
    let h = lat.spacing();
    let diff = |i: usize, j: usize| -> f64 {
        g.node(i)
            .iter()
            .zip(g.node(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let dist = |i: usize, j: usize| -> f64 {
        lat.point(i)
            .iter()
            .zip(lat.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let near: f64 = (0..lat.len())
        .into_par_iter()
        .map(|i| {
            let idx = lat.index(i);
            let mut best: f64 = 0.0;
            for a in 0..d {
                for m in 2..=32usize {
                    if idx[a] + m >= n {
                        break;
                    }
                    let j = i + m * lat.stride(a);
                    best = best.max(diff(i, j) / (m as f64 * h).powf(theta));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    let mut rng = SeedTree::new(0x5e17_0a0d).stream();
    let mut far: f64 = 0.0;
    for _ in 0..20_000 {
        let i = rng.random_range(0..lat.len());
        let j = rng.random_range(0..lat.len());
        let r = dist(i, j);
        if r >= 2.0 * h - 1e-12 {
            far = far.max(diff(i, j) / r.powf(theta));
        }
    }
    near.max(far)
}

/// `S(k)` values and their max/min spread.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchauderReport {
    pub k_list: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
    pub spread: f64,
    pub f_holder_norm: f64,
    pub pass: bool,
}

/// `S(k) = (λ^{θ/α} ‖Dv‖₀ + [Dv]_θ) / ‖f‖_β` for each drift `k`, with
/// `θ = α + β − 1` and the same Monte Carlo seed for every `k`.
#[allow(clippy::too_many_arguments)]
pub fn verify_schauder_k_independence(
    model: &LevyModel,
    f: &dyn Field,
    lambda: f64,
    k_list: &[Vec<f64>],
    beta: f64,
    lattice: &Lattice,
    quad_tol: f64,
    mc: McConfig,
) -> Result<SchauderReport> {
    if k_list.is_empty() {
        return Err(Error::InvalidArgument("k_list is empty".into()));
    }
    let theta = model.alpha + beta - 1.0;
    let fg = GridFunction::from_fn(*lattice, 1, |x, o| o[0] = f.eval(x));
    let f_norm = fg.sup_norm() + estimate_holder_seminorm(&fg, beta);
    let mut ratios = Vec::new();
    for k in k_list {
        let sol = resolvent_constant_drift(model, k, f, lambda, lattice, quad_tol, mc, beta)?;
        let s = if f_norm == 0.0 {
            0.0
        } else {
            (lambda.powf(theta / model.alpha) * sol.norms.dv_sup + sol.norms.dv_seminorm) / f_norm
        };
        ratios.push(s);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    Ok(SchauderReport {
        k_list: k_list.to_vec(),
        ratios,
        spread,
        f_holder_norm: f_norm,
        pass: spread <= 2.0,
    })
}

/// `max |λv − b·Dv − ℒv − f|` over nodes at least `margin` spacings from
/// the faces, with `ℒ` evaluated by radial quadrature of the interpolated `v`.
pub fn generator_residual(model: &LevyModel, sol: &ResolventSolution, b: &DriftSpec, f: &dyn Field, margin: usize) -> Result<f64> {
    let lv = jump_integral(model, &sol.v, 0.0, true)?;
    let lat = sol.v.lattice;
    let d = lat.dimension;
    let mut worst: f64 = 0.0;
    for node in 0..lat.len() {
        if !lat.is_interior(node, margin) {
            continue;
        }
        let x = lat.point(node);
        let bx = b.eval_vec(&x);
        let bdv: f64 = (0..d).map(|a| bx[a] * sol.dv.node(node)[a]).sum();
        let r = sol.lambda * sol.v.values[node] - bdv - lv.values[node] - f.eval(&x);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
