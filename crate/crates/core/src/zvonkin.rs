//! The transform `ψ(x) = x + u(x)`, where `u` solves
//! `λu − ℒu − (Du) b = b` componentwise, and the coefficients of the SDE
//! satisfied by `Y = ψ(X)`.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::generator::jump_integral;
use crate::grid::{GridFunction, Lattice};
use crate::levy_models::{Angular, LevyModel};
use crate::resolvent::{check_holder_regime, contraction_factor, picard, PicardConfig, ResolventKernel};
use crate::rng::SeedTree;
use crate::semigroup::{FnField, Field};

/// The gate on `‖Du‖₀`.
pub const C_LAMBDA_GATE: f64 = 1.0 / 3.0;
/// Cap on fixed-point iterations in [`psi_inverse`].
pub const INVERSE_ITERATION_CAP: usize = 100;

/// Default λ schedule `2, 4, …, 1024`.
pub fn default_schedule() -> Vec<f64> {
    (1..=10).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Lattice for `u`; make it about three times the simulation box.
    pub lattice: Lattice,
    pub schedule: Vec<f64>,
    pub picard: PicardConfig,
    /// Skip the `β > 1 − α/2` regime assertion (counterexample studies).
    pub allow_counterexample: bool,
}

impl TransformConfig {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            schedule: default_schedule(),
            picard: PicardConfig::default(),
            allow_counterexample: false,
        }
    }
}

/// One λ tried while building a transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub lambda: f64,
    /// Picard contraction factor at this λ.
    pub q: f64,
    /// `‖Du_λ‖₀`, absent when the Picard map did not contract.
    pub c_lambda: Option<f64>,
}

#[derive(Clone, Debug, Default)]
struct Leakage {
    evals: Arc<AtomicU64>,
    clamped: Arc<AtomicU64>,
}

#[derive(Clone, Debug)]
pub struct ZvonkinTransform {
    /// `d` components per node.
    pub u: GridFunction,
    /// Row-major `d × d` Jacobian per node.
    pub du: GridFunction,
    pub lambda: f64,
    pub c_lambda: f64,
    /// Hölder exponent `α − 1 + β` of `Du` (with the effective `β`).
    pub gamma: f64,
    pub drift: DriftSpec,
    pub steps: Vec<ScheduleStep>,
    pub picard_residuals: Vec<f64>,
    leakage: Leakage,
}

impl ZvonkinTransform {
    /// Transform from a given `u` (for tests and synthetic studies).
    pub fn from_u(u: GridFunction, lambda: f64, gamma: f64, drift: DriftSpec) -> Result<Self> {
        let du = u.gradient();
        let c_lambda = du.sup_norm();
        Ok(Self {
            u,
            du,
            lambda,
            c_lambda,
            gamma,
            drift,
            steps: Vec::new(),
            picard_residuals: Vec::new(),
            leakage: Leakage::default(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.u.lattice.dimension
    }

    /// Fraction of `u` evaluations that were clamped into the lattice box.
    pub fn leakage_fraction(&self) -> f64 {
        let n = self.leakage.evals.load(Ordering::Relaxed);
        if n == 0 {
            0.0
        } else {
            self.leakage.clamped.load(Ordering::Relaxed) as f64 / n as f64
        }
    }

    pub fn reset_leakage(&self) {
        self.leakage.evals.store(0, Ordering::Relaxed);
        self.leakage.clamped.store(0, Ordering::Relaxed);
    }

    pub fn u_at(&self, x: &[f64], out: &mut [f64]) {
        let clamped = self.u.eval_into(x, out);
        self.leakage.evals.fetch_add(1, Ordering::Relaxed);
        if clamped {
            self.leakage.clamped.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Interpolated Jacobian `Du(x)`, row-major.
    pub fn du_at(&self, x: &[f64], out: &mut [f64]) {
        self.du.eval_into(x, out);
    }

    /// Writes `u.blob`, `du.blob` and `transform.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        #[derive(Serialize)]
        struct Meta<'a> {
            lambda: f64,
            c_lambda: f64,
            gamma: f64,
            drift: &'a DriftSpec,
            steps: &'a [ScheduleStep],
            picard_residuals: &'a [f64],
        }
        std::fs::create_dir_all(dir)?;
        let paths = [dir.join("u.blob"), dir.join("du.blob"), dir.join("transform.json")];
        self.u.to_blob()?.write(&paths[0])?;
        self.du.to_blob()?.write(&paths[1])?;
        let meta = Meta {
            lambda: self.lambda,
            c_lambda: self.c_lambda,
            gamma: self.gamma,
            drift: &self.drift,
            steps: &self.steps,
            picard_residuals: &self.picard_residuals,
        };
        std::fs::write(&paths[2], serde_json::to_string_pretty(&meta)?)?;
        Ok(paths.to_vec())
    }
}

/// Walks the λ schedule until `‖Du_λ‖₀ < 1/3` and returns that transform.
pub fn build_transform(model: &LevyModel, b: &DriftSpec, config: &TransformConfig) -> Result<ZvonkinTransform> {
    model.validate()?;
    let d = model.dimension;
    b.validate(d)?;
    if config.lattice.dimension != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: config.lattice.dimension,
        });
    }
    let alpha = model.alpha;
    if !config.allow_counterexample {
        if let Some(beta) = b.holder_exponent() {
            if !(beta > 1.0 - alpha / 2.0) {
                return Err(Error::Regime(format!(
                    "β = {beta} is not above 1 − α/2 = {}; pass allow_counterexample to proceed",
                    1.0 - alpha / 2.0
                )));
            }
        }
    }
    let beta = check_holder_regime(alpha, b)?;
    if config.schedule.windows(2).any(|w| w[1] <= w[0]) || config.schedule.is_empty() {
        return Err(Error::InvalidArgument("λ schedule must be non-empty and increasing".into()));
    }
    let components: Vec<FnField<_>> = (0..d)
        .map(|j| {
            let bound = b.sup_bound(d);
            let b = b.clone();
            FnField {
                f: move |x: &[f64]| {
                    let mut out = [0.0; 16];
                    b.eval(x, &mut out[..x.len()]);
                    out[j]
                },
                bound,
            }
        })
        .collect();
    let fields: Vec<&dyn Field> = components.iter().map(|c| c as &dyn Field).collect();
    let zero = vec![0.0; d];
    let mut steps = Vec::new();
    for &lambda in &config.schedule {
        let kernel = ResolventKernel::build(model, &zero, lambda, &config.lattice, config.picard.quad_tol, config.picard.mc)?;
        let q = contraction_factor(&kernel, b);
        if q >= 1.0 {
            steps.push(ScheduleStep {
                lambda,
                q,
                c_lambda: None,
            });
            continue;
        }
        let (u, residuals) = picard(&kernel, b, &fields, &config.picard)?;
        let du = u.gradient();
        let c_lambda = du.sup_norm();
        steps.push(ScheduleStep {
            lambda,
            q,
            c_lambda: Some(c_lambda),
        });
        if c_lambda < C_LAMBDA_GATE {
            return Ok(ZvonkinTransform {
                u,
                du,
                lambda,
                c_lambda,
                gamma: alpha - 1.0 + beta,
                drift: b.clone(),
                steps,
                picard_residuals: residuals,
                leakage: Leakage::default(),
            });
        }
    }
    Err(Error::ScheduleExhausted {
        curve: steps.iter().map(|s| (s.lambda, s.c_lambda.unwrap_or(f64::INFINITY))).collect(),
    })
}

/// `ψ(x) = x + u(x)`.
pub fn psi_forward(t: &ZvonkinTransform, x: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; x.len()];
    t.u_at(x, &mut u);
    x.iter().zip(&u).map(|(a, b)| a + b).collect()
}

/// Result of the fixed-point inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct Inversion {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Largest observed ratio of successive step lengths.
    pub max_ratio: f64,
}

/// `ψ⁻¹(y)` by `x ← y − u(x)` from `x = y`, stopping when the step is
/// below `tol·(1 − c_λ)`.
pub fn psi_inverse(t: &ZvonkinTransform, y: &[f64], tol: f64) -> Result<Vec<f64>> {
    psi_inverse_traced(t, y, tol).map(|r| r.x)
}

pub fn psi_inverse_traced(t: &ZvonkinTransform, y: &[f64], tol: f64) -> Result<Inversion> {
    psi_inverse_from(t, y, y, tol)
}

/// Inversion started from a guess `x0` (e.g. the previous time step).
pub fn psi_inverse_from(t: &ZvonkinTransform, y: &[f64], x0: &[f64], tol: f64) -> Result<Inversion> {
    let d = y.len();
    let stop = tol * (1.0 - t.c_lambda).max(1e-3);
    let mut x = x0.to_vec();
    let mut u = vec![0.0; d];
    let mut prev_step = f64::NAN;
    let mut max_ratio: f64 = 0.0;
    for it in 1..=INVERSE_ITERATION_CAP {
        t.u_at(&x, &mut u);
        let mut step2 = 0.0;
        for k in 0..d {
            let next = y[k] - u[k];
            step2 += (next - x[k]).powi(2);
            x[k] = next;
        }
        let step = step2.sqrt();
        // ratios of steps near rounding level carry no information
        if prev_step > 1e-12 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            max_ratio = max_ratio.max(step / prev_step);
        }
        if step < stop {
            return Ok(Inversion {
                x,
                iterations: it,
                max_ratio,
            });
        }
        prev_step = step;
    }
    Err(Error::IterationCap {
        cap: INVERSE_ITERATION_CAP,
        last_step: prev_step,
    })
}

/// `Dψ⁻¹(z) = (I + Du(ψ⁻¹(z)))⁻¹ = Σ_k (−Du)^k`, row-major.
pub fn dpsi_inverse(t: &ZvonkinTransform, z: &[f64], tol: f64) -> Result<Vec<f64>> {
    let x = psi_inverse(t, z, tol)?;
    Ok(neumann_inverse(t, &x))
}

/// `(I + Du(x))⁻¹` by the Neumann series.
pub fn neumann_inverse(t: &ZvonkinTransform, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut du = vec![0.0; d * d];
    t.du_at(x, &mut du);
    let mut sum = vec![0.0; d * d];
    let mut term = vec![0.0; d * d];
    for i in 0..d {
        sum[i * d + i] = 1.0;
        term[i * d + i] = 1.0;
    }
    for _ in 0..200 {
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] = -(0..d).map(|k| term[i * d + k] * du[k * d + j]).sum::<f64>();
            }
        }
        let size = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (s, n) in sum.iter_mut().zip(&next) {
            *s += n;
        }
        term = next;
        if size < 1e-16 {
            break;
        }
    }
    sum
}

/// Sup over lattice nodes of the operator norm (Frobenius) of `Dψ⁻¹` at
/// `ψ(x)`, i.e. of `(I + Du(x))⁻¹`.
pub fn dpsi_inverse_sup(t: &ZvonkinTransform) -> f64 {
    let lat = t.u.lattice;
    (0..lat.len())
        .map(|i| {
            let m = neumann_inverse(t, &lat.point(i));
            operator_norm(&m, lat.dimension)
        })
        .fold(0.0, f64::max)
}

/// Spectral norm via power iteration on `MᵀM`.
fn operator_norm(m: &[f64], d: usize) -> f64 {
    if d == 1 {
        return m[0].abs();
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut norm = 0.0;
    for _ in 0..100 {
        let mv: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect();
        let mtmv: Vec<f64> = (0..d).map(|j| (0..d).map(|i| m[i * d + j] * mv[i]).sum()).collect();
        let n = mtmv.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        v = mtmv.iter().map(|a| a / n).collect();
        norm = n.sqrt();
    }
    norm
}

/// γ-Hölder seminorm of `Dψ⁻¹` from `probe_pairs` random pairs in the
/// middle third of the lattice box (separation at least two spacings).
pub fn dpsi_inverse_holder(t: &ZvonkinTransform, probe_pairs: usize, seed: u64) -> Result<f64> {
    let lat = t.u.lattice;
    let d = lat.dimension;
    let h = lat.spacing();
    let r = lat.radius / 3.0;
    let mut rng = SeedTree::new(seed).named("dpsi-holder").stream();
    let mut best: f64 = 0.0;
    for _ in 0..probe_pairs {
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        let scale = 10f64.powf(rng.random_range(0.0..(r / h).log10()));
        let z2: Vec<f64> = z.iter().map(|v| v + scale * h * rng.random_range(-1.0..1.0)).collect();
        let sep = z.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if sep < 2.0 * h {
            continue;
        }
        let a = dpsi_inverse(t, &z, 1e-12)?;
        let b = dpsi_inverse(t, &z2, 1e-12)?;
        let diff = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        best = best.max(diff / sep.powf(t.gamma));
    }
    Ok(best)
}

/// Coefficients of the auxiliary SDE
/// `dY = b̃(Y) dt + ∫_{|z|≤r} g(Y−, z) Ñ(dt, dz) + ∫_{|z|>r} g(Y−, z) N(dt, dz)`.
#[derive(Clone, Debug)]
pub struct AuxiliaryCoeffs {
    pub transform: ZvonkinTransform,
    pub r: f64,
    /// `∫_{|z|>r} [u(x+z) − u(x)] ν(dz)` per component on the lattice.
    pub big_jump_mean: GridFunction,
    /// `∫_{r<|z|≤1} z ν(dz)`.
    pub mid_drift: Vec<f64>,
    /// Tolerance for `ψ⁻¹`.
    pub inverse_tol: f64,
}

impl AuxiliaryCoeffs {
    /// `b̃(y) = λu(x) − ∫_{|z|>r}[u(x+z) − u(x)] ν(dz) − (I − Du(x)) m`
    /// with `m = ∫_{r<|z|≤1} z ν(dz)` and `x = ψ⁻¹(y)` supplied by the caller.
    pub fn btilde_at(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let mut u = vec![0.0; d];
        self.transform.u_at(x, &mut u);
        let mut j = vec![0.0; d];
        self.big_jump_mean.eval_into(x, &mut j);
        for k in 0..d {
            out[k] = self.transform.lambda * u[k] - j[k] - self.mid_drift[k];
        }
        if self.mid_drift.iter().any(|&m| m != 0.0) {
            let mut du = vec![0.0; d * d];
            self.transform.du_at(x, &mut du);
            for k in 0..d {
                out[k] += (0..d).map(|l| du[k * d + l] * self.mid_drift[l]).sum::<f64>();
            }
        }
    }

    pub fn btilde(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = psi_inverse(&self.transform, y, self.inverse_tol)?;
        let mut out = vec![0.0; y.len()];
        self.btilde_at(&x, &mut out);
        Ok(out)
    }

    /// `g(y, z) = ψ(ψ⁻¹(y) + z) − y`.
    pub fn g(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let x = psi_inverse(&self.transform, y, self.inverse_tol)?;
        Ok(self.g_at(&x, y, z))
    }

    /// `g` with `x = ψ⁻¹(y)` already known.
    pub fn g_at(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let moved: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        psi_forward(&self.transform, &moved).iter().zip(y).map(|(a, b)| a - b).collect()
    }
}

/// Builds `b̃` and `g` for small-jump cutoff `r ∈ (0, 1]`.
pub fn auxiliary_coeffs(t: &ZvonkinTransform, model: &LevyModel, r: f64) -> Result<AuxiliaryCoeffs> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("cutoff r must lie in (0, 1], got {r}")));
    }
    let d = t.dimension();
    if model.dimension != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: model.dimension,
        });
    }
    let parts: Vec<GridFunction> = (0..d)
        .map(|j| jump_integral(model, &t.u.component(j), r, false))
        .collect::<Result<_>>()?;
    let big_jump_mean = GridFunction::from_components(&parts)?;
    let dec = model.decomposition();
    let mut mid_drift = vec![0.0; d];
    if let Angular::Discrete(m) = &dec.angular {
        if !m.is_symmetric() && r < 1.0 {
            let radial = dec.profile.moment_between(1.0, r, 1.0f64.min(dec.profile.outer_radius()))?;
            for (xi, w) in m.directions.iter().zip(&m.weights) {
                for k in 0..d {
                    mid_drift[k] += radial * w * xi[k];
                }
            }
        }
    }
    Ok(AuxiliaryCoeffs {
        transform: t.clone(),
        r,
        big_jump_mean,
        mid_drift,
        inverse_tol: 1e-12,
    })
}

/// `sup_{y≠y′} ∫_{|z|≤1} |g(y,z) − g(y′,z)|² ν(dz) / |y − y′|²` over sampled
/// pairs, with the radial integral done by Gauss–Legendre on dyadic panels.
pub fn small_jump_lipschitz(coeffs: &AuxiliaryCoeffs, model: &LevyModel, pairs: usize, seed: u64) -> Result<f64> {
    let t = &coeffs.transform;
    let lat = t.u.lattice;
    let d = lat.dimension;
    let dec = model.decomposition();
    let measure = match dec.angular {
        Angular::Uniform { dim, mass } => crate::levy_models::SphericalMeasure::uniform(dim, mass),
        Angular::Discrete(m) => m,
    };
    let rule = crate::quad::GaussRule::new(6);
    let mut radial = Vec::new();
    let top = 1.0f64.min(dec.profile.outer_radius());
    let mut hi = top;
    for _ in 0..30 {
        let lo = hi / 2.0;
        radial.extend(rule.on(lo, hi).map(|(s, w)| (s, w * dec.profile.density(s))));
        hi = lo;
    }
    let r = lat.radius / 3.0;
    let mut rng = SeedTree::new(seed).named("g-lipschitz").stream();
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        let y2: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let sep2: f64 = y.iter().zip(&y2).map(|(a, b)| (a - b).powi(2)).sum();
        if sep2 == 0.0 {
            continue;
        }
        let x = psi_inverse(t, &y, 1e-12)?;
        let x2 = psi_inverse(t, &y2, 1e-12)?;
        let mut total = 0.0;
        for (xi, w) in measure.directions.iter().zip(&measure.weights) {
            for &(s, ws) in &radial {
                let z: Vec<f64> = xi.iter().map(|v| v * s).collect();
                let g1 = coeffs.g_at(&x, &y, &z);
                let g2 = coeffs.g_at(&x2, &y2, &z);
                total += w * ws * g1.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
        }
        best = best.max(total / sep2);
    }
    Ok(best)
}
