//! Increment and path samplers for every Lévy model, plus the distributional
//! checks used to validate them.

mod increments;
mod path;
mod radial_sampler;
pub mod stats;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_models::{symbol, LevyModel};
use crate::rng::{SeedTree, CHUNK};

pub use increments::{
    has_exact_marginal, positive_stable, sample_isotropic_increment, sample_marginal, sample_relativistic_increment,
    sample_stable_increment, standard_symmetric_stable, tilted_subordinator, REJECTION_CAP,
};
pub use path::{uniform_grid, sample_path, sample_path_with, sample_paths, JumpPath, JumpSampler, PathMeta, PathSpec, SmallJumpScheme};
pub use radial_sampler::{RadialSampler, TABLE_NODES};


/// How `L_t` is drawn in batch samplers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MarginalMethod {
    Exact,
    LevyIto { eps_cut: f64, scheme: SmallJumpScheme },
}

impl MarginalMethod {
    /// Exact when available, otherwise a Lévy–Itô draw with ε = 0.05 and
    /// automatic small-jump handling.
    pub fn default_for(model: &LevyModel) -> Self {
        if has_exact_marginal(model) {
            Self::Exact
        } else {
            Self::LevyIto {
                eps_cut: 0.05,
                scheme: SmallJumpScheme::Auto,
            }
        }
    }
}

/// Batch of `n` draws of `L_t`, row-major `n × d`. Chunk `i` of
/// [`CHUNK`] samples draws from `seeds.child(i)`, so the output does not
/// depend on the thread count.
pub fn sample_marginals(model: &LevyModel, t: f64, n: usize, method: MarginalMethod, seeds: SeedTree) -> Result<Vec<f64>> {
    model.validate()?;
    let d = model.dimension;
    let sampler = match method {
        MarginalMethod::Exact => None,
        MarginalMethod::LevyIto { eps_cut, .. } => Some(JumpSampler::new(model, eps_cut)?),
    };
    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let len = CHUNK.min(n - c * CHUNK);
            let child = seeds.child(c as u64);
            let mut out = Vec::with_capacity(len * d);
            match (method, &sampler) {
                (MarginalMethod::Exact, _) => {
                    let mut rng = child.stream();
                    for _ in 0..len {
                        out.extend(sample_marginal(model, t, &mut rng)?);
                    }
                }
                (MarginalMethod::LevyIto { eps_cut, scheme }, Some(s)) => {
                    if t == 0.0 {
                        out.resize(len * d, 0.0);
                    } else {
                        let spec = PathSpec::levy_ito(t, 1, eps_cut, scheme);
                        for j in 0..len {
                            let p = sample_path_with(model, s, &spec, child.child(j as u64))?;
                            out.extend(p.terminal());
                        }
                    }
                }
                _ => unreachable!(),
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfProbe {
    pub u: Vec<f64>,
    pub empirical: (f64, f64),
    pub exact: (f64, f64),
    pub deviation: f64,
    /// `sqrt((1 − |ĉf|²)/n)`.
    pub standard_error: f64,
    /// Deterministic allowance for an approximate small-jump scheme:
    /// `|u|·sqrt(t·tr Σ(ε))` under `Drop`, 0 otherwise.
    pub bias_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfCheck {
    pub max_abs_deviation: f64,
    /// Standard error at the probe with the largest deviation.
    pub standard_error: f64,
    pub probes: Vec<CfProbe>,
    /// Every probe within `3·SE + bias_bound`.
    pub pass: bool,
}

/// Compares the empirical characteristic function of `L_t` with `e^{−tψ(u)}`.
pub fn empirical_cf_check(
    model: &LevyModel,
    t: f64,
    u_probes: &[Vec<f64>],
    n_samples: usize,
    method: MarginalMethod,
    seeds: SeedTree,
) -> Result<CfCheck> {
    if n_samples < 10_000 {
        return Err(Error::InvalidArgument(format!("n_samples = {n_samples} < 10^4")));
    }
    let d = model.dimension;
    let samples = sample_marginals(model, t, n_samples, method, seeds)?;
    let bias_rate = match method {
        MarginalMethod::LevyIto { eps_cut, scheme } => {
            let s = JumpSampler::new(model, eps_cut)?;
            let resolved_drop = scheme == SmallJumpScheme::Drop
                || (scheme == SmallJumpScheme::Auto && (s.variance_rate() / d as f64).sqrt() < eps_cut);
            if resolved_drop {
                (t * s.variance_rate()).sqrt()
            } else {
                0.0
            }
        }
        MarginalMethod::Exact => 0.0,
    };
    let mut probes = Vec::with_capacity(u_probes.len());
    for u in u_probes {
        if u.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.len() });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for x in samples.chunks_exact(d) {
            let phase: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += Complex64::new(phase.cos(), phase.sin());
        }
        let emp = acc / n_samples as f64;
        let exact = (-symbol(model, u)? * t).exp();
        let deviation = (emp - exact).norm();
        let se = ((1.0 - emp.norm_sqr()).max(0.0) / n_samples as f64).sqrt();
        let norm_u = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bias = norm_u * bias_rate;
        probes.push(CfProbe {
            u: u.clone(),
            empirical: (emp.re, emp.im),
            exact: (exact.re, exact.im),
            deviation,
            standard_error: se,
            bias_bound: bias,
            pass: deviation <= 3.0 * se + bias,
        });
    }
    let worst = probes
        .iter()
        .max_by(|a, b| a.deviation.total_cmp(&b.deviation))
        .cloned();
    Ok(CfCheck {
        max_abs_deviation: worst.as_ref().map_or(0.0, |p| p.deviation),
        standard_error: worst.as_ref().map_or(0.0, |p| p.standard_error),
        pass: probes.iter().all(|p| p.pass),
        probes,
    })
}
