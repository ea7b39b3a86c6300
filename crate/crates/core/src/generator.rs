//! Radial × angular quadrature of non-local jump integrals applied to
//! lattice functions:
//!
//! `∫_{|z|>r} [g(x+z) − g(x) − c 1_{|z|≤1} z·Dg(x)] ν(dz)`,
//!
//! with `c = 1` for the generator (`r = 0`) and `c = 0` for the big-jump
//! compensator. Jumps shorter than a few lattice spacings use the local
//! quadratic model `z·Dg + ½ zᵀD²g z`; longer ones difference the
//! interpolated function directly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Provenance};
use crate::levy_models::{Angular, LevyModel, SphericalMeasure};
use crate::quad::GaussRule;

/// Lattice spacings covered by the local quadratic model.
const NEAR_CELLS: f64 = 4.0;
/// Panels of one lattice spacing before the mesh starts doubling.
const UNIFORM_PANELS: usize = 64;

/// Jump integral of a scalar lattice function at every node.
pub fn jump_integral(model: &LevyModel, g: &GridFunction, lower: f64, compensated: bool) -> Result<GridFunction> {
    model.validate()?;
    if g.components != 1 {
        return Err(Error::InvalidArgument("jump integrals act on scalar fields".into()));
    }
    let lat = g.lattice;
    let d = lat.dimension;
    if d != model.dimension {
        return Err(Error::DimensionMismatch {
            expected: model.dimension,
            got: d,
        });
    }
    if !(lower >= 0.0) {
        return Err(Error::InvalidArgument("lower cut must be >= 0".into()));
    }
    let dec = model.decomposition();
    let profile = dec.profile.clone();
    let measure = match dec.angular {
        Angular::Uniform { dim, mass } => SphericalMeasure::uniform(dim, mass),
        Angular::Discrete(m) => m,
    };
    let h = lat.spacing();
    let s1 = lower.max(NEAR_CELLS * h);
    let s_max = (2.0 * lat.radius * (d as f64).sqrt()).max(2.0 * s1).min(profile.outer_radius());

    // local model on (lower, s1]
    let near_hi = s1.min(profile.outer_radius());
    let (m1, m2, comp_near) = if near_hi > lower {
        let m1 = profile.moment_between(1.0, lower, near_hi)?;
        let m2 = profile.moment_between(2.0, lower, near_hi)?;
        let c = if compensated { profile.moment_between(1.0, lower, near_hi.min(1.0))? } else { 0.0 };
        (m1, m2, c)
    } else {
        (0.0, 0.0, 0.0)
    };
    let comp_far = if compensated && s1 < 1.0 {
        profile.moment_between(1.0, s1, 1.0f64.min(profile.outer_radius()))?
    } else {
        0.0
    };
    let tail = if s_max < profile.outer_radius() { profile.tail_mass(s_max)? } else { 0.0 };

    // radial nodes on [s1, s_max]
    let rule = GaussRule::new(4);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    if s_max > s1 {
        let mut a = s1;
        let mut width = h;
        let mut count = 0;
        while a < s_max {
            let b = (a + width).min(s_max);
            nodes.extend(rule.on(a, b).map(|(s, w)| (s, w * profile.density(s))));
            a = b;
            count += 1;
            if count >= UNIFORM_PANELS {
                width *= 2.0;
            }
        }
    }

    let grad = g.gradient();
    let hess = grad.gradient();
    let dirs: Vec<(&[f64], f64)> = measure
        .directions
        .iter()
        .map(|v| v.as_slice())
        .zip(measure.weights.iter().copied())
        .collect();

    let values: Vec<f64> = (0..lat.len())
        .into_par_iter()
        .map(|node| {
            let x = lat.point(node);
            let g0 = g.values[node];
            let dg = grad.node(node);
            let hg = hess.node(node);
            let mut y = vec![0.0; d];
            let mut total = 0.0;
            for &(theta, w) in &dirs {
                let lin: f64 = theta.iter().zip(dg).map(|(a, b)| a * b).sum();
                let mut quad = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        quad += theta[i] * hg[i * d + j] * theta[j];
                    }
                }
                let mut acc = 0.5 * quad * m2 + lin * (m1 - comp_near) - lin * comp_far;
                for &(s, ws) in &nodes {
                    for k in 0..d {
                        y[k] = x[k] + s * theta[k];
                    }
                    acc += ws * (g.eval(&y) - g0);
                }
                if tail > 0.0 {
                    for k in 0..d {
                        y[k] = x[k] + s_max * theta[k];
                    }
                    acc += tail * (g.eval(&y) - g0);
                }
                total += w * acc;
            }
            total
        })
        .collect();
    GridFunction::new(
        lat,
        1,
        values,
        Provenance {
            description: format!("jump integral over |z| > {lower} of [{}]", g.provenance.description),
            ..g.provenance.clone()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;
    use crate::levy_models::symbol;

    #[test]
    fn generator_of_cosine_is_minus_symbol_times_cosine() {
        let model = LevyModel::isotropic(1, 1.5, 1.0);
        let lat = Lattice::with_spacing(1, 60.0, 0.02).unwrap();
        let g = GridFunction::from_fn(lat, 1, |x, o| o[0] = x[0].cos());
        let lg = jump_integral(&model, &g, 0.0, true).unwrap();
        let psi = symbol(&model, &[1.0]).unwrap().re;
        for node in 0..lat.len() {
            let x = lat.point(node)[0];
            if x.abs() < 5.0 {
                assert!((lg.values[node] + psi * x.cos()).abs() < 5e-3, "x = {x}: {}", lg.values[node]);
            }
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let model = LevyModel::tempered(2, 1.3, 1.0);
        let lat = Lattice::new(2, 2.0, 21).unwrap();
        let g = GridFunction::from_fn(lat, 1, |_, o| o[0] = 3.0);
        let lg = jump_integral(&model, &g, 0.1, false).unwrap();
        assert!(lg.sup_norm() < 1e-12);
    }
}
