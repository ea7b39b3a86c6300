//! Exact increments of stable, axis-stable, spherical-radial and
//! relativistic processes.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::levy_models::{Angular, LevyClass, LevyModel};
use crate::rng::Stream;
use crate::specfun::stable_cos_constant;

/// Cap on proposals per relativistic increment.
pub const REJECTION_CAP: u64 = 1_000_000;

fn open_unit(rng: &mut Stream) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 2)")))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dt = {dt} must be finite and non-negative")))
    }
}

/// Standard symmetric stable variate with `E e^{iuX} = e^{−|u|^α}`
/// (Chambers–Mallows–Stuck).
pub fn standard_symmetric_stable(alpha: f64, rng: &mut Stream) -> f64 {
    let v = PI * (open_unit(rng) - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * ((v - alpha * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One-dimensional symmetric α-stable increment with symbol `scale·|u|^α`
/// over a time step `dt`.
pub fn sample_stable_increment(alpha: f64, scale: f64, dt: f64, rng: &mut Stream) -> Result<f64> {
    check_alpha(alpha)?;
    check_dt(dt)?;
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok((scale * dt).powf(1.0 / alpha) * standard_symmetric_stable(alpha, rng))
}

/// Positive ρ-stable variate with `E e^{−λS} = e^{−λ^ρ}` (Kanter).
pub fn positive_stable(rho: f64, rng: &mut Stream) -> f64 {
    let u = PI * open_unit(rng);
    let e: f64 = rng.sample(Exp1);
    let a = (rho * u).sin() / u.sin().powf(1.0 / rho);
    let b = (((1.0 - rho) * u).sin() / e).powf((1.0 - rho) / rho);
    a * b
}

/// Isotropic increment with symbol `scale·|u|^α` in dimension `d`, as
/// Brownian motion (generator Δ) subordinated by an (α/2)-stable variable.
pub fn sample_isotropic_increment(d: usize, alpha: f64, scale: f64, dt: f64, rng: &mut Stream) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_dt(dt)?;
    if dt == 0.0 {
        return Ok(vec![0.0; d]);
    }
    if d == 1 {
        return Ok(vec![sample_stable_increment(alpha, scale, dt, rng)?]);
    }
    let s = (scale * dt).powf(2.0 / alpha) * positive_stable(alpha / 2.0, rng);
    let sd = (2.0 * s).sqrt();
    Ok((0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Increment of the process with symbol `(|u|² + m^{2/α})^{α/2} − m` over `dt`.
///
/// The (α/2)-stable subordinator increment is tilted by `e^{−μS}`
/// (μ = m^{2/α}) through rejection: a stable proposal is accepted with
/// probability `e^{−μS}`, so the acceptance rate is `e^{−m·dt}`. Steps with
/// `m·dt > 1` are split into `⌈m·dt⌉` pieces to keep the rate above `e^{−1}`.
pub fn sample_relativistic_increment(d: usize, alpha: f64, m: f64, dt: f64, rng: &mut Stream) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_dt(dt)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("mass m = {m} must be positive")));
    }
    if dt == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let pieces = (m * dt).ceil().max(1.0) as u64;
    let piece = dt / pieces as f64;
    let mut total = 0.0;
    for _ in 0..pieces {
        total += tilted_subordinator(alpha, m, piece, REJECTION_CAP, rng)?;
    }
    let sd = (2.0 * total).sqrt();
    Ok((0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Tempered (α/2)-stable subordinator increment over `dt`, with Laplace
/// exponent `(λ + μ)^{α/2} − m`.
pub fn tilted_subordinator(alpha: f64, m: f64, dt: f64, cap: u64, rng: &mut Stream) -> Result<f64> {
    let rho = alpha / 2.0;
    let mu = m.powf(2.0 / alpha);
    let scale = dt.powf(1.0 / rho);
    for _ in 0..cap {
        let s = scale * positive_stable(rho, rng);
        let u: f64 = rng.random();
        if u < (-mu * s).exp() {
            return Ok(s);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: cap,
        acceptance_rate: (-m * dt).exp(),
    })
}

/// Whether [`sample_marginal`] draws exact increments for this model.
pub fn has_exact_marginal(model: &LevyModel) -> bool {
    match model.class {
        LevyClass::IsotropicStable | LevyClass::AxisStable | LevyClass::RelativisticStable => true,
        LevyClass::SphericalRadial => model.is_symmetric(),
        _ => false,
    }
}

/// Exact sample of `L_t`.
///
/// A symmetric spherical-radial measure with point masses `w` at ±ξ
/// contributes a one-dimensional stable variable of scale `2wC_α` along ξ,
/// `C_α = ∫(1 − cos t) t^{−1−α} dt`.
pub fn sample_marginal(model: &LevyModel, t: f64, rng: &mut Stream) -> Result<Vec<f64>> {
    check_dt(t)?;
    let d = model.dimension;
    let alpha = model.alpha;
    match model.class {
        LevyClass::IsotropicStable => sample_isotropic_increment(d, alpha, model.scale_scalar(), t, rng),
        LevyClass::AxisStable => model
            .scale_per_axis()
            .iter()
            .map(|&c| sample_stable_increment(alpha, c, t, rng))
            .collect(),
        LevyClass::RelativisticStable => {
            sample_relativistic_increment(d, alpha, model.relativistic_mass(), t * model.scale_scalar(), rng)
        }
        LevyClass::SphericalRadial => {
            let Angular::Discrete(measure) = model.decomposition().angular else { unreachable!() };
            let pairs = measure.antipodal_pairs().ok_or_else(|| {
                Error::NotApplicable("exact sampling needs an antipodally symmetric direction set".into())
            })?;
            let k = 2.0 * stable_cos_constant(alpha);
            let mut out = vec![0.0; d];
            for (i, _) in pairs {
                let x = sample_stable_increment(alpha, k * measure.weights[i], t, rng)?;
                for (o, xi) in out.iter_mut().zip(&measure.directions[i]) {
                    *o += x * xi;
                }
            }
            Ok(out)
        }
        _ => Err(Error::NotApplicable(format!(
            "{:?} has no exact marginal sampler; use a Lévy–Itô path",
            model.class
        ))),
    }
}
