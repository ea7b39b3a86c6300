//! Special functions used by the Lévy-measure constants.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::quad;

/// `∫_0^∞ (1 − cos t) t^{−1−α} dt = Γ(1−α) cos(πα/2) / α`, written so that
/// it is continuous through α = 1 (value π/2).
pub fn stable_cos_constant(alpha: f64) -> f64 {
    let d = 1.0 - alpha;
    let ratio = if d.abs() < 1e-8 {
        // sin(πd/2)/d → π/2
        PI / 2.0 * (1.0 - (PI * d).powi(2) / 24.0)
    } else {
        (PI * d / 2.0).sin() / d
    };
    gamma(2.0 - alpha) / alpha * ratio
}

/// `E|ξ_1|^p` for ξ uniform on the unit sphere of ℝ^d.
pub fn sphere_abs_moment(d: usize, p: f64) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) + ln_gamma((p + 1.0) / 2.0) - ln_gamma((d + p) / 2.0)).exp() / PI.sqrt()
}

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `e^x K_ν(x)` for real `x > 0`, from `K_ν(x) = ∫_0^∞ e^{−x cosh t} cosh(νt) dt`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0);
    let nu = nu.abs();
    let log_integrand = |t: f64| -x * (t.cosh() - 1.0) + nu * t;
    // The exponent is concave in t; step past its maximum until it has
    // dropped 60 below the running peak.
    let mut t_max = 0.5;
    let mut peak = log_integrand(0.0);
    loop {
        let v = log_integrand(t_max);
        peak = peak.max(v);
        if v < peak - 60.0 && x * t_max.sinh() > nu {
            break;
        }
        t_max += 0.5;
    }
    let f = |t: f64| (log_integrand(t) - peak).exp() * (1.0 + (-2.0 * nu * t).exp()) / 2.0;
    let e = quad::adaptive(f, 0.0, t_max, 0.0, 1e-13).expect("bessel integrand is smooth");
    e.value * peak.exp()
}
