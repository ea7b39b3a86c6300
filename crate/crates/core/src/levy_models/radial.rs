//! Radial profiles ρ(s) of Lévy measures written as
//! ν(dz) = ρ(s) ds μ(dξ), z = sξ, and the one-dimensional integrals built on
//! them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::Result;
use crate::quad::{self, GaussRule};
use crate::specfun::{bessel_k_scaled, sphere_area};

/// Radial density per unit angular mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `s^{−1−α}` on (0, ∞).
    Power { alpha: f64 },
    /// `s^{−1−α}` on (0, r].
    Truncated { alpha: f64, r: f64 },
    /// `e^{−s} s^{−1−α}` on (0, ∞).
    Tempered { alpha: f64 },
    /// Radial part of the isotropic density of the process with symbol
    /// `(|u|² + m^{2/α})^{α/2} − m` in dimension `d`, multiplied by the
    /// sphere area so that it pairs with a probability measure on directions.
    Relativistic { alpha: f64, m: f64, d: usize },
}

/// The Fourier integrand is replaced by its Taylor expansion on (0, s] once
/// `a·s` is below this value and `s` is below [`TAYLOR_RADIUS`].
const TAYLOR_CUTOFF: f64 = 1e-4;
const TAYLOR_RADIUS: f64 = 1e-6;
/// Length of the exponentially damped contour integrals, in units of the
/// damping scale.
const DAMPING_SPAN: f64 = 60.0;
/// Innermost radius used for numeric moments near the singular origin.
const INNER_RADIUS: f64 = 1e-10;

impl RadialProfile {
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Power { alpha } | Self::Truncated { alpha, .. } | Self::Tempered { alpha } | Self::Relativistic { alpha, .. } => alpha,
        }
    }

    /// Largest radius in the support.
    pub fn outer_radius(&self) -> f64 {
        match *self {
            Self::Truncated { r, .. } => r,
            _ => f64::INFINITY,
        }
    }

    /// Exponential decay rate at infinity, if any.
    pub fn decay_rate(&self) -> Option<f64> {
        match *self {
            Self::Tempered { .. } => Some(1.0),
            Self::Relativistic { alpha, m, .. } => Some(m.powf(1.0 / alpha)),
            _ => None,
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Power { alpha } => s.powf(-1.0 - alpha),
            Self::Truncated { alpha, r } => {
                if s <= r {
                    s.powf(-1.0 - alpha)
                } else {
                    0.0
                }
            }
            Self::Tempered { alpha } => (-s).exp() * s.powf(-1.0 - alpha),
            Self::Relativistic { alpha, m, d } => relativistic_radial_density(alpha, m, d, s),
        }
    }

    /// Analytic continuation into Re z > 0, where available.
    fn density_complex(&self, z: Complex64) -> Option<Complex64> {
        match *self {
            Self::Power { alpha } | Self::Truncated { alpha, .. } => Some(z.powf(-1.0 - alpha)),
            Self::Tempered { alpha } => Some((-z).exp() * z.powf(-1.0 - alpha)),
            Self::Relativistic { .. } => None,
        }
    }

    /// `lim_{s→0} s^{1+α} ρ(s)`.
    pub fn leading_coefficient(&self) -> f64 {
        match *self {
            Self::Relativistic { alpha, d, .. } => relativistic_leading_coefficient(alpha, d),
            _ => 1.0,
        }
    }

    /// `∫_ε^∞ ρ(s) ds` for ε > 0.
    pub fn tail_mass(&self, eps: f64) -> Result<f64> {
        assert!(eps > 0.0);
        match *self {
            Self::Power { alpha } => Ok(eps.powf(-alpha) / alpha),
            Self::Truncated { alpha, r } => Ok(if eps >= r { 0.0 } else { (eps.powf(-alpha) - r.powf(-alpha)) / alpha }),
            _ => self.moment_between(0.0, eps, f64::INFINITY),
        }
    }

    /// `∫_lo^hi s^p ρ(s) ds`. With `lo = 0` this requires `p > α`; with
    /// `hi = ∞` and no exponential decay it requires `p < α`.
    pub fn moment_between(&self, p: f64, lo: f64, hi: f64) -> Result<f64> {
        let alpha = self.alpha();
        let hi = hi.min(self.outer_radius());
        if hi <= lo {
            return Ok(0.0);
        }
        match *self {
            Self::Power { .. } | Self::Truncated { .. } => {
                let e = p - alpha;
                let prim = |s: f64| -> f64 {
                    if e.abs() < 1e-14 {
                        s.ln()
                    } else {
                        s.powf(e) / e
                    }
                };
                let upper = if hi.is_infinite() { 0.0 } else { prim(hi) };
                let lower = if lo == 0.0 { 0.0 } else { prim(lo) };
                Ok(upper - lower)
            }
            _ => {
                let kappa = self.decay_rate().expect("profile decays");
                let hi = hi.min(lo.max(1.0) + DAMPING_SPAN / kappa);
                let f = |s: f64| s.powf(p) * self.density(s);
                let mut total = 0.0;
                let mut start = lo;
                if lo == 0.0 {
                    let inner = INNER_RADIUS.min(hi);
                    total += self.inner_moment(p, inner);
                    start = inner;
                }
                if start < hi {
                    total += quad::geometric(f, start, hi, 1e-13 * (1.0 + total.abs()), 1e-12)?.value;
                }
                Ok(total)
            }
        }
    }

    /// `∫_0^ε s^p ρ(s) ds` for tiny ε, with `s^{1+α}ρ(s)` replaced by the line
    /// through its values at ε/2 and ε.
    fn inner_moment(&self, p: f64, eps: f64) -> f64 {
        let alpha = self.alpha();
        let c = |s: f64| self.density(s) * s.powf(1.0 + alpha);
        let (c_hi, c_mid) = (c(eps), c(0.5 * eps));
        let slope = (c_hi - c_mid) / (0.5 * eps);
        let c0 = c_hi - slope * eps;
        let e = p - alpha;
        c0 * eps.powf(e) / e + slope * eps.powf(e + 1.0) / (e + 1.0)
    }

    /// `F(a) = ∫_0^∞ (1 − e^{ias} + ias·1_{s≤1}) ρ(s) ds`, so that a measure
    /// `ρ ds ⊗ Σ w_i δ_{ξ_i}` has symbol `Σ w_i F(⟨u, ξ_i⟩)`.
    pub fn fourier(&self, a: f64) -> Result<Complex64> {
        if a == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if a < 0.0 {
            return Ok(self.fourier(-a)?.conj());
        }
        let r = self.outer_radius();
        let s0 = r.min(1.0).min(2.0 / a);
        let near = self.fourier_near(a, s0);
        if s0 >= r {
            return Ok(near);
        }
        let mass = match *self {
            Self::Power { .. } | Self::Truncated { .. } => self.moment_between(0.0, s0, r)?,
            _ => self.moment_between(0.0, s0, f64::INFINITY)?,
        };
        let comp = if s0 < 1.0 { a * self.moment_between(1.0, s0, r.min(1.0))? } else { 0.0 };
        let osc = self.oscillatory(a, s0, r)?;
        Ok(near + Complex64::new(mass - osc.re, comp - osc.im))
    }

    /// Contribution of (0, s0] where `a·s0 ≤ 2`, on dyadic panels toward 0.
    fn fourier_near(&self, a: f64, s0: f64) -> Complex64 {
        let rule = gl16();
        let mut total = Complex64::new(0.0, 0.0);
        let mut hi = s0;
        loop {
            if a * hi < TAYLOR_CUTOFF && hi < TAYLOR_RADIUS {
                total.re += a * a / 2.0 * self.inner_moment(2.0, hi);
                total.im += a.powi(3) / 6.0 * self.inner_moment(3.0, hi);
                break;
            }
            let lo = 0.5 * hi;
            total += rule.integrate(
                |s: f64| {
                    let x = a * s;
                    Complex64::new(one_minus_cos(x), x_minus_sin(x)) * self.density(s)
                },
                lo,
                hi,
            );
            hi = lo;
        }
        total
    }

    /// `∫_lo^hi e^{ias} ρ(s) ds` with `lo > 0`.
    fn oscillatory(&self, a: f64, lo: f64, hi: f64) -> Result<Complex64> {
        let real_axis = |end: f64| {
            quad::adaptive(|s: f64| Complex64::new(0.0, a * s).exp() * self.density(s), lo, end, 1e-14, 1e-12)
                .map(|e| e.value)
        };
        if let Some(kappa) = self.decay_rate() {
            if a < kappa || self.density_complex(Complex64::new(1.0, 0.0)).is_none() {
                return real_axis(lo + DAMPING_SPAN / kappa);
            }
        }
        let ray = |p: f64| -> Result<Complex64> {
            let f = |x: f64| self.density_complex(Complex64::new(p, x / a)).expect("analytic profile") * (-x).exp();
            let scale = self.density(p).abs().max(1e-300);
            let integral = quad::adaptive(f, 0.0, 50.0, 1e-15 * scale, 1e-12)?.value;
            Ok(Complex64::new(0.0, 1.0 / a) * Complex64::new(0.0, a * p).exp() * integral)
        };
        if hi.is_infinite() {
            ray(lo)
        } else {
            Ok(ray(lo)? - ray(hi)?)
        }
    }
}

fn gl16() -> &'static GaussRule {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(16))
}

pub(crate) fn one_minus_cos(x: f64) -> f64 {
    let h = (0.5 * x).sin();
    2.0 * h * h
}

pub(crate) fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x - x.sin()
    }
}

/// Lévy density of the relativistic process at |z| = s times `|S^{d−1}| s^{d−1}`.
///
/// The process is Brownian motion with generator Δ run at a subordinator
/// with Lévy density `(α/2)/Γ(1−α/2) e^{−μτ} τ^{−1−α/2}`, μ = m^{2/α}; the
/// τ-integral is a modified Bessel function of order (d+α)/2.
fn relativistic_radial_density(alpha: f64, m: f64, d: usize, s: f64) -> f64 {
    let mu = m.powf(2.0 / alpha);
    let df = d as f64;
    let nu = (df + alpha) / 2.0;
    let c_pi = (alpha / 2.0) / gamma(1.0 - alpha / 2.0);
    let x = s * mu.sqrt();
    let k = bessel_k_scaled(nu, x) * (-x).exp();
    let j = c_pi * (4.0 * std::f64::consts::PI).powf(-df / 2.0) * 2.0 * (s * s / (4.0 * mu)).powf(-nu / 2.0) * k;
    sphere_area(d) * s.powf(df - 1.0) * j
}

fn relativistic_leading_coefficient(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    let c = alpha * 2f64.powf(alpha - 1.0) * gamma((df + alpha) / 2.0)
        / (std::f64::consts::PI.powf(df / 2.0) * gamma(1.0 - alpha / 2.0));
    sphere_area(d) * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::stable_cos_constant;
    use approx::assert_relative_eq;

    /// Composite Simpson on (1 − cos(as)) s^{−1−α} over (0, r] after the
    /// substitution s = w^{1/(2−α)}, which makes the integrand bounded at 0.
    fn truncated_oracle(alpha: f64, r: f64, a: f64) -> f64 {
        let q = 1.0 / (2.0 - alpha);
        let wmax = r.powf(2.0 - alpha);
        let n = 400_000;
        let h = wmax / n as f64;
        let g = |w: f64| {
            if w == 0.0 {
                return q * a * a / 2.0;
            }
            let s = w.powf(q);
            2.0 * (0.5 * a * s).sin().powi(2) * s.powf(-1.0 - alpha) * q * w.powf(q - 1.0)
        };
        let mut acc = g(0.0) + g(wmax);
        for i in 1..n {
            acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    fn tempered_oracle(alpha: f64, a: f64) -> f64 {
        if (alpha - 1.0).abs() < 1e-12 {
            a * a.atan() - 0.5 * (1.0 + a * a).ln()
        } else {
            -gamma(-alpha) * ((1.0 + a * a).powf(alpha / 2.0) * (alpha * a.atan()).cos() - 1.0)
        }
    }

    #[test]
    fn power_profile_matches_stable_constant() {
        for &alpha in &[0.3, 0.9, 1.0, 1.2, 1.5, 1.95] {
            let p = RadialProfile::Power { alpha };
            for &a in &[1e-3, 0.4, 1.0, 2.5, 17.0, 900.0] {
                let f = p.fourier(a).unwrap();
                let exact = stable_cos_constant(alpha) * a.powf(alpha);
                assert_relative_eq!(f.re, exact, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn fourier_is_conjugate_symmetric() {
        let p = RadialProfile::Tempered { alpha: 1.3 };
        let f = p.fourier(3.7).unwrap();
        let g = p.fourier(-3.7).unwrap();
        assert_eq!(f, g.conj());
    }

    #[test]
    fn tempered_profile_matches_closed_form() {
        for &alpha in &[0.4, 1.0, 1.5, 1.8] {
            let p = RadialProfile::Tempered { alpha };
            for &a in &[0.05, 0.7, 1.0, 3.0, 40.0, 2000.0] {
                let f = p.fourier(a).unwrap();
                let exact = tempered_oracle(alpha, a);
                assert_relative_eq!(f.re, exact, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn truncated_profile_matches_brute_force() {
        for &(alpha, r) in &[(1.5, 1.0), (0.7, 1.0), (1.0, 0.5), (1.2, 2.0)] {
            let p = RadialProfile::Truncated { alpha, r };
            for &a in &[0.3, 2.0, 11.0, 150.0] {
                let f = p.fourier(a).unwrap();
                let oracle = truncated_oracle(alpha, r, a);
                assert_relative_eq!(f.re, oracle, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn imaginary_part_matches_direct_integration() {
        // Im F(a) = ∫ (as·1_{s≤1} − sin(as)) ρ(s) ds for the truncated profile,
        // checked against a plain adaptive integral of the same integrand.
        let (alpha, r, a) = (1.3, 1.0, 5.0);
        let p = RadialProfile::Truncated { alpha, r };
        let f = p.fourier(a).unwrap();
        let direct = quad::adaptive(|s: f64| x_minus_sin(a * s) * s.powf(-1.0 - alpha), 0.0, r, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(f.im, direct.value, max_relative = 1e-7);
    }

    #[test]
    fn moments_of_power_profiles() {
        let p = RadialProfile::Truncated { alpha: 1.0, r: 1.0 };
        assert_relative_eq!(p.moment_between(1.5, 0.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        let t = RadialProfile::Tempered { alpha: 1.0 };
        let m = t.moment_between(1.5, 0.0, 1.0).unwrap();
        // ∫_0^1 e^{−s} s^{−1/2} ds = √π erf(1)
        let exact = std::f64::consts::PI.sqrt() * statrs::function::erf::erf(1.0);
        assert_relative_eq!(m, exact, max_relative = 1e-9);
    }

    #[test]
    fn relativistic_density_limits() {
        let (alpha, m, d) = (1.0, 1.0, 1);
        let p = RadialProfile::Relativistic { alpha, m, d };
        // α = 1, d = 1: j(s) = K_1(s)/(π s); ρ = 2 j.
        let s: f64 = 0.8;
        let k1 = bessel_k_scaled(1.0, s) * (-s).exp();
        assert_relative_eq!(p.density(s), 2.0 * k1 / (std::f64::consts::PI * s), max_relative = 1e-10);
        let tiny = 1e-7;
        assert_relative_eq!(p.density(tiny) * tiny.powf(1.0 + alpha), p.leading_coefficient(), max_relative = 1e-5);
    }

    #[test]
    fn relativistic_density_reproduces_symbol() {
        // ψ(u) = ∫ (1 − cos(us)) ρ(s) ds in d = 1 must equal (u² + μ)^{α/2} − m.
        let (alpha, m) = (1.4, 0.8);
        let p = RadialProfile::Relativistic { alpha, m, d: 1 };
        let half = 0.5; // directions ±1 each carry half the mass
        for &u in &[0.5, 2.0, 7.0] {
            let f = p.fourier(u).unwrap().re * 2.0 * half;
            let mu = m.powf(2.0 / alpha);
            let exact = (u * u + mu).powf(alpha / 2.0) - m;
            assert_relative_eq!(f, exact, max_relative = 1e-7);
        }
    }
}
