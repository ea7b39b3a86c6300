//! One-dimensional quadrature: Gauss–Legendre rules, a globally adaptive
//! Gauss–Kronrod (7/15) integrator, and helpers for integrands that are
//! singular at the origin.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be integrated.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel.
pub fn gk15<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> Estimate<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).magnitude();
    Estimate { value, error }
}

/// Globally adaptive integration on `[a, b]`: the panel with the largest error
/// estimate is bisected until `error <= max(abs_tol, rel_tol * |value|)`.
pub fn adaptive<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    const MAX_PANELS: usize = 2000;
    let mut panels: Vec<(f64, f64, Estimate<T>)> = vec![(a, b, gk15(&f, a, b))];
    loop {
        let (value, error) = panels.iter().fold((T::zero(), 0.0), |(v, e), p| (v + p.2.value, e + p.2.error));
        if error <= abs_tol.max(rel_tol * value.magnitude()) {
            return Ok(Estimate { value, error });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                context: format!("adaptive GK15 on [{a}, {b}]"),
                residual: error,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.2.error > best.1 { (i, p.2.error) } else { best });
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Panel cannot be split further in floating point.
            let (value, error) = panels.iter().fold((T::zero(), 0.0), |(v, e), p| (v + p.2.value, e + p.2.error));
            let last = gk15(&f, lo, hi);
            return Ok(Estimate {
                value: value + last.value,
                error: error + last.error,
            });
        }
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
}

/// Integrates over `[lo, hi]` (both finite, `0 < lo < hi`) on geometric
/// panels of ratio 2, each handled adaptively. Suited to integrands that vary
/// on the scale of `s` itself, such as power-law radial densities.
pub fn geometric<T: QuadValue>(f: impl Fn(f64) -> T, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate<T>> {
    assert!(lo > 0.0 && hi >= lo);
    let mut total = Estimate {
        value: T::zero(),
        error: 0.0,
    };
    let mut a = lo;
    let panels = ((hi / lo).log2().ceil() as usize).max(1);
    let tol = abs_tol / panels as f64;
    while a < hi {
        let b = (2.0 * a).min(hi);
        let e = adaptive(&f, a, b, tol, rel_tol)?;
        total.value = total.value + e.value;
        total.error += e.error;
        a = b;
    }
    Ok(total)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule mapped onto an arbitrary interval.
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    /// `(node, weight)` pairs on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<T: QuadValue>(&self, f: impl Fn(f64) -> T, a: f64, b: f64) -> T {
        self.on(a, b).fold(T::zero(), |acc, (x, w)| acc + f(x) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::new(6);
        // degree 11 is exact for 6 points
        let v = rule.integrate(|x: f64| x.powi(10) + 3.0 * x.powi(3), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 11.0, epsilon = 1e-14);
        let (_, w) = gauss_legendre(9);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let e = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-12).unwrap();
        assert_relative_eq!(e.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_complex_oscillatory() {
        // ∫_0^{10} e^{ix} dx = (e^{10i} - 1)/i
        let e = adaptive(|x: f64| Complex64::new(0.0, x).exp(), 0.0, 10.0, 1e-12, 0.0).unwrap();
        let exact = (Complex64::new(0.0, 10.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((e.value - exact).norm() < 1e-11);
    }

    #[test]
    fn geometric_power_law() {
        // ∫_{1e-3}^{10} s^{-2.5} ds
        let e = geometric(|s: f64| s.powf(-2.5), 1e-3, 10.0, 1e-9, 1e-12).unwrap();
        let exact = (1e-3f64.powf(-1.5) - 10f64.powf(-1.5)) / 1.5;
        assert_relative_eq!(e.value, exact, max_relative = 1e-11);
    }
}
