//! Drift coefficients `b : ℝ^d → ℝ^d` used by the resolvent, the transform
//! and the SDE solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DriftSpec {
    /// `b_i(x) = sgn(x_i) · min(κ |x_i|^β, bound)`, componentwise.
    /// With κ > 0 the drift pushes away from the origin.
    HolderPower { beta: f64, kappa: f64, bound: f64 },
    /// `b(x) = a · exp(−|x − c|² / (2w²))`.
    SmoothBump { amplitude: Vec<f64>, center: Vec<f64>, width: f64 },
    /// `b_i(x) = A sin(ω x_i)`, componentwise.
    Sine { amplitude: f64, freq: f64 },
    Constant { value: Vec<f64> },
}

impl DriftSpec {
    pub fn zero(d: usize) -> Self {
        Self::Constant { value: vec![0.0; d] }
    }

    pub fn holder_power(beta: f64, kappa: f64, bound: f64) -> Self {
        Self::HolderPower { beta, kappa, bound }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            Self::HolderPower { beta, kappa, bound } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return bad(format!("Hölder exponent must lie in (0, 1), got {beta}"));
                }
                if !(kappa.is_finite() && *bound > 0.0 && bound.is_finite()) {
                    return bad("HolderPower needs finite κ and a positive finite bound".into());
                }
            }
            Self::SmoothBump {
                amplitude,
                center,
                width,
            } => {
                if amplitude.len() != d || center.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: if amplitude.len() != d { amplitude.len() } else { center.len() },
                    });
                }
                if !(*width > 0.0) {
                    return bad("bump width must be positive".into());
                }
            }
            Self::Sine { amplitude, freq } => {
                if !(amplitude.is_finite() && freq.is_finite()) {
                    return bad("sine drift needs finite parameters".into());
                }
            }
            Self::Constant { value } => {
                if value.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: value.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::HolderPower { beta, kappa, bound } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.signum() * (kappa * xi.abs().powf(*beta)).min(*bound);
                    if *xi == 0.0 {
                        *o = 0.0;
                    }
                }
            }
            Self::SmoothBump {
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let e = (-0.5 * r2 / (width * width)).exp();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * e;
                }
            }
            Self::Sine { amplitude, freq } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = amplitude * (freq * xi).sin();
                }
            }
            Self::Constant { value } => out.copy_from_slice(value),
        }
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval(x, &mut out);
        out
    }

    /// Upper bound for `sup_x |b(x)|` (Euclidean norm) in dimension `d`.
    pub fn sup_bound(&self, d: usize) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        match self {
            Self::HolderPower { kappa, bound, .. } => {
                if *kappa == 0.0 {
                    0.0
                } else {
                    bound * (d as f64).sqrt()
                }
            }
            Self::SmoothBump { amplitude, .. } => norm(amplitude),
            Self::Sine { amplitude, .. } => amplitude.abs() * (d as f64).sqrt(),
            Self::Constant { value } => norm(value),
        }
    }

    /// Hölder exponent of the least regular family member; `None` for
    /// Lipschitz drifts.
    pub fn holder_exponent(&self) -> Option<f64> {
        match self {
            Self::HolderPower { beta, kappa, .. } if *kappa != 0.0 => Some(*beta),
            _ => None,
        }
    }

    /// `[b]_β` in closed form. For the power family the supremum is attained
    /// at symmetric points `±x`, giving `κ 2^{1−β}` per component.
    pub fn holder_seminorm(&self, beta: f64, d: usize) -> f64 {
        match self {
            Self::HolderPower { beta: b, kappa, .. } => {
                if (b - beta).abs() > 1e-15 && *kappa != 0.0 {
                    // a β'-Hölder function with β' > β is β-Hölder only locally;
                    // the bound uses the cap on long ranges
                    f64::INFINITY
                } else {
                    kappa.abs() * 2f64.powf(1.0 - beta) * (d as f64).sqrt()
                }
            }
            _ => {
                // Lipschitz L and sup bound B give [b]_β ≤ L^β (2B)^{1−β}
                let l = self.lipschitz().unwrap_or(0.0);
                let b = self.sup_bound(d);
                l.powf(beta) * (2.0 * b).powf(1.0 - beta)
            }
        }
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Self::HolderPower { kappa, .. } => (*kappa == 0.0).then_some(0.0),
            Self::SmoothBump { amplitude, width, .. } => {
                Some(amplitude.iter().map(|a| a * a).sum::<f64>().sqrt() / (width * std::f64::consts::E.sqrt()))
            }
            Self::Sine { amplitude, freq } => Some((amplitude * freq).abs()),
            Self::Constant { .. } => Some(0.0),
        }
    }

    pub fn is_constant(&self) -> Option<Vec<f64>> {
        match self {
            Self::Constant { value } => Some(value.clone()),
            Self::HolderPower { kappa, .. } if *kappa == 0.0 => None,
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_power_shape() {
        let b = DriftSpec::holder_power(0.5, 2.0, 1.0);
        assert_eq!(b.eval_vec(&[0.0]), vec![0.0]);
        assert_eq!(b.eval_vec(&[0.04]), vec![0.4]);
        assert_eq!(b.eval_vec(&[-9.0]), vec![-1.0]);
        assert_eq!(b.sup_bound(1), 1.0);
    }

    #[test]
    fn holder_seminorm_matches_brute_force() {
        let b = DriftSpec::holder_power(0.6, 1.0, 10.0);
        let xs: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.005).collect();
        let mut best: f64 = 0.0;
        for &x in &xs {
            for &y in &xs {
                if x != y {
                    let q = (b.eval_vec(&[x])[0] - b.eval_vec(&[y])[0]).abs() / (x - y).abs().powf(0.6);
                    best = best.max(q);
                }
            }
        }
        let exact = b.holder_seminorm(0.6, 1);
        assert!(best <= exact + 1e-12 && best > exact - 1e-9, "{best} vs {exact}");
    }
}
