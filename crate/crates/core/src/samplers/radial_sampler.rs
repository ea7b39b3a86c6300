//! Inverse-CDF sampling of jump radii from ρ restricted to (ε, ∞).

use rand::Rng;

use crate::error::Result;
use crate::interp::Pchip;
use crate::levy_models::RadialProfile;
use crate::quad::GaussRule;
use crate::rng::Stream;

/// Number of nodes in tabulated inverse CDFs.
pub const TABLE_NODES: usize = 4096;

#[derive(Clone, Debug)]
pub enum RadialSampler {
    /// `s = ε U^{−1/α}`.
    Power { eps: f64, alpha: f64 },
    /// Inverse of the power law truncated at r.
    Truncated { eps: f64, alpha: f64, r: f64 },
    /// Monotone-cubic inverse of a tabulated CDF.
    Table { inverse: Pchip },
}

impl RadialSampler {
    pub fn new(profile: &RadialProfile, eps: f64) -> Result<Self> {
        Ok(match *profile {
            RadialProfile::Power { alpha } => Self::Power { eps, alpha },
            RadialProfile::Truncated { alpha, r } => Self::Truncated { eps, alpha, r },
            _ => Self::Table { inverse: tabulate(profile, eps)? },
        })
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Radius with tail probability `1 − u` above ε.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Power { eps, alpha } => eps * (1.0 - u).powf(-1.0 / alpha),
            Self::Truncated { eps, alpha, r } => {
                let (a, b) = (eps.powf(-alpha), r.powf(-alpha));
                (a - u * (a - b)).powf(-1.0 / alpha)
            }
            Self::Table { ref inverse } => inverse.eval(u),
        }
    }
}

/// CDF nodes on a geometric radius grid from ε to the point where the
/// exponential tail has decayed by e^{−60}.
fn tabulate(profile: &RadialProfile, eps: f64) -> Result<Pchip> {
    let kappa = profile.decay_rate().expect("tabulated profiles decay");
    let s_max = eps.max(1.0) + 60.0 / kappa;
    let n = TABLE_NODES;
    let ratio = (s_max / eps).powf(1.0 / (n - 1) as f64);
    let radii: Vec<f64> = (0..n).map(|i| if i == n - 1 { s_max } else { eps * ratio.powi(i as i32) }).collect();
    let rule = GaussRule::new(8);
    let mut cdf = Vec::with_capacity(n);
    cdf.push(0.0);
    for w in radii.windows(2) {
        let piece = rule.integrate(|s| profile.density(s), w[0], w[1]);
        cdf.push(cdf.last().unwrap() + piece);
    }
    let total = *cdf.last().unwrap();
    // Deduplicate flat stretches so the abscissae are strictly increasing.
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for (c, s) in cdf.iter().zip(&radii) {
        let u = c / total;
        if xs.last().is_none_or(|&last| u > last) {
            xs.push(u);
            ys.push(*s);
        }
    }
    if *xs.last().unwrap() < 1.0 {
        xs.push(1.0);
        ys.push(s_max);
    }
    Ok(Pchip::new(xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_quantiles_match_tail_masses() {
        let p = RadialProfile::Tempered { alpha: 1.3 };
        let eps = 0.05;
        let s = RadialSampler::new(&p, eps).unwrap();
        let total = p.tail_mass(eps).unwrap();
        for &u in &[0.1, 0.5, 0.9, 0.999] {
            let q = s.quantile(u);
            let tail = p.tail_mass(q).unwrap() / total;
            assert!((tail - (1.0 - u)).abs() < 1e-6, "u = {u}: tail {tail}");
        }
    }

    #[test]
    fn closed_form_quantiles() {
        let s = RadialSampler::new(&RadialProfile::Truncated { alpha: 1.5, r: 1.0 }, 0.1).unwrap();
        assert!((s.quantile(0.0) - 0.1).abs() < 1e-14);
        assert!((s.quantile(1.0) - 1.0).abs() < 1e-12);
    }
}
