//! Finite weighted direction sets standing in for a spherical measure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted unit directions `{(ξ_i, w_i)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalMeasure {
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Points per hemisphere used when discretizing the uniform measure for d ≥ 3.
const HEMISPHERE_POINTS: usize = 64;
/// Equally spaced angles used for the uniform measure in d = 2.
const CIRCLE_POINTS: usize = 64;

impl SphericalMeasure {
    pub fn new(directions: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        Self { directions, weights }
    }

    /// Quasi-uniform discretization of the normalized surface measure with
    /// total mass `mass`. Every set returned here is closed under ξ ↦ −ξ:
    ///
    /// * d = 1: {−1, +1};
    /// * d = 2: 64 angles (k + 1/2)·2π/64;
    /// * d = 3: 64-point Fibonacci lattice on the upper hemisphere plus antipodes;
    /// * d ≥ 4: 64 normalized Gaussian points from a fixed stream plus antipodes.
    ///
    /// All points carry equal weight.
    pub fn uniform(d: usize, mass: f64) -> Self {
        let half: Vec<Vec<f64>> = match d {
            1 => vec![vec![1.0]],
            2 => (0..CIRCLE_POINTS / 2)
                .map(|k| {
                    let th = (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / CIRCLE_POINTS as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
            3 => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..HEMISPHERE_POINTS)
                    .map(|k| {
                        let z = (k as f64 + 0.5) / HEMISPHERE_POINTS as f64;
                        let rho = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        vec![rho * phi.cos(), rho * phi.sin(), z]
                    })
                    .collect()
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_5E7E_0000 + d as u64);
                (0..HEMISPHERE_POINTS)
                    .map(|_| {
                        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                        normalized(&g)
                    })
                    .collect()
            }
        };
        let mut directions = Vec::with_capacity(2 * half.len());
        for xi in &half {
            directions.push(xi.clone());
            directions.push(xi.iter().map(|v| -v).collect());
        }
        let w = mass / directions.len() as f64;
        let weights = vec![w; directions.len()];
        Self { directions, weights }
    }

    /// Point masses at ±e_k with weights `w[k]` each.
    pub fn axes(w: &[f64]) -> Self {
        let d = w.len();
        let mut directions = Vec::with_capacity(2 * d);
        let mut weights = Vec::with_capacity(2 * d);
        for (k, &wk) in w.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[k] = sign;
                directions.push(e);
                weights.push(wk);
            }
        }
        Self { directions, weights }
    }

    pub fn dimension(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            directions: self.directions.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    /// Structural checks: lengths, positivity and unit norms.
    pub fn check_shape(&self, d: usize) -> Result<()> {
        if self.directions.is_empty() {
            return Err(Error::InvalidModel("spherical measure has no directions".into()));
        }
        if self.directions.len() != self.weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} directions but {} weights",
                self.directions.len(),
                self.weights.len()
            )));
        }
        for (xi, &w) in self.directions.iter().zip(&self.weights) {
            if xi.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: xi.len() });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidModel(format!("weight {w} is not positive")));
            }
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("direction {xi:?} has norm {norm}")));
            }
        }
        Ok(())
    }

    /// Numerical rank of the direction set.
    pub fn rank(&self) -> usize {
        let d = self.dimension();
        let rows: Vec<f64> = self.directions.iter().flatten().copied().collect();
        let m = nalgebra::DMatrix::from_row_slice(self.directions.len(), d, &rows);
        m.rank(1e-10)
    }

    /// `Σ w_i ξ_i ξ_iᵀ`, row-major.
    pub fn second_moment(&self) -> Vec<f64> {
        let d = self.dimension();
        let mut out = vec![0.0; d * d];
        for (xi, &w) in self.directions.iter().zip(&self.weights) {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += w * xi[i] * xi[j];
                }
            }
        }
        out
    }

    /// Pairs `(i, j)` with `ξ_j = −ξ_i` and equal weights, or `None` when the
    /// set is not symmetric.
    pub fn antipodal_pairs(&self) -> Option<Vec<(usize, usize)>> {
        let n = self.directions.len();
        let mut used = vec![false; n];
        let mut pairs = Vec::with_capacity(n / 2);
        for i in 0..n {
            if used[i] {
                continue;
            }
            let partner = (i + 1..n).find(|&j| {
                !used[j]
                    && (self.weights[i] - self.weights[j]).abs() <= 1e-12 * self.weights[i]
                    && self.directions[i]
                        .iter()
                        .zip(&self.directions[j])
                        .all(|(a, b)| (a + b).abs() < 1e-12)
            })?;
            used[i] = true;
            used[partner] = true;
            pairs.push((i, partner));
        }
        Some(pairs)
    }

    pub fn is_symmetric(&self) -> bool {
        self.antipodal_pairs().is_some()
    }
}

pub(crate) fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sets_are_symmetric_unit_and_full_rank() {
        for d in 1..=5 {
            let m = SphericalMeasure::uniform(d, 2.0);
            m.check_shape(d).unwrap();
            assert!(m.is_symmetric());
            assert_eq!(m.rank(), d);
            assert!((m.total_mass() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_circle_second_moment_is_isotropic() {
        let m = SphericalMeasure::uniform(2, 1.0);
        let s = m.second_moment();
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[3] - 0.5).abs() < 1e-12 && s[1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_set_has_low_rank() {
        let m = SphericalMeasure::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5]);
        assert_eq!(m.rank(), 1);
        assert!(m.is_symmetric());
        let lopsided = SphericalMeasure::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]);
        assert!(!lopsided.is_symmetric());
    }
}
