//! Box lattices and fields stored on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The lattice `{−R + i h : i = 0..n−1}^d`, `h = 2R/(n−1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dimension: usize,
    pub radius: f64,
    pub points_per_axis: usize,
}

impl Lattice {
    pub fn new(dimension: usize, radius: f64, points_per_axis: usize) -> Result<Self> {
        if dimension == 0 || points_per_axis < 2 || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lattice needs d >= 1, R > 0 and >= 2 points per axis (got d = {dimension}, R = {radius}, n = {points_per_axis})"
            )));
        }
        Ok(Self {
            dimension,
            radius,
            points_per_axis,
        })
    }

    /// Lattice with spacing as close as possible to `h` from below, and an
    /// odd number of points so that the origin is a node.
    pub fn with_spacing(dimension: usize, radius: f64, h: f64) -> Result<Self> {
        let mut n = (2.0 * radius / h).ceil() as usize + 1;
        if n % 2 == 0 {
            n += 1;
        }
        Self::new(dimension, radius, n)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points_per_axis - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of node `flat`; the last axis varies fastest.
    pub fn index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis;
        let mut idx = vec![0; self.dimension];
        for k in (0..self.dimension).rev() {
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.spacing()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat).into_iter().map(|i| self.coord(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.radius)
    }

    /// Nodes with every index in `[margin, n − 1 − margin]`.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        let n = self.points_per_axis;
        self.index(flat).iter().all(|&i| i >= margin && i + margin < n)
    }

    /// Stride of axis `k` in flat indexing.
    pub fn stride(&self, k: usize) -> usize {
        self.points_per_axis.pow((self.dimension - 1 - k) as u32)
    }

    /// Cell corner and fractional offsets of `x`, with `x` clamped to the
    /// box. Returns `true` when clamping changed `x`.
    fn locate(&self, x: &[f64], corner: &mut [usize], frac: &mut [f64]) -> bool {
        let h = self.spacing();
        let n = self.points_per_axis;
        let mut clamped = false;
        for k in 0..self.dimension {
            let mut s = (x[k] + self.radius) / h;
            if !(s >= 0.0) {
                clamped |= s < 0.0;
                s = 0.0;
            } else if s > (n - 1) as f64 {
                clamped = true;
                s = (n - 1) as f64;
            }
            let i = (s.floor() as usize).min(n - 2);
            corner[k] = i;
            frac[k] = s - i as f64;
        }
        clamped
    }
}

/// How a field was produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub description: String,
    pub n_mc: usize,
    pub seed: Option<u64>,
    /// Largest node-wise Monte Carlo standard error.
    pub standard_error: f64,
    /// Fraction of evaluations that left the box and were clamped.
    pub out_of_box_fraction: f64,
    /// Set when finite-difference noise exceeds the requested tolerance.
    pub noise_warning: bool,
}

/// Values with `components` entries per lattice node (1 for scalar fields,
/// d for vector fields, d² for row-major matrix fields).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub lattice: Lattice,
    pub components: usize,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl GridFunction {
    pub fn new(lattice: Lattice, components: usize, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != lattice.len() * components {
            return Err(Error::DimensionMismatch {
                expected: lattice.len() * components,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self {
            lattice,
            components,
            values,
            provenance,
        })
    }

    pub fn zeros(lattice: Lattice, components: usize) -> Self {
        Self {
            lattice,
            components,
            values: vec![0.0; lattice.len() * components],
            provenance: Provenance::default(),
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(lattice: Lattice, components: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut values = vec![0.0; lattice.len() * components];
        for (node, out) in values.chunks_exact_mut(components).enumerate() {
            f(&lattice.point(node), out);
        }
        Self {
            lattice,
            components,
            values,
            provenance: Provenance {
                description: "sampled on lattice".into(),
                ..Provenance::default()
            },
        }
    }

    pub fn node(&self, flat: usize) -> &[f64] {
        &self.values[flat * self.components..(flat + 1) * self.components]
    }

    /// Multilinear interpolation with clamping to the box. Returns whether
    /// `x` was outside the box.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.lattice.dimension;
        let c = self.components;
        let mut corner = [0usize; 8];
        let mut frac = [0.0f64; 8];
        assert!(d <= 8, "interpolation supports d <= 8");
        let clamped = self.lattice.locate(x, &mut corner[..d], &mut frac[..d]);
        out[..c].iter_mut().for_each(|v| *v = 0.0);
        let base = self.lattice.flat(&corner[..d]);
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            let mut off = 0;
            for k in 0..d {
                if mask >> k & 1 == 1 {
                    w *= frac[k];
                    off += self.lattice.stride(k);
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            let node = self.node(base + off);
            for (o, v) in out[..c].iter_mut().zip(node) {
                *o += w * v;
            }
        }
        clamped
    }

    /// Scalar evaluation (first component).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut out = [0.0; 64];
        self.eval_into(x, &mut out[..self.components]);
        out[0]
    }

    /// Gradient of the multilinear interpolant at `x` for a scalar field,
    /// i.e. the cell slopes. Row-major `components × d` in general.
    pub fn interpolant_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.lattice.dimension;
        let c = self.components;
        let h = self.lattice.spacing();
        let mut corner = [0usize; 8];
        let mut frac = [0.0f64; 8];
        let clamped = self.lattice.locate(x, &mut corner[..d], &mut frac[..d]);
        out[..c * d].iter_mut().for_each(|v| *v = 0.0);
        let base = self.lattice.flat(&corner[..d]);
        for mask in 0..(1usize << d) {
            let mut off = 0;
            for k in 0..d {
                if mask >> k & 1 == 1 {
                    off += self.lattice.stride(k);
                }
            }
            let node = self.node(base + off);
            for a in 0..d {
                // ∂/∂x_a of the tensor-product weight
                let mut w = if mask >> a & 1 == 1 { 1.0 / h } else { -1.0 / h };
                for k in 0..d {
                    if k != a {
                        w *= if mask >> k & 1 == 1 { frac[k] } else { 1.0 - frac[k] };
                    }
                }
                for comp in 0..c {
                    out[comp * d + a] += w * node[comp];
                }
            }
        }
        if clamped {
            // Outside the box the clamped interpolant is constant along the
            // clamped axes.
            for a in 0..d {
                if x[a].abs() > self.lattice.radius {
                    for comp in 0..c {
                        out[comp * d + a] = 0.0;
                    }
                }
            }
        }
        clamped
    }

    /// Central-difference Jacobian on the lattice (one-sided at the box
    /// faces). The result has `components × d` entries per node.
    pub fn gradient(&self) -> GridFunction {
        let lat = self.lattice;
        let d = lat.dimension;
        let c = self.components;
        let n = lat.points_per_axis;
        let h = lat.spacing();
        let mut values = vec![0.0; lat.len() * c * d];
        for node in 0..lat.len() {
            let idx = lat.index(node);
            for a in 0..d {
                let s = lat.stride(a);
                let (lo, hi, span) = if idx[a] == 0 {
                    (node, node + s, h)
                } else if idx[a] == n - 1 {
                    (node - s, node, h)
                } else {
                    (node - s, node + s, 2.0 * h)
                };
                for comp in 0..c {
                    values[node * c * d + comp * d + a] = (self.values[hi * c + comp] - self.values[lo * c + comp]) / span;
                }
            }
        }
        GridFunction {
            lattice: lat,
            components: c * d,
            values,
            provenance: Provenance {
                description: format!("central differences of [{}]", self.provenance.description),
                ..self.provenance.clone()
            },
        }
    }

    /// `max_x |value(x)|`, with |·| the Euclidean norm of the node's entries
    /// (the Frobenius norm for matrix fields).
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.components)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Sup norm over nodes at least `margin` nodes away from the faces.
    pub fn interior_sup_norm(&self, margin: usize) -> f64 {
        self.values
            .chunks_exact(self.components)
            .enumerate()
            .filter(|(i, _)| self.lattice.is_interior(*i, margin))
            .map(|(_, v)| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Single component as a scalar field.
    pub fn component(&self, comp: usize) -> GridFunction {
        GridFunction {
            lattice: self.lattice,
            components: 1,
            values: self.values.iter().skip(comp).step_by(self.components).copied().collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_components(parts: &[GridFunction]) -> Result<GridFunction> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("no components".into()))?;
        let lat = first.lattice;
        let total: usize = parts.iter().map(|p| p.components).sum();
        let mut values = Vec::with_capacity(lat.len() * total);
        for node in 0..lat.len() {
            for p in parts {
                values.extend_from_slice(p.node(node));
            }
        }
        Ok(GridFunction {
            lattice: lat,
            components: total,
            values,
            provenance: first.provenance.clone(),
        })
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .chunks_exact(self.components)
            .zip(other.values.chunks_exact(other.components))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
