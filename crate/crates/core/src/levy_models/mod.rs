//! Pure-jump Lévy models: parameters, symbols, Lévy measures and numeric
//! checks of the sector bound on Re ψ and of small-jump moments.

mod radial;
mod sphere;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{sphere_abs_moment, stable_cos_constant};

pub use radial::RadialProfile;
pub use sphere::SphericalMeasure;
pub(crate) use sphere::normalized;

/// Version tag written into serialized models.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevyClass {
    IsotropicStable,
    AxisStable,
    TruncatedStable,
    TemperedStableSpecial,
    RelativisticStable,
    SphericalRadial,
}

/// Intensity multiplier: one number, or one per axis for `AxisStable`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scale {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

/// A pure-jump Lévy process on ℝ^d.
///
/// `scale` multiplies the Lévy measure. For `IsotropicStable` the process
/// is fixed through its symbol `c|u|^α`; `AxisStable` has symbol
/// `Σ c_k |u_k|^α`; `RelativisticStable` has symbol
/// `c((|u|² + m^{2/α})^{α/2} − m)`. The remaining classes are given by a
/// radial density times `spherical_measure` (default: quasi-uniform directions
/// of total mass 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub class: LevyClass,
    pub dimension: usize,
    pub alpha: f64,
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spherical_measure: Option<SphericalMeasure>,
}

fn schema_version() -> u32 {
    MODEL_SCHEMA_VERSION
}

/// Angular part of a radial decomposition, with the scale folded in.
#[derive(Clone, Debug, PartialEq)]
pub enum Angular {
    /// `mass` times the normalized surface measure of S^{d−1}.
    Uniform { dim: usize, mass: f64 },
    Discrete(SphericalMeasure),
}

impl Angular {
    pub fn total_mass(&self) -> f64 {
        match self {
            Angular::Uniform { mass, .. } => *mass,
            Angular::Discrete(m) => m.total_mass(),
        }
    }

    /// `∫ ξ ξᵀ μ(dξ)`, row-major.
    pub fn second_moment(&self) -> Vec<f64> {
        match self {
            Angular::Uniform { dim, mass } => {
                let mut out = vec![0.0; dim * dim];
                for i in 0..*dim {
                    out[i * dim + i] = mass / *dim as f64;
                }
                out
            }
            Angular::Discrete(m) => m.second_moment(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Angular::Uniform { .. } => true,
            Angular::Discrete(m) => m.is_symmetric(),
        }
    }
}

/// `ν(dz) = ρ(s) ds μ(dξ)` with `z = sξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub profile: RadialProfile,
    pub angular: Angular,
}

impl Decomposition {
    /// `∫_{|z|≤ε} z zᵀ ν(dz)`, row-major.
    pub fn small_jump_covariance(&self, eps: f64) -> Result<Vec<f64>> {
        let radial = self.profile.moment_between(2.0, 0.0, eps)?;
        Ok(self.angular.second_moment().into_iter().map(|v| v * radial).collect())
    }

    /// `ν({|z| > ε})`.
    pub fn tail_intensity(&self, eps: f64) -> Result<f64> {
        Ok(self.angular.total_mass() * self.profile.tail_mass(eps)?)
    }
}

impl LevyModel {
    fn base(class: LevyClass, dimension: usize, alpha: f64, scale: Scale) -> Self {
        Self {
            version: MODEL_SCHEMA_VERSION,
            class,
            dimension,
            alpha,
            scale,
            truncation_radius: None,
            mass: None,
            spherical_measure: None,
        }
    }

    pub fn isotropic(dimension: usize, alpha: f64, c: f64) -> Self {
        Self::base(LevyClass::IsotropicStable, dimension, alpha, Scale::Uniform(c))
    }

    pub fn axis(alpha: f64, c: Vec<f64>) -> Self {
        Self::base(LevyClass::AxisStable, c.len(), alpha, Scale::PerAxis(c))
    }

    pub fn truncated(dimension: usize, alpha: f64, c: f64, r: f64) -> Self {
        Self {
            truncation_radius: Some(r),
            ..Self::base(LevyClass::TruncatedStable, dimension, alpha, Scale::Uniform(c))
        }
    }

    pub fn tempered(dimension: usize, alpha: f64, c: f64) -> Self {
        Self::base(LevyClass::TemperedStableSpecial, dimension, alpha, Scale::Uniform(c))
    }

    pub fn relativistic(dimension: usize, alpha: f64, m: f64) -> Self {
        Self {
            mass: Some(m),
            ..Self::base(LevyClass::RelativisticStable, dimension, alpha, Scale::Uniform(1.0))
        }
    }

    pub fn spherical_radial(alpha: f64, c: f64, measure: SphericalMeasure) -> Self {
        Self {
            spherical_measure: Some(measure.clone()),
            ..Self::base(LevyClass::SphericalRadial, measure.dimension(), alpha, Scale::Uniform(c))
        }
    }

    pub fn with_spherical_measure(mut self, measure: SphericalMeasure) -> Self {
        self.spherical_measure = Some(measure);
        self
    }

    /// Scalar scale; for `AxisStable` this is the first entry.
    pub fn scale_scalar(&self) -> f64 {
        match &self.scale {
            Scale::Uniform(c) => *c,
            Scale::PerAxis(v) => v.first().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn scale_per_axis(&self) -> Vec<f64> {
        match &self.scale {
            Scale::Uniform(c) => vec![*c; self.dimension],
            Scale::PerAxis(v) => v.clone(),
        }
    }

    pub fn truncation(&self) -> f64 {
        self.truncation_radius.unwrap_or(1.0)
    }

    pub fn relativistic_mass(&self) -> f64 {
        self.mass.unwrap_or(f64::NAN)
    }

    /// Checks every invariant including non-degeneracy of the directions.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if let Some(m) = self.angular_measure() {
            let rank = m.rank();
            if rank < self.dimension {
                return Err(Error::InvalidModel(format!(
                    "direction set has rank {rank} < dimension {}",
                    self.dimension
                )));
            }
        }
        Ok(())
    }

    /// All checks except the rank condition.
    pub fn validate_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.dimension == 0 {
            return bad("dimension must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha = {} outside (0, 2)", self.alpha));
        }
        match (&self.scale, self.class) {
            (Scale::PerAxis(v), LevyClass::AxisStable) => {
                if v.len() != self.dimension {
                    return Err(Error::DimensionMismatch { expected: self.dimension, got: v.len() });
                }
            }
            (Scale::PerAxis(_), _) => return bad("per-axis scale is only allowed for axis_stable".into()),
            _ => {}
        }
        if self.scale_per_axis().iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return bad("scale must be positive and finite".into());
        }
        if self.class == LevyClass::TruncatedStable && !(self.truncation() > 0.0 && self.truncation().is_finite()) {
            return bad("truncation radius must be positive".into());
        }
        if self.class == LevyClass::RelativisticStable {
            let m = self.relativistic_mass();
            if !(m > 0.0 && m.is_finite()) {
                return bad("relativistic mass must be positive".into());
            }
        }
        if self.class == LevyClass::SphericalRadial && self.spherical_measure.is_none() {
            return bad("spherical_radial requires a spherical measure".into());
        }
        if let Some(m) = &self.spherical_measure {
            m.check_shape(self.dimension)?;
        }
        Ok(())
    }

    /// The direction set used by classes defined through a spherical measure.
    pub fn angular_measure(&self) -> Option<SphericalMeasure> {
        match self.class {
            LevyClass::TruncatedStable | LevyClass::TemperedStableSpecial | LevyClass::SphericalRadial => Some(
                self.spherical_measure
                    .clone()
                    .unwrap_or_else(|| SphericalMeasure::uniform(self.dimension, 1.0)),
            ),
            _ => None,
        }
    }

    /// Radial × angular form of the Lévy measure.
    pub fn decomposition(&self) -> Decomposition {
        let alpha = self.alpha;
        let c = self.scale_scalar();
        let d = self.dimension;
        match self.class {
            LevyClass::IsotropicStable => Decomposition {
                profile: RadialProfile::Power { alpha },
                angular: Angular::Uniform {
                    dim: d,
                    mass: c / (stable_cos_constant(alpha) * sphere_abs_moment(d, alpha)),
                },
            },
            LevyClass::AxisStable => {
                let k = 2.0 * stable_cos_constant(alpha);
                let w: Vec<f64> = self.scale_per_axis().iter().map(|ck| ck / k).collect();
                Decomposition {
                    profile: RadialProfile::Power { alpha },
                    angular: Angular::Discrete(SphericalMeasure::axes(&w)),
                }
            }
            LevyClass::TruncatedStable => Decomposition {
                profile: RadialProfile::Truncated { alpha, r: self.truncation() },
                angular: Angular::Discrete(self.angular_measure().expect("measure").scaled(c)),
            },
            LevyClass::TemperedStableSpecial => Decomposition {
                profile: RadialProfile::Tempered { alpha },
                angular: Angular::Discrete(self.angular_measure().expect("measure").scaled(c)),
            },
            LevyClass::SphericalRadial => Decomposition {
                profile: RadialProfile::Power { alpha },
                angular: Angular::Discrete(self.angular_measure().expect("measure").scaled(c)),
            },
            LevyClass::RelativisticStable => Decomposition {
                profile: RadialProfile::Relativistic { alpha, m: self.relativistic_mass(), d },
                angular: Angular::Uniform { dim: d, mass: c },
            },
        }
    }

    /// Whether ν is invariant under z ↦ −z.
    pub fn is_symmetric(&self) -> bool {
        self.decomposition().angular.is_symmetric()
    }

    /// Exact self-similar scaling `L_t = t^{1/α} L_1` in law.
    pub fn is_self_similar(&self) -> bool {
        matches!(
            self.class,
            LevyClass::IsotropicStable | LevyClass::AxisStable | LevyClass::SphericalRadial
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.version != MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported model schema version {}", m.version)));
        }
        m.validate()?;
        Ok(m)
    }
}

/// The Lévy–Khintchine exponent ψ(u), `E e^{i⟨u, L_t⟩} = e^{−tψ(u)}`.
pub fn symbol(model: &LevyModel, u: &[f64]) -> Result<Complex64> {
    model.validate()?;
    symbol_unchecked(model, u)
}

pub(crate) fn symbol_unchecked(model: &LevyModel, u: &[f64]) -> Result<Complex64> {
    if u.len() != model.dimension {
        return Err(Error::DimensionMismatch { expected: model.dimension, got: u.len() });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("symbol argument must be finite".into()));
    }
    let norm2: f64 = u.iter().map(|v| v * v).sum();
    let alpha = model.alpha;
    let re = |x: f64| Complex64::new(x, 0.0);
    match model.class {
        LevyClass::IsotropicStable => Ok(re(model.scale_scalar() * norm2.powf(alpha / 2.0))),
        LevyClass::AxisStable => Ok(re(model
            .scale_per_axis()
            .iter()
            .zip(u)
            .map(|(c, x)| c * x.abs().powf(alpha))
            .sum())),
        LevyClass::RelativisticStable => {
            let m = model.relativistic_mass();
            let mu = m.powf(2.0 / alpha);
            // m((1 + |u|²/μ)^{α/2} − 1) is exactly 0 at u = 0.
            Ok(re(model.scale_scalar() * m * ((alpha / 2.0) * (norm2 / mu).ln_1p()).exp_m1()))
        }
        _ => {
            let dec = model.decomposition();
            let Angular::Discrete(measure) = &dec.angular else {
                unreachable!("radial classes carry a direction set")
            };
            let mut total = Complex64::new(0.0, 0.0);
            for (xi, w) in measure.directions.iter().zip(&measure.weights) {
                let a: f64 = xi.iter().zip(u).map(|(x, y)| x * y).sum();
                total += dec.profile.fourier(a)? * *w;
            }
            Ok(total)
        }
    }
}

/// Empirical sector constants of Re ψ(y)/|y|^α on |y| ∈ (M, 100M].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
}

/// Probes Re ψ(y)/|y|^α at `n_probes` points. Radii are log-uniform in
/// (M, 100M]. Directions cycle through the coordinate axes, the
/// perpendiculars of the model's own directions (d = 2), and pseudo-random
/// unit vectors from a fixed stream. The rank condition is deliberately not
/// enforced so that degenerate measures can be diagnosed.
pub fn check_sector_bounds(model: &LevyModel, m: f64, n_probes: usize) -> Result<SectorBounds> {
    model.validate_shape()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
    }
    if n_probes < 100 {
        return Err(Error::InvalidArgument(format!("n_probes = {n_probes} < 100")));
    }
    let d = model.dimension;
    let mut dirs: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            e
        })
        .collect();
    if d == 2 {
        if let Some(meas) = model.angular_measure() {
            dirs.extend(meas.directions.iter().map(|xi| vec![-xi[1], xi[0]]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC7_0B0D);
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for i in 0..n_probes {
        let dir = if i < dirs.len() {
            dirs[i].clone()
        } else {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            normalized(&g)
        };
        let v: f64 = rng.random();
        let radius = m * 100f64.powf(1.0 - v);
        let y: Vec<f64> = dir.iter().map(|x| x * radius).collect();
        let ratio = symbol_unchecked(model, &y)?.re / radius.powf(model.alpha);
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
    }
    let pass = c1 > 0.0 && c2.is_finite() && (c2 / c1).is_finite();
    Ok(SectorBounds { c1, c2, pass })
}

/// `∫_{|x|≤1} |x|^σ ν(dx)`; finite for every σ > α.
pub fn small_jump_moment(model: &LevyModel, sigma: f64) -> Result<f64> {
    model.validate()?;
    if !(sigma > model.alpha) {
        return Err(Error::Divergent(format!(
            "sigma = {sigma} <= alpha = {}: the integrand behaves like s^{{sigma-alpha-1}} at 0",
            model.alpha
        )));
    }
    let dec = model.decomposition();
    Ok(dec.angular.total_mass() * dec.profile.moment_between(sigma, 0.0, 1.0)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub pass: bool,
    /// `log inf_s ρ_model(s)/ρ_ref(s)` over the probe grid.
    pub margin: f64,
}

/// Compares the radial density with the truncated reference
/// `s^{−1−α} 1_{s≤1}` carried by the same angular measure. For the
/// relativistic class the reference is scaled by its small-s leading
/// coefficient, so both sides share the same angular normalization.
pub fn dominates_truncated(model: &LevyModel) -> Result<Domination> {
    model.validate()?;
    if model.class == LevyClass::AxisStable {
        return Err(Error::NotApplicable(
            "axis_stable measure is concentrated on the axes and has no radial density".into(),
        ));
    }
    let dec = model.decomposition();
    let alpha = model.alpha;
    let weight = match model.class {
        LevyClass::IsotropicStable => 1.0,
        _ => dec.profile.leading_coefficient() * model.scale_scalar(),
    };
    let n = 512;
    let mut inf_ratio = f64::INFINITY;
    for i in 0..n {
        let s = 10f64.powf(-6.0 + 6.0 * i as f64 / (n - 1) as f64);
        let ratio = model.scale_scalar() * dec.profile.density(s) / (weight * s.powf(-1.0 - alpha));
        inf_ratio = inf_ratio.min(ratio);
    }
    let margin = match model.class {
        LevyClass::IsotropicStable => 0.0,
        _ => inf_ratio.ln(),
    };
    Ok(Domination { pass: inf_ratio > 0.0, margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_symbols() {
        let rel = LevyModel::relativistic(2, 1.0, 1.0);
        assert_eq!(symbol(&rel, &[0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
        let s = symbol(&rel, &[3f64.sqrt(), 0.0]).unwrap();
        assert_relative_eq!(s.re, 1.0, epsilon = 1e-14);
        let iso = LevyModel::isotropic(3, 1.5, 1.0);
        assert_relative_eq!(symbol(&iso, &[0.0, 2.0, 0.0]).unwrap().re, 2f64.powf(1.5), max_relative = 1e-14);
    }

    #[test]
    fn isotropic_decomposition_reproduces_symbol() {
        // A spherical-radial model with the uniform direction set and the
        // isotropic mass must approximate c|u|^α.
        for d in [1, 2, 3] {
            let iso = LevyModel::isotropic(d, 1.3, 0.7);
            let Angular::Uniform { mass, .. } = iso.decomposition().angular else { panic!() };
            let sr = LevyModel::spherical_radial(1.3, 1.0, SphericalMeasure::uniform(d, mass));
            let mut u = vec![0.0; d];
            u[0] = 2.0;
            let exact = symbol(&iso, &u).unwrap().re;
            let approx = symbol(&sr, &u).unwrap().re;
            let tol = if d == 1 { 1e-8 } else { 2e-2 };
            assert_relative_eq!(approx, exact, max_relative = tol);
        }
    }

    #[test]
    fn axis_decomposition_reproduces_symbol() {
        let ax = LevyModel::axis(1.2, vec![1.0, 0.5]);
        let sr = LevyModel::spherical_radial(1.2, 1.0, match ax.decomposition().angular {
            Angular::Discrete(m) => m,
            _ => unreachable!(),
        });
        let u = [0.7, -2.3];
        assert_relative_eq!(symbol(&sr, &u).unwrap().re, symbol(&ax, &u).unwrap().re, max_relative = 1e-8);
    }

    #[test]
    fn sector_bounds_isotropic_are_exact() {
        let m = LevyModel::isotropic(2, 1.0, 1.0);
        let b = check_sector_bounds(&m, 10.0, 100).unwrap();
        assert!(b.pass);
        assert_relative_eq!(b.c1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.c2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_measure_fails_sector_check() {
        let line = SphericalMeasure::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5]);
        let m = LevyModel::spherical_radial(1.0, 1.0, line);
        assert!(m.validate().is_err());
        let b = check_sector_bounds(&m, 10.0, 100).unwrap();
        assert!(!b.pass);
        assert_eq!(b.c1, 0.0);
    }

    #[test]
    fn small_jump_moments() {
        let t = LevyModel::truncated(1, 1.0, 1.0, 1.0);
        assert_relative_eq!(small_jump_moment(&t, 1.5).unwrap(), 2.0, epsilon = 1e-12);
        let temp = LevyModel::tempered(1, 1.0, 1.0);
        let v = small_jump_moment(&temp, 1.5).unwrap();
        assert!(v <= 2.0 && v > 0.0);
        assert!(matches!(small_jump_moment(&t, 1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn domination_results() {
        let temp = LevyModel::tempered(2, 1.2, 1.0);
        let d = dominates_truncated(&temp).unwrap();
        assert!(d.pass);
        assert_relative_eq!(d.margin, -1.0, epsilon = 1e-12);
        let tr = dominates_truncated(&LevyModel::truncated(2, 1.2, 1.0, 1.0)).unwrap();
        assert!(tr.pass && tr.margin == 0.0);
        assert!(dominates_truncated(&LevyModel::isotropic(2, 1.2, 1.0)).unwrap().pass);
        assert!(dominates_truncated(&LevyModel::relativistic(2, 1.0, 1.0)).unwrap().pass);
        assert!(matches!(dominates_truncated(&LevyModel::axis(1.0, vec![1.0, 1.0])), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = LevyModel::truncated(2, 1.5, 1.0, 0.8).with_spherical_measure(SphericalMeasure::uniform(2, 1.0));
        let text = m.to_json().unwrap();
        assert_eq!(LevyModel::from_json(&text).unwrap(), m);
        let parsed = LevyModel::from_json(r#"{"class":"axis_stable","dimension":2,"alpha":1.1,"scale":[1.0,2.0]}"#).unwrap();
        assert_eq!(parsed.scale_per_axis(), vec![1.0, 2.0]);
    }
}
