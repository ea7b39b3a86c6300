//! Simulation toolkit for SDEs `dX = b(X) dt + dL` with bounded Hölder drift
//! `b` and stable-like pure-jump noise `L`.
//!
//! * [`levy_models`]: Lévy models, symbols and measure checks.
//! * [`samplers`]: exact increments and Lévy–Itô jump paths.
//! * [`semigroup`]: Monte Carlo convolution semigroups on lattices.
//! * [`resolvent`]: resolvent equations with constant and Hölder drift.
//! * [`zvonkin`]: the transform ψ = id + u and the auxiliary coefficients.
//! * [`sde_engine`]: Euler schemes, pathwise identities, flow and
//!   uniqueness experiments.

pub mod blob;
pub mod drift;
pub mod error;
pub mod generator;
pub mod grid;
pub mod interp;
pub mod levy_models;
pub mod quad;
pub mod resolvent;
pub mod rng;
pub mod samplers;
pub mod sde_engine;
pub mod semigroup;
pub mod specfun;
pub mod zvonkin;

pub use error::{Error, Result};
