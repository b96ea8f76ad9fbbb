//! Acoustic full-waveform inversion built around optimal-transport misfits.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`] and [`signal`]: grids, velocity models, time axes, traces,
//!   shot gathers, and probability densities on the time axis.
//! - [`wavelet`]: Ricker source-time functions and zero-phase high-pass
//!   preprocessing.
//! - [`normalization`]: the catalog of maps from signed traces to unit-mass
//!   densities (linear shift, positive/negative parts, absolute value,
//!   squaring, exponential, and the sign-sensitive mixed scaling), each with
//!   its derivative for adjoint chain rules.
//! - [`transport`]: 1D optimal-transport distances between densities
//!   (quadratic Wasserstein with gradients, general `p`, and a signed-W1
//!   diagnostic) plus misfit sensitivity curves.
//! - [`misfit`]: least-squares and trace-by-trace Wasserstein misfit
//!   functionals returning values and adjoint sources.
//! - [`solver`]: 2D time-domain acoustic forward modeling, the exact
//!   discrete adjoint, and the imaging-condition gradient.
//! - [`inversion`] and [`experiment`]: the l-BFGS outer loop with bounds and
//!   Armijo line search, plus Camembert-style benchmark experiments.
//! - [`io`]: binary model files and CSV/JSON gather artifacts.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod lbfgs;
pub mod misfit;
pub mod normalization;
pub mod signal;
pub mod solver;
pub mod transport;
pub mod wavelet;

pub use error::{Error, Result};
