//! Maps from signed traces to unit-mass probability densities.
//!
//! Optimal transport compares nonnegative distributions of equal mass, which
//! seismic traces are not. Every operator here produces a [`Density`]
//! together with the data needed to differentiate the map for the adjoint
//! chain rule: the pre-normalization values, the diagonal of the pointwise
//! Jacobian, and the normalizing mass.
//!
//! Catalog:
//! - `linear`: shared shift, then divide by the per-trace mass;
//! - `separate-positive` / `separate-negative`: one-signed parts;
//! - `absolute`: pointwise absolute value;
//! - `square`: pointwise square (sign-blind by construction);
//! - `exponential`: exp(c f), strictly positive but can exaggerate peaks;
//! - `mixed`: linear above zero, scaled exponential below, C1 at the
//!   crossover and strictly increasing pointwise, so it keeps polarity
//!   information while staying compatible with gradient-based inversion.

use crate::error::{Error, Result};
use crate::signal::{trapezoid_integral, Density, TimeAxis, Trace};
use serde::{Deserialize, Serialize};

/// Which pointwise map turns a signed trace into a nonnegative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Linear,
    SeparatePositive,
    SeparateNegative,
    Absolute,
    Square,
    Exponential,
    Mixed,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Linear => "linear",
            Kind::SeparatePositive => "separate-positive",
            Kind::SeparateNegative => "separate-negative",
            Kind::Absolute => "absolute",
            Kind::Square => "square",
            Kind::Exponential => "exponential",
            Kind::Mixed => "mixed",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "linear" => Kind::Linear,
            "separate-positive" => Kind::SeparatePositive,
            "separate-negative" => Kind::SeparateNegative,
            "absolute" => Kind::Absolute,
            "square" => Kind::Square,
            "exponential" => Kind::Exponential,
            "mixed" => Kind::Mixed,
            other => {
                return Err(Error::Config(format!(
                    "unknown normalization kind '{other}' (expected one of linear, \
                     separate-positive, separate-negative, absolute, square, exponential, mixed)"
                )))
            }
        })
    }
}

/// Which sign part [`normalize_separate`] extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPart {
    Positive,
    Negative,
}

/// Default relative mass floor.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub kind: Kind,
    /// Scale parameter: the shift of the linear map, or the rate of the
    /// exponential/mixed maps. `None` selects the data-driven default
    /// (shared shift covering both traces for linear; c = 1/(0.1 max|g|)
    /// for exponential/mixed, placing the crossover at 10% of the observed
    /// peak amplitude).
    pub c: Option<f64>,
    /// Relative mass floor, resolved against the pair's peak amplitude.
    /// Keeps densities strictly positive so cumulative distributions are
    /// strictly increasing and their pseudo-inverses single-valued.
    pub epsilon: f64,
}

impl NormalizationSpec {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            c: None,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_c(kind: Kind, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!(
                "normalization scale c must be positive, got {c}"
            )));
        }
        Ok(Self {
            kind,
            c: Some(c),
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.c {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("normalization scale c={c} invalid")));
            }
        }
        if self.epsilon < 0.0 || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Absolute floor for a given amplitude scale.
    pub fn epsilon_abs(&self, scale: f64) -> f64 {
        self.epsilon * scale.max(1.0)
    }

    /// Rate parameter, defaulting from the observed trace's peak amplitude.
    pub fn resolve_c(&self, observed: &Trace) -> f64 {
        match self.c {
            Some(c) => c,
            None => {
                let peak = observed.max_abs();
                if peak > 0.0 {
                    1.0 / (0.1 * peak)
                } else {
                    1.0
                }
            }
        }
    }
}

/// A trace mapped to a density plus everything the chain rule needs.
///
/// `density = pre / mass` with `mass` the trapezoidal integral of `pre`,
/// and `diag[i] = d(pre[i]) / d(f[i])` the pointwise Jacobian.
#[derive(Debug, Clone)]
pub struct NormalizedTrace {
    pub density: Density,
    pub pre: Vec<f64>,
    pub diag: Vec<f64>,
    pub mass: f64,
}

impl NormalizedTrace {
    fn build(axis: TimeAxis, pre: Vec<f64>, diag: Vec<f64>) -> Result<Self> {
        let mass = trapezoid_integral(&pre, axis.dt);
        let density = Density::from_unnormalized(axis, pre.clone())?;
        Ok(Self {
            density,
            pre,
            diag,
            mass,
        })
    }

    /// Matrix-free action of the full derivative (pointwise map composed
    /// with the mass-normalization quotient rule).
    pub fn jacobian(&self) -> NormalizationJacobian {
        NormalizationJacobian {
            diag: self.diag.clone(),
            density: self.density.values.clone(),
            mass: self.mass,
            weights: self.density.axis.weights(),
        }
    }
}

/// The linear operator d(density)/d(trace):
/// `J[i][j] = diag[j] * (delta_ij - density[i] * w[j]) / mass`.
#[derive(Debug, Clone)]
pub struct NormalizationJacobian {
    pub diag: Vec<f64>,
    pub density: Vec<f64>,
    pub mass: f64,
    pub weights: Vec<f64>,
}

impl NormalizationJacobian {
    /// Forward action on a trace perturbation.
    pub fn apply(&self, delta: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = delta.iter().zip(&self.diag).map(|(d, j)| d * j).collect();
        let mass_dot: f64 = scaled
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum();
        self.density
            .iter()
            .zip(&scaled)
            .map(|(f, s)| (s - f * mass_dot) / self.mass)
            .collect()
    }

    /// Transpose action: pulls a gradient with respect to the density back
    /// to a gradient with respect to the trace.
    pub fn apply_transpose(&self, gamma: &[f64]) -> Vec<f64> {
        let dot: f64 = gamma
            .iter()
            .zip(&self.density)
            .map(|(g, f)| g * f)
            .sum();
        gamma
            .iter()
            .zip(&self.weights)
            .zip(&self.diag)
            .map(|((g, w), d)| d * (g - w * dot) / self.mass)
            .collect()
    }
}

/// Both traces normalized by one operator, plus the derivative data of the
/// synthetic side (the side the inversion differentiates).
#[derive(Debug, Clone)]
pub struct NormalizedPair {
    pub f: NormalizedTrace,
    pub g: NormalizedTrace,
}

/// Shift that makes both traces nonnegative with an epsilon of headroom:
/// `max(0, -min over both traces) + epsilon`.
pub fn shared_shift(f: &Trace, g: &Trace, epsilon_abs: f64) -> f64 {
    let min = f
        .samples
        .iter()
        .chain(&g.samples)
        .fold(f64::INFINITY, |a, &v| a.min(v));
    (-min).max(0.0) + epsilon_abs
}

/// Linear normalization of a single trace with an explicit shift:
/// (f + shift) / <f + shift>.
pub fn normalize_linear_with_shift(f: &Trace, shift: f64) -> Result<NormalizedTrace> {
    let pre: Vec<f64> = f.samples.iter().map(|&v| v + shift).collect();
    if pre.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "linear shift {shift} leaves negative values"
        )));
    }
    let diag = vec![1.0; f.axis.nt];
    NormalizedTrace::build(f.axis, pre, diag)
}

/// Linear normalization of a pair with a shared shift, so the equal-mass
/// argument holds exactly for mean-zero data.
pub fn normalize_linear(f: &Trace, g: &Trace, spec: &NormalizationSpec) -> Result<NormalizedPair> {
    crate::signal::resample_guard(f.axis, g.axis)?;
    let shift = match spec.c {
        Some(c) => c,
        None => {
            let scale = f.max_abs().max(g.max_abs());
            shared_shift(f, g, spec.epsilon_abs(scale))
        }
    };
    Ok(NormalizedPair {
        f: normalize_linear_with_shift(f, shift)?,
        g: normalize_linear_with_shift(g, shift)?,
    })
}

/// One-signed part scaled by its mass: f+/<f+> or f-/<f->, with
/// f+ = max(f, 0) and f- = max(-f, 0).
///
/// Errors with [`Error::DegeneratePart`] when the selected part carries no
/// mass above the floor; callers either substitute the uniform density or
/// drop the trace, depending on context.
pub fn normalize_separate(f: &Trace, sign: SignPart, epsilon_abs: f64) -> Result<NormalizedTrace> {
    let (part, diag): (Vec<f64>, Vec<f64>) = match sign {
        SignPart::Positive => (
            f.samples.iter().map(|&v| v.max(0.0)).collect(),
            f.samples
                .iter()
                .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
                .collect(),
        ),
        SignPart::Negative => (
            f.samples.iter().map(|&v| (-v).max(0.0)).collect(),
            f.samples
                .iter()
                .map(|&v| if v < 0.0 { -1.0 } else { 0.0 })
                .collect(),
        ),
    };
    let raw_mass = trapezoid_integral(&part, f.axis.dt);
    if raw_mass <= epsilon_abs {
        return Err(Error::DegeneratePart {
            part: match sign {
                SignPart::Positive => "positive",
                SignPart::Negative => "negative",
            },
            mass: raw_mass,
            floor: epsilon_abs,
        });
    }
    let pre: Vec<f64> = part.iter().map(|&v| v + epsilon_abs).collect();
    NormalizedTrace::build(f.axis, pre, diag)
}

/// [`normalize_separate`], substituting the uniform density (with a logged
/// warning) when the selected part is degenerate. Early-iteration synthetics
/// routinely miss events entirely.
pub fn normalize_separate_or_uniform(
    f: &Trace,
    sign: SignPart,
    epsilon_abs: f64,
) -> NormalizedTrace {
    match normalize_separate(f, sign, epsilon_abs) {
        Ok(n) => n,
        Err(e) => {
            log::warn!("substituting uniform density: {e}");
            NormalizedTrace {
                density: Density::uniform(f.axis),
                pre: vec![1.0 / f.axis.duration(); f.axis.nt],
                diag: vec![0.0; f.axis.nt],
                mass: 1.0,
            }
        }
    }
}

/// Pointwise absolute value scaled by its mass. Not differentiable at zero
/// crossings; the diagonal uses the one-sided derivative from the active
/// region and 0 at exact zeros.
pub fn normalize_absolute(f: &Trace, epsilon_abs: f64) -> Result<NormalizedTrace> {
    let part: Vec<f64> = f.samples.iter().map(|&v| v.abs()).collect();
    let raw_mass = trapezoid_integral(&part, f.axis.dt);
    if raw_mass <= epsilon_abs {
        return Err(Error::DegeneratePart {
            part: "absolute",
            mass: raw_mass,
            floor: epsilon_abs,
        });
    }
    let pre: Vec<f64> = part.iter().map(|&v| v + epsilon_abs).collect();
    // one-sided derivative from the active region, 0 at exact zeros
    let diag: Vec<f64> = f
        .samples
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    NormalizedTrace::build(f.axis, pre, diag)
}

/// Pointwise square scaled by its mass: f^2/<f^2>. Sign-blind by
/// construction, which loses polarity information and doubles frequencies.
pub fn normalize_square(f: &Trace, epsilon_abs: f64) -> Result<NormalizedTrace> {
    let part: Vec<f64> = f.samples.iter().map(|&v| v * v).collect();
    let floor = epsilon_abs * epsilon_abs.max(1.0);
    let raw_mass = trapezoid_integral(&part, f.axis.dt);
    if raw_mass <= floor {
        return Err(Error::DegeneratePart {
            part: "squared",
            mass: raw_mass,
            floor,
        });
    }
    let pre: Vec<f64> = part.iter().map(|&v| v + floor).collect();
    let diag: Vec<f64> = f.samples.iter().map(|&v| 2.0 * v).collect();
    NormalizedTrace::build(f.axis, pre, diag)
}

/// Maximum exponent accepted before exp(c f) overflows f64.
pub const EXP_OVERFLOW_GUARD: f64 = 700.0;

/// Exponential scaling exp(c f)/<exp(c f)>.
pub fn normalize_exponential(f: &Trace, c: f64) -> Result<NormalizedTrace> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("exponential rate must be positive, got {c}")));
    }
    if c * f.max_abs() > EXP_OVERFLOW_GUARD {
        return Err(Error::Config(format!(
            "c * max|f| = {:.3e} would overflow exp; choose a smaller c",
            c * f.max_abs()
        )));
    }
    let pre: Vec<f64> = f.samples.iter().map(|&v| (c * v).exp()).collect();
    let diag: Vec<f64> = pre.iter().map(|&p| c * p).collect();
    NormalizedTrace::build(f.axis, pre, diag)
}

/// The sign-sensitive mixed scaling:
///
/// ```text
/// pre(f) = f + 1/c          for f >= 0
///        = (1/c) exp(c f)   for f <  0
/// ```
///
/// then divided by b = <pre>. The two branches agree in value (1/c) and
/// slope (1) at f = 0, so the map is C1, and it is strictly increasing
/// pointwise, hence a bijection on sample values.
pub fn normalize_mixed(f: &Trace, c: f64) -> Result<NormalizedTrace> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("mixed-scaling rate must be positive, got {c}")));
    }
    let inv_c = 1.0 / c;
    let mut pre = Vec::with_capacity(f.axis.nt);
    let mut diag = Vec::with_capacity(f.axis.nt);
    for &v in &f.samples {
        if v >= 0.0 {
            pre.push(v + inv_c);
            diag.push(1.0);
        } else {
            let e = (c * v).exp();
            pre.push(inv_c * e);
            diag.push(e);
        }
    }
    NormalizedTrace::build(f.axis, pre, diag)
}

/// Pointwise mixed map before mass normalization; exposed for convexity and
/// monotonicity checks.
pub fn mixed_pointwise(v: f64, c: f64) -> f64 {
    if v >= 0.0 {
        v + 1.0 / c
    } else {
        (c * v).exp() / c
    }
}

/// Normalize a synthetic/observed pair under one spec. Shared parameters
/// (the linear shift, the mixed/exponential rate) are resolved from the
/// pair; per-trace masses stay independent.
pub fn normalize_pair(
    f: &Trace,
    g: &Trace,
    spec: &NormalizationSpec,
) -> Result<NormalizedPair> {
    crate::signal::resample_guard(f.axis, g.axis)?;
    spec.validate()?;
    let scale = f.max_abs().max(g.max_abs());
    let eps = spec.epsilon_abs(scale);
    match spec.kind {
        Kind::Linear => normalize_linear(f, g, spec),
        Kind::SeparatePositive => Ok(NormalizedPair {
            f: normalize_separate(f, SignPart::Positive, eps)?,
            g: normalize_separate(g, SignPart::Positive, eps)?,
        }),
        Kind::SeparateNegative => Ok(NormalizedPair {
            f: normalize_separate(f, SignPart::Negative, eps)?,
            g: normalize_separate(g, SignPart::Negative, eps)?,
        }),
        Kind::Absolute => Ok(NormalizedPair {
            f: normalize_absolute(f, eps)?,
            g: normalize_absolute(g, eps)?,
        }),
        Kind::Square => Ok(NormalizedPair {
            f: normalize_square(f, eps)?,
            g: normalize_square(g, eps)?,
        }),
        Kind::Exponential => {
            let c = spec.resolve_c(g);
            Ok(NormalizedPair {
                f: normalize_exponential(f, c)?,
                g: normalize_exponential(g, c)?,
            })
        }
        Kind::Mixed => {
            let c = spec.resolve_c(g);
            Ok(NormalizedPair {
                f: normalize_mixed(f, c)?,
                g: normalize_mixed(g, c)?,
            })
        }
    }
}

/// The derivative of the normalization as a matrix-free linear operator.
///
/// For the linear kind the shift is taken from the spec (or from the trace
/// itself when unset) and treated as a constant; in pair contexts build the
/// operator from the pair's [`NormalizedTrace`] instead.
pub fn normalization_derivative(
    spec: &NormalizationSpec,
    f: &Trace,
) -> Result<NormalizationJacobian> {
    spec.validate()?;
    let eps = spec.epsilon_abs(f.max_abs());
    let normalized = match spec.kind {
        Kind::Linear => {
            let shift = match spec.c {
                Some(c) => c,
                None => shared_shift(f, f, eps),
            };
            normalize_linear_with_shift(f, shift)?
        }
        Kind::SeparatePositive => normalize_separate(f, SignPart::Positive, eps)?,
        Kind::SeparateNegative => normalize_separate(f, SignPart::Negative, eps)?,
        Kind::Absolute => normalize_absolute(f, eps)?,
        Kind::Square => normalize_square(f, eps)?,
        Kind::Exponential => normalize_exponential(f, spec.resolve_c(f))?,
        Kind::Mixed => normalize_mixed(f, spec.resolve_c(f))?,
    };
    Ok(normalized.jacobian())
}
