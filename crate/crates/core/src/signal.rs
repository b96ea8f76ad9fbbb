//! Time axes, traces, shot gathers, and unit-mass densities.
//!
//! The trapezoidal rule is the single quadrature used everywhere in the
//! crate (mass functionals, transport integrals, misfit values), so
//! discrete derivative identities hold exactly at the quadrature level.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform time sampling: `nt` samples at spacing `dt` seconds, first sample
/// at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub nt: usize,
    pub dt: f64,
}

impl TimeAxis {
    pub fn new(nt: usize, dt: f64) -> Result<Self> {
        if nt < 2 {
            return Err(Error::Config(format!("time axis needs nt >= 2, got {nt}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { nt, dt })
    }

    /// Recording length (nt - 1) · dt.
    pub fn duration(&self) -> f64 {
        (self.nt - 1) as f64 * self.dt
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nt).map(move |i| self.time(i))
    }

    /// Trapezoidal quadrature weight of sample `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nt - 1 {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.nt).map(|i| self.weight(i)).collect()
    }
}

/// Succeeds iff the two axes are identical; observed and synthetic data
/// recorded on different clocks cannot be compared sample-wise.
pub fn resample_guard(a: TimeAxis, b: TimeAxis) -> Result<()> {
    if a.nt != b.nt || a.dt != b.dt {
        return Err(Error::AxisMismatch { a, b });
    }
    Ok(())
}

/// Trapezoidal quadrature of `samples` over a uniform axis with spacing `dt`.
pub fn trapezoid_integral(samples: &[f64], dt: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (samples[0] + samples[n - 1]);
    for &s in &samples[1..n - 1] {
        acc += s;
    }
    acc * dt
}

/// Receiver time series. Amplitudes are dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub axis: TimeAxis,
    pub samples: Vec<f64>,
}

impl Trace {
    pub fn new(axis: TimeAxis, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != axis.nt {
            return Err(Error::Config(format!(
                "trace has {} samples for an axis of {}",
                samples.len(),
                axis.nt
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("non-finite trace sample {bad}")));
        }
        Ok(Self { axis, samples })
    }

    pub fn zeros(axis: TimeAxis) -> Self {
        Self {
            axis,
            samples: vec![0.0; axis.nt],
        }
    }

    /// Trapezoidal integral of the trace over its axis.
    pub fn integral(&self) -> f64 {
        trapezoid_integral(&self.samples, self.axis.dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |a, &s| a.max(s.abs()))
    }

    /// The trace translated by `shift` seconds: output(t) = input(t - shift),
    /// zero outside the recorded window. Integer-sample shifts are exact;
    /// fractional shifts use linear interpolation.
    pub fn shifted(&self, shift: f64) -> Result<Trace> {
        if shift.abs() >= self.axis.duration() {
            return Err(Error::Domain(format!(
                "shift {shift} s exceeds the {}-s axis",
                self.axis.duration()
            )));
        }
        let nt = self.axis.nt;
        let steps = shift / self.axis.dt;
        let mut out = vec![0.0; nt];
        let rounded = steps.round();
        if (steps - rounded).abs() < 1e-9 {
            let k = rounded as i64;
            for i in 0..nt as i64 {
                let j = i - k;
                if j >= 0 && (j as usize) < nt {
                    out[i as usize] = self.samples[j as usize];
                }
            }
        } else {
            for i in 0..nt {
                let pos = i as f64 - steps;
                let j0 = pos.floor();
                let frac = pos - j0;
                let j0 = j0 as i64;
                let a = if j0 >= 0 && (j0 as usize) < nt {
                    self.samples[j0 as usize]
                } else {
                    0.0
                };
                let b = if j0 + 1 >= 0 && ((j0 + 1) as usize) < nt {
                    self.samples[(j0 + 1) as usize]
                } else {
                    0.0
                };
                out[i] = a * (1.0 - frac) + b * frac;
            }
        }
        Ok(Trace {
            axis: self.axis,
            samples: out,
        })
    }
}

/// All traces recorded from one source firing.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotGather {
    pub source_position: (f64, f64),
    pub receiver_positions: Vec<(f64, f64)>,
    pub traces: Vec<Trace>,
}

impl ShotGather {
    pub fn new(
        source_position: (f64, f64),
        receiver_positions: Vec<(f64, f64)>,
        traces: Vec<Trace>,
    ) -> Result<Self> {
        if traces.len() != receiver_positions.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} traces for {} receivers",
                traces.len(),
                receiver_positions.len()
            )));
        }
        if traces.is_empty() {
            return Err(Error::GeometryMismatch("gather has no receivers".into()));
        }
        let axis = traces[0].axis;
        for t in &traces[1..] {
            resample_guard(axis, t.axis)?;
        }
        Ok(Self {
            source_position,
            receiver_positions,
            traces,
        })
    }

    pub fn axis(&self) -> TimeAxis {
        self.traces[0].axis
    }

    pub fn n_receivers(&self) -> usize {
        self.traces.len()
    }

    /// Same receiver layout and time axis.
    pub fn check_same_geometry(&self, other: &ShotGather) -> Result<()> {
        resample_guard(self.axis(), other.axis())?;
        if self.receiver_positions.len() != other.receiver_positions.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} vs {} receivers",
                self.receiver_positions.len(),
                other.receiver_positions.len()
            )));
        }
        for (i, (a, b)) in self
            .receiver_positions
            .iter()
            .zip(&other.receiver_positions)
            .enumerate()
        {
            if a != b {
                return Err(Error::GeometryMismatch(format!(
                    "receiver {i} at {a:?} vs {b:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Relative tolerance on the unit-mass invariant of [`Density`].
pub const DENSITY_MASS_TOL: f64 = 1e-12;

/// Nonnegative mass density on the time axis with unit trapezoidal integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

impl Density {
    pub fn new(axis: TimeAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.nt {
            return Err(Error::Config(format!(
                "density has {} values for an axis of {}",
                values.len(),
                axis.nt
            )));
        }
        for &v in &values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("density value {v} is not >= 0")));
            }
        }
        let mass = trapezoid_integral(&values, axis.dt);
        if (mass - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(Error::Domain(format!(
                "density mass {mass} deviates from 1 beyond {DENSITY_MASS_TOL}"
            )));
        }
        Ok(Self { axis, values })
    }

    /// Divide nonnegative values by their trapezoidal mass.
    pub fn from_unnormalized(axis: TimeAxis, values: Vec<f64>) -> Result<Self> {
        let mass = trapezoid_integral(&values, axis.dt);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Domain(format!(
                "cannot normalize values of mass {mass}"
            )));
        }
        let mut scaled: Vec<f64> = values.iter().map(|v| v / mass).collect();
        // second pass kills the last ulps of drift so the invariant holds exactly
        let mass2 = trapezoid_integral(&scaled, axis.dt);
        for v in &mut scaled {
            *v /= mass2;
        }
        Self::new(axis, scaled)
    }

    /// The uniform density 1/T over the axis.
    pub fn uniform(axis: TimeAxis) -> Self {
        let v = 1.0 / axis.duration();
        Self {
            axis,
            values: vec![v; axis.nt],
        }
    }

    pub fn mass(&self) -> f64 {
        trapezoid_integral(&self.values, self.axis.dt)
    }
}
