//! Source-time functions and high-pass preprocessing.

use crate::error::{Error, Result};
use crate::signal::{TimeAxis, Trace};
use std::f64::consts::PI;

/// Parameters of a Ricker wavelet: the negative-normalized second derivative
/// of a Gaussian, r(t) = A (1 - 2 pi^2 f^2 (t-t0)^2) exp(-pi^2 f^2 (t-t0)^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RickerSpec {
    pub peak_frequency: f64,
    pub delay: f64,
    pub amplitude: f64,
}

impl RickerSpec {
    pub fn new(peak_frequency: f64, delay: f64, amplitude: f64) -> Result<Self> {
        if !(peak_frequency > 0.0) {
            return Err(Error::Config(format!(
                "peak frequency must be positive, got {peak_frequency}"
            )));
        }
        if delay < 0.0 {
            return Err(Error::Config(format!("delay must be >= 0, got {delay}")));
        }
        Ok(Self {
            peak_frequency,
            delay,
            amplitude,
        })
    }

    /// Standard delay 1.2/f so the wavelet starts near zero amplitude,
    /// keeping the solver's zero initial conditions honest.
    pub fn with_standard_delay(peak_frequency: f64, amplitude: f64) -> Result<Self> {
        Self::new(peak_frequency, 1.2 / peak_frequency, amplitude)
    }

    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        let tau = t - self.delay;
        let arg = PI * self.peak_frequency * tau;
        let a2 = arg * arg;
        self.amplitude * (1.0 - 2.0 * a2) * (-a2).exp()
    }
}

/// Sample a Ricker wavelet on the axis.
pub fn ricker(spec: &RickerSpec, axis: TimeAxis) -> Result<Trace> {
    if spec.delay >= axis.nt as f64 * axis.dt {
        return Err(Error::Config(format!(
            "wavelet delay {} s lies outside the {}-sample axis",
            spec.delay, axis.nt
        )));
    }
    let samples = axis.times().map(|t| spec.value_at(t)).collect();
    Trace::new(axis, samples)
}

/// Superposition of two Ricker wavelets with a common peak frequency.
pub fn two_ricker_signal(
    peak_frequency: f64,
    t1: f64,
    t2: f64,
    a1: f64,
    a2: f64,
    axis: TimeAxis,
) -> Result<Trace> {
    let dur = axis.duration();
    for (name, t) in [("t1", t1), ("t2", t2)] {
        if t < 0.0 || t > dur {
            return Err(Error::Config(format!(
                "event time {name}={t} s outside the [0, {dur}] s axis"
            )));
        }
    }
    let s1 = RickerSpec::new(peak_frequency, t1, a1)?;
    let s2 = RickerSpec::new(peak_frequency, t2, a2)?;
    let samples = axis
        .times()
        .map(|t| s1.value_at(t) + s2.value_at(t))
        .collect();
    Trace::new(axis, samples)
}

/// One second-order section in direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Butterworth-style high-pass section with quality factor `q`
    /// (bilinear transform of the analog prototype).
    fn highpass(cutoff_hz: f64, dt: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz * dt;
        let (sw, cw) = w0.sin_cos();
        let alpha = sw / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 + cw) / (2.0 * a0),
            b1: -(1.0 + cw) / a0,
            b2: (1.0 + cw) / (2.0 * a0),
            a1: -2.0 * cw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Filter in place with initial conditions matched to `x[0]` held
    /// constant forever, so a DC input produces the steady-state response
    /// from the first sample.
    fn filter_in_place(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        // steady-state unit-step state; DC gain of a high-pass is zero
        let g = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let z2_unit = self.b2 - self.a2 * g;
        let z1_unit = self.b1 - self.a1 * g + z2_unit;
        let mut z1 = z1_unit * x[0];
        let mut z2 = z2_unit * x[0];
        for v in x.iter_mut() {
            let xn = *v;
            let y = self.b0 * xn + z1;
            z1 = self.b1 * xn - self.a1 * y + z2;
            z2 = self.b2 * xn - self.a2 * y;
            *v = y;
        }
    }
}

/// 4th-order Butterworth high-pass applied forward-backward (zero phase),
/// with odd-reflection padding to suppress edge transients. Event arrival
/// times are preserved, which matters for transport-based misfits.
pub fn highpass(trace: &Trace, cutoff_hz: f64) -> Result<Trace> {
    let nyquist = 0.5 / trace.axis.dt;
    if !(cutoff_hz > 0.0) {
        return Err(Error::Config(format!(
            "high-pass cutoff must be positive, got {cutoff_hz} Hz"
        )));
    }
    if cutoff_hz >= nyquist {
        return Err(Error::Config(format!(
            "high-pass cutoff {cutoff_hz} Hz is not below the Nyquist frequency {nyquist} Hz"
        )));
    }
    // two cascaded sections with the order-4 Butterworth quality factors
    let sections = [
        Biquad::highpass(cutoff_hz, trace.axis.dt, 0.5411961001461969),
        Biquad::highpass(cutoff_hz, trace.axis.dt, 1.3065629648763766),
    ];

    let n = trace.axis.nt;
    let pad = 15.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for k in (1..=pad).rev() {
        ext.push(2.0 * trace.samples[0] - trace.samples[k]);
    }
    ext.extend_from_slice(&trace.samples);
    for k in 1..=pad {
        ext.push(2.0 * trace.samples[n - 1] - trace.samples[n - 1 - k]);
    }

    for s in &sections {
        s.filter_in_place(&mut ext);
    }
    ext.reverse();
    for s in &sections {
        s.filter_in_place(&mut ext);
    }
    ext.reverse();

    let samples = ext[pad..pad + n].to_vec();
    Trace::new(trace.axis, samples)
}
