//! Misfit functionals between synthetic and observed gathers.
//!
//! Two families: the classical least-squares waveform misfit, and
//! trace-by-trace quadratic-Wasserstein misfits built from a normalization
//! and the 1D transport distance. Every evaluation returns the value and the
//! adjoint source d(misfit)/d(synthetic samples), the only ingredient the
//! adjoint wave equation needs.
//!
//! Named configurations:
//! - `l2`: half the summed squared waveform difference;
//! - `w2-linear`: W2^2 after the shared-shift linear scaling;
//! - `w2-square`: W2^2 after squaring (sign-blind);
//! - `w2-exp`: W2^2 after exponential scaling;
//! - `w2-separate`: W2^2 of the positive parts plus W2^2 of the negative
//!   parts;
//! - `w2-mixed`: W2^2(P(f), P(g)) + W2^2(P(-f), P(-g)) with P the
//!   sign-sensitive mixed scaling, so both polarities contribute.

use crate::error::{Error, Result};
use crate::normalization::{
    self, Kind, NormalizationSpec, NormalizedTrace, SignPart,
};
use crate::signal::{ShotGather, Trace};
use crate::transport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisfitKind {
    L2,
    W2Trace,
}

/// How per-trace transport terms combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combination {
    /// One transport term per trace.
    Single,
    /// Positive-part term plus negative-part term, equal weights.
    SeparateSum,
    /// Mixed-scaled term plus the sign-flipped mixed-scaled term.
    MixedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisfitSpec {
    pub kind: MisfitKind,
    pub normalization: NormalizationSpec,
    pub combination: Combination,
}

pub const MISFIT_NAMES: [&str; 6] = [
    "l2",
    "w2-linear",
    "w2-square",
    "w2-exp",
    "w2-mixed",
    "w2-separate",
];

impl MisfitSpec {
    pub fn l2() -> Self {
        Self {
            kind: MisfitKind::L2,
            normalization: NormalizationSpec::new(Kind::Linear),
            combination: Combination::Single,
        }
    }

    pub fn w2(kind: Kind) -> Self {
        Self {
            kind: MisfitKind::W2Trace,
            normalization: NormalizationSpec::new(kind),
            combination: Combination::Single,
        }
    }

    /// Positive- and negative-part transport, summed.
    pub fn w2_separate() -> Self {
        Self {
            kind: MisfitKind::W2Trace,
            normalization: NormalizationSpec::new(Kind::SeparatePositive),
            combination: Combination::SeparateSum,
        }
    }

    /// The sign-sensitive objective: mixed-scaled term plus its mirror.
    pub fn w2_mixed() -> Self {
        Self {
            kind: MisfitKind::W2Trace,
            normalization: NormalizationSpec::new(Kind::Mixed),
            combination: Combination::MixedSum,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "l2" => Self::l2(),
            "w2-linear" => Self::w2(Kind::Linear),
            "w2-square" => Self::w2(Kind::Square),
            "w2-exp" => Self::w2(Kind::Exponential),
            "w2-mixed" => Self::w2_mixed(),
            "w2-separate" => Self::w2_separate(),
            other => {
                return Err(Error::Config(format!(
                    "unknown misfit '{other}' (valid names: {})",
                    MISFIT_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.combination, self.normalization.kind) {
            (MisfitKind::L2, _, _) => "l2",
            (MisfitKind::W2Trace, Combination::MixedSum, _) => "w2-mixed",
            (MisfitKind::W2Trace, Combination::SeparateSum, _) => "w2-separate",
            (MisfitKind::W2Trace, Combination::Single, Kind::Linear) => "w2-linear",
            (MisfitKind::W2Trace, Combination::Single, Kind::Square) => "w2-square",
            (MisfitKind::W2Trace, Combination::Single, Kind::Exponential) => "w2-exp",
            (MisfitKind::W2Trace, Combination::Single, Kind::Mixed) => "w2-mixed-single",
            (MisfitKind::W2Trace, Combination::Single, _) => "w2",
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        match self.combination {
            Combination::SeparateSum => {
                if !matches!(
                    self.normalization.kind,
                    Kind::SeparatePositive | Kind::SeparateNegative
                ) {
                    return Err(Error::Config(
                        "separate-sum combination requires a separate normalization".into(),
                    ));
                }
            }
            Combination::MixedSum => {
                if self.normalization.kind != Kind::Mixed {
                    return Err(Error::Config(
                        "mixed-sum combination requires the mixed normalization".into(),
                    ));
                }
            }
            Combination::Single => {}
        }
        Ok(())
    }
}

/// Misfit value plus the adjoint source per trace.
#[derive(Debug, Clone)]
pub struct MisfitReport {
    pub value: f64,
    pub per_trace_values: Vec<f64>,
    /// d(value)/d(synthetic sample), one array per trace.
    pub adjoint_sources: Vec<Vec<f64>>,
}

/// Least-squares waveform misfit: half the trapezoidal integral of the
/// squared difference, summed over receivers.
pub fn misfit_l2(f: &ShotGather, g: &ShotGather) -> Result<MisfitReport> {
    f.check_same_geometry(g)?;
    let axis = f.axis();
    let mut per_trace = Vec::with_capacity(f.traces.len());
    let mut adjoints = Vec::with_capacity(f.traces.len());
    for (tf, tg) in f.traces.iter().zip(&g.traces) {
        let mut value = 0.0;
        let mut adj = vec![0.0; axis.nt];
        for i in 0..axis.nt {
            let w = axis.weight(i);
            let r = tf.samples[i] - tg.samples[i];
            value += 0.5 * w * r * r;
            adj[i] = w * r;
        }
        per_trace.push(value);
        adjoints.push(adj);
    }
    Ok(MisfitReport {
        value: per_trace.iter().sum(),
        per_trace_values: per_trace,
        adjoint_sources: adjoints,
    })
}

/// One transport term: normalize both traces, take W2^2, and pull the
/// transport gradient back through the synthetic side's normalization.
fn w2_term(nf: &NormalizedTrace, ng: &NormalizedTrace) -> Result<(f64, Vec<f64>)> {
    let tr = transport::w2_1d(&nf.density, &ng.density)?;
    let adj = nf.jacobian().apply_transpose(&tr.grad_f);
    Ok((tr.distance_sq, adj))
}

/// Per-trace W2 misfit under `spec`; returns (value, adjoint source).
/// Degenerate normalizations (a one-signed trace asked for its empty part,
/// an all-zero trace squared) contribute zero with a logged warning.
pub fn trace_misfit_w2(f: &Trace, g: &Trace, spec: &MisfitSpec) -> Result<(f64, Vec<f64>)> {
    let nt = f.axis.nt;
    let norm = &spec.normalization;
    let scale = f.max_abs().max(g.max_abs());
    let eps = norm.epsilon_abs(scale);
    match spec.combination {
        Combination::Single => match normalization::normalize_pair(f, g, norm) {
            Ok(pair) => w2_term(&pair.f, &pair.g),
            Err(e @ Error::DegeneratePart { .. }) => {
                log::warn!("trace dropped from misfit: {e}");
                Ok((0.0, vec![0.0; nt]))
            }
            Err(e) => Err(e),
        },
        Combination::SeparateSum => {
            let mut value = 0.0;
            let mut adj = vec![0.0; nt];
            for sign in [SignPart::Positive, SignPart::Negative] {
                let nf = normalization::normalize_separate(f, sign, eps);
                let ng = normalization::normalize_separate(g, sign, eps);
                match (nf, ng) {
                    (Ok(nf), Ok(ng)) => {
                        let (v, a) = w2_term(&nf, &ng)?;
                        value += v;
                        for (dst, src) in adj.iter_mut().zip(&a) {
                            *dst += src;
                        }
                    }
                    (Err(e @ Error::DegeneratePart { .. }), _)
                    | (_, Err(e @ Error::DegeneratePart { .. })) => {
                        log::warn!("separate-part term dropped: {e}");
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
            Ok((value, adj))
        }
        Combination::MixedSum => {
            let c = norm.resolve_c(g);
            let mut value = 0.0;
            let mut adj = vec![0.0; nt];
            // direct term
            let nf = normalization::normalize_mixed(f, c)?;
            let ng = normalization::normalize_mixed(g, c)?;
            let (v, a) = w2_term(&nf, &ng)?;
            value += v;
            for (dst, src) in adj.iter_mut().zip(&a) {
                *dst += src;
            }
            // mirrored term: the inner sign flip enters the chain rule
            let neg_f = Trace::new(f.axis, f.samples.iter().map(|s| -s).collect())?;
            let neg_g = Trace::new(g.axis, g.samples.iter().map(|s| -s).collect())?;
            let nf2 = normalization::normalize_mixed(&neg_f, c)?;
            let ng2 = normalization::normalize_mixed(&neg_g, c)?;
            let (v2, a2) = w2_term(&nf2, &ng2)?;
            value += v2;
            for (dst, src) in adj.iter_mut().zip(&a2) {
                *dst -= src;
            }
            Ok((value, adj))
        }
    }
}

/// Per-trace misfit dispatch (value + adjoint source).
pub fn trace_misfit(f: &Trace, g: &Trace, spec: &MisfitSpec) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    crate::signal::resample_guard(f.axis, g.axis)?;
    match spec.kind {
        MisfitKind::L2 => {
            let mut value = 0.0;
            let mut adj = vec![0.0; f.axis.nt];
            for i in 0..f.axis.nt {
                let w = f.axis.weight(i);
                let r = f.samples[i] - g.samples[i];
                value += 0.5 * w * r * r;
                adj[i] = w * r;
            }
            Ok((value, adj))
        }
        MisfitKind::W2Trace => trace_misfit_w2(f, g, spec),
    }
}

/// Value-only per-trace evaluation (sensitivity curves, line searches).
pub fn trace_misfit_value(f: &Trace, g: &Trace, spec: &MisfitSpec) -> Result<f64> {
    trace_misfit(f, g, spec).map(|(v, _)| v)
}

/// Trace-by-trace W2 misfit over a gather.
pub fn misfit_w2_trace(f: &ShotGather, g: &ShotGather, spec: &MisfitSpec) -> Result<MisfitReport> {
    spec.validate()?;
    f.check_same_geometry(g)?;
    let mut per_trace = Vec::with_capacity(f.traces.len());
    let mut adjoints = Vec::with_capacity(f.traces.len());
    for (tf, tg) in f.traces.iter().zip(&g.traces) {
        let (v, a) = trace_misfit_w2(tf, tg, spec)?;
        per_trace.push(v);
        adjoints.push(a);
    }
    Ok(MisfitReport {
        value: per_trace.iter().sum(),
        per_trace_values: per_trace,
        adjoint_sources: adjoints,
    })
}

/// Gather-level dispatch.
pub fn evaluate(f: &ShotGather, g: &ShotGather, spec: &MisfitSpec) -> Result<MisfitReport> {
    spec.validate()?;
    match spec.kind {
        MisfitKind::L2 => misfit_l2(f, g),
        MisfitKind::W2Trace => misfit_w2_trace(f, g, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{TimeAxis, Trace};
    use crate::wavelet::{ricker, two_ricker_signal, RickerSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn axis(nt: usize, dt: f64) -> TimeAxis {
        TimeAxis::new(nt, dt).unwrap()
    }

    fn random_trace(seed: u64, nt: usize, dt: f64) -> Trace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Trace::new(
            axis(nt, dt),
            (0..nt).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn single_trace_gather(t: &Trace) -> ShotGather {
        ShotGather::new((0.0, 0.0), vec![(100.0, 0.0)], vec![t.clone()]).unwrap()
    }

    #[test]
    fn l2_zero_for_identical_gathers() {
        let t = random_trace(1, 64, 0.01);
        let g = single_trace_gather(&t);
        let r = misfit_l2(&g, &g).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.adjoint_sources[0].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn l2_against_zero_is_half_energy() {
        let t = random_trace(2, 80, 0.005);
        let zero = Trace::zeros(t.axis);
        let r = misfit_l2(&single_trace_gather(&t), &single_trace_gather(&zero)).unwrap();
        let sq: Vec<f64> = t.samples.iter().map(|s| s * s).collect();
        let expect = 0.5 * crate::signal::trapezoid_integral(&sq, t.axis.dt);
        assert!((r.value - expect).abs() < 1e-14);
    }

    #[test]
    fn l2_rejects_geometry_mismatch() {
        let t = random_trace(3, 32, 0.01);
        let a = single_trace_gather(&t);
        let b = ShotGather::new((0.0, 0.0), vec![(50.0, 0.0)], vec![t]).unwrap();
        assert!(misfit_l2(&a, &b).is_err());
    }

    #[test]
    fn w2_misfits_vanish_for_identical_gathers() {
        let t = random_trace(4, 48, 0.01);
        let g = single_trace_gather(&t);
        for name in ["w2-linear", "w2-square", "w2-exp", "w2-mixed", "w2-separate"] {
            let spec = MisfitSpec::by_name(name).unwrap();
            let r = evaluate(&g, &g, &spec).unwrap();
            assert!(r.value < 1e-14, "{name}: {}", r.value);
        }
    }

    #[test]
    fn misfit_value_is_sum_of_trace_values() {
        let ax = axis(40, 0.01);
        let mk = |seed| {
            let t1 = random_trace(seed, 40, 0.01);
            let t2 = random_trace(seed + 50, 40, 0.01);
            ShotGather::new(
                (0.0, 0.0),
                vec![(10.0, 0.0), (20.0, 0.0)],
                vec![
                    Trace::new(ax, t1.samples).unwrap(),
                    Trace::new(ax, t2.samples).unwrap(),
                ],
            )
            .unwrap()
        };
        let f = mk(5);
        let g = mk(6);
        for name in MISFIT_NAMES {
            let spec = MisfitSpec::by_name(name).unwrap();
            let r = evaluate(&f, &g, &spec).unwrap();
            let sum: f64 = r.per_trace_values.iter().sum();
            assert_eq!(r.value, sum, "{name}");
            assert!(r.adjoint_sources.iter().flatten().all(|a| a.is_finite()));
        }
    }

    /// Directional derivative against the adjoint source, every
    /// differentiable configuration.
    #[test]
    fn adjoint_sources_match_finite_differences() {
        let ax = axis(32, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // keep samples off zero so separate parts stay differentiable, and
        // make sure the observed trace holds the global minimum so the
        // shared linear shift is locally constant
        let sample = |rng: &mut ChaCha8Rng| {
            let mag = rng.gen_range(0.2..1.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        };
        let f = Trace::new(ax, (0..32).map(|_| sample(&mut rng)).collect()).unwrap();
        let mut g_samples: Vec<f64> = (0..32).map(|_| sample(&mut rng)).collect();
        g_samples[5] = -1.5; // global minimum lives in g
        let g = Trace::new(ax, g_samples).unwrap();

        let h = 1e-6;
        for name in MISFIT_NAMES {
            let spec = MisfitSpec::by_name(name).unwrap();
            let (_, adj) = trace_misfit(&f, &g, &spec).unwrap();
            let delta: Vec<f64> = (0..32)
                .map(|i| (0.3 + 0.1 * (i as f64 * 0.7).sin()) * if i % 2 == 0 { 1.0 } else { -0.8 })
                .collect();
            let perturbed = |sign: f64| {
                Trace::new(
                    ax,
                    f.samples
                        .iter()
                        .zip(&delta)
                        .map(|(s, d)| s + sign * h * d)
                        .collect(),
                )
                .unwrap()
            };
            let up = trace_misfit_value(&perturbed(1.0), &g, &spec).unwrap();
            let dn = trace_misfit_value(&perturbed(-1.0), &g, &spec).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let predicted: f64 = adj.iter().zip(&delta).map(|(a, d)| a * d).sum();
            let scale = predicted.abs().max(1e-8);
            assert!(
                (fd - predicted).abs() <= 1e-6 * scale.max(fd.abs()),
                "{name}: fd {fd} vs adjoint {predicted}"
            );
        }
    }

    /// The square normalization erases polarity at the misfit level.
    #[test]
    fn square_misfit_is_sign_blind() {
        let f = random_trace(8, 64, 0.01);
        let g = random_trace(9, 64, 0.01);
        let neg_f = Trace::new(f.axis, f.samples.iter().map(|s| -s).collect()).unwrap();
        let spec = MisfitSpec::by_name("w2-square").unwrap();
        let a = trace_misfit_value(&f, &g, &spec).unwrap();
        let b = trace_misfit_value(&neg_f, &g, &spec).unwrap();
        assert_eq!(a, b);
    }

    /// Near-zero misfit forces near-equal traces for the strictly monotone
    /// mixed scaling.
    #[test]
    fn tiny_mixed_misfit_implies_close_traces() {
        let f = random_trace(10, 48, 0.01);
        let spec = MisfitSpec::w2_mixed();
        let mut g = f.clone();
        g.samples[20] += 1e-3;
        let v_perturbed = trace_misfit_value(&f, &g, &spec).unwrap();
        assert!(v_perturbed > 1e-14);
        let v_same = trace_misfit_value(&f, &f, &spec).unwrap();
        assert!(v_same < 1e-14);
    }

    /// As c -> 0 the mixed objective approaches twice the linear-scaled W2
    /// misfit with the matched shift 1/c.
    #[test]
    fn mixed_sum_small_c_limit_is_twice_linear() {
        let ax = axis(256, 0.004);
        let base = two_ricker_signal(8.0, 0.35, 0.65, 1.0, -0.8, ax).unwrap();
        let mean = base.integral() / ax.duration();
        let f = Trace::new(ax, base.samples.iter().map(|s| s - mean).collect()).unwrap();
        let g = f.shifted(0.04).unwrap();
        let peak = f.max_abs().max(g.max_abs());
        let c = 1e-3 / peak;

        let mut spec = MisfitSpec::w2_mixed();
        spec.normalization.c = Some(c);
        let mixed = trace_misfit_value(&g, &f, &spec).unwrap();

        let mut lin = MisfitSpec::w2(Kind::Linear);
        lin.normalization.c = Some(1.0 / c);
        let linear = trace_misfit_value(&g, &f, &lin).unwrap();

        let ratio = mixed / (2.0 * linear);
        assert!(ratio > 0.95 && ratio < 1.05, "ratio {ratio}");
    }

    #[test]
    fn separate_sum_drops_degenerate_parts_quietly() {
        let ax = axis(32, 0.01);
        // strictly positive traces: the negative part is degenerate
        let f = Trace::new(ax, vec![1.0; 32]).unwrap();
        let g = Trace::new(ax, (0..32).map(|i| 1.0 + 0.01 * i as f64).collect()).unwrap();
        let spec = MisfitSpec::w2_separate();
        let (v, adj) = trace_misfit(&f, &g, &spec).unwrap();
        assert!(v.is_finite());
        assert_eq!(adj.len(), 32);
    }

    #[test]
    fn by_name_rejects_unknown_and_lists_names() {
        let err = MisfitSpec::by_name("w3-cubic").unwrap_err();
        let msg = format!("{err}");
        for name in MISFIT_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    /// Landscape shape on the two-event signal: many L2 minima, a single
    /// mixed-W2 minimum.
    #[test]
    fn sensitivity_shapes_on_two_ricker() {
        let ax = axis(1251, 0.002);
        let base = two_ricker_signal(10.0, 0.95, 1.25, 1.0, 1.0, ax).unwrap();
        let shifts: Vec<f64> = (-50..=50).map(|k| k as f64 * 6.0 * ax.dt).collect();
        let l2_curve =
            crate::transport::sensitivity_curve(&base, &shifts, &MisfitSpec::l2()).unwrap();
        let l2_values: Vec<f64> = l2_curve.iter().map(|&(_, v)| v).collect();
        assert!(crate::transport::count_local_minima(&l2_values) >= 3);

        let w2_curve =
            crate::transport::sensitivity_curve(&base, &shifts, &MisfitSpec::w2_mixed()).unwrap();
        let w2_values: Vec<f64> = w2_curve.iter().map(|&(_, v)| v).collect();
        assert_eq!(crate::transport::count_local_minima(&w2_values), 1);
        // the single minimum is at s = 0
        let argmin = w2_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(shifts[argmin], 0.0);
        assert_eq!(w2_values[argmin], 0.0);
    }

    /// Symmetric base signals give symmetric mixed-W2 curves.
    #[test]
    fn sensitivity_symmetry_for_symmetric_base() {
        let ax = axis(1001, 0.002);
        let base = ricker(&RickerSpec::new(10.0, 1.0, 1.0).unwrap(), ax).unwrap();
        let shifts: Vec<f64> = (-20..=20).map(|k| k as f64 * 10.0 * ax.dt).collect();
        let curve =
            crate::transport::sensitivity_curve(&base, &shifts, &MisfitSpec::w2_mixed()).unwrap();
        let n = curve.len();
        for k in 0..n / 2 {
            let (s_neg, v_neg) = curve[k];
            let (s_pos, v_pos) = curve[n - 1 - k];
            assert!((s_neg + s_pos).abs() < 1e-12);
            assert!(
                (v_neg - v_pos).abs() <= 1e-10 * v_pos.max(1e-12),
                "s={s_pos}: {v_neg} vs {v_pos}"
            );
        }
    }

    #[test]
    fn sensitivity_zero_shift_is_zero_for_every_misfit() {
        let ax = axis(800, 0.002);
        let base = two_ricker_signal(10.0, 0.5, 0.9, 1.0, 0.6, ax).unwrap();
        for name in MISFIT_NAMES {
            let spec = MisfitSpec::by_name(name).unwrap();
            let curve = crate::transport::sensitivity_curve(&base, &[0.0], &spec).unwrap();
            assert_eq!(curve[0].1, 0.0, "{name}");
        }
    }

    #[test]
    fn sensitivity_rejects_out_of_range_shift() {
        let base = random_trace(11, 100, 0.01);
        assert!(
            crate::transport::sensitivity_curve(&base, &[2.0], &MisfitSpec::l2()).is_err()
        );
    }
}
