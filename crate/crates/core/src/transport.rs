//! 1D optimal-transport distances between densities on a shared time axis.
//!
//! Densities are handled as atoms: node `i` carries mass `w_i * f_i` where
//! `w_i` is the trapezoidal quadrature weight. In one dimension the optimal
//! coupling between two atomic measures is the monotone (north-west-corner)
//! rearrangement of sorted cumulative mass, which this module evaluates in a
//! single merged sweep. The sweep also produces the dual potentials, whose
//! values are the exact derivatives of the squared distance with respect to
//! the masses, so `grad_f` matches finite differences of the implemented
//! functional rather than a continuum approximation.
//!
//! A global 2D transport formulation via the Monge-Ampere equation exists
//! for whole-gather comparisons; this crate deliberately exposes only the
//! trace-by-trace 1D transport that the misfit layer consumes.

use crate::error::{Error, Result};
use crate::misfit::{self, MisfitSpec};
use crate::signal::{resample_guard, trapezoid_integral, Density, TimeAxis, Trace};

/// Cumulative distribution sampled at the axis nodes: nondecreasing,
/// starting at 0 and rescaled so the final value is exactly 1. Values
/// between nodes are linear interpolants.
#[derive(Debug, Clone)]
pub struct CdfProfile {
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

/// Cumulative trapezoidal integral of a density, clamped monotone and
/// rescaled to end exactly at 1.
pub fn cdf(d: &Density) -> CdfProfile {
    let n = d.axis.nt;
    let mut values = vec![0.0; n];
    let mut acc = 0.0;
    for i in 1..n {
        acc += 0.5 * d.axis.dt * (d.values[i - 1] + d.values[i]);
        values[i] = acc.max(values[i - 1]);
    }
    let total = values[n - 1];
    if total > 0.0 {
        for v in &mut values {
            *v /= total;
        }
    }
    values[n - 1] = 1.0;
    CdfProfile {
        axis: d.axis,
        values,
    }
}

/// Left-continuous pseudo-inverse with linear interpolation inside cells;
/// ties resolve to the smallest time attaining F(t) >= y.
pub fn inverse_cdf(profile: &CdfProfile, y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    let f = &profile.values;
    let n = f.len();
    // first index with F[i] >= y
    let mut lo = 0usize;
    let mut hi = n - 1;
    if f[0] >= y {
        return profile.axis.time(0);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if f[mid] >= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // F[lo] < y <= F[hi], so the cell is strictly increasing
    let t0 = profile.axis.time(lo);
    t0 + profile.axis.dt * (y - f[lo]) / (f[hi] - f[lo])
}

/// Output of [`w2_1d`]: the squared distance (time^2 units), the monotone
/// rearrangement map sampled at the nodes, and the derivative of the squared
/// distance with respect to the first density's node values.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub distance_sq: f64,
    pub map: Vec<f64>,
    pub grad_f: Vec<f64>,
}

/// Atom masses of a density: node values times trapezoidal weights, rescaled
/// to sum exactly to 1.
fn atom_masses(d: &Density) -> Vec<f64> {
    let mut m: Vec<f64> = d
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| v * d.axis.weight(i))
        .collect();
    let total: f64 = m.iter().sum();
    if total > 0.0 {
        for v in &mut m {
            *v /= total;
        }
    }
    m
}

/// One monotone-coupling sweep between equal-mass atom lists on a common
/// position grid. Returns the transport cost under `cost(i, j)` and, when
/// requested, the dual potentials of the underlying linear program.
struct Sweep {
    cost_total: f64,
    phi: Vec<f64>,
}

fn monotone_sweep<C: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: C) -> Sweep {
    let n = a.len();
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let (mut i, mut j) = (0usize, 0usize);
    let mut a_rem = a[0];
    let mut b_rem = b[0];
    psi[0] = 0.0;
    phi[0] = cost(0, 0);
    let mut total = 0.0;
    loop {
        let take = a_rem.min(b_rem);
        if take > 0.0 {
            total += take * cost(i, j);
        }
        a_rem -= take;
        b_rem -= take;
        let a_done = a_rem <= 0.0;
        let b_done = b_rem <= 0.0;
        if a_done && b_done {
            // simultaneous exhaustion disconnects the coupling graph;
            // start the next component with a fresh dual offset
            if i + 1 < n && j + 1 < n {
                i += 1;
                j += 1;
                a_rem = a[i];
                b_rem = b[j];
                psi[j] = 0.0;
                phi[i] = cost(i, j);
            } else {
                // trailing atoms carry only round-off mass; extend the chain
                while i + 1 < n {
                    i += 1;
                    phi[i] = cost(i, j) - psi[j];
                }
                while j + 1 < n {
                    j += 1;
                    psi[j] = cost(i, j) - phi[i];
                }
                break;
            }
        } else if a_done {
            if i + 1 >= n {
                break;
            }
            i += 1;
            a_rem = a[i];
            phi[i] = cost(i, j) - psi[j];
        } else {
            if j + 1 >= n {
                break;
            }
            j += 1;
            b_rem = b[j];
            psi[j] = cost(i, j) - phi[i];
        }
    }
    Sweep {
        cost_total: total,
        phi,
    }
}

/// Quadratic Wasserstein distance between two densities on a shared axis.
pub fn w2_1d(f: &Density, g: &Density) -> Result<TransportResult> {
    resample_guard(f.axis, g.axis)?;
    let a = atom_masses(f);
    let b = atom_masses(g);
    let axis = f.axis;
    let sweep = monotone_sweep(&a, &b, |i, j| {
        let d = axis.time(i) - axis.time(j);
        d * d
    });
    // dual potentials differentiate the cost with respect to atom mass;
    // chain through mass = weight * density value
    let grad_f: Vec<f64> = sweep
        .phi
        .iter()
        .enumerate()
        .map(|(i, &p)| p * axis.weight(i))
        .collect();
    // rearrangement map T(t_i) = G^{-1}(F(t_i))
    let ff = cdf(f);
    let gg = cdf(g);
    let map: Vec<f64> = (0..axis.nt)
        .map(|i| inverse_cdf(&gg, ff.values[i]))
        .collect();
    Ok(TransportResult {
        distance_sq: sweep.cost_total,
        map,
        grad_f,
    })
}

/// Wasserstein distance of order `p >= 1` via the quantile representation:
/// the integral over mass quantiles of |F^{-1}(y) - G^{-1}(y)|^p, evaluated
/// exactly on the merged cumulative-mass breakpoints.
pub fn wp_1d(f: &Density, g: &Density, p: f64) -> Result<f64> {
    resample_guard(f.axis, g.axis)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "transport order p must satisfy p >= 1, got {p}"
        )));
    }
    let a = atom_masses(f);
    let b = atom_masses(g);
    let axis = f.axis;
    let n = axis.nt;
    // cumulative masses
    let mut cum_a = Vec::with_capacity(n);
    let mut cum_b = Vec::with_capacity(n);
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..n {
        sa += a[i];
        cum_a.push(sa);
        sb += b[i];
        cum_b.push(sb);
    }
    // walk the merged breakpoints; on each segment both quantile functions
    // are constant, so the integrand is too
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut y = 0.0;
    let mut acc = 0.0;
    while y < 1.0 {
        while ia < n - 1 && cum_a[ia] <= y {
            ia += 1;
        }
        while ib < n - 1 && cum_b[ib] <= y {
            ib += 1;
        }
        let next = cum_a[ia].min(cum_b[ib]).min(1.0);
        let len = (next - y).max(0.0);
        if len > 0.0 {
            let d = (axis.time(ia) - axis.time(ib)).abs();
            acc += len * d.powf(p);
        }
        if next <= y {
            break;
        }
        y = next;
    }
    Ok(acc.powf(1.0 / p))
}

/// Where the mass of each labeled component went under the signed-W1
/// recombination.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PairingSummary {
    /// Total mass of the positive part of the synthetic trace.
    pub f_plus_mass: f64,
    /// Fraction of that mass coupled to the negative part of the same trace.
    pub f_plus_to_f_minus: f64,
    /// Fraction coupled to the positive part of the observed trace.
    pub f_plus_to_g_plus: f64,
}

#[derive(Debug, Clone)]
pub struct W1Diagnostic {
    pub value: f64,
    pub pairing: PairingSummary,
}

/// Signed-measure extension of W1: recombine the parts as
/// rho1 = f+ + g-, rho2 = f- + g+ and evaluate W1(rho1, rho2) through the
/// cumulative-distribution formula. The pairing report quantifies how much
/// of f+ the optimal coupling sends to f- instead of g+ — transport
/// compensating within one signal instead of mapping signal to signal.
pub fn w1_signed_diagnostic(f: &Trace, g: &Trace) -> Result<W1Diagnostic> {
    resample_guard(f.axis, g.axis)?;
    let mass_f = f.integral();
    let mass_g = g.integral();
    let scale = f.max_abs().max(g.max_abs()).max(1e-300);
    if (mass_f - mass_g).abs() > 1e-8 * scale * f.axis.duration() {
        return Err(Error::Domain(format!(
            "signed W1 needs equal trace masses, got {mass_f:.6e} vs {mass_g:.6e}"
        )));
    }
    let axis = f.axis;
    let n = axis.nt;
    let fp: Vec<f64> = f.samples.iter().map(|&v| v.max(0.0)).collect();
    let fm: Vec<f64> = f.samples.iter().map(|&v| (-v).max(0.0)).collect();
    let gp: Vec<f64> = g.samples.iter().map(|&v| v.max(0.0)).collect();
    let gm: Vec<f64> = g.samples.iter().map(|&v| (-v).max(0.0)).collect();
    let rho1: Vec<f64> = fp.iter().zip(&gm).map(|(a, b)| a + b).collect();
    let rho2: Vec<f64> = fm.iter().zip(&gp).map(|(a, b)| a + b).collect();

    // 1D formula: integral of |F_rho1 - F_rho2| over time (unnormalized CDFs)
    let cum = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * axis.dt * (v[i - 1] + v[i]);
        }
        out
    };
    let c1 = cum(&rho1);
    let c2 = cum(&rho2);
    let diff: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| (a - b).abs()).collect();
    let value = trapezoid_integral(&diff, axis.dt);

    // monotone coupling between the recombined atom lists, with labels
    let atoms1: Vec<f64> = rho1
        .iter()
        .enumerate()
        .map(|(i, &v)| v * axis.weight(i))
        .collect();
    let atoms2: Vec<f64> = rho2
        .iter()
        .enumerate()
        .map(|(i, &v)| v * axis.weight(i))
        .collect();
    let total1: f64 = atoms1.iter().sum();
    let total2: f64 = atoms2.iter().sum();
    let f_plus_mass: f64 = fp
        .iter()
        .enumerate()
        .map(|(i, &v)| v * axis.weight(i))
        .sum();
    let mut to_f_minus = 0.0;
    let mut to_g_plus = 0.0;
    if total1 > 0.0 && total2 > 0.0 && f_plus_mass > 0.0 {
        let norm1: Vec<f64> = atoms1.iter().map(|&v| v / total1).collect();
        let norm2: Vec<f64> = atoms2.iter().map(|&v| v / total2).collect();
        let (mut i, mut j) = (0usize, 0usize);
        let mut a_rem = norm1[0];
        let mut b_rem = norm2[0];
        loop {
            let take = a_rem.min(b_rem);
            if take > 0.0 && rho1[i] > 0.0 && rho2[j] > 0.0 {
                // atom mass splits proportionally between its labels
                let from_fp = fp[i] / rho1[i];
                let to_fm = fm[j] / rho2[j];
                let to_gp = gp[j] / rho2[j];
                let mass = take * total1;
                to_f_minus += mass * from_fp * to_fm;
                to_g_plus += mass * from_fp * to_gp;
            }
            a_rem -= take;
            b_rem -= take;
            if a_rem <= 0.0 && i + 1 < n {
                i += 1;
                a_rem = norm1[i];
            } else if b_rem <= 0.0 && j + 1 < n {
                j += 1;
                b_rem = norm2[j];
            } else if a_rem <= 0.0 || b_rem <= 0.0 {
                break;
            }
        }
    }
    let denom = f_plus_mass.max(1e-300);
    Ok(W1Diagnostic {
        value,
        pairing: PairingSummary {
            f_plus_mass,
            f_plus_to_f_minus: to_f_minus / denom,
            f_plus_to_g_plus: to_g_plus / denom,
        },
    })
}

/// Evaluate a misfit between a base signal and its shifted copies; the
/// landscape over shifts is the standard probe for cycle skipping. Each
/// shifted signal is renormalized independently.
pub fn sensitivity_curve(
    base: &Trace,
    shifts: &[f64],
    spec: &MisfitSpec,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(shifts.len());
    for &s in shifts {
        let shifted = base.shifted(s)?;
        let value = misfit::trace_misfit_value(&shifted, base, spec)?;
        out.push((s, value));
    }
    Ok(out)
}

/// Strict local minima of a sampled curve, counting the endpoints only when
/// they strictly dominate their single neighbor. A tolerance proportional to
/// the curve range guards against counting flat-line noise.
pub fn count_local_minima(values: &[f64]) -> usize {
    if values.len() < 3 {
        return 0;
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let tol = 1e-9 * (max - min).max(f64::MIN_POSITIVE);
    let mut count = 0;
    for i in 1..values.len() - 1 {
        if values[i] < values[i - 1] - tol && values[i] < values[i + 1] - tol {
            count += 1;
        }
    }
    count
}

/// True when all second differences stay above `-tol`.
pub fn is_convex_within(values: &[f64], tol: f64) -> bool {
    values
        .windows(3)
        .all(|w| w[2] - 2.0 * w[1] + w[0] >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TimeAxis;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn axis(nt: usize, dt: f64) -> TimeAxis {
        TimeAxis::new(nt, dt).unwrap()
    }

    fn random_density(seed: u64, nt: usize, dt: f64) -> Density {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..nt).map(|_| rng.gen_range(0.05..1.0)).collect();
        Density::from_unnormalized(axis(nt, dt), v).unwrap()
    }

    fn bump_density(ax: TimeAxis, center: f64, width: f64) -> Density {
        let v: Vec<f64> = ax
            .times()
            .map(|t| (-((t - center) / width).powi(2)).exp())
            .collect();
        Density::from_unnormalized(ax, v).unwrap()
    }

    #[test]
    fn cdf_of_uniform_is_linear() {
        let ax = axis(11, 0.1);
        let d = Density::uniform(ax);
        let profile = cdf(&d);
        for (i, t) in ax.times().enumerate() {
            assert!((profile.values[i] - t / ax.duration()).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_of_front_loaded_density_jumps_early() {
        let ax = axis(20, 0.05);
        let mut v = vec![0.0; 20];
        v[0] = 1.0;
        let d = Density::from_unnormalized(ax, v).unwrap();
        let profile = cdf(&d);
        assert!(profile.values[1] > 0.99);
        assert_eq!(profile.values[19], 1.0);
    }

    #[test]
    fn cdf_matches_prefix_sum_oracle() {
        let d = random_density(1, 64, 0.01);
        let profile = cdf(&d);
        // independent prefix-sum oracle
        let mut acc = 0.0;
        let mut oracle = vec![0.0];
        for i in 1..64 {
            acc += 0.5 * d.axis.dt * (d.values[i - 1] + d.values[i]);
            oracle.push(acc);
        }
        let total = oracle[63];
        for i in 0..64 {
            assert!((profile.values[i] - oracle[i] / total).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_cdf_of_uniform() {
        let ax = axis(101, 0.01);
        let profile = cdf(&Density::uniform(ax));
        assert!((inverse_cdf(&profile, 0.5) - 0.5).abs() < 1e-12);
        assert_eq!(inverse_cdf(&profile, 0.0), 0.0);
        assert!((inverse_cdf(&profile, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_round_trips_at_increasing_nodes() {
        let d = random_density(2, 50, 0.02);
        let profile = cdf(&d);
        for i in 1..49 {
            let t = d.axis.time(i);
            let y = profile.values[i];
            let back = inverse_cdf(&profile, y);
            assert!(
                (back - t).abs() < d.axis.dt / 100.0,
                "node {i}: {back} vs {t}"
            );
        }
    }

    #[test]
    fn w2_identical_densities_give_zero_and_identity_map() {
        let d = random_density(3, 40, 0.025);
        let r = w2_1d(&d, &d).unwrap();
        assert_eq!(r.distance_sq, 0.0);
        for (i, &m) in r.map.iter().enumerate() {
            assert!((m - d.axis.time(i)).abs() < 1e-9);
        }
        // at the minimum the symmetric subgradient vanishes
        assert!(r.grad_f.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn w2_between_narrow_bumps_costs_squared_separation() {
        let ax = axis(801, 0.005);
        let f = bump_density(ax, 1.0, 0.02);
        let g = bump_density(ax, 2.4, 0.02);
        let r = w2_1d(&f, &g).unwrap();
        let expect = (2.4f64 - 1.0).powi(2);
        assert!(
            (r.distance_sq - expect).abs() < 0.02 * expect,
            "{} vs {expect}",
            r.distance_sq
        );
    }

    /// Brute-force oracle: build the monotone coupling explicitly, then
    /// certify LP optimality through strong duality, checking dual
    /// feasibility over every atom pair.
    fn ot_oracle_certified(a: &[f64], b: &[f64], ts: &[f64]) -> f64 {
        let n = a.len();
        let mut coupling = vec![vec![0.0; n]; n];
        let (mut i, mut j) = (0, 0);
        let (mut ar, mut br) = (a[0], b[0]);
        loop {
            let take = ar.min(br);
            coupling[i][j] += take;
            ar -= take;
            br -= take;
            if ar <= 0.0 && i + 1 < n {
                i += 1;
                ar = a[i];
            } else if br <= 0.0 && j + 1 < n {
                j += 1;
                br = b[j];
            } else if ar <= 0.0 || br <= 0.0 {
                break;
            }
        }
        // marginals
        for k in 0..n {
            let row: f64 = coupling[k].iter().sum();
            assert!((row - a[k]).abs() < 1e-12);
            let col: f64 = (0..n).map(|r| coupling[r][k]).sum();
            assert!((col - b[k]).abs() < 1e-12);
        }
        let cost = |i: usize, j: usize| (ts[i] - ts[j]).powi(2);
        let primal: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| coupling[i][j] * cost(i, j))
            .sum();
        // complementary-slackness duals from the support chain
        let mut phi = vec![f64::NAN; n];
        let mut psi = vec![f64::NAN; n];
        psi[0] = 0.0;
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if coupling[i][j] > 1e-15 {
                        if phi[i].is_nan() && !psi[j].is_nan() {
                            phi[i] = cost(i, j) - psi[j];
                            changed = true;
                        }
                        if psi[j].is_nan() && !phi[i].is_nan() {
                            psi[j] = cost(i, j) - phi[i];
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // disconnected components (exhausted simultaneously): anchor each at 0
        for j in 0..n {
            if psi[j].is_nan() {
                psi[j] = 0.0;
                loop {
                    let mut changed = false;
                    for i2 in 0..n {
                        for j2 in 0..n {
                            if coupling[i2][j2] > 1e-15 {
                                if phi[i2].is_nan() && !psi[j2].is_nan() {
                                    phi[i2] = cost(i2, j2) - psi[j2];
                                    changed = true;
                                }
                                if psi[j2].is_nan() && !phi[i2].is_nan() {
                                    psi[j2] = cost(i2, j2) - phi[i2];
                                    changed = true;
                                }
                            }
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
        }
        // dual feasibility over all pairs certifies optimality of the
        // monotone coupling for this instance
        let mut dual = 0.0;
        for i in 0..n {
            if phi[i].is_nan() {
                phi[i] = (0..n)
                    .map(|j| cost(i, j) - psi[j])
                    .fold(f64::INFINITY, f64::min);
            }
            dual += phi[i] * a[i];
        }
        for j in 0..n {
            dual += psi[j] * b[j];
            for i in 0..n {
                assert!(
                    phi[i] + psi[j] <= cost(i, j) + 1e-9,
                    "dual infeasible at ({i},{j})"
                );
            }
        }
        assert!((dual - primal).abs() < 1e-9, "duality gap {}", dual - primal);
        primal
    }

    #[test]
    fn w2_matches_certified_lp_oracle_on_random_histograms() {
        for seed in 0..30 {
            let f = random_density(100 + seed, 12, 1.0 / 11.0);
            let g = random_density(200 + seed, 12, 1.0 / 11.0);
            let r = w2_1d(&f, &g).unwrap();
            let a = super::atom_masses(&f);
            let b = super::atom_masses(&g);
            let ts: Vec<f64> = f.axis.times().collect();
            let oracle = ot_oracle_certified(&a, &b, &ts);
            assert!(
                (r.distance_sq - oracle).abs() < 1e-8,
                "seed {seed}: {} vs {oracle}",
                r.distance_sq
            );
        }
    }

    #[test]
    fn wp_with_p2_cross_checks_the_coupling_route() {
        for seed in 0..10 {
            let f = random_density(300 + seed, 48, 0.01);
            let g = random_density(400 + seed, 48, 0.01);
            let via_coupling = w2_1d(&f, &g).unwrap().distance_sq.sqrt();
            let via_quantiles = wp_1d(&f, &g, 2.0).unwrap();
            assert!(
                (via_coupling - via_quantiles).abs() < 1e-6 * via_coupling.max(1e-12),
                "{via_coupling} vs {via_quantiles}"
            );
        }
    }

    #[test]
    fn wp_p1_of_shifted_uniform_blocks_is_the_shift() {
        let ax = axis(201, 0.005);
        let block = |start: usize| {
            let mut v = vec![0.0; 201];
            for x in v.iter_mut().skip(start).take(60) {
                *x = 1.0;
            }
            Density::from_unnormalized(ax, v).unwrap()
        };
        let f = block(20);
        let g = block(60); // shift of 40 samples = 0.2 s
        let w1 = wp_1d(&f, &g, 1.0).unwrap();
        assert!((w1 - 0.2).abs() < 1e-9, "{w1}");
    }

    #[test]
    fn wp_zero_for_equal_inputs_and_rejects_small_p() {
        let d = random_density(5, 30, 0.01);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(wp_1d(&d, &d, p).unwrap(), 0.0);
        }
        assert!(wp_1d(&d, &d, 0.5).is_err());
    }

    #[test]
    fn w2_is_symmetric() {
        for seed in 0..5 {
            let f = random_density(600 + seed, 40, 0.01);
            let g = random_density(700 + seed, 40, 0.01);
            let ab = w2_1d(&f, &g).unwrap().distance_sq;
            let ba = w2_1d(&g, &f).unwrap().distance_sq;
            assert!((ab - ba).abs() < 1e-10 * ab.max(1.0));
        }
    }

    #[test]
    fn w2_square_root_obeys_triangle_inequality() {
        for seed in 0..20 {
            let a = random_density(800 + seed, 24, 0.02);
            let b = random_density(900 + seed, 24, 0.02);
            let c = random_density(1000 + seed, 24, 0.02);
            let dab = w2_1d(&a, &b).unwrap().distance_sq.sqrt();
            let dbc = w2_1d(&b, &c).unwrap().distance_sq.sqrt();
            let dac = w2_1d(&a, &c).unwrap().distance_sq.sqrt();
            assert!(dac <= dab + dbc + 1e-8);
        }
    }

    #[test]
    fn w2_map_is_monotone() {
        let f = random_density(6, 64, 0.01);
        let g = random_density(7, 64, 0.01);
        let r = w2_1d(&f, &g).unwrap();
        for w in r.map.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    /// grad_f against central finite differences in mass-preserving
    /// directions.
    #[test]
    fn w2_gradient_matches_finite_differences() {
        let f = random_density(8, 32, 0.01);
        let g = random_density(9, 32, 0.01);
        let base = w2_1d(&f, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 1e-7;
        for _ in 0..5 {
            // mass-preserving direction: zero-weighted-sum perturbation
            let raw: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let wsum: f64 = raw
                .iter()
                .enumerate()
                .map(|(i, &v)| v * f.axis.weight(i))
                .sum();
            let wtot: f64 = (0..32).map(|i| f.axis.weight(i)).sum();
            let dir: Vec<f64> = raw.iter().map(|&v| v - wsum / wtot).collect();
            let perturbed = |sign: f64| {
                let vals: Vec<f64> = f
                    .values
                    .iter()
                    .zip(&dir)
                    .map(|(&v, &d)| v + sign * h * d)
                    .collect();
                // direct construction: mass unchanged to first order
                Density {
                    axis: f.axis,
                    values: vals,
                }
            };
            let up = w2_1d(&perturbed(1.0), &g).unwrap().distance_sq;
            let dn = w2_1d(&perturbed(-1.0), &g).unwrap().distance_sq;
            let fd = (up - dn) / (2.0 * h);
            let predicted: f64 = base
                .grad_f
                .iter()
                .zip(&dir)
                .map(|(gr, d)| gr * d)
                .sum();
            assert!(
                (fd - predicted).abs() <= 1e-6 * predicted.abs().max(1e-6),
                "{fd} vs {predicted}"
            );
        }
    }

    /// On-grid translations of a compact density cost exactly s^2.
    #[test]
    fn w2_translation_identity() {
        let ax = axis(400, 0.0025);
        let center = 0.5;
        let values: Vec<f64> = ax
            .times()
            .map(|t| (-((t - center) / 0.03).powi(2)).exp())
            .collect();
        let base = Density::from_unnormalized(ax, values.clone()).unwrap();
        let mut curve = Vec::new();
        for k in (0..=40).step_by(4) {
            let s = k as f64 * ax.dt;
            let mut shifted = vec![0.0; 400];
            for i in k..400 {
                shifted[i] = values[i - k];
            }
            let d = Density::from_unnormalized(ax, shifted).unwrap();
            let w = w2_1d(&d, &base).unwrap().distance_sq;
            assert!((w - s * s).abs() <= 2e-2 * (s * s).max(1e-12), "s={s}: {w}");
            curve.push(w);
        }
        let max = curve.iter().cloned().fold(0.0f64, f64::max);
        assert!(is_convex_within(&curve, 1e-6 * max));
    }

    #[test]
    fn w1_signed_zero_for_identical_traces() {
        let ax = axis(64, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Trace::new(ax, samples).unwrap();
        let d = w1_signed_diagnostic(&f, &f).unwrap();
        assert!(d.value < 1e-14);
    }

    #[test]
    fn w1_signed_rejects_unequal_masses() {
        let ax = axis(64, 0.01);
        let f = Trace::new(ax, vec![1.0; 64]).unwrap();
        let g = Trace::new(ax, vec![0.5; 64]).unwrap();
        assert!(w1_signed_diagnostic(&f, &g).is_err());
    }

    #[test]
    fn w1_signed_on_disjoint_positive_traces_reduces_to_plain_w1() {
        let ax = axis(300, 0.005);
        let bump = |c: f64| -> Vec<f64> {
            ax.times()
                .map(|t| (-((t - c) / 0.04).powi(2)).exp())
                .collect()
        };
        let f = Trace::new(ax, bump(0.4)).unwrap();
        let g = Trace::new(ax, bump(1.0)).unwrap();
        let d = w1_signed_diagnostic(&f, &g).unwrap();
        // negative parts vanish, so the diagnostic is W1 of equal-mass
        // nonnegative bumps: translation cost = mass * distance
        let mass = f.integral();
        assert!(
            (d.value - mass * 0.6).abs() < 0.02 * mass * 0.6,
            "{} vs {}",
            d.value,
            mass * 0.6
        );
        assert!(d.pairing.f_plus_to_f_minus.abs() < 1e-9);
        assert!((d.pairing.f_plus_to_g_plus - 1.0).abs() < 1e-9);
    }

    /// Adjacent +/- lobes far from the observed copy: the coupling prefers
    /// cancelling within the signal.
    #[test]
    fn w1_signed_reports_self_cancellation() {
        let ax = axis(500, 0.004);
        let lobe = |c: f64, sign: f64| -> Vec<f64> {
            ax.times()
                .map(|t| sign * (-((t - c) / 0.03).powi(2)).exp())
                .collect()
        };
        let add = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        };
        let f = Trace::new(ax, add(lobe(0.35, 1.0), lobe(0.45, -1.0))).unwrap();
        let g = Trace::new(ax, add(lobe(1.45, 1.0), lobe(1.55, -1.0))).unwrap();
        let d = w1_signed_diagnostic(&f, &g).unwrap();
        assert!(
            d.pairing.f_plus_to_f_minus > 0.5,
            "expected self-cancellation, got {:?}",
            d.pairing
        );
    }

    #[test]
    fn w1_signed_is_symmetric_under_swap() {
        let ax = axis(128, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let raw: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = trapezoid_integral(&raw, ax.dt) / ax.duration();
        let f = Trace::new(ax, raw.iter().map(|v| v - mean).collect()).unwrap();
        let raw2: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean2 = trapezoid_integral(&raw2, ax.dt) / ax.duration();
        let g = Trace::new(ax, raw2.iter().map(|v| v - mean2).collect()).unwrap();
        let ab = w1_signed_diagnostic(&f, &g).unwrap().value;
        let ba = w1_signed_diagnostic(&g, &f).unwrap().value;
        assert!((ab - ba).abs() < 1e-12 * ab.max(1.0));
    }

    #[test]
    fn local_minima_counter() {
        assert_eq!(count_local_minima(&[3.0, 1.0, 2.0, 0.5, 2.0]), 2);
        assert_eq!(count_local_minima(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_local_minima(&[2.0, 1.0, 1.0 + 1e-15, 2.0]), 0);
    }
}
