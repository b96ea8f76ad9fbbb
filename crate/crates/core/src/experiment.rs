//! Benchmark experiments: the Camembert disk model and a desk-scale
//! layered profile with surface acquisition.
//!
//! The Camembert run synthesizes observed data from the true model with the
//! same solver used for inversion, isolating the behavior of the misfit
//! functionals from data and modeling errors, and records the artifacts the
//! comparison needs: first-iteration gradients per misfit, model snapshots,
//! and model-error trajectories.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, VelocityModel};
use crate::inversion::{run_inversion, InversionConfig, Shot};
use crate::misfit::MisfitSpec;
use crate::signal::{ShotGather, TimeAxis};
use crate::solver::{forward_gather, GradientField, SolverConfig};
use crate::wavelet::{ricker, RickerSpec};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// Circular velocity anomaly in a homogeneous background.
#[derive(Debug, Clone, Copy)]
pub struct CamembertSpec {
    pub grid: Grid2D,
    pub background_velocity: f64,
    pub anomaly_velocity: f64,
    pub center: (f64, f64),
    pub radius: f64,
}

impl CamembertSpec {
    /// Desk-scale default: 100x100 cells at 10 m, 2000 m/s background with
    /// a +10% disk of radius 250 m in the center.
    pub fn desk_default() -> Self {
        let grid = Grid2D::new(100, 100, 10.0, 10.0, 0.0, 0.0).unwrap();
        let (w, d) = grid.extent();
        Self {
            grid,
            background_velocity: 2000.0,
            anomaly_velocity: 2200.0,
            center: (w / 2.0, d / 2.0),
            radius: 250.0,
        }
    }

    /// Smaller fixture with the same proportions, for tests.
    pub fn lite(n: usize) -> Self {
        let grid = Grid2D::new(n, n, 10.0, 10.0, 0.0, 0.0).unwrap();
        let (w, d) = grid.extent();
        Self {
            grid,
            background_velocity: 2000.0,
            anomaly_velocity: 2200.0,
            center: (w / 2.0, d / 2.0),
            radius: 0.25 * w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, d) = self.grid.extent();
        if !(self.radius > 0.0) || self.radius >= 0.5 * w.min(d) {
            return Err(Error::Config(format!(
                "disk radius {} m must be positive and below half the domain extent",
                self.radius
            )));
        }
        if !(self.background_velocity > 0.0) || !(self.anomaly_velocity > 0.0) {
            return Err(Error::Config("velocities must be positive".into()));
        }
        Ok(())
    }

    pub fn true_model(&self) -> Result<VelocityModel> {
        self.validate()?;
        let g = self.grid;
        let c: Vec<f64> = (0..g.len())
            .map(|k| {
                let (x, z) = g.node_position(k / g.nx, k % g.nx);
                let r2 = (x - self.center.0).powi(2) + (z - self.center.1).powi(2);
                if r2 <= self.radius * self.radius {
                    self.anomaly_velocity
                } else {
                    self.background_velocity
                }
            })
            .collect();
        VelocityModel::from_velocity(g, &c)
    }

    /// The featureless homogeneous start.
    pub fn initial_model(&self) -> Result<VelocityModel> {
        self.validate()?;
        VelocityModel::homogeneous(self.grid, self.background_velocity)
    }

    /// True where a node lies inside the disk.
    pub fn disk_mask(&self) -> Vec<bool> {
        let g = self.grid;
        (0..g.len())
            .map(|k| {
                let (x, z) = g.node_position(k / g.nx, k % g.nx);
                (x - self.center.0).powi(2) + (z - self.center.1).powi(2)
                    <= self.radius * self.radius
            })
            .collect()
    }
}

/// Evenly spaced surface acquisition: sources and receivers along a shallow
/// row of nodes, shared receiver spread for every shot.
pub fn surface_acquisition(
    grid: Grid2D,
    n_sources: usize,
    n_receivers: usize,
    depth_cells: usize,
    wavelet_spec: &RickerSpec,
    axis: TimeAxis,
) -> Result<Vec<Shot>> {
    if n_sources == 0 || n_receivers == 0 {
        return Err(Error::Config("need at least one source and receiver".into()));
    }
    let z = grid.z0 + depth_cells as f64 * grid.dz;
    let (width, _) = grid.extent();
    let margin = 2.0 * grid.dx;
    let usable = width - 2.0 * margin;
    let place = |i: usize, n: usize| {
        if n == 1 {
            grid.x0 + margin + usable / 2.0
        } else {
            grid.x0 + margin + usable * i as f64 / (n - 1) as f64
        }
    };
    let receivers: Vec<(f64, f64)> = (0..n_receivers)
        .map(|i| (place(i, n_receivers), z))
        .collect();
    let wavelet = ricker(wavelet_spec, axis)?;
    Ok((0..n_sources)
        .map(|i| Shot {
            source_position: (place(i, n_sources), z),
            wavelet: wavelet.clone(),
            receiver_positions: receivers.clone(),
        })
        .collect())
}

/// Root-mean-square velocity error between two models on one grid.
pub fn model_rmse(a: &VelocityModel, b: &VelocityModel) -> f64 {
    let ca = a.velocity();
    let cb = b.velocity();
    let n = ca.len() as f64;
    (ca.iter()
        .zip(&cb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Pearson correlation between two fields restricted to masked nodes.
pub fn masked_correlation(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| (*x, *y))
        .collect();
    let n = pairs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in pairs {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentOptions {
    pub iterations: usize,
    pub axis: TimeAxis,
    pub n_sources: usize,
    pub n_receivers: usize,
    pub peak_frequency: f64,
    pub solver: SolverConfig,
    pub velocity_margin: f64,
}

impl ExperimentOptions {
    /// Acquisition and run length for a Camembert model: eight sources and
    /// 96 receivers near the surface, 10 Hz wavelet, one second of data.
    pub fn camembert_default(spec: &CamembertSpec) -> Self {
        let dt = 0.002;
        let nt = (1.0 / dt) as usize + 1;
        Self {
            iterations: 50,
            axis: TimeAxis::new(nt, dt).unwrap(),
            n_sources: 8,
            n_receivers: 96,
            peak_frequency: 10.0,
            solver: SolverConfig::default(),
            velocity_margin: 0.3 * spec.background_velocity.max(spec.anomaly_velocity),
        }
    }
}

/// One misfit configuration's outcome.
#[derive(Debug, Clone)]
pub struct MisfitOutcome {
    pub name: String,
    pub misfit_history: Vec<f64>,
    pub rmse_history: Vec<f64>,
    pub first_gradient: GradientField,
    pub final_model: VelocityModel,
    pub stagnated: bool,
}

#[derive(Debug, Clone)]
pub struct CamembertReport {
    pub true_model: VelocityModel,
    pub initial_model: VelocityModel,
    pub initial_rmse: f64,
    pub outcomes: Vec<MisfitOutcome>,
}

/// Synthesize observed data for every shot of an acquisition.
pub fn synthesize_observed(
    model: &VelocityModel,
    shots: &[Shot],
    solver: &SolverConfig,
) -> Result<Vec<ShotGather>> {
    let gathers: Vec<Result<ShotGather>> = shots
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            forward_gather(model, &s.wavelet, s.source_position, &s.receiver_positions, solver)
                .map_err(|e| e.for_shot(i))
        })
        .collect();
    gathers.into_iter().collect()
}

/// Run the disk-anomaly experiment for each misfit configuration.
pub fn run_camembert(
    spec: &CamembertSpec,
    misfits: &[MisfitSpec],
    opts: &ExperimentOptions,
) -> Result<CamembertReport> {
    spec.validate()?;
    if spec.grid.nx > 120 || spec.grid.nz > 120 {
        return Err(Error::Config(
            "camembert experiments are desk-scale: grid at most 120x120".into(),
        ));
    }
    let true_model = spec.true_model()?;
    let initial = spec.initial_model()?;
    let wavelet_spec = RickerSpec::with_standard_delay(opts.peak_frequency, 1.0)?;
    let shots = surface_acquisition(
        spec.grid,
        opts.n_sources,
        opts.n_receivers,
        2,
        &wavelet_spec,
        opts.axis,
    )?;
    let observed = synthesize_observed(&true_model, &shots, &opts.solver)?;

    let vmin = spec.background_velocity.min(spec.anomaly_velocity) - opts.velocity_margin;
    let vmax = spec.background_velocity.max(spec.anomaly_velocity) + opts.velocity_margin;
    let initial_rmse = model_rmse(&initial, &true_model);

    let mut outcomes = Vec::new();
    for misfit in misfits {
        let mut config = InversionConfig::new(*misfit, opts.iterations, (vmin.max(100.0), vmax))?;
        config.solver = opts.solver;
        let mut rmse_history = vec![initial_rmse];
        let run = run_inversion(initial.clone(), &shots, &observed, &config, |rec| {
            rmse_history.push(model_rmse(rec.model, &true_model));
        })?;
        outcomes.push(MisfitOutcome {
            name: misfit.name().to_string(),
            misfit_history: run.misfit_history,
            rmse_history,
            first_gradient: run.first_gradient,
            final_model: run.final_model,
            stagnated: run.stagnated,
        });
    }
    Ok(CamembertReport {
        true_model,
        initial_model: initial,
        initial_rmse,
        outcomes,
    })
}

#[derive(Serialize)]
struct OutcomeSummary<'a> {
    name: &'a str,
    final_misfit: f64,
    final_rmse: f64,
    iterations: usize,
    stagnated: bool,
}

#[derive(Serialize)]
struct ReportSummary<'a> {
    initial_rmse: f64,
    gradient_correlation_in_disk: Option<f64>,
    outcomes: Vec<OutcomeSummary<'a>>,
}

/// Write the report artifacts: true/initial models, per-misfit final model,
/// first-iteration gradient grids, misfit/RMSE history CSVs, and a summary
/// JSON with the in-disk gradient correlation of the first two outcomes.
pub fn write_camembert_report(
    report: &CamembertReport,
    spec: &CamembertSpec,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::io::write_model(&dir.join("true_model.bin"), &report.true_model)?;
    crate::io::write_model(&dir.join("initial_model.bin"), &report.initial_model)?;
    for outcome in &report.outcomes {
        let tag = outcome.name.replace('/', "_");
        crate::io::write_model(
            &dir.join(format!("final_model_{tag}.bin")),
            &outcome.final_model,
        )?;
        // gradients ride in the same grid container scaled to velocities of
        // magnitude ~1 so the f32 format does not underflow
        let gmax = outcome
            .first_gradient
            .values
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let scaled: Vec<f64> = outcome
            .first_gradient
            .values
            .iter()
            .map(|&v| 2.0 + v / gmax)
            .collect();
        let carrier = VelocityModel::from_velocity(outcome.first_gradient.grid, &scaled)?;
        crate::io::write_model(&dir.join(format!("gradient_iter_1_{tag}.bin")), &carrier)?;
        let rows: Vec<(f64, f64)> = outcome
            .misfit_history
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        crate::io::write_curve_csv(&dir.join(format!("misfit_history_{tag}.csv")), &rows)?;
        let rows: Vec<(f64, f64)> = outcome
            .rmse_history
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        crate::io::write_curve_csv(&dir.join(format!("rmse_history_{tag}.csv")), &rows)?;
    }
    let correlation = if report.outcomes.len() >= 2 {
        Some(masked_correlation(
            &report.outcomes[0].first_gradient.values,
            &report.outcomes[1].first_gradient.values,
            &spec.disk_mask(),
        ))
    } else {
        None
    };
    let summary = ReportSummary {
        initial_rmse: report.initial_rmse,
        gradient_correlation_in_disk: correlation,
        outcomes: report
            .outcomes
            .iter()
            .map(|o| OutcomeSummary {
                name: &o.name,
                final_misfit: *o.misfit_history.last().unwrap_or(&f64::NAN),
                final_rmse: *o.rmse_history.last().unwrap_or(&f64::NAN),
                iterations: o.misfit_history.len(),
                stagnated: o.stagnated,
            })
            .collect(),
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

/// Desk-scale layered velocity profile with mild lateral structure and a
/// surface acquisition, standing in for full-basin benchmarks: 60x180 cells,
/// 11 sources, 15 Hz wavelet.
pub fn layered_model(grid: Grid2D) -> Result<VelocityModel> {
    let (_, depth) = grid.extent();
    let c: Vec<f64> = (0..grid.len())
        .map(|k| {
            let iz = k / grid.nx;
            let ix = k % grid.nx;
            let z = iz as f64 * grid.dz / depth;
            let lateral = 60.0 * ((ix as f64 * 0.07).sin() + 0.4 * (ix as f64 * 0.023).cos());
            let step = if z < 0.25 {
                1800.0
            } else if z < 0.5 {
                2150.0
            } else if z < 0.75 {
                2550.0
            } else {
                3000.0
            };
            step + 250.0 * z + lateral * z
        })
        .collect();
    VelocityModel::from_velocity(grid, &c)
}

/// Gaussian-smoothed copy of a model: the standard smooth starting point.
pub fn smoothed_model(model: &VelocityModel, sigma_cells: f64) -> Result<VelocityModel> {
    let g = model.grid;
    let c = model.velocity();
    let radius = (3.0 * sigma_cells).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-0.5 * (d as f64 / sigma_cells).powi(2)).exp())
        .collect();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for iz in 0..g.nz as i64 {
            for ix in 0..g.nx as i64 {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for (wi, d) in weights.iter().zip(-radius..=radius) {
                    let (jz, jx) = if horizontal { (iz, ix + d) } else { (iz + d, ix) };
                    if jz >= 0 && jz < g.nz as i64 && jx >= 0 && jx < g.nx as i64 {
                        acc += wi * src[(jz as usize) * g.nx + jx as usize];
                        wsum += wi;
                    }
                }
                out[(iz as usize) * g.nx + ix as usize] = acc / wsum;
            }
        }
        out
    };
    let smooth = pass(&pass(&c, true), false);
    VelocityModel::from_velocity(g, &smooth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misfit::MisfitSpec;
    use crate::normalization::Kind;

    #[test]
    fn camembert_models_have_the_right_structure() {
        let spec = CamembertSpec::lite(40);
        let true_model = spec.true_model().unwrap();
        let initial = spec.initial_model().unwrap();
        let mask = spec.disk_mask();
        let c = true_model.velocity();
        for (k, &inside) in mask.iter().enumerate() {
            if inside {
                assert!((c[k] - 2200.0).abs() < 1e-9);
            } else {
                assert!((c[k] - 2000.0).abs() < 1e-9);
            }
        }
        assert!(initial.velocity().iter().all(|&v| (v - 2000.0).abs() < 1e-9));
        assert!(model_rmse(&true_model, &initial) > 0.0);
    }

    #[test]
    fn camembert_rejects_oversized_disks_and_grids() {
        let mut spec = CamembertSpec::lite(40);
        spec.radius = 500.0;
        assert!(spec.validate().is_err());
        let big = Grid2D::new(150, 150, 10.0, 10.0, 0.0, 0.0).unwrap();
        let spec = CamembertSpec {
            grid: big,
            ..CamembertSpec::lite(40)
        };
        let opts = ExperimentOptions::camembert_default(&spec);
        assert!(run_camembert(&spec, &[MisfitSpec::l2()], &opts).is_err());
    }

    /// Zero-anomaly spec: observed data equal the initial synthetics, so
    /// the run converges at iteration zero with zero misfit.
    #[test]
    fn zero_anomaly_converges_immediately() {
        let mut spec = CamembertSpec::lite(32);
        spec.anomaly_velocity = spec.background_velocity;
        let mut opts = ExperimentOptions::camembert_default(&spec);
        opts.axis = TimeAxis::new(151, 0.002).unwrap();
        opts.n_sources = 2;
        opts.n_receivers = 12;
        opts.iterations = 3;
        let report = run_camembert(&spec, &[MisfitSpec::l2()], &opts).unwrap();
        assert_eq!(report.outcomes[0].misfit_history, vec![0.0]);
        assert_eq!(report.initial_rmse, 0.0);
    }

    /// Gradient direction: for a homogeneous start below the disk velocity
    /// the first descent step must raise velocity inside the disk, i.e. the
    /// squared-slowness gradient integrates positive there.
    #[test]
    fn first_gradient_pushes_velocity_up_inside_the_disk() {
        let spec = CamembertSpec::lite(40);
        let mut opts = ExperimentOptions::camembert_default(&spec);
        opts.axis = TimeAxis::new(201, 0.002).unwrap();
        opts.n_sources = 3;
        opts.n_receivers = 20;
        opts.iterations = 1;
        let report = run_camembert(&spec, &[MisfitSpec::l2()], &opts).unwrap();
        let grad = &report.outcomes[0].first_gradient;
        let mask = spec.disk_mask();
        let disk_sum: f64 = grad
            .values
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(&g, _)| g)
            .sum();
        assert!(disk_sum > 0.0, "disk-integrated gradient {disk_sum}");
    }

    #[test]
    fn masked_correlation_behaves() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![2.0, 4.0, 6.0, 8.0];
        let mask = vec![true; 4];
        assert!((masked_correlation(&a, &b, &mask) - 1.0).abs() < 1e-12);
        let c = vec![-1.0, -2.0, -3.0, -4.0];
        assert!((masked_correlation(&a, &c, &mask) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn layered_model_velocity_increases_with_depth_on_average() {
        let grid = Grid2D::new(180, 60, 25.0, 25.0, 0.0, 0.0).unwrap();
        let model = layered_model(grid).unwrap();
        let c = model.velocity();
        let row_mean = |iz: usize| -> f64 {
            c[iz * 180..(iz + 1) * 180].iter().sum::<f64>() / 180.0
        };
        assert!(row_mean(55) > row_mean(30));
        assert!(row_mean(30) > row_mean(5));
    }

    #[test]
    fn smoothing_removes_the_sharp_layering() {
        let grid = Grid2D::new(60, 40, 25.0, 25.0, 0.0, 0.0).unwrap();
        let model = layered_model(grid).unwrap();
        let smooth = smoothed_model(&model, 4.0).unwrap();
        // peak vertical jump: smoothing spreads the layer steps
        let max_step = |m: &VelocityModel| -> f64 {
            let c = m.velocity();
            let mut peak = 0.0f64;
            for iz in 1..40 {
                for ix in 0..60 {
                    peak = peak.max((c[iz * 60 + ix] - c[(iz - 1) * 60 + ix]).abs());
                }
            }
            peak
        };
        assert!(max_step(&smooth) < 0.5 * max_step(&model));
    }

    /// A tiny end-to-end contrast run: after a few iterations the linear
    /// normalization must beat squaring on model error, mirroring the
    /// full-scale comparison.
    #[test]
    fn lite_contrast_linear_beats_square() {
        let spec = CamembertSpec::lite(36);
        let mut opts = ExperimentOptions::camembert_default(&spec);
        opts.axis = TimeAxis::new(181, 0.002).unwrap();
        opts.n_sources = 3;
        opts.n_receivers = 16;
        opts.iterations = 6;
        let misfits = [MisfitSpec::w2(Kind::Linear), MisfitSpec::w2(Kind::Square)];
        let report = run_camembert(&spec, &misfits, &opts).unwrap();
        let rmse_lin = *report.outcomes[0].rmse_history.last().unwrap();
        let rmse_sq = *report.outcomes[1].rmse_history.last().unwrap();
        assert!(
            rmse_lin <= rmse_sq,
            "linear {rmse_lin} should not trail square {rmse_sq}"
        );
        assert!(rmse_lin < report.initial_rmse);
    }
}
