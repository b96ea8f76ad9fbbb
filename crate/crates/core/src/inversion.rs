//! The outer PDE-constrained optimization loop: multi-shot gradient
//! assembly through the adjoint state, and l-BFGS model updates with
//! velocity bounds.

use crate::error::{Error, Result};
use crate::grid::VelocityModel;
use crate::lbfgs::{self, LbfgsOptions, PairHistory};
use crate::misfit::{self, MisfitSpec};
use crate::signal::{ShotGather, Trace};
use crate::solver::{
    adjoint_solve, forward_gather, forward_solve, imaging_gradient, AdjointSource, GradientField,
    SolverConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One source firing: wavelet, source position, receiver layout.
#[derive(Debug, Clone)]
pub struct Shot {
    pub source_position: (f64, f64),
    pub wavelet: Trace,
    pub receiver_positions: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionConfig {
    pub misfit: MisfitSpec,
    pub max_iterations: usize,
    pub lbfgs_memory: usize,
    /// Velocity box (vmin, vmax) in m/s enforced after every update.
    pub velocity_bounds: (f64, f64),
    /// Nodes marked `false` receive no update (for example a water layer).
    #[serde(skip)]
    pub update_mask: Option<Vec<bool>>,
    /// Stop when the relative misfit decrease of an accepted step falls
    /// below this.
    pub convergence_tol: f64,
    pub solver: SolverConfig,
}

impl InversionConfig {
    pub fn new(misfit: MisfitSpec, max_iterations: usize, velocity_bounds: (f64, f64)) -> Result<Self> {
        if max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        let (vmin, vmax) = velocity_bounds;
        if !(vmin > 0.0) || !(vmin < vmax) {
            return Err(Error::Config(format!(
                "need 0 < vmin < vmax, got ({vmin}, {vmax})"
            )));
        }
        Ok(Self {
            misfit,
            max_iterations,
            lbfgs_memory: 5,
            velocity_bounds,
            update_mask: None,
            convergence_tol: 0.0,
            solver: SolverConfig::default(),
        })
    }

    /// Squared-slowness box corresponding to the velocity bounds.
    pub fn slowness_bounds(&self) -> (f64, f64) {
        let (vmin, vmax) = self.velocity_bounds;
        (1.0 / (vmax * vmax), 1.0 / (vmin * vmin))
    }
}

/// Current model, gradient, and optimizer bookkeeping.
#[derive(Debug, Clone)]
pub struct InversionState {
    pub model: VelocityModel,
    pub gradient: GradientField,
    pub misfit_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub pairs: PairHistory,
    pub stagnated: bool,
    prev_point: Option<(Vec<f64>, Vec<f64>)>,
}

impl InversionState {
    pub fn new(model: VelocityModel, memory: usize) -> Self {
        let gradient = GradientField::zeros(model.grid);
        Self {
            model,
            gradient,
            misfit_history: Vec::new(),
            step_lengths: Vec::new(),
            pairs: PairHistory::new(memory),
            stagnated: false,
            prev_point: None,
        }
    }
}

fn check_observed(shots: &[Shot], observed: &[ShotGather]) -> Result<()> {
    if shots.len() != observed.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} shots vs {} observed gathers",
            shots.len(),
            observed.len()
        )));
    }
    for (i, (shot, obs)) in shots.iter().zip(observed).enumerate() {
        if shot.receiver_positions != obs.receiver_positions {
            return Err(
                Error::GeometryMismatch("receiver layout differs from observed".into())
                    .for_shot(i),
            );
        }
        crate::signal::resample_guard(shot.wavelet.axis, obs.axis()).map_err(|e| e.for_shot(i))?;
    }
    Ok(())
}

/// Misfit value and gradient over all shots: forward solve, misfit adjoint
/// source, adjoint solve, imaging condition, summed per shot in a fixed
/// order (bit-reproducible regardless of thread count).
pub fn assemble_gradient(
    model: &VelocityModel,
    shots: &[Shot],
    observed: &[ShotGather],
    spec: &MisfitSpec,
    solver: &SolverConfig,
    update_mask: Option<&[bool]>,
) -> Result<(f64, GradientField)> {
    check_observed(shots, observed)?;
    let per_shot: Vec<Result<(f64, GradientField)>> = shots
        .par_iter()
        .zip(observed.par_iter())
        .enumerate()
        .map(|(i, (shot, obs))| {
            let run = || -> Result<(f64, GradientField)> {
                let (synthetic, u) = forward_solve(
                    model,
                    &shot.wavelet,
                    shot.source_position,
                    &shot.receiver_positions,
                    solver,
                )?;
                let report = misfit::evaluate(&synthetic, obs, spec)?;
                let adj = AdjointSource::from_misfit(obs, &report)?;
                let v = adjoint_solve(model, &adj, solver)?;
                let grad = imaging_gradient(&u, &v)?;
                Ok((report.value, grad))
            };
            run().map_err(|e| e.for_shot(i))
        })
        .collect();
    let mut total = 0.0;
    let mut gradient = GradientField::zeros(model.grid);
    for result in per_shot {
        let (value, grad) = result?;
        total += value;
        gradient.add_assign(&grad)?;
    }
    if let Some(mask) = update_mask {
        for (g, &keep) in gradient.values.iter_mut().zip(mask) {
            if !keep {
                *g = 0.0;
            }
        }
    }
    Ok((total, gradient))
}

/// Misfit value only (no wavefield storage); the line-search workhorse.
pub fn assemble_value(
    model: &VelocityModel,
    shots: &[Shot],
    observed: &[ShotGather],
    spec: &MisfitSpec,
    solver: &SolverConfig,
) -> Result<f64> {
    check_observed(shots, observed)?;
    let values: Vec<Result<f64>> = shots
        .par_iter()
        .zip(observed.par_iter())
        .enumerate()
        .map(|(i, (shot, obs))| {
            let run = || -> Result<f64> {
                let synthetic = forward_gather(
                    model,
                    &shot.wavelet,
                    shot.source_position,
                    &shot.receiver_positions,
                    solver,
                )?;
                misfit::evaluate(&synthetic, obs, spec).map(|r| r.value)
            };
            run().map_err(|e| e.for_shot(i))
        })
        .collect();
    let mut total = 0.0;
    for v in values {
        total += v?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    Stagnated,
    Converged,
}

/// One l-BFGS iteration: gradient at the current model, two-loop direction,
/// projected Armijo backtracking, history update.
pub fn lbfgs_step(
    state: &mut InversionState,
    shots: &[Shot],
    observed: &[ShotGather],
    config: &InversionConfig,
) -> Result<StepStatus> {
    let (value, gradient) = assemble_gradient(
        &state.model,
        shots,
        observed,
        &config.misfit,
        &config.solver,
        config.update_mask.as_deref(),
    )?;
    state.gradient = gradient;
    state.misfit_history.push(value);

    if value == 0.0 {
        return Ok(StepStatus::Converged);
    }

    // curvature pair from the previous accepted point
    if let Some((x_prev, g_prev)) = state.prev_point.take() {
        let s: Vec<f64> = state
            .model
            .m
            .iter()
            .zip(&x_prev)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = state
            .gradient
            .values
            .iter()
            .zip(&g_prev)
            .map(|(a, b)| a - b)
            .collect();
        state.pairs.push(s, y, 1e-10);
    }

    let opts = LbfgsOptions {
        memory: config.lbfgs_memory,
        bounds: Some(config.slowness_bounds()),
        ..Default::default()
    };
    let mut direction = state.pairs.direction(&state.gradient.values);
    if state.pairs.is_empty() {
        // steepest descent carries no model units; scale the first trial
        // step to 1% of the model magnitude, after which the two-loop
        // gamma scaling takes over
        let d_max = direction.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let m_max = state.model.m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if d_max > 0.0 {
            let scale = 0.01 * m_max / d_max;
            direction.iter_mut().for_each(|v| *v *= scale);
        }
    }
    let x = state.model.m.clone();
    let grid = state.model.grid;
    let outcome = lbfgs::line_search(&x, value, &state.gradient.values, &direction, &opts, |c| {
        let trial = VelocityModel::new(grid, c.to_vec())?;
        assemble_value(&trial, shots, observed, &config.misfit, &config.solver)
    })?;
    match outcome {
        lbfgs::StepOutcome::Accepted {
            x: x_new,
            value: new_value,
            step_length,
        } => {
            state.prev_point = Some((x.clone(), state.gradient.values.clone()));
            state.model = VelocityModel::new(grid, x_new)?;
            state
                .model
                .check_velocity_bounds(config.velocity_bounds.0, config.velocity_bounds.1)?;
            state.step_lengths.push(step_length);
            let rel_decrease = (value - new_value) / value.abs().max(f64::MIN_POSITIVE);
            if rel_decrease < config.convergence_tol {
                return Ok(StepStatus::Converged);
            }
            Ok(StepStatus::Accepted)
        }
        lbfgs::StepOutcome::Stagnated => {
            state.stagnated = true;
            Ok(StepStatus::Stagnated)
        }
    }
}

/// Per-iteration record handed to the run callback.
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub misfit: f64,
    pub step_length: Option<f64>,
    pub model: &'a VelocityModel,
    pub gradient: &'a GradientField,
}

/// Outcome of a full inversion run.
#[derive(Debug, Clone)]
pub struct InversionRun {
    pub final_model: VelocityModel,
    pub misfit_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    /// Gradient at the initial model (the classic first-iteration picture).
    pub first_gradient: GradientField,
    pub stagnated: bool,
}

/// Run up to `config.max_iterations` l-BFGS steps from `initial`, invoking
/// `callback` after each gradient evaluation.
pub fn run_inversion<F>(
    initial: VelocityModel,
    shots: &[Shot],
    observed: &[ShotGather],
    config: &InversionConfig,
    mut callback: F,
) -> Result<InversionRun>
where
    F: FnMut(&IterationRecord),
{
    initial.check_velocity_bounds(config.velocity_bounds.0, config.velocity_bounds.1)?;
    let mut state = InversionState::new(initial, config.lbfgs_memory);
    let mut first_gradient: Option<GradientField> = None;
    for it in 0..config.max_iterations {
        let status = lbfgs_step(&mut state, shots, observed, config)?;
        if first_gradient.is_none() {
            first_gradient = Some(state.gradient.clone());
        }
        callback(&IterationRecord {
            iteration: it,
            misfit: *state.misfit_history.last().unwrap(),
            step_length: state.step_lengths.get(it).copied(),
            model: &state.model,
            gradient: &state.gradient,
        });
        match status {
            StepStatus::Accepted => {}
            StepStatus::Stagnated => {
                log::warn!("line search stagnated at iteration {it}; stopping");
                break;
            }
            StepStatus::Converged => break,
        }
    }
    Ok(InversionRun {
        final_model: state.model,
        misfit_history: state.misfit_history,
        step_lengths: state.step_lengths,
        first_gradient: first_gradient.expect("max_iterations >= 1"),
        stagnated: state.stagnated,
    })
}
