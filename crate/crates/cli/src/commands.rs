//! Implementations of the CLI subcommands: thin adapters over the library
//! operations plus artifact emission.

use crate::config::RunConfig;
use otfwi_core::error::{Error, Result};
use otfwi_core::experiment::{
    masked_correlation, model_rmse, run_camembert, write_camembert_report, CamembertSpec,
    ExperimentOptions,
};
use otfwi_core::inversion::run_inversion;
use otfwi_core::misfit::{self, MisfitSpec};
use otfwi_core::normalization::{self, Kind, NormalizationSpec};
use otfwi_core::signal::{ShotGather, TimeAxis, Trace};
use otfwi_core::solver::forward_gather;
use otfwi_core::transport::{
    count_local_minima, is_convex_within, sensitivity_curve, w1_signed_diagnostic,
};
use otfwi_core::wavelet::{ricker, two_ricker_signal, RickerSpec};
use otfwi_core::{grid::VelocityModel, io};
use serde::Serialize;
use std::fs;
use std::path::Path;

pub fn wavelet(
    peak_freq: f64,
    delay: Option<f64>,
    amplitude: f64,
    nt: usize,
    dt: f64,
    out: &Path,
) -> Result<()> {
    let axis = TimeAxis::new(nt, dt)?;
    let spec = RickerSpec::new(peak_freq, delay.unwrap_or(1.2 / peak_freq), amplitude)?;
    let trace = ricker(&spec, axis)?;
    io::write_trace_csv(out, &trace)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn normalize(kind: &str, c: Option<f64>, epsilon: f64, input: &Path, out: &Path) -> Result<()> {
    let kind = Kind::from_name(kind)?;
    let mut spec = NormalizationSpec::new(kind);
    spec.c = c;
    spec.epsilon = epsilon;
    spec.validate()?;
    let trace = io::read_trace_csv(input)?;
    let jac = normalization::normalization_derivative(&spec, &trace)?;
    let density = otfwi_core::signal::Density::new(
        trace.axis,
        jac.density.clone(),
    )?;
    io::write_density_csv(out, &density)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct MisfitOut {
    misfit: String,
    value: f64,
    per_shot_values: Vec<f64>,
    per_trace_values: Vec<Vec<f64>>,
}

pub fn misfit(
    kind: &str,
    syn_dir: &Path,
    obs_dir: &Path,
    out: &Path,
    adjoint_dir: Option<&Path>,
) -> Result<()> {
    let spec = MisfitSpec::by_name(kind)?;
    let syn = io::read_gather_dir(syn_dir)?;
    let obs = io::read_gather_dir(obs_dir)?;
    if syn.len() != obs.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} synthetic vs {} observed gathers",
            syn.len(),
            obs.len()
        )));
    }
    let mut total = 0.0;
    let mut per_shot = Vec::new();
    let mut per_trace = Vec::new();
    for (i, (f, g)) in syn.iter().zip(&obs).enumerate() {
        let report = misfit::evaluate(f, g, &spec).map_err(|e| e.for_shot(i))?;
        total += report.value;
        per_shot.push(report.value);
        per_trace.push(report.per_trace_values.clone());
        if let Some(dir) = adjoint_dir {
            fs::create_dir_all(dir)?;
            let axis = f.axis();
            let traces: Vec<Trace> = report
                .adjoint_sources
                .iter()
                .map(|s| Trace::new(axis, s.clone()))
                .collect::<Result<_>>()?;
            let gather = ShotGather::new(f.source_position, f.receiver_positions.clone(), traces)?;
            io::write_gather(&dir.join(format!("adjoint_{i:03}")), &gather)?;
        }
    }
    let report = MisfitOut {
        misfit: kind.to_string(),
        value: total,
        per_shot_values: per_shot,
        per_trace_values: per_trace,
    };
    fs::write(out, serde_json::to_string_pretty(&report)?)?;
    println!("misfit {kind}: {total:.6e} ({} shots)", syn.len());
    Ok(())
}

pub fn forward(model_path: &Path, config_path: &Path, out: &Path) -> Result<()> {
    let model = io::read_model(model_path)?;
    let config = RunConfig::load(config_path)?;
    let shots = config.shots()?;
    let solver = config.solver_config();
    let gathers: Vec<ShotGather> = shots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            forward_gather(
                &model,
                &s.wavelet,
                s.source_position,
                &s.receiver_positions,
                &solver,
            )
            .map_err(|e| e.for_shot(i))
        })
        .collect::<Result<_>>()?;
    io::write_gather_dir(out, &gathers)?;
    println!("wrote {} gathers to {}", gathers.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct InvertSummary {
    seed: u64,
    misfit: String,
    iterations_run: usize,
    initial_misfit: f64,
    final_misfit: f64,
    final_rmse: Option<f64>,
    stagnated: bool,
}

pub fn invert(config_path: &Path, obs_dir: &Path, out: &Path, seed: u64) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let initial_path = config
        .initial_model
        .as_ref()
        .ok_or_else(|| Error::Config("config.initial_model is required for invert".into()))?;
    let initial = io::read_model(initial_path)?;
    let true_model = config
        .true_model
        .as_ref()
        .map(|p| io::read_model(p))
        .transpose()?;
    let observed = io::read_gather_dir(obs_dir)?;
    let shots = config.shots()?;
    let inv_config = config.inversion_config(initial.grid.nx, initial.grid.len())?;
    fs::create_dir_all(out)?;
    io::write_model(&out.join("model_iter_000.bin"), &initial)?;

    let snapshot_every = config.output.snapshot_every;
    let mut history: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut first_gradient_written = false;
    let run = run_inversion(initial, &shots, &observed, &inv_config, |rec| {
        let rmse = true_model
            .as_ref()
            .map(|t| model_rmse(rec.model, t))
            .unwrap_or(f64::NAN);
        history.push((
            rec.iteration,
            rec.misfit,
            rmse,
            rec.step_length.unwrap_or(f64::NAN),
        ));
        if !first_gradient_written {
            first_gradient_written = true;
            let gmax = rec
                .gradient
                .values
                .iter()
                .fold(0.0f64, |a, &v| a.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            let scaled: Vec<f64> = rec.gradient.values.iter().map(|&v| 2.0 + v / gmax).collect();
            if let Ok(carrier) = VelocityModel::from_velocity(rec.gradient.grid, &scaled) {
                let _ = io::write_model(&out.join("gradient_iter_1.bin"), &carrier);
            }
        }
        if snapshot_every > 0 && (rec.iteration + 1) % snapshot_every == 0 {
            let _ = io::write_model(
                &out.join(format!("model_iter_{:03}.bin", rec.iteration + 1)),
                rec.model,
            );
        }
    })?;
    io::write_model(&out.join("model_final.bin"), &run.final_model)?;

    let mut csv = String::from("iteration,misfit,model_rmse,step_length\n");
    for (it, m, r, s) in &history {
        csv.push_str(&format!("{it},{m},{r},{s}\n"));
    }
    fs::write(out.join("history.csv"), csv)?;

    let summary = InvertSummary {
        seed,
        misfit: inv_config.misfit.name().to_string(),
        iterations_run: run.misfit_history.len(),
        initial_misfit: run.misfit_history[0],
        final_misfit: *run.misfit_history.last().unwrap(),
        final_rmse: true_model.as_ref().map(|t| model_rmse(&run.final_model, t)),
        stagnated: run.stagnated,
    };
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "{}: misfit {:.6e} -> {:.6e} in {} iterations",
        summary.misfit, summary.initial_misfit, summary.final_misfit, summary.iterations_run
    );
    Ok(())
}

#[derive(Serialize)]
struct SensitivitySummary {
    seed: u64,
    misfit: String,
    base: String,
    steps: usize,
    local_minima: usize,
    convex_flag: bool,
    min_value: f64,
    min_shift: f64,
}

/// Default two-event test signal: 10 Hz wavelets at 0.95 s and 1.25 s on a
/// 2.5 s axis, leaving room for +-0.6 s shifts.
fn two_ricker_base() -> Result<Trace> {
    let axis = TimeAxis::new(1251, 0.002)?;
    two_ricker_signal(10.0, 0.95, 1.25, 1.0, 1.0, axis)
}

pub fn sensitivity(
    misfit_name: &str,
    base: &str,
    shift_min: f64,
    shift_max: f64,
    steps: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let spec = MisfitSpec::by_name(misfit_name)?;
    if steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if shift_max < shift_min {
        return Err(Error::Config("shift-max must be >= shift-min".into()));
    }
    let trace = if base == "two-ricker" {
        two_ricker_base()?
    } else {
        io::read_trace_csv(Path::new(base))?
    };
    // snap shifts to the sample grid so translations are exact
    let dt = trace.axis.dt;
    let shifts: Vec<f64> = (0..steps)
        .map(|k| {
            let s = if steps == 1 {
                shift_min
            } else {
                shift_min + (shift_max - shift_min) * k as f64 / (steps - 1) as f64
            };
            (s / dt).round() * dt
        })
        .collect();
    let curve = sensitivity_curve(&trace, &shifts, &spec)?;
    io::write_curve_csv(out, &curve)?;
    let values: Vec<f64> = curve.iter().map(|&(_, v)| v).collect();
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let (min_ix, min_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &v)| (i, v))
        .unwrap();
    let summary = SensitivitySummary {
        seed,
        misfit: misfit_name.to_string(),
        base: base.to_string(),
        steps,
        local_minima: count_local_minima(&values),
        convex_flag: is_convex_within(&values, 1e-6 * max),
        min_value,
        min_shift: curve[min_ix].0,
    };
    let summary_path = out.with_extension("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{}: {} local minima, convex = {}",
        misfit_name, summary.local_minima, summary.convex_flag
    );
    Ok(())
}

#[derive(Serialize)]
struct W1DemoSummary {
    value: f64,
    f_plus_mass: f64,
    f_plus_to_f_minus: f64,
    f_plus_to_g_plus: f64,
    self_cancellation: bool,
}

/// The signed-W1 recombination can couple a signal with itself: adjacent
/// +/- lobes far from their counterparts in the other signal.
pub fn demo_w1(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let axis = TimeAxis::new(500, 0.004)?;
    let lobe = |c: f64, sign: f64| -> Vec<f64> {
        axis.times()
            .map(|t| sign * (-((t - c) / 0.03).powi(2)).exp())
            .collect()
    };
    let add = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    };
    let f = Trace::new(axis, add(lobe(0.35, 1.0), lobe(0.45, -1.0)))?;
    let g = Trace::new(axis, add(lobe(1.45, 1.0), lobe(1.55, -1.0)))?;
    io::write_trace_csv(&out.join("synthetic.csv"), &f)?;
    io::write_trace_csv(&out.join("observed.csv"), &g)?;
    let diag = w1_signed_diagnostic(&f, &g)?;
    let summary = W1DemoSummary {
        value: diag.value,
        f_plus_mass: diag.pairing.f_plus_mass,
        f_plus_to_f_minus: diag.pairing.f_plus_to_f_minus,
        f_plus_to_g_plus: diag.pairing.f_plus_to_g_plus,
        self_cancellation: diag.pairing.f_plus_to_f_minus > 0.5,
    };
    fs::write(
        out.join("coupling.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "signed W1 = {:.6e}; {:.1}% of the positive part couples to the \
         signal's own negative part",
        summary.value,
        100.0 * summary.f_plus_to_f_minus
    );
    Ok(())
}

pub fn camembert(
    out: &Path,
    misfit_list: &str,
    iterations: usize,
    grid_cells: usize,
    sources: usize,
    receivers: usize,
    seed: u64,
) -> Result<()> {
    let misfits: Vec<MisfitSpec> = misfit_list
        .split(',')
        .map(|name| MisfitSpec::by_name(name.trim()))
        .collect::<Result<_>>()?;
    if misfits.is_empty() {
        return Err(Error::Config("no misfits requested".into()));
    }
    let spec = if grid_cells == 100 {
        CamembertSpec::desk_default()
    } else {
        CamembertSpec::lite(grid_cells)
    };
    let mut opts = ExperimentOptions::camembert_default(&spec);
    opts.iterations = iterations;
    opts.n_sources = sources;
    opts.n_receivers = receivers;
    let report = run_camembert(&spec, &misfits, &opts)?;
    write_camembert_report(&report, &spec, out)?;
    // provenance echo
    let prov = serde_json::json!({
        "seed": seed,
        "grid": grid_cells,
        "iterations": iterations,
        "sources": sources,
        "receivers": receivers,
        "misfits": misfits.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    fs::write(out.join("run_config.json"), serde_json::to_string_pretty(&prov)?)?;
    for outcome in &report.outcomes {
        println!(
            "{}: rmse {:.3} -> {:.3} m/s over {} iterations{}",
            outcome.name,
            report.initial_rmse,
            outcome.rmse_history.last().unwrap(),
            outcome.misfit_history.len(),
            if outcome.stagnated { " (stagnated)" } else { "" }
        );
    }
    if report.outcomes.len() >= 2 {
        let corr = masked_correlation(
            &report.outcomes[0].first_gradient.values,
            &report.outcomes[1].first_gradient.values,
            &spec.disk_mask(),
        );
        println!(
            "first-iteration gradient correlation inside the disk ({} vs {}): {corr:.3}",
            report.outcomes[0].name, report.outcomes[1].name
        );
    }
    Ok(())
}
