//! JSON run configuration shared by the `forward` and `invert` commands.

use otfwi_core::error::{Error, Result};
use otfwi_core::inversion::{InversionConfig, Shot};
use otfwi_core::misfit::MisfitSpec;
use otfwi_core::signal::TimeAxis;
use otfwi_core::solver::SolverConfig;
use otfwi_core::wavelet::{highpass, ricker, RickerSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeBlock {
    pub nt: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletBlock {
    pub peak_frequency: f64,
    /// Defaults to 1.2 / peak_frequency.
    #[serde(default)]
    pub delay: Option<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Optional zero-phase high-pass applied to the wavelet.
    #[serde(default)]
    pub highpass_hz: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcquisitionBlock {
    pub wavelet: WaveletBlock,
    pub sources: Vec<[f64; 2]>,
    pub receivers: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MisfitBlock {
    pub name: String,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl MisfitBlock {
    pub fn to_spec(&self) -> Result<MisfitSpec> {
        let mut spec = MisfitSpec::by_name(&self.name)?;
        if let Some(c) = self.c {
            if !(c > 0.0) {
                return Err(Error::Config(format!("misfit c must be positive, got {c}")));
            }
            spec.normalization.c = Some(c);
        }
        if let Some(eps) = self.epsilon {
            spec.normalization.epsilon = eps;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerBlock {
    pub max_iterations: usize,
    #[serde(default = "default_memory")]
    pub lbfgs_memory: usize,
    pub velocity_bounds: [f64; 2],
    #[serde(default)]
    pub convergence_tol: f64,
    /// Freeze this many rows below the surface (no model update there).
    #[serde(default)]
    pub freeze_top_rows: usize,
}

fn default_memory() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputBlock {
    /// Write a model snapshot every k accepted iterations (0 = final only).
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub time: TimeBlock,
    pub acquisition: AcquisitionBlock,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub misfit: Option<MisfitBlock>,
    #[serde(default)]
    pub optimizer: Option<OptimizerBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    /// Initial model path for `invert`.
    #[serde(default)]
    pub initial_model: Option<PathBuf>,
    /// Optional reference model for error reporting.
    #[serde(default)]
    pub true_model: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        TimeAxis::new(self.time.nt, self.time.dt)?;
        if self.acquisition.sources.is_empty() {
            return Err(Error::Config("acquisition lists no sources".into()));
        }
        if self.acquisition.receivers.is_empty() {
            return Err(Error::Config("acquisition lists no receivers".into()));
        }
        let w = &self.acquisition.wavelet;
        if !(w.peak_frequency > 0.0) {
            return Err(Error::Config("wavelet peak frequency must be positive".into()));
        }
        if let Some(opt) = &self.optimizer {
            if opt.max_iterations < 1 {
                return Err(Error::Config("optimizer.max_iterations must be >= 1".into()));
            }
            if !(opt.velocity_bounds[0] > 0.0 && opt.velocity_bounds[0] < opt.velocity_bounds[1]) {
                return Err(Error::Config("invalid optimizer.velocity_bounds".into()));
            }
        }
        if let Some(m) = &self.misfit {
            m.to_spec()?;
        }
        Ok(())
    }

    pub fn axis(&self) -> Result<TimeAxis> {
        TimeAxis::new(self.time.nt, self.time.dt)
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.unwrap_or_default()
    }

    /// Build the shot list: one shot per source, shared receiver spread.
    pub fn shots(&self) -> Result<Vec<Shot>> {
        let axis = self.axis()?;
        let w = &self.acquisition.wavelet;
        let spec = RickerSpec::new(
            w.peak_frequency,
            w.delay.unwrap_or(1.2 / w.peak_frequency),
            w.amplitude,
        )?;
        let mut wavelet = ricker(&spec, axis)?;
        if let Some(cutoff) = w.highpass_hz {
            wavelet = highpass(&wavelet, cutoff)?;
        }
        let receivers: Vec<(f64, f64)> = self
            .acquisition
            .receivers
            .iter()
            .map(|&[x, z]| (x, z))
            .collect();
        Ok(self
            .acquisition
            .sources
            .iter()
            .map(|&[x, z]| Shot {
                source_position: (x, z),
                wavelet: wavelet.clone(),
                receiver_positions: receivers.clone(),
            })
            .collect())
    }

    pub fn inversion_config(&self, grid_nx: usize, grid_len: usize) -> Result<InversionConfig> {
        let opt = self
            .optimizer
            .as_ref()
            .ok_or_else(|| Error::Config("invert needs an optimizer block".into()))?;
        let misfit = self
            .misfit
            .as_ref()
            .ok_or_else(|| Error::Config("invert needs a misfit block".into()))?
            .to_spec()?;
        let mut config = InversionConfig::new(
            misfit,
            opt.max_iterations,
            (opt.velocity_bounds[0], opt.velocity_bounds[1]),
        )?;
        config.lbfgs_memory = opt.lbfgs_memory;
        config.convergence_tol = opt.convergence_tol;
        config.solver = self.solver_config();
        if opt.freeze_top_rows > 0 {
            let mut mask = vec![true; grid_len];
            for k in 0..(opt.freeze_top_rows * grid_nx).min(grid_len) {
                mask[k] = false;
            }
            config.update_mask = Some(mask);
        }
        Ok(config)
    }
}
