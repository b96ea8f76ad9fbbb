use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Rectangular 2D grid: `nx` columns along x, `nz` rows along depth z,
/// spacings in meters, origin at `(x0, z0)`.
///
/// Fields defined on the grid are stored row-major with z as the slow index:
/// `values[iz * nx + ix]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    pub x0: f64,
    pub z0: f64,
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, dx: f64, dz: f64, x0: f64, z0: f64) -> Result<Self> {
        if nx < 3 || nz < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3 cells per direction, got nx={nx} nz={nz}"
            )));
        }
        if !(dx > 0.0) || !(dz > 0.0) || !dx.is_finite() || !dz.is_finite() {
            return Err(Error::Config(format!(
                "grid spacing must be positive and finite, got dx={dx} dz={dz}"
            )));
        }
        Ok(Self {
            nx,
            nz,
            dx,
            dz,
            x0,
            z0,
        })
    }

    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, iz: usize, ix: usize) -> usize {
        iz * self.nx + ix
    }

    /// Physical coordinates of node `(iz, ix)`.
    pub fn node_position(&self, iz: usize, ix: usize) -> (f64, f64) {
        (
            self.x0 + ix as f64 * self.dx,
            self.z0 + iz as f64 * self.dz,
        )
    }

    /// Snap a physical position to the nearest grid node.
    ///
    /// Positions are required to fall inside the grid (half a cell of slack
    /// outside the outermost nodes is accepted by rounding).
    pub fn nearest_node(&self, x: f64, z: f64) -> Result<(usize, usize)> {
        let fx = (x - self.x0) / self.dx;
        let fz = (z - self.z0) / self.dz;
        let ix = fx.round();
        let iz = fz.round();
        if ix < 0.0 || iz < 0.0 || ix >= self.nx as f64 || iz >= self.nz as f64 {
            return Err(Error::Config(format!(
                "position ({x}, {z}) m falls outside the grid"
            )));
        }
        Ok((iz as usize, ix as usize))
    }

    /// Physical extent (width, depth) covered by the nodes.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.nx - 1) as f64 * self.dx,
            (self.nz - 1) as f64 * self.dz,
        )
    }
}

/// Subsurface model stored as squared slowness m = 1/c², with c in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub grid: Grid2D,
    /// Squared slowness per node, s²/m², row-major (z slow).
    pub m: Vec<f64>,
}

impl VelocityModel {
    /// Build from squared-slowness values.
    pub fn new(grid: Grid2D, m: Vec<f64>) -> Result<Self> {
        if m.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "model has {} values for a {}x{} grid",
                m.len(),
                grid.nz,
                grid.nx
            )));
        }
        let model = Self { grid, m };
        model.validate()?;
        Ok(model)
    }

    /// Build from velocity values in m/s.
    pub fn from_velocity(grid: Grid2D, c: &[f64]) -> Result<Self> {
        if c.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "velocity field has {} values for a {}x{} grid",
                c.len(),
                grid.nz,
                grid.nx
            )));
        }
        for &v in c {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("non-physical velocity {v} m/s")));
            }
        }
        let m = c.iter().map(|&v| 1.0 / (v * v)).collect();
        Ok(Self { grid, m })
    }

    /// Homogeneous model at velocity `c` m/s.
    pub fn homogeneous(grid: Grid2D, c: f64) -> Result<Self> {
        Self::from_velocity(grid, &vec![c; grid.len()])
    }

    /// Velocity field c = 1/sqrt(m), m/s.
    pub fn velocity(&self) -> Vec<f64> {
        self.m.iter().map(|&m| 1.0 / m.sqrt()).collect()
    }

    pub fn velocity_at(&self, iz: usize, ix: usize) -> f64 {
        1.0 / self.m[self.grid.idx(iz, ix)].sqrt()
    }

    pub fn max_velocity(&self) -> f64 {
        self.m.iter().fold(0.0f64, |a, &m| a.max(1.0 / m.sqrt()))
    }

    /// All squared-slowness values finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (i, &m) in self.m.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Domain(format!(
                    "squared slowness {m} at node {i} is not finite and positive"
                )));
            }
        }
        Ok(())
    }

    /// Check that the derived velocity lies within `[vmin, vmax]` everywhere.
    pub fn check_velocity_bounds(&self, vmin: f64, vmax: f64) -> Result<()> {
        for (i, &m) in self.m.iter().enumerate() {
            let c = 1.0 / m.sqrt();
            if c < vmin - 1e-9 || c > vmax + 1e-9 {
                return Err(Error::Domain(format!(
                    "velocity {c:.3} m/s at node {i} outside bounds [{vmin}, {vmax}]"
                )));
            }
        }
        Ok(())
    }
}
