//! Time-domain acoustic modeling: forward propagation, the exact discrete
//! adjoint, and the imaging-condition gradient.
//!
//! Scheme: leapfrog in time (2nd order) with a 4th-order-interior Laplacian
//! built as two symmetric second-difference passes per direction,
//! `A = D2 - (h^2/12) D2^2`. The composition equals the classic 5-point
//! 4th-order stencil away from edges, degrades gracefully beside them, and
//! is symmetric as a matrix, which gives exact discrete energy conservation
//! under reflecting boundaries and makes the adjoint solve an exact
//! transpose of the forward step.
//!
//! Boundaries: first-order Clayton-Engquist (Mur) absorbing updates per
//! side, or a pressure-free (u = 0) condition for free-surface/reflecting
//! walls. The backward sweep transposes the boundary stages element by
//! element in reverse order, so the inner-product identity
//! `<R F s, q> = <s, F* R^T q>` holds to round-off, not just to
//! discretization order.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, VelocityModel};
use crate::misfit::MisfitReport;
use crate::signal::{resample_guard, ShotGather, TimeAxis, Trace};
use serde::{Deserialize, Serialize};

/// Behavior of one grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeCondition {
    /// First-order Clayton-Engquist absorbing update.
    Absorbing,
    /// u = 0: free surface for the top edge, reflecting wall otherwise.
    PressureFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundaries {
    pub top: EdgeCondition,
    pub bottom: EdgeCondition,
    pub left: EdgeCondition,
    pub right: EdgeCondition,
}

impl Default for Boundaries {
    fn default() -> Self {
        Self::absorbing()
    }
}

impl Boundaries {
    pub fn absorbing() -> Self {
        Self {
            top: EdgeCondition::Absorbing,
            bottom: EdgeCondition::Absorbing,
            left: EdgeCondition::Absorbing,
            right: EdgeCondition::Absorbing,
        }
    }

    pub fn free_surface_top() -> Self {
        Self {
            top: EdgeCondition::PressureFree,
            ..Self::absorbing()
        }
    }

    pub fn reflecting() -> Self {
        Self {
            top: EdgeCondition::PressureFree,
            bottom: EdgeCondition::PressureFree,
            left: EdgeCondition::PressureFree,
            right: EdgeCondition::PressureFree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub boundaries: Boundaries,
    /// Keep every k-th snapshot; 1 stores the full history. Strides > 1
    /// require (nt - 1) divisible by the stride so both ends are stored.
    pub snapshot_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            boundaries: Boundaries::default(),
            snapshot_stride: 1,
        }
    }
}

/// Pressure history on the grid. With `stride > 1` the snapshots are a
/// uniform decimation including both endpoints; `snapshot_at` reconstructs
/// skipped steps by linear interpolation.
#[derive(Debug, Clone)]
pub struct Wavefield {
    pub grid: Grid2D,
    pub axis: TimeAxis,
    pub stride: usize,
    pub snapshots: Vec<Vec<f64>>,
}

impl Wavefield {
    /// Field at time index `it`, interpolating between stored snapshots
    /// when the history is decimated.
    pub fn snapshot_at(&self, it: usize) -> Vec<f64> {
        let j = it / self.stride;
        let r = it % self.stride;
        if r == 0 {
            return self.snapshots[j].clone();
        }
        let frac = r as f64 / self.stride as f64;
        self.snapshots[j]
            .iter()
            .zip(&self.snapshots[j + 1])
            .map(|(a, b)| a * (1.0 - frac) + b * frac)
            .collect()
    }
}

/// Per-receiver time series injected by the adjoint solve: the transpose of
/// receiver sampling applied to d(misfit)/d(data).
#[derive(Debug, Clone)]
pub struct AdjointSource {
    pub receiver_positions: Vec<(f64, f64)>,
    pub axis: TimeAxis,
    /// values[r][it]
    pub values: Vec<Vec<f64>>,
}

impl AdjointSource {
    pub fn new(
        receiver_positions: Vec<(f64, f64)>,
        axis: TimeAxis,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != receiver_positions.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} adjoint series for {} receivers",
                values.len(),
                receiver_positions.len()
            )));
        }
        for v in &values {
            if v.len() != axis.nt {
                return Err(Error::Config(format!(
                    "adjoint series of {} samples on an axis of {}",
                    v.len(),
                    axis.nt
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("non-finite adjoint source".into()));
            }
        }
        Ok(Self {
            receiver_positions,
            axis,
            values,
        })
    }

    /// Pair a misfit report with the gather geometry it came from.
    pub fn from_misfit(gather: &ShotGather, report: &MisfitReport) -> Result<Self> {
        Self::new(
            gather.receiver_positions.clone(),
            gather.axis(),
            report.adjoint_sources.clone(),
        )
    }
}

/// Misfit gradient with respect to squared slowness, aligned with the model.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl GradientField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn add_assign(&mut self, other: &GradientField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("gradient grids differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }
}

/// Largest stable time step for the scheme on this model:
/// dt <= sqrt(3)/2 / (c_max sqrt(1/dx^2 + 1/dz^2)).
pub fn max_stable_dt(model: &VelocityModel) -> f64 {
    let g = model.grid;
    let c_max = model.max_velocity();
    0.5 * 3.0f64.sqrt() / (c_max * (1.0 / (g.dx * g.dx) + 1.0 / (g.dz * g.dz)).sqrt())
}

fn check_cfl(model: &VelocityModel, dt: f64) -> Result<()> {
    let max_dt = max_stable_dt(model);
    if dt > max_dt {
        return Err(Error::Stability { dt, max_dt });
    }
    Ok(())
}

/// Precomputed stepping machinery shared by the forward and adjoint sweeps.
struct Stepper {
    nx: usize,
    nz: usize,
    /// dt^2 / m per node.
    w: Vec<f64>,
    inv_dx2: f64,
    inv_dz2: f64,
    /// h^2/12 factors of the 4th-order correction.
    cx: f64,
    cz: f64,
    boundaries: Boundaries,
    kappa_top: Vec<f64>,
    kappa_bottom: Vec<f64>,
    kappa_left: Vec<f64>,
    kappa_right: Vec<f64>,
}

impl Stepper {
    fn new(model: &VelocityModel, dt: f64, boundaries: Boundaries) -> Self {
        let g = model.grid;
        let (nx, nz) = (g.nx, g.nz);
        let w: Vec<f64> = model.m.iter().map(|&m| dt * dt / m).collect();
        let mur = |iz: usize, ix: usize, h: f64| {
            let c = model.velocity_at(iz, ix);
            (c * dt - h) / (c * dt + h)
        };
        Stepper {
            nx,
            nz,
            w,
            inv_dx2: 1.0 / (g.dx * g.dx),
            inv_dz2: 1.0 / (g.dz * g.dz),
            cx: g.dx * g.dx / 12.0,
            cz: g.dz * g.dz / 12.0,
            boundaries,
            kappa_top: (0..nx).map(|ix| mur(0, ix, g.dz)).collect(),
            kappa_bottom: (0..nx).map(|ix| mur(nz - 1, ix, g.dz)).collect(),
            kappa_left: (0..nz).map(|iz| mur(iz, 0, g.dx)).collect(),
            kappa_right: (0..nz).map(|iz| mur(iz, nx - 1, g.dx)).collect(),
        }
    }

    /// First pass: plain second differences at interior nodes, zero at the
    /// boundary ring. Reads boundary values of `u`.
    fn second_differences(&self, u: &[f64], tx: &mut [f64], tz: &mut [f64]) {
        let (nx, nz) = (self.nx, self.nz);
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                tx[k] = (u[k - 1] - 2.0 * u[k] + u[k + 1]) * self.inv_dx2;
                tz[k] = (u[k - nx] - 2.0 * u[k] + u[k + nx]) * self.inv_dz2;
            }
        }
    }

    /// Second pass at one interior node: 4th-order corrected Laplacian from
    /// the first-pass fields (which are zero on the boundary ring).
    #[inline]
    fn corrected_lap(&self, tx: &[f64], tz: &[f64], k: usize) -> f64 {
        let nx = self.nx;
        let d2tx = (tx[k - 1] - 2.0 * tx[k] + tx[k + 1]) * self.inv_dx2;
        let d2tz = (tz[k - nx] - 2.0 * tz[k] + tz[k + nx]) * self.inv_dz2;
        tx[k] - self.cx * d2tx + tz[k] - self.cz * d2tz
    }

    /// Interior leapfrog update. On entry `next` holds u^{n-1}; on exit its
    /// interior holds u^{n+1}. Boundary entries are written later by
    /// `apply_boundaries`.
    fn interior_step(&self, curr: &[f64], next: &mut [f64], tx: &mut [f64], tz: &mut [f64]) {
        self.second_differences(curr, tx, tz);
        let (nx, nz) = (self.nx, self.nz);
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                let lap = self.corrected_lap(tx, tz, k);
                next[k] = 2.0 * curr[k] - next[k] + self.w[k] * lap;
            }
        }
    }

    /// Boundary stages, fixed order: top, bottom (open ranges), then left,
    /// right (full columns, owning the corners). Every boundary node is
    /// written exactly once per step.
    fn apply_boundaries(&self, next: &mut [f64], curr: &[f64]) {
        let (nx, nz) = (self.nx, self.nz);
        match self.boundaries.top {
            EdgeCondition::PressureFree => {
                for ix in 1..nx - 1 {
                    next[ix] = 0.0;
                }
            }
            EdgeCondition::Absorbing => {
                for ix in 1..nx - 1 {
                    next[ix] = curr[nx + ix] + self.kappa_top[ix] * (next[nx + ix] - curr[ix]);
                }
            }
        }
        let last = (nz - 1) * nx;
        let prev = (nz - 2) * nx;
        match self.boundaries.bottom {
            EdgeCondition::PressureFree => {
                for ix in 1..nx - 1 {
                    next[last + ix] = 0.0;
                }
            }
            EdgeCondition::Absorbing => {
                for ix in 1..nx - 1 {
                    next[last + ix] = curr[prev + ix]
                        + self.kappa_bottom[ix] * (next[prev + ix] - curr[last + ix]);
                }
            }
        }
        match self.boundaries.left {
            EdgeCondition::PressureFree => {
                for iz in 0..nz {
                    next[iz * nx] = 0.0;
                }
            }
            EdgeCondition::Absorbing => {
                for iz in 0..nz {
                    let k = iz * nx;
                    next[k] = curr[k + 1] + self.kappa_left[iz] * (next[k + 1] - curr[k]);
                }
            }
        }
        match self.boundaries.right {
            EdgeCondition::PressureFree => {
                for iz in 0..nz {
                    next[iz * nx + nx - 1] = 0.0;
                }
            }
            EdgeCondition::Absorbing => {
                for iz in 0..nz {
                    let k = iz * nx + nx - 1;
                    next[k] = curr[k - 1] + self.kappa_right[iz] * (next[k - 1] - curr[k]);
                }
            }
        }
    }

    /// Exact transpose of `apply_boundaries`: stages in reverse order, each
    /// consuming the adjoint of the node it overwrote and scattering it to
    /// the values the forward stage read.
    fn apply_boundaries_transpose(&self, lam_next: &mut [f64], lam_curr: &mut [f64]) {
        let (nx, nz) = (self.nx, self.nz);
        // right
        for iz in 0..nz {
            let k = iz * nx + nx - 1;
            let a = lam_next[k];
            lam_next[k] = 0.0;
            if self.boundaries.right == EdgeCondition::Absorbing {
                lam_curr[k - 1] += a;
                lam_next[k - 1] += self.kappa_right[iz] * a;
                lam_curr[k] -= self.kappa_right[iz] * a;
            }
        }
        // left
        for iz in 0..nz {
            let k = iz * nx;
            let a = lam_next[k];
            lam_next[k] = 0.0;
            if self.boundaries.left == EdgeCondition::Absorbing {
                lam_curr[k + 1] += a;
                lam_next[k + 1] += self.kappa_left[iz] * a;
                lam_curr[k] -= self.kappa_left[iz] * a;
            }
        }
        // bottom
        let last = (nz - 1) * nx;
        let prev = (nz - 2) * nx;
        for ix in 1..nx - 1 {
            let a = lam_next[last + ix];
            lam_next[last + ix] = 0.0;
            if self.boundaries.bottom == EdgeCondition::Absorbing {
                lam_curr[prev + ix] += a;
                lam_next[prev + ix] += self.kappa_bottom[ix] * a;
                lam_curr[last + ix] -= self.kappa_bottom[ix] * a;
            }
        }
        // top
        for ix in 1..nx - 1 {
            let a = lam_next[ix];
            lam_next[ix] = 0.0;
            if self.boundaries.top == EdgeCondition::Absorbing {
                lam_curr[nx + ix] += a;
                lam_next[nx + ix] += self.kappa_top[ix] * a;
                lam_curr[ix] -= self.kappa_top[ix] * a;
            }
        }
    }

    /// Transpose of the interior leapfrog stage. `lam_next` must already
    /// have zeroed boundary entries (done by the boundary transpose), so
    /// the scratch fields stay zero on the boundary ring throughout.
    fn interior_step_transpose(
        &self,
        lam_next: &[f64],
        lam_curr: &mut [f64],
        lam_prev: &mut [f64],
        p: &mut [f64],
        sx: &mut [f64],
        sz: &mut [f64],
    ) {
        let (nx, nz) = (self.nx, self.nz);
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                p[k] = self.w[k] * lam_next[k];
            }
        }
        // correction pass is symmetric on the interior with zero truncation
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                let d2x = (p[k - 1] - 2.0 * p[k] + p[k + 1]) * self.inv_dx2;
                let d2z = (p[k - nx] - 2.0 * p[k] + p[k + nx]) * self.inv_dz2;
                sx[k] = p[k] - self.cx * d2x;
                sz[k] = p[k] - self.cz * d2z;
            }
        }
        // first pass transposed: scatter second differences of the
        // zero-extended fields to all nodes, including the boundary ring
        for iz in 0..nz {
            let row = iz * nx;
            for ix in 0..nx {
                let k = row + ix;
                let sxl = if ix >= 1 { sx[k - 1] } else { 0.0 };
                let sxr = if ix + 1 < nx { sx[k + 1] } else { 0.0 };
                let szu = if iz >= 1 { sz[k - nx] } else { 0.0 };
                let szd = if iz + 1 < nz { sz[k + nx] } else { 0.0 };
                lam_curr[k] += (sxl - 2.0 * sx[k] + sxr) * self.inv_dx2
                    + (szu - 2.0 * sz[k] + szd) * self.inv_dz2;
            }
        }
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                lam_curr[k] += 2.0 * lam_next[k];
                lam_prev[k] -= lam_next[k];
            }
        }
        for iz in 1..nz - 1 {
            let row = iz * nx;
            for ix in 1..nx - 1 {
                let k = row + ix;
                p[k] = 0.0;
                sx[k] = 0.0;
                sz[k] = 0.0;
            }
        }
    }
}

fn find_nonfinite(u: &[f64]) -> bool {
    u.iter().any(|v| !v.is_finite())
}

fn validate_snapshot_stride(nt: usize, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::Config("snapshot stride must be >= 1".into()));
    }
    if stride > 1 && (nt - 1) % stride != 0 {
        return Err(Error::Config(format!(
            "snapshot stride {stride} must divide nt-1 = {}",
            nt - 1
        )));
    }
    Ok(())
}

fn source_node(grid: &Grid2D, pos: (f64, f64)) -> Result<usize> {
    let (iz, ix) = grid.nearest_node(pos.0, pos.1)?;
    if iz == 0 || iz == grid.nz - 1 || ix == 0 || ix == grid.nx - 1 {
        return Err(Error::Config(format!(
            "source at ({}, {}) m snaps to the boundary ring; boundary updates would erase it",
            pos.0, pos.1
        )));
    }
    Ok(grid.idx(iz, ix))
}

fn receiver_nodes(grid: &Grid2D, positions: &[(f64, f64)]) -> Result<Vec<usize>> {
    positions
        .iter()
        .map(|&(x, z)| grid.nearest_node(x, z).map(|(iz, ix)| grid.idx(iz, ix)))
        .collect()
}

fn forward_impl(
    model: &VelocityModel,
    source: &Trace,
    source_pos: (f64, f64),
    receivers: &[(f64, f64)],
    cfg: &SolverConfig,
    keep_snapshots: bool,
    skip_cfl: bool,
) -> Result<(ShotGather, Option<Wavefield>)> {
    model.validate()?;
    if !skip_cfl {
        check_cfl(model, source.axis.dt)?;
    }
    let grid = model.grid;
    let axis = source.axis;
    let nt = axis.nt;
    validate_snapshot_stride(nt, cfg.snapshot_stride)?;
    if receivers.is_empty() {
        return Err(Error::GeometryMismatch("no receivers".into()));
    }
    let src = source_node(&grid, source_pos)?;
    let rec = receiver_nodes(&grid, receivers)?;
    let inv_area = 1.0 / (grid.dx * grid.dz);
    let stepper = Stepper::new(model, axis.dt, cfg.boundaries);
    let n = grid.len();

    let mut prev = vec![0.0; n]; // u^{-1}, then rotates
    let mut curr = vec![0.0; n]; // u^{0}
    let mut tx = vec![0.0; n];
    let mut tz = vec![0.0; n];
    let mut data = vec![vec![0.0; nt]; rec.len()];
    let mut snapshots = Vec::new();
    if keep_snapshots {
        snapshots.push(curr.clone()); // u^0 = 0: zero initial conditions
    }
    for step in 0..nt - 1 {
        stepper.interior_step(&curr, &mut prev, &mut tx, &mut tz);
        prev[src] += stepper.w[src] * inv_area * source.samples[step];
        stepper.apply_boundaries(&mut prev, &curr);
        std::mem::swap(&mut prev, &mut curr);
        // curr now holds u^{step+1}
        if find_nonfinite(&curr) {
            return Err(Error::Divergence { step: step + 1 });
        }
        for (r, &node) in rec.iter().enumerate() {
            data[r][step + 1] = curr[node];
        }
        if keep_snapshots && (step + 1) % cfg.snapshot_stride == 0 {
            snapshots.push(curr.clone());
        }
    }
    let traces = data
        .into_iter()
        .map(|samples| Trace { axis, samples })
        .collect();
    let gather = ShotGather::new(source_pos, receivers.to_vec(), traces)?;
    let wavefield = keep_snapshots.then(|| Wavefield {
        grid,
        axis,
        stride: cfg.snapshot_stride,
        snapshots,
    });
    Ok((gather, wavefield))
}

/// Forward solve from zero initial conditions, returning the receiver
/// gather and the full wavefield history.
pub fn forward_solve(
    model: &VelocityModel,
    source: &Trace,
    source_pos: (f64, f64),
    receivers: &[(f64, f64)],
    cfg: &SolverConfig,
) -> Result<(ShotGather, Wavefield)> {
    let (gather, wavefield) = forward_impl(model, source, source_pos, receivers, cfg, true, false)?;
    Ok((gather, wavefield.expect("snapshots requested")))
}

/// Forward solve that only records the gather; used by line searches.
pub fn forward_gather(
    model: &VelocityModel,
    source: &Trace,
    source_pos: (f64, f64),
    receivers: &[(f64, f64)],
    cfg: &SolverConfig,
) -> Result<ShotGather> {
    let (gather, _) = forward_impl(model, source, source_pos, receivers, cfg, false, false)?;
    Ok(gather)
}

/// Adjoint solve: the exact transpose of the forward time loop, marching
/// backward from zero terminal conditions with the adjoint sources injected
/// at the receiver nodes.
///
/// The returned field v is scaled so that the imaging condition
/// `-sum_t d2u/dt2 * v * dt` is the gradient of the misfit whose adjoint
/// source was injected. The transpose of the source-injection stage is
/// available from the same field: d(misfit)/d(source sample at step n)
/// equals `dt/(dx dz) * v^n[source node]`.
pub fn adjoint_solve(
    model: &VelocityModel,
    adj: &AdjointSource,
    cfg: &SolverConfig,
) -> Result<Wavefield> {
    model.validate()?;
    check_cfl(model, adj.axis.dt)?;
    let grid = model.grid;
    let axis = adj.axis;
    let nt = axis.nt;
    validate_snapshot_stride(nt, cfg.snapshot_stride)?;
    let rec = receiver_nodes(&grid, &adj.receiver_positions)?;
    let stepper = Stepper::new(model, axis.dt, cfg.boundaries);
    let n = grid.len();
    let dt = axis.dt;

    let inject = |buf: &mut Vec<f64>, it: usize| {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for (r, &node) in rec.iter().enumerate() {
            buf[node] += adj.values[r][it];
        }
    };

    let mut lam_np1 = vec![0.0; n];
    let mut lam_n = vec![0.0; n];
    let mut lam_nm1 = vec![0.0; n];
    inject(&mut lam_np1, nt - 1);
    if nt >= 2 {
        inject(&mut lam_n, nt - 2);
    }
    let mut p = vec![0.0; n];
    let mut sx = vec![0.0; n];
    let mut sz = vec![0.0; n];

    let n_stored = (nt - 1) / cfg.snapshot_stride + 1;
    let mut snapshots = vec![Vec::new(); n_stored];
    snapshots[n_stored - 1] = vec![0.0; n]; // terminal conditions v(T) = 0

    for k in (0..=nt - 2).rev() {
        if k >= 1 {
            inject(&mut lam_nm1, k - 1);
        } else {
            lam_nm1.iter_mut().for_each(|v| *v = 0.0);
        }
        stepper.apply_boundaries_transpose(&mut lam_np1, &mut lam_n);
        if k % cfg.snapshot_stride == 0 {
            let snap: Vec<f64> = lam_np1
                .iter()
                .zip(&model.m)
                .map(|(&l, &m)| l * dt / m)
                .collect();
            if find_nonfinite(&snap) {
                return Err(Error::Divergence { step: k });
            }
            snapshots[k / cfg.snapshot_stride] = snap;
        }
        stepper.interior_step_transpose(&lam_np1, &mut lam_n, &mut lam_nm1, &mut p, &mut sx, &mut sz);
        std::mem::swap(&mut lam_np1, &mut lam_n);
        std::mem::swap(&mut lam_n, &mut lam_nm1);
    }

    Ok(Wavefield {
        grid,
        axis,
        stride: cfg.snapshot_stride,
        snapshots,
    })
}

/// d(misfit)/d(source samples) extracted from an adjoint wavefield: the
/// transpose of the point-source injection.
pub fn adjoint_source_signature(
    v: &Wavefield,
    model: &VelocityModel,
    source_pos: (f64, f64),
) -> Result<Trace> {
    if v.stride != 1 {
        return Err(Error::Config(
            "source signature needs an undecimated adjoint wavefield".into(),
        ));
    }
    let src = source_node(&model.grid, source_pos)?;
    let inv_area = 1.0 / (model.grid.dx * model.grid.dz);
    let samples: Vec<f64> = v
        .snapshots
        .iter()
        .map(|snap| snap[src] * v.axis.dt * inv_area)
        .collect();
    Trace::new(v.axis, samples)
}

/// Cross-correlation imaging condition:
/// gradient(x) = -sum_t d2u/dt2(x, t) v(x, t) dt,
/// with centered second differences in time and one-sided second-order
/// stencils at the ends.
pub fn imaging_gradient(u: &Wavefield, v: &Wavefield) -> Result<GradientField> {
    if u.grid != v.grid {
        return Err(Error::GridMismatch(
            "wavefields live on different grids".into(),
        ));
    }
    resample_guard(u.axis, v.axis)?;
    if u.stride != v.stride {
        return Err(Error::Config(format!(
            "snapshot strides differ: {} vs {}",
            u.stride, v.stride
        )));
    }
    let ns = u.snapshots.len();
    if ns < 4 {
        return Err(Error::Config(
            "imaging needs at least 4 stored snapshots".into(),
        ));
    }
    let dt_eff = u.axis.dt * u.stride as f64;
    let inv_dt2 = 1.0 / (dt_eff * dt_eff);
    let n = u.grid.len();
    let mut g = vec![0.0; n];
    for j in 0..ns {
        let vj = &v.snapshots[j];
        if j == 0 {
            let (u0, u1, u2, u3) = (
                &u.snapshots[0],
                &u.snapshots[1],
                &u.snapshots[2],
                &u.snapshots[3],
            );
            for k in 0..n {
                let utt = (2.0 * u0[k] - 5.0 * u1[k] + 4.0 * u2[k] - u3[k]) * inv_dt2;
                g[k] -= utt * vj[k] * dt_eff;
            }
        } else if j == ns - 1 {
            let (u0, u1, u2, u3) = (
                &u.snapshots[ns - 1],
                &u.snapshots[ns - 2],
                &u.snapshots[ns - 3],
                &u.snapshots[ns - 4],
            );
            for k in 0..n {
                let utt = (2.0 * u0[k] - 5.0 * u1[k] + 4.0 * u2[k] - u3[k]) * inv_dt2;
                g[k] -= utt * vj[k] * dt_eff;
            }
        } else {
            let (um, uc, up) = (&u.snapshots[j - 1], &u.snapshots[j], &u.snapshots[j + 1]);
            for k in 0..n {
                let utt = (up[k] - 2.0 * uc[k] + um[k]) * inv_dt2;
                g[k] -= utt * vj[k] * dt_eff;
            }
        }
    }
    Ok(GradientField {
        grid: u.grid,
        values: g,
    })
}

/// Discrete energy of a leapfrog state pair under reflecting boundaries:
/// kinetic part plus the symmetric-operator cross term. Exactly conserved
/// by the interior scheme, which is what the conservation test checks.
pub fn discrete_energy(model: &VelocityModel, curr: &[f64], next: &[f64], dt: f64) -> f64 {
    let stepper = Stepper::new(model, dt, Boundaries::reflecting());
    let n = model.grid.len();
    let mut tx = vec![0.0; n];
    let mut tz = vec![0.0; n];
    stepper.second_differences(next, &mut tx, &mut tz);
    let area = model.grid.dx * model.grid.dz;
    let mut kinetic = 0.0;
    for k in 0..n {
        let v = (next[k] - curr[k]) / dt;
        kinetic += model.m[k] * v * v;
    }
    let mut cross = 0.0;
    let (nx, nz) = (model.grid.nx, model.grid.nz);
    for iz in 1..nz - 1 {
        for ix in 1..nx - 1 {
            let k = iz * nx + ix;
            cross += stepper.corrected_lap(&tx, &tz, k) * curr[k];
        }
    }
    0.5 * area * (kinetic - cross)
}
