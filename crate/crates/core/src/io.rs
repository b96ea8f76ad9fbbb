//! File formats.
//!
//! Model file (binary, little-endian): magic `OTFW`, u32 version = 1,
//! u32 nx, u32 nz, f64 dx, f64 dz, f64 x0, f64 z0, then nz*nx f32 velocity
//! values in row-major order (z slow).
//!
//! Gather: a CSV with header `time,rcv_0,rcv_1,...` plus a JSON sidecar
//! `{source: [x, z], receivers: [[x, z], ...], dt, nt}`.
//!
//! Single-column CSVs (`time,value`, `time,density`, `shift,value`) carry
//! traces, densities, and sensitivity curves. All floats are written with
//! Rust's shortest round-trip formatting, so parse(emit(x)) == x exactly.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, VelocityModel};
use crate::signal::{Density, ShotGather, TimeAxis, Trace};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 4] = b"OTFW";
const MODEL_VERSION: u32 = 1;

pub fn write_model(path: &Path, model: &VelocityModel) -> Result<()> {
    let g = model.grid;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(g.nx as u32).to_le_bytes())?;
    w.write_all(&(g.nz as u32).to_le_bytes())?;
    for v in [g.dx, g.dz, g.x0, g.z0] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &m in &model.m {
        let c = (1.0 / m.sqrt()) as f32;
        w.write_all(&c.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<VelocityModel> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Parse(format!(
            "{}: not a model file (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != MODEL_VERSION {
        return Err(Error::Parse(format!(
            "unsupported model file version {version}"
        )));
    }
    r.read_exact(&mut u32buf)?;
    let nx = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let nz = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    let mut geo = [0.0f64; 4];
    for g in &mut geo {
        r.read_exact(&mut f64buf)?;
        *g = f64::from_le_bytes(f64buf);
    }
    let grid = Grid2D::new(nx, nz, geo[0], geo[1], geo[2], geo[3])?;
    let mut c = Vec::with_capacity(grid.len());
    let mut f32buf = [0u8; 4];
    for _ in 0..grid.len() {
        r.read_exact(&mut f32buf)?;
        c.push(f32::from_le_bytes(f32buf) as f64);
    }
    VelocityModel::from_velocity(grid, &c)
}

/// Geometry sidecar of a gather CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatherSidecar {
    pub source: [f64; 2],
    pub receivers: Vec<[f64; 2]>,
    pub dt: f64,
    pub nt: usize,
}

/// Write `<stem>.csv` and `<stem>.json` for one gather.
pub fn write_gather(stem: &Path, gather: &ShotGather) -> Result<()> {
    let axis = gather.axis();
    let csv_path = stem.with_extension("csv");
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    write!(w, "time")?;
    for r in 0..gather.n_receivers() {
        write!(w, ",rcv_{r}")?;
    }
    writeln!(w)?;
    for i in 0..axis.nt {
        write!(w, "{}", axis.time(i))?;
        for t in &gather.traces {
            write!(w, ",{}", t.samples[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    let sidecar = GatherSidecar {
        source: [gather.source_position.0, gather.source_position.1],
        receivers: gather
            .receiver_positions
            .iter()
            .map(|&(x, z)| [x, z])
            .collect(),
        dt: axis.dt,
        nt: axis.nt,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(stem.with_extension("json"), json)?;
    Ok(())
}

pub fn read_gather(stem: &Path) -> Result<ShotGather> {
    let sidecar: GatherSidecar =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let axis = TimeAxis::new(sidecar.nt, sidecar.dt)?;
    let file = fs::File::open(stem.with_extension("csv"))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty gather CSV".into()))??;
    let n_cols = header.split(',').count();
    let n_rcv = n_cols - 1;
    if n_rcv != sidecar.receivers.len() {
        return Err(Error::Parse(format!(
            "gather CSV has {n_rcv} receiver columns, sidecar lists {}",
            sidecar.receivers.len()
        )));
    }
    let mut samples = vec![Vec::with_capacity(axis.nt); n_rcv];
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let _time = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("row {row}: missing time")))?;
        for (r, cell) in parts.enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|e| Error::Parse(format!("row {row}, col {r}: {e}")))?;
            samples[r].push(v);
        }
    }
    let traces = samples
        .into_iter()
        .map(|s| Trace::new(axis, s))
        .collect::<Result<Vec<_>>>()?;
    ShotGather::new(
        (sidecar.source[0], sidecar.source[1]),
        sidecar.receivers.iter().map(|&[x, z]| (x, z)).collect(),
        traces,
    )
}

/// Write all gathers of a survey into `dir/gather_000.{csv,json}`, ...
pub fn write_gather_dir(dir: &Path, gathers: &[ShotGather]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, g) in gathers.iter().enumerate() {
        write_gather(&dir.join(format!("gather_{i:03}")), g)?;
    }
    Ok(())
}

/// Read gathers `gather_000`, `gather_001`, ... until a file is missing.
pub fn read_gather_dir(dir: &Path) -> Result<Vec<ShotGather>> {
    let mut out = Vec::new();
    loop {
        let stem = dir.join(format!("gather_{:03}", out.len()));
        if !stem.with_extension("csv").exists() {
            break;
        }
        out.push(read_gather(&stem)?);
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no gather_*.csv files under {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn write_two_column(path: &Path, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{},{}", header.0, header.1)?;
    for (a, b) in rows {
        writeln!(w, "{a},{b}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_two_column(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("row {i}: empty")))?
            .parse()
            .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        let b: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("row {i}: one column")))?
            .parse()
            .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        out.push((a, b));
    }
    Ok(out)
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let rows: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| (trace.axis.time(i), s))
        .collect();
    write_two_column(path, ("time", "value"), &rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let rows = read_two_column(path)?;
    if rows.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: need at least 2 samples",
            path.display()
        )));
    }
    let dt = rows[1].0 - rows[0].0;
    let axis = TimeAxis::new(rows.len(), dt)?;
    for (i, w) in rows.windows(2).enumerate() {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Parse(format!(
                "{}: non-uniform sampling near row {i}",
                path.display()
            )));
        }
    }
    Trace::new(axis, rows.into_iter().map(|(_, v)| v).collect())
}

pub fn write_density_csv(path: &Path, density: &Density) -> Result<()> {
    let rows: Vec<(f64, f64)> = density
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| (density.axis.time(i), v))
        .collect();
    write_two_column(path, ("time", "density"), &rows)
}

pub fn write_curve_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    write_two_column(path, ("shift", "value"), rows)
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_two_column(path)
}
