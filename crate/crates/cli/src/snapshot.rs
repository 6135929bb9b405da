//! Trajectory snapshots: a plain-text header followed by little-endian `f64`s.
//!
//! ```text
//! kfp-snapshot 1
//! dim 1
//! nx 48
//! nv 48
//! x -1.5 1.5
//! v -1.5 1.5
//! dt 0.03125
//! slices 49
//! times -1.5 -1.46875 ...
//! end
//! ```
//!
//! The payload holds `slices * nx * nv` values, slice by slice, each slice in
//! row-major `(x, v)` order. Floats in the header use the shortest round-trip
//! representation.

use std::fs;
use std::path::Path;

use kfp_core::{Axis, PhaseField, SpaceGrid, Trajectory};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "kfp-snapshot";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("header line {line}: {reason}")]
    Header { line: usize, reason: String },
    #[error("unsupported snapshot version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimensions { expected: String, found: String },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid snapshot: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, SnapshotError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub version: u32,
    pub dim: usize,
    pub nx: usize,
    pub nv: usize,
    pub x: (f64, f64),
    pub v: (f64, f64),
    pub dt: f64,
    pub times: Vec<f64>,
}

impl Header {
    pub fn of(traj: &Trajectory) -> Self {
        let g = &traj.grid;
        Self {
            version: FORMAT_VERSION,
            dim: 1,
            nx: g.x.cells,
            nv: g.v.cells,
            x: (g.x.lo, g.x.hi),
            v: (g.v.lo, g.v.hi),
            dt: traj.dt,
            times: traj.times(),
        }
    }

    fn payload_len(&self) -> usize {
        self.times.len() * self.nx * self.nv * 8
    }

    fn render(&self) -> String {
        let times: Vec<String> = self.times.iter().map(|t| format!("{t:?}")).collect();
        format!(
            "{MAGIC} {}\ndim {}\nnx {}\nnv {}\nx {:?} {:?}\nv {:?} {:?}\ndt {:?}\nslices {}\ntimes {}\nend\n",
            self.version,
            self.dim,
            self.nx,
            self.nv,
            self.x.0,
            self.x.1,
            self.v.0,
            self.v.1,
            self.dt,
            self.times.len(),
            times.join(" ")
        )
    }
}

pub fn encode(traj: &Trajectory) -> Vec<u8> {
    let header = Header::of(traj);
    let mut out = header.render().into_bytes();
    out.reserve(header.payload_len());
    for f in &traj.fields {
        for v in &f.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn header_error(line: usize, reason: impl Into<String>) -> SnapshotError {
    SnapshotError::Header { line, reason: reason.into() }
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_error(lines.len() + 1, "missing `end` line"))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| header_error(lines.len() + 1, "not UTF-8"))?;
        pos += end + 1;
        if line == "end" {
            break;
        }
        lines.push(line.to_string());
        if lines.len() > 16 {
            return Err(header_error(lines.len(), "header too long"));
        }
    }
    let expected = [MAGIC, "dim", "nx", "nv", "x", "v", "dt", "slices", "times"];
    if lines.len() != expected.len() {
        return Err(header_error(lines.len() + 1, format!("expected {} header lines, found {}", expected.len(), lines.len())));
    }
    let mut fields = Vec::new();
    for (i, (line, key)) in lines.iter().zip(expected).enumerate() {
        let mut parts = line.split(' ');
        if parts.next() != Some(key) {
            return Err(header_error(i + 1, format!("expected key `{key}` in `{line}`")));
        }
        fields.push(parts.map(str::to_string).collect::<Vec<_>>());
    }
    let int = |i: usize| -> Result<usize> {
        match fields[i].as_slice() {
            [s] => s.parse().map_err(|_| header_error(i + 1, format!("bad integer `{s}`"))),
            _ => Err(header_error(i + 1, "expected one value")),
        }
    };
    let floats = |i: usize, n: usize| -> Result<Vec<f64>> {
        let vals = fields[i]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| header_error(i + 1, format!("bad number `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(header_error(i + 1, format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    };
    let version = int(0)? as u32;
    if version != FORMAT_VERSION {
        return Err(SnapshotError::Version { found: version });
    }
    let slices = int(7)?;
    let x = floats(4, 2)?;
    let v = floats(5, 2)?;
    let header = Header {
        version,
        dim: int(1)?,
        nx: int(2)?,
        nv: int(3)?,
        x: (x[0], x[1]),
        v: (v[0], v[1]),
        dt: floats(6, 1)?[0],
        times: floats(8, slices)?,
    };
    if header.dim != 1 {
        return Err(SnapshotError::Dimensions { expected: "dim 1".into(), found: format!("dim {}", header.dim) });
    }
    Ok((header, pos))
}

pub fn decode(bytes: &[u8]) -> Result<Trajectory> {
    let (h, start) = parse_header(bytes)?;
    let payload = &bytes[start..];
    if payload.len() != h.payload_len() {
        return Err(SnapshotError::Truncated { expected: h.payload_len(), found: payload.len() });
    }
    let invalid = |e: kfp_core::Error| SnapshotError::Invalid(e.to_string());
    let grid = SpaceGrid::new(Axis::new(h.x.0, h.x.1, h.nx).map_err(invalid)?, Axis::new(h.v.0, h.v.1, h.nv).map_err(invalid)?);
    let n = h.nx * h.nv;
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let fields = h
        .times
        .iter()
        .map(|&t| PhaseField::new(grid, t, values.by_ref().take(n).collect()).map_err(invalid))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(grid, h.dt, fields).map_err(invalid)
}

pub fn read_header(path: &Path) -> Result<Header> {
    let bytes = read(path)?;
    Ok(parse_header(&bytes)?.0)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })
}

pub fn export_snapshot(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, encode(traj)).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })
}

pub fn import_snapshot(path: &Path) -> Result<Trajectory> {
    decode(&read(path)?)
}

/// Imports and checks the grid against an expected one.
pub fn import_on(path: &Path, expected: &SpaceGrid) -> Result<Trajectory> {
    let traj = import_snapshot(path)?;
    if traj.grid != *expected {
        return Err(SnapshotError::Dimensions {
            expected: format!("{} x {} cells", expected.x.cells, expected.v.cells),
            found: format!("{} x {} cells", traj.grid.x.cells, traj.grid.v.cells),
        });
    }
    Ok(traj)
}
