//! Sampled phase-space fields and trajectories.

use crate::error::{Error, Result};
use crate::geometry::SpaceGrid;

/// Cell-centered values of a function of `(x, v)` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    pub grid: SpaceGrid,
    pub time: f64,
    pub values: Vec<f64>,
}

impl PhaseField {
    pub fn new(grid: SpaceGrid, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {} values", grid.x.cells, grid.v.cells),
                found: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        Ok(Self { grid, time, values })
    }

    pub fn zeros(grid: SpaceGrid, time: f64) -> Self {
        Self {
            grid,
            time,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: SpaceGrid, time: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.x.cells {
            let x = grid.x.center(ix);
            for iv in 0..grid.v.cells {
                values.push(f(x, grid.v.center(iv)));
            }
        }
        Self { grid, time, values }
    }

    pub fn get(&self, ix: usize, iv: usize) -> f64 {
        self.values[self.grid.index(ix, iv)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            time: self.time,
            values: self.values.iter().map(|&u| f(u)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|u| u * u).sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// A sequence of fields on one space grid at uniformly spaced times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: SpaceGrid,
    pub dt: f64,
    pub fields: Vec<PhaseField>,
}

impl Trajectory {
    pub fn new(grid: SpaceGrid, dt: f64, fields: Vec<PhaseField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: "at least one slice".into(),
                found: "none".into(),
            });
        }
        if let Some(bad) = fields.iter().find(|f| f.grid != grid) {
            return Err(Error::ShapeMismatch {
                expected: format!("{grid:?}"),
                found: format!("{:?}", bad.grid),
            });
        }
        Ok(Self { grid, dt, fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.time).collect()
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.fields[0].time, self.fields[self.fields.len() - 1].time)
    }

    pub fn last(&self) -> &PhaseField {
        &self.fields[self.fields.len() - 1]
    }

    /// Index of the slice at time `t`, allowing a relative slack of `1e-9 dt`.
    pub fn slice_at(&self, t: f64) -> Option<usize> {
        let (t0, _) = self.time_span();
        let n = ((t - t0) / self.dt).round();
        if n < 0.0 {
            return None;
        }
        let n = n as usize;
        (n < self.fields.len() && (self.fields[n].time - t).abs() <= 1e-9 * self.dt).then_some(n)
    }

    pub fn max(&self) -> f64 {
        self.fields.iter().map(PhaseField::max).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.fields.iter().map(PhaseField::min).fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            grid: self.grid,
            dt: self.dt,
            fields: self.fields.iter().map(|s| s.map(f)).collect(),
        }
    }
}
