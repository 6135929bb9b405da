//! Time integration of `(∂t + v ∂x) f = ∂v (a ∂v f) + g` on a box in `(x, v)`.
//!
//! Each step is a Strang splitting: half a transport step in `x`, one backward
//! Euler diffusion step in `v`, another half transport step, then `dt g` is
//! added. Transport is a conservative flux scheme per `v` row; diffusion is a
//! two-point flux finite-volume solve per `x` column with harmonic face means.

mod diffusion;
mod energy;
mod transport;

use std::fmt;
use std::sync::Arc;

pub use diffusion::{column_gradient_energy, harmonic};
pub use energy::{comparison_check, energy_budget, local_energy_check, EnergyLedger, LedgerEntry, LocalEnergyTerms};
pub use transport::{advect_row, Reconstruction, RowEnds};

use crate::coefficients::{DiffusionField, SourceField};
use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::SpaceGrid;
use diffusion::{Column, ColumnProblem};

/// Boundary values `b(t, x, v)` used outside the box.
#[derive(Clone)]
pub struct BoundaryData(pub Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData(..)")
    }
}

#[derive(Clone, Debug)]
pub enum BoundaryCondition {
    /// Periodic in `x`, zero Dirichlet on the `v` faces.
    WholeSpace,
    /// Zero on the `v` faces and on the inflow part `v x < 0` of the `x` faces.
    KineticIbvp,
    /// As `KineticIbvp` with prescribed values instead of zero.
    Dirichlet(BoundaryData),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub reconstruction: Reconstruction,
    /// Relative residual accepted from the linear solves.
    pub tolerance: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            reconstruction: Reconstruction::Limited,
            tolerance: 1e-12,
        }
    }
}

/// Extra sources for one step: `s1` on cells, added after the last transport
/// substep, `s1_implicit` on cells and `s2` on `v`-faces inside the diffusion
/// solve (`n_x * (n_v + 1)` face entries, face `j` of column `ix` at
/// `ix * (n_v + 1) + j`).
#[derive(Clone, Copy, Debug)]
pub struct StepSources<'a> {
    pub s1: &'a [f64],
    pub s1_implicit: &'a [f64],
    pub s2: &'a [f64],
}

/// Largest stable time step `dx / v_max` for the transport substeps.
pub fn cfl_limit(grid: &SpaceGrid) -> f64 {
    grid.x.spacing() / grid.v.max_abs()
}

fn check_cfl(grid: &SpaceGrid, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("time step must be positive, got {dt}")));
    }
    let limit = cfl_limit(grid);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    Ok(())
}

/// Advances `state` by one step of length `dt`.
pub fn step(
    state: &PhaseField,
    a: &DiffusionField,
    g: &SourceField,
    dt: f64,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<PhaseField> {
    step_with(state, a, Some(g), dt, bc, params, None)
}

pub(crate) fn step_with(
    state: &PhaseField,
    a: &DiffusionField,
    g: Option<&SourceField>,
    dt: f64,
    bc: &BoundaryCondition,
    params: &SolverParams,
    extra: Option<StepSources<'_>>,
) -> Result<PhaseField> {
    let grid = state.grid;
    check_cfl(&grid, dt)?;
    let t0 = state.time;
    let mut u = state.values.clone();
    // boundary data are frozen at the start of the step since the source is
    // added at its end; the coefficient is sampled at the midpoint
    transport_half(&mut u, &grid, t0, 0.5 * dt, bc, params.reconstruction);
    diffuse(&mut u, &grid, a, t0, t0 + 0.5 * dt, dt, bc, params.tolerance, extra.map(|e| (e.s1_implicit, e.s2)))?;
    transport_half(&mut u, &grid, t0, 0.5 * dt, bc, params.reconstruction);
    let tm = t0 + 0.5 * dt;
    if let Some(g) = g.filter(|g| !g.is_zero()) {
        for ix in 0..grid.x.cells {
            let x = grid.x.center(ix);
            for iv in 0..grid.v.cells {
                u[grid.index(ix, iv)] += dt * g.eval(tm, x, grid.v.center(iv));
            }
        }
    }
    if let Some(e) = extra {
        for (ui, s) in u.iter_mut().zip(e.s1) {
            *ui += dt * s;
        }
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(PhaseField {
        grid,
        time: t0 + dt,
        values: u,
    })
}

fn transport_half(
    u: &mut [f64],
    grid: &SpaceGrid,
    t: f64,
    tau: f64,
    bc: &BoundaryCondition,
    rec: Reconstruction,
) {
    let (nx, nv) = (grid.x.cells, grid.v.cells);
    let dx = grid.x.spacing();
    let mut row = vec![0.0; nx];
    let mut ext = Vec::with_capacity(nx + 4);
    let ghost = |x: f64, v: f64| -> f64 {
        match bc {
            BoundaryCondition::Dirichlet(b) => (b.0)(t, x, v),
            _ => 0.0,
        }
    };
    for iv in 0..nv {
        let v = grid.v.center(iv);
        let c = v * tau / dx;
        if c == 0.0 {
            continue;
        }
        for ix in 0..nx {
            row[ix] = u[grid.index(ix, iv)];
        }
        let ends = match bc {
            BoundaryCondition::WholeSpace => RowEnds::Periodic,
            _ => {
                let (lo, hi) = (grid.x.lo, grid.x.hi);
                let inflow_left = [ghost(lo - 0.5 * dx, v), ghost(lo - 1.5 * dx, v)];
                let inflow_right = [ghost(hi + 0.5 * dx, v), ghost(hi + 1.5 * dx, v)];
                // the outflow side copies the last cell
                if c > 0.0 {
                    RowEnds::Ghost { left: inflow_left, right: [row[nx - 1]; 2] }
                } else {
                    RowEnds::Ghost { left: [row[0]; 2], right: inflow_right }
                }
            }
        };
        advect_row(&mut row, c, ends, rec, &mut ext);
        for ix in 0..nx {
            u[grid.index(ix, iv)] = row[ix];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn diffuse(
    u: &mut [f64],
    grid: &SpaceGrid,
    a: &DiffusionField,
    t_data: f64,
    t: f64,
    dt: f64,
    bc: &BoundaryCondition,
    tolerance: f64,
    sources: Option<(&[f64], &[f64])>,
) -> Result<()> {
    let (nx, nv) = (grid.x.cells, grid.v.cells);
    let dv = grid.v.spacing();
    let mut coef = vec![0.0; nv];
    let mut col = Column::default();
    for ix in 0..nx {
        let x = grid.x.center(ix);
        for (iv, c) in coef.iter_mut().enumerate() {
            *c = a.scalar(t, x, grid.v.center(iv));
        }
        let (lower_value, upper_value) = match bc {
            BoundaryCondition::Dirichlet(b) => ((b.0)(t_data, x, grid.v.lo), (b.0)(t_data, x, grid.v.hi)),
            _ => (0.0, 0.0),
        };
        let p = ColumnProblem {
            a: &coef,
            r: dt / (dv * dv),
            lower_value,
            upper_value,
            face_source: sources.map(|(_, s)| &s[ix * (nv + 1)..(ix + 1) * (nv + 1)]),
            face_scale: dt / dv,
            cell_source: sources.map(|(s, _)| &s[ix * nv..(ix + 1) * nv]),
            dt,
        };
        let start = grid.index(ix, 0);
        col.solve(&mut u[start..start + nv], &p, tolerance)?;
    }
    Ok(())
}

/// Mass, mean and covariance of a nonnegative density on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub mean: [f64; 2],
    /// `[[var x, cov xv], [cov xv, var v]]`.
    pub cov: [[f64; 2]; 2],
}

pub fn moments(f: &PhaseField) -> Moments {
    let g = &f.grid;
    let (mut m, mut sx, mut sv) = (0.0, 0.0, 0.0);
    for ix in 0..g.x.cells {
        let x = g.x.center(ix);
        for iv in 0..g.v.cells {
            let u = f.get(ix, iv);
            m += u;
            sx += u * x;
            sv += u * g.v.center(iv);
        }
    }
    let (mx, mv) = (sx / m, sv / m);
    let (mut xx, mut xv, mut vv) = (0.0, 0.0, 0.0);
    for ix in 0..g.x.cells {
        let dx = g.x.center(ix) - mx;
        for iv in 0..g.v.cells {
            let u = f.get(ix, iv);
            let dv = g.v.center(iv) - mv;
            xx += u * dx * dx;
            xv += u * dx * dv;
            vv += u * dv * dv;
        }
    }
    Moments {
        mass: m * g.cell_area(),
        mean: [mx, mv],
        cov: [[xx / m, xv / m], [xv / m, vv / m]],
    }
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    let n = (span / dt).round();
    if !(n >= 1.0) || (n * dt - span).abs() > 1e-9 * dt.max(span) {
        return Err(invalid(
            "dt",
            format!("time span {span} is not an integer number of steps of {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Integrates from `f0.time` to `t_end`, storing every step.
pub fn solve(
    f0: PhaseField,
    a: &DiffusionField,
    g: &SourceField,
    t_end: f64,
    dt: f64,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<Trajectory> {
    if !(t_end > f0.time) {
        return Err(invalid("t_end", format!("t_end = {t_end} must exceed t_start = {}", f0.time)));
    }
    let steps = step_count(t_end - f0.time, dt)?;
    check_cfl(&f0.grid, dt)?;
    let t0 = f0.time;
    let grid = f0.grid;
    let mut fields = Vec::with_capacity(steps + 1);
    fields.push(f0);
    for n in 0..steps {
        let mut next = step(&fields[n], a, g, dt, bc, params).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { step: n + 1 },
            other => other,
        })?;
        // keep slice times exact multiples of dt
        next.time = if n + 1 == steps { t_end } else { t0 + (n + 1) as f64 * dt };
        fields.push(next);
    }
    Trajectory::new(grid, dt, fields)
}

/// Zero-initial-data kinetic IBVP driven by per-slice sources.
///
/// `s1[n]`, `s1_implicit[n]` and `s2[n]` are the sources at slice time
/// `t0 + n dt`, placed as in [`StepSources`]; the step from slice `n` to
/// `n + 1` uses the sources of slice `n + 1`.
pub fn solve_sources_ibvp(
    grid: SpaceGrid,
    t0: f64,
    dt: f64,
    s1: &[Vec<f64>],
    s1_implicit: &[Vec<f64>],
    s2: &[Vec<f64>],
    a: &DiffusionField,
    params: &SolverParams,
) -> Result<Trajectory> {
    if s1.len() != s2.len() || s1.len() != s1_implicit.len() || s1.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} face source slices", s1.len()),
            found: format!("{}", s2.len()),
        });
    }
    let faces = grid.x.cells * (grid.v.cells + 1);
    if let Some(bad) = s1.iter().chain(s1_implicit).find(|s| s.len() != grid.len()) {
        return Err(Error::ShapeMismatch { expected: grid.len().to_string(), found: bad.len().to_string() });
    }
    if let Some(bad) = s2.iter().find(|s| s.len() != faces) {
        return Err(Error::ShapeMismatch { expected: faces.to_string(), found: bad.len().to_string() });
    }
    let mut fields = vec![PhaseField::zeros(grid, t0)];
    let bc = BoundaryCondition::KineticIbvp;
    for n in 1..s1.len() {
        let extra = StepSources { s1: &s1[n], s1_implicit: &s1_implicit[n], s2: &s2[n] };
        let mut next = step_with(&fields[n - 1], a, None, dt, &bc, params, Some(extra))
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite { step: n },
                other => other,
            })?;
        next.time = t0 + n as f64 * dt;
        fields.push(next);
    }
    Trajectory::new(grid, dt, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_diffusion, build_source, DiffusionSpec, SourceSpec};
    use crate::geometry::Axis;

    fn grid(n: usize) -> SpaceGrid {
        SpaceGrid::new(Axis::symmetric(1.5, n).unwrap(), Axis::symmetric(1.5, n).unwrap())
    }

    fn rough() -> DiffusionField {
        build_diffusion(1, 2.0, &DiffusionSpec::Checkerboard { low: 0.6, high: 1.5, cell: 0.3, offset: None }).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        // zero Dirichlet in v breaks constancy near the v faces, so use the IBVP
        // with matching boundary data
        let g = grid(16);
        let f = PhaseField::from_fn(g, 0.0, |_, _| 0.7);
        let bc = BoundaryCondition::Dirichlet(BoundaryData(Arc::new(|_, _, _| 0.7)));
        let out = step(&f, &rough(), &SourceField::zero(), 1.0 / 32.0, &bc, &SolverParams::default()).unwrap();
        for u in &out.values {
            assert!((u - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_source_gives_linear_growth() {
        let g = grid(16);
        let f0 = PhaseField::zeros(g, 0.0);
        let one = build_source(&SourceSpec::Constant { value: 1.0 }).unwrap();
        let a = DiffusionField::identity(1, 2.0).unwrap();
        let bc = BoundaryCondition::Dirichlet(BoundaryData(Arc::new(|t, _, _| t)));
        let traj = solve(f0, &a, &one, 0.5, 1.0 / 32.0, &bc, &SolverParams::default()).unwrap();
        for f in &traj.fields {
            for u in &f.values {
                assert!((u - f.time).abs() < 1e-12, "{u} vs {}", f.time);
            }
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = grid(16);
        let f0 = PhaseField::zeros(g, 0.0);
        let a = DiffusionField::identity(1, 2.0).unwrap();
        let err = step(&f0, &a, &SourceField::zero(), 0.2, &BoundaryCondition::WholeSpace, &SolverParams::default());
        assert!(matches!(err, Err(Error::Cfl { .. })));
    }

    #[test]
    fn zero_sources_give_zero_barrier() {
        let g = grid(8);
        let s1 = vec![vec![0.0; g.len()]; 5];
        let s2 = vec![vec![0.0; 8 * 9]; 5];
        let a = rough();
        let traj = solve_sources_ibvp(g, -1.0, 1.0 / 32.0, &s1, &s1, &s2, &a, &SolverParams::default()).unwrap();
        assert!(traj.fields.iter().all(|f| f.values.iter().all(|&u| u == 0.0)));
    }
}
