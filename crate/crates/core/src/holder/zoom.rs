use std::sync::Arc;

use crate::coefficients::{DiffusionField, SourceField};
use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::{Axis, SpaceGrid};
use crate::solver::{step, BoundaryCondition, BoundaryData, SolverParams};

use super::scaling::ScalingMap;

/// Offsets below this fraction of a cell are treated as grid nodes.
const SNAP: f64 = 1e-9;

/// Space grid and time slices `t0 + n dt`, `n = 0..=steps`, of a zoomed field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoomTarget {
    pub grid: SpaceGrid,
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl ZoomTarget {
    pub fn like(traj: &Trajectory) -> Self {
        Self { grid: traj.grid, t0: traj.fields[0].time, dt: traj.dt, steps: traj.len() - 1 }
    }

    /// `[-1, 1]^2` in `(y, ξ)` over `s ∈ [-3/2, 0]`.
    pub fn unit_box(cells: usize, steps: usize) -> Result<Self> {
        let axis = Axis::symmetric(1.0, cells)?;
        Ok(Self { grid: SpaceGrid::new(axis, axis), t0: -1.5, dt: 1.5 / steps as f64, steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        let t = self.t0 + n as f64 * self.dt;
        if t.abs() < 1e-9 * self.dt {
            0.0
        } else {
            t
        }
    }
}

/// Lower index and weight of the upper neighbour; nodes get weight 0 or 1.
fn locate(idx: f64, n: usize) -> Option<(usize, f64)> {
    let r = idx.round();
    let snapped = (idx - r).abs() < SNAP;
    let idx = if snapped { r } else { idx };
    if idx < 0.0 || idx > (n - 1) as f64 {
        return None;
    }
    let i = (idx.floor() as usize).min(n.saturating_sub(2));
    let w = idx - i as f64;
    Some((i, w))
}

/// Trilinear sampling of a trajectory between stored slices and cell centers.
#[derive(Clone, Copy, Debug)]
pub struct Sampler<'a> {
    traj: &'a Trajectory,
}

/// A sampled value and whether it needed interpolation, with the spread of the
/// corner values used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub on_node: bool,
    pub spread: f64,
}

impl<'a> Sampler<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        Self { traj }
    }

    pub fn sample(&self, t: f64, x: f64, v: f64) -> Option<Sample> {
        let tr = self.traj;
        let g = &tr.grid;
        let t_idx = (t - tr.fields[0].time) / tr.dt;
        let (it, wt) = locate(t_idx, tr.len())?;
        let (ix, wx) = locate(g.x.fractional_index(x), g.x.cells)?;
        let (iv, wv) = locate(g.v.fractional_index(v), g.v.cells)?;
        let mut value = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (dt, ct) in [(0, 1.0 - wt), (1, wt)] {
            if ct == 0.0 {
                continue;
            }
            let f = &tr.fields[it + dt].values;
            for (dx, cx) in [(0, 1.0 - wx), (1, wx)] {
                if cx == 0.0 {
                    continue;
                }
                for (dv, cv) in [(0, 1.0 - wv), (1, wv)] {
                    if cv == 0.0 {
                        continue;
                    }
                    let u = f[g.index(ix + dx, iv + dv)];
                    value += ct * cx * cv * u;
                    lo = lo.min(u);
                    hi = hi.max(u);
                }
            }
        }
        Some(Sample { value, on_node: [wt, wx, wv].iter().all(|&w| w == 0.0 || w == 1.0), spread: hi - lo })
    }
}

fn domain_error(traj: &Trajectory, map: &ScalingMap, target: &ZoomTarget) -> Error {
    let g = &target.grid;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in [target.t0, target.time(target.steps)] {
        for y in [g.x.center(0), g.x.center(g.x.cells - 1)] {
            for xi in [g.v.center(0), g.v.center(g.v.cells - 1)] {
                let p = map.apply(s, y, xi);
                for (k, c) in [p.0, p.1, p.2].into_iter().enumerate() {
                    lo[k] = lo[k].min(c);
                    hi[k] = hi[k].max(c);
                }
            }
        }
    }
    let (t0, t1) = traj.time_span();
    let src = &traj.grid;
    Error::Coverage(format!(
        "zoom needs t in [{}, {}], x in [{}, {}], v in [{}, {}]; samples cover t in [{t0}, {t1}], x in [{}, {}], v in [{}, {}]",
        lo[0],
        hi[0],
        lo[1],
        hi[1],
        lo[2],
        hi[2],
        src.x.center(0),
        src.x.center(src.x.cells - 1),
        src.v.center(0),
        src.v.center(src.v.cells - 1)
    ))
}

/// `F ∘ T` sampled on the target nodes, with the largest corner spread of any
/// interpolated sample (0 when every sample falls on a node).
pub fn zoom_field(traj: &Trajectory, map: &ScalingMap, target: &ZoomTarget) -> Result<(Trajectory, f64)> {
    let sampler = Sampler::new(traj);
    let g = target.grid;
    let mut spread = 0.0f64;
    let mut fields = Vec::with_capacity(target.steps + 1);
    for n in 0..=target.steps {
        let s = target.time(n);
        let mut values = Vec::with_capacity(g.len());
        for ix in 0..g.x.cells {
            let y = g.x.center(ix);
            for iv in 0..g.v.cells {
                let (t, x, v) = map.apply(s, y, g.v.center(iv));
                let p = sampler.sample(t, x, v).ok_or_else(|| domain_error(traj, map, target))?;
                if !p.on_node {
                    spread = spread.max(p.spread);
                }
                values.push(p.value);
            }
        }
        fields.push(PhaseField::new(g, s, values)?);
    }
    Ok((Trajectory::new(g, target.dt, fields)?, spread))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoomResidual {
    /// Largest one-step defect of the zoomed samples under the zoomed equation.
    pub max_residual: f64,
    pub interpolation_tol: f64,
    pub scheme_tol: f64,
}

impl ZoomResidual {
    pub fn node_aligned(&self) -> bool {
        self.interpolation_tol == 0.0
    }

    pub fn passes(&self) -> bool {
        self.max_residual <= self.interpolation_tol + self.scheme_tol
    }
}

pub struct ZoomedTriple {
    pub f: Trajectory,
    pub a: Arc<DiffusionField>,
    pub g: Arc<SourceField>,
    pub residual: ZoomResidual,
}

/// Zooms a solution together with its coefficient and source and measures how
/// far the zoomed samples are from solving the zoomed equation.
///
/// Each zoomed slice is advanced by one solver step with `(a ∘ T, ε^2 g ∘ T)`
/// under `bc` and compared with the next zoomed slice. When the target nodes map
/// onto nodes of a solver run, the steps coincide up to rounding.
pub fn zoom(
    traj: &Trajectory,
    map: &ScalingMap,
    a: &Arc<DiffusionField>,
    g: &Arc<SourceField>,
    target: &ZoomTarget,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<ZoomedTriple> {
    let (f, spread) = zoom_field(traj, map, target)?;
    let az = Arc::new(a.zoomed(*map)?);
    let gz = Arc::new(g.zoomed(*map));
    let scale = 1.0 + f.max().abs().max(f.min().abs());
    let mut max_residual = 0.0f64;
    for n in 0..target.steps {
        let next = step(&f.fields[n], &az, &gz, target.dt, bc, params)?;
        for (u, w) in next.values.iter().zip(&f.fields[n + 1].values) {
            max_residual = max_residual.max((u - w).abs());
        }
    }
    let residual = ZoomResidual {
        max_residual,
        // one step of a monotone scheme moves an interpolation error by at most its size
        interpolation_tol: 2.0 * spread,
        scheme_tol: 1e-10 * scale,
    };
    Ok(ZoomedTriple { f, a: az, g: gz, residual })
}

/// Largest difference between zooming twice (by `outer` then `inner`) and
/// zooming once by the composed map, on the common target.
pub fn composition_defect(
    traj: &Trajectory,
    outer: &ScalingMap,
    middle: &ZoomTarget,
    inner: &ScalingMap,
    target: &ZoomTarget,
) -> Result<f64> {
    let (once, _) = zoom_field(traj, outer, middle)?;
    let (twice, _) = zoom_field(&once, inner, target)?;
    let (direct, _) = zoom_field(traj, &outer.then(inner)?, target)?;
    let mut worst = 0.0f64;
    for (a, b) in twice.fields.iter().zip(&direct.fields) {
        for (u, w) in a.values.iter().zip(&b.values) {
            worst = worst.max((u - w).abs());
        }
    }
    Ok(worst)
}

/// Dirichlet data for a zoomed run: the source trajectory sampled at the mapped
/// point, `NaN` outside its samples.
pub fn pullback_boundary(source: Arc<Trajectory>, map: ScalingMap) -> BoundaryCondition {
    BoundaryCondition::Dirichlet(BoundaryData(Arc::new(move |s, y, xi| {
        let (t, x, v) = map.apply(s, y, xi);
        Sampler::new(&source).sample(t, x, v).map_or(f64::NAN, |p| p.value)
    })))
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega < 0.5) {
        return Err(invalid("omega", format!("need 0 < omega < 1/2 for N = 1, got {omega}")));
    }
    Ok(())
}
