//! Energy ledgers and discrete energy inequalities.

use crate::coefficients::SourceField;
use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::{DyadicLevel, SpaceGrid};

use super::diffusion::column_gradient_energy;

/// `sum_x w(x) sum_faces |D_v u|^2 h dx` with zero values beyond the `v` faces.
pub fn weighted_gradient_energy(values: &[f64], grid: &SpaceGrid, x_weight: impl Fn(usize) -> f64) -> f64 {
    let nv = grid.v.cells;
    let dv = grid.v.spacing();
    let dx = grid.x.spacing();
    (0..grid.x.cells)
        .map(|ix| {
            let w = x_weight(ix);
            if w == 0.0 {
                0.0
            } else {
                w * column_gradient_energy(&values[ix * nv..(ix + 1) * nv], dv) * dx
            }
        })
        .sum()
}

fn source_norm(g: &SourceField, grid: &SpaceGrid, t: f64) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    PhaseField::from_fn(*grid, t, |x, v| g.eval(t, x, v)).l2_norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub time: f64,
    /// `||f(t)||^2 / 2`.
    pub half_norm_sq: f64,
    /// `(1/lambda) int_{t0}^t ||D_v f||^2`, right-endpoint rule.
    pub dissipation: f64,
    /// `int_{t0}^t ||g|| ||f||`, trapezoid rule.
    pub source_work: f64,
    /// Slack of the energy inequality on `[t0, t]`.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub entries: Vec<LedgerEntry>,
    /// Smallest slack over all sub-intervals `[t_a, t_b]` of stored slices.
    pub min_slack: f64,
    /// Scheme error estimate `(dt + dv^2) * scale`.
    pub tolerance: f64,
    pub scale: f64,
}

impl EnergyLedger {
    pub fn passes(&self, factor: f64) -> bool {
        self.min_slack >= -factor * self.tolerance
    }

    /// Whether `||f||` never increases by more than the tolerance.
    pub fn norm_non_increasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].half_norm_sq <= w[0].half_norm_sq + self.tolerance)
    }
}

/// Ledger of `½||f(t)||² + (1/Λ)∫||D_v f||² ≤ ½||f(t0)||² + ∫||g|| ||f||`.
pub fn energy_budget(traj: &Trajectory, g: &SourceField, lambda: f64) -> EnergyLedger {
    let grid = &traj.grid;
    let dt = traj.dt;
    let mut entries: Vec<LedgerEntry> = Vec::with_capacity(traj.len());
    let mut phi = Vec::with_capacity(traj.len());
    let mut prev_product = 0.0;
    for (n, f) in traj.fields.iter().enumerate() {
        let norm_sq = f.sum_squares();
        let product = source_norm(g, grid, f.time) * norm_sq.sqrt();
        let (dissipation, source_work) = match entries.last() {
            None => (0.0, 0.0),
            Some(prev) => (
                prev.dissipation + dt * weighted_gradient_energy(&f.values, grid, |_| 1.0) / lambda,
                prev.source_work + 0.5 * dt * (prev_product + product),
            ),
        };
        prev_product = product;
        let p = 0.5 * norm_sq + dissipation - source_work;
        phi.push(p);
        entries.push(LedgerEntry {
            time: f.time,
            half_norm_sq: 0.5 * norm_sq,
            dissipation,
            source_work,
            slack: phi[0] - p,
        });
        debug_assert_eq!(entries.len(), n + 1);
    }
    // the inequality on [t_a, t_b] reads phi(b) <= phi(a)
    let mut running_max = f64::NEG_INFINITY;
    let mut min_slack = f64::INFINITY;
    for &p in &phi {
        if running_max > f64::NEG_INFINITY {
            min_slack = min_slack.min(running_max - p);
        }
        running_max = running_max.max(p);
    }
    if !min_slack.is_finite() {
        min_slack = 0.0;
    }
    let scale = entries.iter().map(|e| e.half_norm_sq).fold(0.0, f64::max)
        + entries.last().map_or(0.0, |e| e.source_work);
    let tolerance = (dt + grid.v.spacing().powi(2)) * scale;
    EnergyLedger {
        entries,
        min_slack,
        tolerance,
        scale,
    }
}

/// The six integrals of the local energy inequality and its residual.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEnergyTerms {
    pub energy_t: f64,
    pub dissipation: f64,
    pub energy_s: f64,
    pub cutoff_term: f64,
    pub transport_term: f64,
    pub source_term: f64,
    /// Sum of absolute values, the scale for tolerances.
    pub magnitude: f64,
    /// Right side minus left side.
    pub residual: f64,
}

/// Evaluates the truncated local energy inequality for level `k` cutoffs,
/// truncation height `c`, between slices at times `s <= t`.
pub fn local_energy_check(
    traj: &Trajectory,
    g: &SourceField,
    k: u32,
    c: f64,
    lambda: f64,
    s: f64,
    t: f64,
) -> Result<LocalEnergyTerms> {
    if s > t {
        return Err(invalid("s", format!("need s <= t, got s = {s}, t = {t}")));
    }
    let find = |time: f64| {
        traj.slice_at(time)
            .ok_or_else(|| Error::Coverage(format!("no stored slice at t = {time}")))
    };
    let (ns, nt) = (find(s)?, find(t)?);
    let level = DyadicLevel::new(k as i64)?;
    let eta = level.cutoff();
    let grid = &traj.grid;
    let area = grid.cell_area();
    let ex: Vec<f64> = grid.x.centers().iter().map(|&x| eta.profile(x.abs())).collect();
    let dex: Vec<f64> = grid.x.centers().iter().map(|&x| eta.derivative_1d(x)).collect();
    let ev: Vec<f64> = grid.v.centers().iter().map(|&v| eta.profile(v.abs())).collect();
    let dev: Vec<f64> = grid.v.centers().iter().map(|&v| eta.derivative_1d(v)).collect();
    let nv = grid.v.cells;

    let weighted_energy = |f: &PhaseField| -> f64 {
        let mut acc = 0.0;
        for ix in 0..grid.x.cells {
            for iv in 0..nv {
                let w = (f.values[ix * nv + iv] - c).max(0.0);
                acc += ex[ix] * ev[iv] * ev[iv] * w * w;
            }
        }
        0.5 * acc * area
    };
    // per-slice integrands of the time integrals
    let slice_terms = |f: &PhaseField| -> (f64, f64, f64, f64) {
        let mut truncated = vec![0.0; f.values.len()];
        let (mut cut, mut tr, mut src) = (0.0, 0.0, 0.0);
        for ix in 0..grid.x.cells {
            let x = grid.x.center(ix);
            for iv in 0..nv {
                let v = grid.v.center(iv);
                let w = (f.values[ix * nv + iv] - c).max(0.0);
                truncated[ix * nv + iv] = ev[iv] * w;
                cut += ex[ix] * w * w * dev[iv] * dev[iv];
                tr += 0.5 * ev[iv] * ev[iv] * w * w * v * dex[ix];
                if w > 0.0 && !g.is_zero() {
                    src += g.eval(f.time, x, v) * w * ex[ix] * ev[iv] * ev[iv];
                }
            }
        }
        let diss = weighted_gradient_energy(&truncated, grid, |ix| ex[ix]);
        (diss, lambda * cut * area, tr * area, src * area)
    };

    let energy_t = weighted_energy(&traj.fields[nt]);
    let energy_s = weighted_energy(&traj.fields[ns]);
    let (mut dissipation, mut cutoff_term, mut transport_term, mut source_term) = (0.0, 0.0, 0.0, 0.0);
    let dt = traj.dt;
    let mut prev = slice_terms(&traj.fields[ns]);
    for n in ns + 1..=nt {
        let cur = slice_terms(&traj.fields[n]);
        dissipation += dt * cur.0 / lambda;
        cutoff_term += 0.5 * dt * (prev.1 + cur.1);
        transport_term += 0.5 * dt * (prev.2 + cur.2);
        source_term += 0.5 * dt * (prev.3 + cur.3);
        prev = cur;
    }
    let lhs = energy_t + dissipation;
    let rhs = energy_s + cutoff_term + transport_term + source_term;
    Ok(LocalEnergyTerms {
        energy_t,
        dissipation,
        energy_s,
        cutoff_term,
        transport_term,
        source_term,
        magnitude: energy_t + dissipation + energy_s + cutoff_term + transport_term.abs() + source_term.abs(),
        residual: rhs - lhs,
    })
}

/// Smallest value of `b - a` over all nodes.
pub fn comparison_check(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.grid != b.grid || a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} slices on {:?}", a.len(), a.grid),
            found: format!("{} slices on {:?}", b.len(), b.grid),
        });
    }
    let mut worst = f64::INFINITY;
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        if (fa.time - fb.time).abs() > 1e-9 * a.dt {
            return Err(Error::ShapeMismatch {
                expected: format!("slice time {}", fa.time),
                found: format!("{}", fb.time),
            });
        }
        for (x, y) in fa.values.iter().zip(&fb.values) {
            worst = worst.min(y - x);
        }
    }
    Ok(worst)
}
