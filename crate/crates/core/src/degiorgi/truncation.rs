use crate::error::{Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::{level_set_measure, region_cells, Cylinder, DyadicLevel, Threshold};
use crate::solver::column_gradient_energy;

/// `f_k = (f - C_k)_+`.
pub fn truncate(f: &PhaseField, k: u32) -> Result<PhaseField> {
    let c = DyadicLevel::new(k as i64)?.level();
    Ok(f.map(|u| (u - c).max(0.0)))
}

/// `Q_{k-1}`, with `Q_{-1} = Q[3/2]`.
pub fn previous_cylinder(level: DyadicLevel) -> Result<Cylinder> {
    let r = level.outer_radius();
    Cylinder::shifted(1, -r, 0.0, r, r)
}

/// `sum over space-time cells of region of h(value)`, weighted by the cell volume.
pub(crate) fn cylinder_integral(traj: &Trajectory, region: &Cylinder, h: impl Fn(f64) -> f64) -> f64 {
    let w = traj.grid.cell_area() * traj.dt;
    let mut acc = 0.0;
    for f in traj.fields.iter().skip(1) {
        if region.holds_slice(f.time) {
            acc += region_cells(&traj.grid, region).map(|i| h(f.values[i])).sum::<f64>();
        }
    }
    acc * w
}

/// `int_region |D_v u|^2` over faces between cells of the region, `u = (f - c)_+`.
fn cylinder_gradient(traj: &Trajectory, region: &Cylinder, c: f64) -> f64 {
    let g = &traj.grid;
    let (nv, dv) = (g.v.cells, g.v.spacing());
    let vin: Vec<usize> = (0..nv).filter(|&iv| g.v.center(iv).abs() < region.v_radius).collect();
    let mut acc = 0.0;
    for f in traj.fields.iter().skip(1) {
        if !region.holds_slice(f.time) {
            continue;
        }
        for ix in 0..g.x.cells {
            if g.x.center(ix).abs() >= region.x_radius {
                continue;
            }
            for w in vin.windows(2) {
                let a = (f.values[ix * nv + w[0]] - c).max(0.0);
                let b = (f.values[ix * nv + w[1]] - c).max(0.0);
                acc += (b - a) * (b - a) / dv;
            }
        }
    }
    acc * g.x.spacing() * traj.dt
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    pub k: u32,
    pub u_k: f64,
    /// `sup_t ½∬ η_k(x) η_k(v)^2 f_k^2` over stored slices in `[T_k, 0]`.
    pub sup_energy: f64,
    /// `(1/Λ) ∫_{T_k}^0 ∬ η_k(x) |D_v(η_k(v) f_k)|^2`.
    pub dissipation: f64,
    /// `|{f_k > 0} ∩ Q_{k-1}|`.
    pub level_set_measure: f64,
    pub fk_l2_qk: f64,
    pub fk_l2_qprev: f64,
    pub grad_fk_l2_qk: f64,
    pub grad_fk_l2_qprev: f64,
}

fn check_span(traj: &Trajectory, from: f64) -> Result<()> {
    let (t0, t1) = traj.time_span();
    if t0 > from + 1e-9 * traj.dt || t1 < -1e-9 * traj.dt {
        return Err(Error::Coverage(format!(
            "trajectory spans [{t0}, {t1}] but [{from}, 0] is required"
        )));
    }
    Ok(())
}

/// `U_k` and the accompanying norms for level `k >= 0`.
pub fn truncation_energy(traj: &Trajectory, k: u32, lambda: f64) -> Result<TruncationReport> {
    let level = DyadicLevel::new(k as i64)?;
    let (tk, _, c) = level.params();
    check_span(traj, tk)?;
    let g = &traj.grid;
    let eta = level.cutoff();
    let ex: Vec<f64> = g.x.centers().iter().map(|x| eta.profile(x.abs())).collect();
    let ev: Vec<f64> = g.v.centers().iter().map(|v| eta.profile(v.abs())).collect();
    let nv = g.v.cells;
    let area = g.cell_area();
    let (dx, dv) = (g.x.spacing(), g.v.spacing());
    let mut sup_energy = 0.0f64;
    let mut dissipation = 0.0;
    let mut column = vec![0.0; nv];
    for f in &traj.fields {
        if f.time < tk - 1e-9 * traj.dt || f.time > 1e-9 * traj.dt {
            continue;
        }
        let mut e = 0.0;
        let mut d = 0.0;
        for ix in 0..g.x.cells {
            if ex[ix] == 0.0 {
                continue;
            }
            for iv in 0..nv {
                let w = (f.values[ix * nv + iv] - c).max(0.0);
                e += ex[ix] * ev[iv] * ev[iv] * w * w;
                column[iv] = ev[iv] * w;
            }
            d += ex[ix] * column_gradient_energy(&column, dv) * dx;
        }
        sup_energy = sup_energy.max(0.5 * e * area);
        // right-endpoint rule; the slice at T_k starts the integral
        if f.time > tk + 1e-9 * traj.dt {
            dissipation += traj.dt * d / lambda;
        }
    }
    let qk = Cylinder::dyadic(1, level)?;
    let qprev = previous_cylinder(level)?;
    let sq = |u: f64| {
        let w = (u - c).max(0.0);
        w * w
    };
    Ok(TruncationReport {
        k,
        u_k: sup_energy + dissipation,
        sup_energy,
        dissipation,
        level_set_measure: level_set_measure(traj, Threshold::Above(c), &qprev)?,
        fk_l2_qk: cylinder_integral(traj, &qk, sq).sqrt(),
        fk_l2_qprev: cylinder_integral(traj, &qprev, sq).sqrt(),
        grad_fk_l2_qk: cylinder_gradient(traj, &qk, c).sqrt(),
        grad_fk_l2_qprev: cylinder_gradient(traj, &qprev, c).sqrt(),
    })
}

/// Reports for levels `0..=k_max`.
pub fn truncation_sequence(traj: &Trajectory, k_max: u32, lambda: f64) -> Result<Vec<TruncationReport>> {
    (0..=k_max).map(|k| truncation_energy(traj, k, lambda)).collect()
}

/// Whether `U_k <= U_{k-1} + tol` along the sequence.
pub fn is_monotone(reports: &[TruncationReport], tol: f64) -> bool {
    reports.windows(2).all(|w| w[1].u_k <= w[0].u_k + tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevAudit {
    pub k: u32,
    /// `|{f_k > 0} ∩ Q_{k-1}|`.
    pub measure: f64,
    /// `2^{2k+2} ∫_{Q_{k-1}} f_{k-1}^2`.
    pub bound: f64,
    pub u_prev: f64,
    /// `3 · 2^{2k+2} U_{k-1}`, which follows from `∫ f^2 <= 2 |T_{k-1}| U_{k-1}`.
    pub chained: f64,
    /// `3 · 2^{2k+1} U_{k-1}`, the chained bound without the factor 2.
    pub chained_tight: f64,
    pub holds: bool,
    pub chain_holds: bool,
    pub tight_chain_holds: bool,
}

pub fn chebyshev_audit(traj: &Trajectory, k: u32, lambda: f64) -> Result<ChebyshevAudit> {
    if k == 0 {
        return Err(crate::error::invalid("k", "the level-set bound needs k >= 1"));
    }
    let level = DyadicLevel::new(k as i64)?;
    let prev = DyadicLevel::new(k as i64 - 1)?;
    let q = previous_cylinder(level)?;
    let measure = level_set_measure(traj, Threshold::Above(level.level()), &q)?;
    let cp = prev.level();
    let int_prev = cylinder_integral(traj, &q, |u| {
        let w = (u - cp).max(0.0);
        w * w
    });
    let factor = 2f64.powi(2 * k as i32 + 2);
    let bound = factor * int_prev;
    let u_prev = truncation_energy(traj, k - 1, lambda)?.u_k;
    let chained = 3.0 * factor * u_prev;
    let chained_tight = 1.5 * factor * u_prev;
    let slack = 1.0 + 1e-12;
    Ok(ChebyshevAudit {
        k,
        measure,
        bound,
        u_prev,
        chained,
        chained_tight,
        holds: measure <= bound * slack,
        chain_holds: bound <= chained * slack,
        tight_chain_holds: bound <= chained_tight * slack,
    })
}

/// Number of nodes with `f_k > 0` but `f_{k-1} <= 2^{-k-1}`; zero when nesting holds.
pub fn nesting_violations(f: &PhaseField, k: u32) -> Result<usize> {
    if k == 0 {
        return Ok(0);
    }
    let c = DyadicLevel::new(k as i64)?.level();
    let cp = DyadicLevel::new(k as i64 - 1)?.level();
    let gap = 2f64.powi(-(k as i32) - 1);
    Ok(f.values.iter().filter(|&&u| (u - c).max(0.0) > 0.0 && (u - cp).max(0.0) <= gap).count())
}

/// Largest `|D_v f_k| - |D_v f_{k-1}|` over all interior faces (nonpositive when
/// truncation does not steepen gradients).
pub fn gradient_excess(f: &PhaseField, k: u32) -> Result<f64> {
    if k == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let c = DyadicLevel::new(k as i64)?.level();
    let cp = DyadicLevel::new(k as i64 - 1)?.level();
    let g = &f.grid;
    let nv = g.v.cells;
    let mut worst = f64::NEG_INFINITY;
    for ix in 0..g.x.cells {
        for iv in 0..nv - 1 {
            let (a, b) = (f.values[ix * nv + iv], f.values[ix * nv + iv + 1]);
            let dk = ((b - c).max(0.0) - (a - c).max(0.0)).abs();
            let dp = ((b - cp).max(0.0) - (a - cp).max(0.0)).abs();
            worst = worst.max(dk - dp);
        }
    }
    Ok(worst)
}
