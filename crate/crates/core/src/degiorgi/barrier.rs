use crate::coefficients::{DiffusionField, SourceField};
use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::{smoothstep, smoothstep_slope, DyadicLevel, SpaceGrid};
use crate::solver::{comparison_check, harmonic, solve_sources_ibvp, SolverParams};

use super::truncation::truncation_energy;

/// How the barrier data are started at `T_{k-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BarrierVariant {
    /// `F_k = ζ(t) η_k(x) η_k(v)^2 f_k` with a smooth time cutoff `ζ` rising from
    /// 0 at `T_{k-1}` to 1 at `T_k`, so that zero initial data are compatible.
    /// The sources carry the extra term `ζ' η η^2 f_k`; `F_k` is unchanged on `(T_k, 0)`.
    #[default]
    TimeCutoff,
    /// `F_k = η_k(x) η_k(v)^2 f_k` without a time cutoff.
    Literal,
}

/// Sources of the barrier problem on the sub-grid covering `B_{k-1}^2`.
#[derive(Clone, Debug)]
pub struct BarrierSources {
    pub k: u32,
    pub variant: BarrierVariant,
    pub grid: SpaceGrid,
    pub t0: f64,
    pub dt: f64,
    /// Cell sources per slice added after the step: the source indicator,
    /// the time cutoff and the second half of the `x`-cutoff term.
    pub s1: Vec<Vec<f64>>,
    /// Cell sources per slice entering the diffusion solve: the product-rule
    /// cross term and the first half of the `x`-cutoff term. `S_{k,1}` is
    /// `s1 + s1_implicit`.
    pub s1_implicit: Vec<Vec<f64>>,
    /// `v`-face fluxes per slice, `n_x * (n_v + 1)` entries.
    pub s2: Vec<Vec<f64>>,
    /// The function the barrier must dominate.
    pub f_k: Trajectory,
    pub norms: SourceNorms,
}

/// `L^2(Q_{k-1})` norms of the sources and the bounds they must satisfy.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceNorms {
    pub s1: f64,
    pub s2: f64,
    /// Norm of the source-indicator part `g 1_{f > C_k} η η^2`.
    pub g1: f64,
    pub fk: f64,
    /// Face gradient of `f_k` extended by zero outside the sub-grid.
    pub grad_fk: f64,
    pub u_prev: f64,
    /// `max |η_k'| · |v|_max ||f_k|| + 2 max|η_k'| Λ ||D f_k|| + ||g1|| + max|ζ'| ||f_k||`.
    pub s1_bound: f64,
    /// `2 max|η_k'| Λ ||f_k||`.
    pub s2_bound: f64,
    /// `2^{k+3} Λ ||f_k||`.
    pub s2_bound_dyadic: f64,
    /// `||g1|| + 2^{k+1}(3√3 + 4Λ^{3/2}) U_{k-1}^{1/2}` plus the time-cutoff term.
    pub s1_bound_energy: f64,
    /// `2^{k+3} √3 Λ U_{k-1}^{1/2}`.
    pub s2_bound_energy: f64,
}

impl SourceNorms {
    pub fn within_bounds(&self) -> bool {
        let s = 1.0 + 1e-12;
        self.s1 <= self.s1_bound * s && self.s2 <= self.s2_bound * s && self.s2 <= self.s2_bound_dyadic * s
    }

    pub fn within_energy_bounds(&self) -> bool {
        let s = 1.0 + 1e-12;
        self.s1 <= self.s1_bound_energy * s && self.s2 <= self.s2_bound_energy * s
    }
}

/// Assembles `S_{k,1}` and `S_{k,2}` from a trajectory covering `(T_{k-1}, 0) x B_{k-1}^2`.
///
/// The splitting follows the discrete product rule of the diffusion operator:
/// with face means `m(f)` and face differences `D`, the diffusion of
/// `φ f` equals `φ` times the diffusion of `f`, plus the cell average of
/// `a D f D φ`, plus the divergence of `a m(f) D φ`. Beyond the `v` faces `f`
/// and `φ` are zero; there the face mean of `f` is its inner value.
///
/// The diffusion is implicit, so the product-rule terms are placed inside its
/// solve; the `x`-cutoff term is split between the two transport half steps.
pub fn build_barrier_sources(
    traj: &Trajectory,
    k: u32,
    a: &DiffusionField,
    g: &SourceField,
    variant: BarrierVariant,
) -> Result<BarrierSources> {
    if k == 0 {
        return Err(invalid("k", "barrier sources need k >= 1"));
    }
    let level = DyadicLevel::new(k as i64)?;
    let (tk, _, ck) = level.params();
    let t_start = level.previous_t();
    let r = level.outer_radius();
    let (sub, ox, ov) = traj.grid.restrict(r, r)?;
    let n0 = traj
        .slice_at(t_start)
        .ok_or_else(|| Error::Coverage(format!("no stored slice at T_(k-1) = {t_start}")))?;
    if traj.time_span().1.abs() > 1e-9 * traj.dt {
        return Err(Error::Coverage("trajectory must end at t = 0".into()));
    }
    let eta = level.cutoff();
    let (nx, nv) = (sub.x.cells, sub.v.cells);
    let (dx, dv) = (sub.x.spacing(), sub.v.spacing());
    let ex: Vec<f64> = sub.x.centers().iter().map(|x| eta.profile(x.abs())).collect();
    let dex: Vec<f64> = sub.x.centers().iter().map(|&x| eta.derivative_1d(x)).collect();
    let ev: Vec<f64> = sub.v.centers().iter().map(|v| eta.profile(v.abs())).collect();
    let span = tk - t_start;
    let zeta = |t: f64| match variant {
        BarrierVariant::TimeCutoff => smoothstep((t - t_start) / span),
        BarrierVariant::Literal => 1.0,
    };
    let dzeta = |t: f64| match variant {
        BarrierVariant::TimeCutoff => smoothstep_slope((t - t_start) / span) / span,
        BarrierVariant::Literal => 0.0,
    };

    let mut s1_all = Vec::new();
    let mut s1_imp_all = Vec::new();
    let mut s2_all = Vec::new();
    let mut fk_fields = Vec::new();
    let (mut n_s1, mut n_s2, mut n_g1, mut n_fk, mut n_grad) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let nvf = nv + 1;
    let mut fk = vec![0.0; sub.len()];
    let mut af = vec![0.0; nvf];
    let mut dphi = vec![0.0; nvf];
    let mut df = vec![0.0; nvf];
    for (slot, field) in traj.fields[n0..].iter().enumerate() {
        let t = field.time;
        let (z, dz) = (zeta(t), dzeta(t));
        // the step ending at `t` samples the coefficient and source at its midpoint
        let tm = t - 0.5 * traj.dt;
        for ix in 0..nx {
            for iv in 0..nv {
                let u = field.values[traj.grid.index(ix + ox, iv + ov)];
                fk[ix * nv + iv] = (u - ck).max(0.0);
            }
        }
        let mut s1 = vec![0.0; sub.len()];
        let mut s1_imp = vec![0.0; sub.len()];
        let mut s2 = vec![0.0; nx * nvf];
        let mut g1_sq = 0.0;
        for ix in 0..nx {
            let x = sub.x.center(ix);
            let col = &fk[ix * nv..(ix + 1) * nv];
            let phi = |iv: usize| ex[ix] * ev[iv] * ev[iv];
            let a_cell: Vec<f64> = (0..nv).map(|iv| a.scalar(tm, x, sub.v.center(iv))).collect();
            for j in 0..nvf {
                let (lo, hi) = (j.checked_sub(1), (j < nv).then_some(j));
                let (p_lo, f_lo) = lo.map_or((0.0, 0.0), |i| (phi(i), col[i]));
                let (p_hi, f_hi) = hi.map_or((0.0, 0.0), |i| (phi(i), col[i]));
                let (dist, mean_f, coef) = match (lo, hi) {
                    (Some(i), Some(l)) => (dv, 0.5 * (col[i] + col[l]), harmonic(a_cell[i], a_cell[l])),
                    (None, Some(l)) => (0.5 * dv, col[l], a_cell[l]),
                    (Some(i), None) => (0.5 * dv, col[i], a_cell[i]),
                    (None, None) => unreachable!(),
                };
                af[j] = coef;
                dphi[j] = (p_hi - p_lo) / dist;
                df[j] = (f_hi - f_lo) / dist;
                s2[ix * nvf + j] = -z * coef * mean_f * dphi[j];
                let w = if lo.is_some() && hi.is_some() { dv } else { 0.5 * dv };
                n_grad += df[j] * df[j] * w * dx;
                n_s2 += s2[ix * nvf + j].powi(2) * w * dx;
            }
            for iv in 0..nv {
                let v = sub.v.center(iv);
                let w = col[iv];
                let cross = 0.5 * (af[iv] * df[iv] * dphi[iv] + af[iv + 1] * df[iv + 1] * dphi[iv + 1]);
                let src = if w > 0.0 && !g.is_zero() { g.eval(tm, x, v) * phi(iv) } else { 0.0 };
                let xcut = 0.5 * z * w * ev[iv] * ev[iv] * v * dex[ix];
                let explicit = z * src + xcut + dz * w * phi(iv);
                let implicit = xcut - z * cross;
                s1[ix * nv + iv] = explicit;
                s1_imp[ix * nv + iv] = implicit;
                let value = explicit + implicit;
                g1_sq += (z * src).powi(2);
                n_s1 += value * value * dx * dv;
                n_fk += w * w * dx * dv;
            }
        }
        // slot 0 is the initial slice T_{k-1}, which owns no space-time cell
        if slot == 0 {
            n_s1 = 0.0;
            n_s2 = 0.0;
            n_fk = 0.0;
            n_grad = 0.0;
        } else {
            n_g1 += g1_sq * dx * dv;
        }
        fk_fields.push(PhaseField {
            grid: sub,
            time: t,
            values: (0..sub.len())
                .map(|i| z * fk[i] * ex[i / nv] * ev[i % nv] * ev[i % nv])
                .collect(),
        });
        s1_all.push(s1);
        s1_imp_all.push(s1_imp);
        s2_all.push(s2);
    }
    let dt = traj.dt;
    let (s1n, s2n, g1n, fkn, gradn) = (
        (n_s1 * dt).sqrt(),
        (n_s2 * dt).sqrt(),
        (n_g1 * dt).sqrt(),
        (n_fk * dt).sqrt(),
        (n_grad * dt).sqrt(),
    );
    let lambda = a.lambda();
    let slope = eta.max_slope();
    let time_slope = match variant {
        BarrierVariant::TimeCutoff => 1.875 / span,
        BarrierVariant::Literal => 0.0,
    };
    let u_prev = truncation_energy(traj, k - 1, lambda)?.u_k;
    let pk = 2f64.powi(k as i32);
    let norms = SourceNorms {
        s1: s1n,
        s2: s2n,
        g1: g1n,
        fk: fkn,
        grad_fk: gradn,
        u_prev,
        s1_bound: g1n + slope * sub.v.max_abs() * fkn + 2.0 * slope * lambda * gradn + time_slope * fkn,
        s2_bound: 2.0 * slope * lambda * fkn,
        s2_bound_dyadic: 8.0 * pk * lambda * fkn,
        s1_bound_energy: g1n
            + 2.0 * pk * (3.0 * 3f64.sqrt() + 4.0 * lambda.powf(1.5)) * u_prev.sqrt()
            + time_slope * (3.0 * u_prev).sqrt(),
        s2_bound_energy: 8.0 * pk * 3f64.sqrt() * lambda * u_prev.sqrt(),
    };
    Ok(BarrierSources {
        k,
        variant,
        grid: sub,
        t0: t_start,
        dt,
        s1: s1_all,
        s1_implicit: s1_imp_all,
        s2: s2_all,
        f_k: Trajectory::new(sub, dt, fk_fields)?,
        norms,
    })
}

/// Solution of the barrier problem driven by `sources`.
pub fn solve_barrier(sources: &BarrierSources, a: &DiffusionField, params: &SolverParams) -> Result<Trajectory> {
    solve_sources_ibvp(sources.grid, sources.t0, sources.dt, &sources.s1, &sources.s1_implicit, &sources.s2, a, params)
}

#[derive(Clone, Debug)]
pub struct BarrierComparison {
    pub k: u32,
    pub variant: BarrierVariant,
    /// `min (G_k - F_k)` over all nodes of `[T_{k-1}, 0] x B_{k-1}^2`.
    pub min_gap: f64,
    /// Same restricted to slices in `[T_k, 0]`.
    pub min_gap_late: f64,
    pub min_fk: f64,
    pub max_fk: f64,
    pub min_gk: f64,
    pub norms: SourceNorms,
    pub f_k: Trajectory,
    pub g_k: Trajectory,
}

impl BarrierComparison {
    /// `G_k - F_k` at every node.
    pub fn gap(&self) -> Trajectory {
        let mut out = self.g_k.clone();
        for (o, f) in out.fields.iter_mut().zip(&self.f_k.fields) {
            for (x, y) in o.values.iter_mut().zip(&f.values) {
                *x -= y;
            }
        }
        out
    }
}

/// Builds the sources, solves the barrier problem and compares `F_k` with `G_k`.
pub fn barrier_comparison(
    traj: &Trajectory,
    k: u32,
    a: &DiffusionField,
    g: &SourceField,
    variant: BarrierVariant,
    params: &SolverParams,
) -> Result<BarrierComparison> {
    let sources = build_barrier_sources(traj, k, a, g, variant)?;
    let g_k = solve_barrier(&sources, a, params)?;
    let min_gap = comparison_check(&sources.f_k, &g_k)?;
    let tk = DyadicLevel::new(k as i64)?.t();
    let mut min_gap_late = f64::INFINITY;
    for (f, gg) in sources.f_k.fields.iter().zip(&g_k.fields) {
        if f.time >= tk - 1e-9 * traj.dt {
            for (x, y) in f.values.iter().zip(&gg.values) {
                min_gap_late = min_gap_late.min(y - x);
            }
        }
    }
    Ok(BarrierComparison {
        k,
        variant,
        min_gap,
        min_gap_late,
        min_fk: sources.f_k.min(),
        max_fk: sources.f_k.max(),
        min_gk: g_k.min(),
        norms: sources.norms,
        f_k: sources.f_k,
        g_k,
    })
}

/// Largest difference between the coarse gap `G_k - F_k` and the fine gap
/// averaged over each coarse cell, at the common slices. The fine run must
/// halve both spacings and the time step.
pub fn refinement_difference(coarse: &BarrierComparison, fine: &BarrierComparison) -> Result<f64> {
    let (cg, fg) = (coarse.gap(), fine.gap());
    let (c, f) = (&cg.grid, &fg.grid);
    if f.x.cells != 2 * c.x.cells || f.v.cells != 2 * c.v.cells || (fg.dt * 2.0 - cg.dt).abs() > 1e-12 * cg.dt {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {} cells at dt = {}", 2 * c.x.cells, 2 * c.v.cells, cg.dt / 2.0),
            found: format!("{} x {} cells at dt = {}", f.x.cells, f.v.cells, fg.dt),
        });
    }
    let mut worst = 0.0f64;
    for (n, cs) in cg.fields.iter().enumerate() {
        let Some(fs) = fg.fields.get(2 * n) else {
            return Err(Error::Coverage("fine run has fewer slices".into()));
        };
        for ix in 0..c.x.cells {
            for iv in 0..c.v.cells {
                let avg = 0.25
                    * (fs.get(2 * ix, 2 * iv)
                        + fs.get(2 * ix + 1, 2 * iv)
                        + fs.get(2 * ix, 2 * iv + 1)
                        + fs.get(2 * ix + 1, 2 * iv + 1));
                worst = worst.max((cs.get(ix, iv) - avg).abs());
            }
        }
    }
    Ok(worst)
}
