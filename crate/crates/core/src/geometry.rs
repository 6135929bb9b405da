//! Phase-space grids, kinetic cylinders, dyadic levels and smooth cutoffs.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::field::Trajectory;

/// Slack used when deciding whether a node lies inside a half-open interval.
const MEMBERSHIP_SLACK: f64 = 1e-12;

/// A uniform cell-centered axis over `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(invalid("axis", format!("degenerate range [{lo}, {hi}]")));
        }
        if cells == 0 {
            return Err(invalid("axis", "zero cells"));
        }
        Ok(Self { lo, hi, cells })
    }

    /// Symmetric axis `[-r, r]`.
    pub fn symmetric(r: f64, cells: usize) -> Result<Self> {
        Self::new(-r, r, cells)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn len(&self) -> usize {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }

    pub fn face(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Largest `|x|` over the closed axis.
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Fractional index of `x` in center coordinates (center `i` maps to `i`).
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.lo) / self.spacing() - 0.5
    }
}

/// Uniform time slices `start + n dt` for `n = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAxis {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeAxis {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(invalid("time", format!("degenerate range [{start}, {end}]")));
        }
        if steps == 0 {
            return Err(invalid("time", "zero steps"));
        }
        Ok(Self { start, end, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.end
        } else {
            self.start + n as f64 * self.dt()
        }
    }
}

/// The `(x, v)` part of a phase grid. Values are stored with index `ix * n_v + iv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceGrid {
    pub x: Axis,
    pub v: Axis,
}

impl SpaceGrid {
    pub fn new(x: Axis, v: Axis) -> Self {
        Self { x, v }
    }

    pub fn len(&self) -> usize {
        self.x.cells * self.v.cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iv: usize) -> usize {
        ix * self.v.cells + iv
    }

    pub fn cell_area(&self) -> f64 {
        self.x.spacing() * self.v.spacing()
    }

    /// Sub-grid of the cells whose centers lie in `|x| < rx`, `|v| < rv`.
    /// Returns the sub-grid with the index offsets of its first cell.
    pub fn restrict(&self, rx: f64, rv: f64) -> Result<(SpaceGrid, usize, usize)> {
        let (x, ox) = restrict_axis(&self.x, rx)?;
        let (v, ov) = restrict_axis(&self.v, rv)?;
        Ok((SpaceGrid { x, v }, ox, ov))
    }
}

fn restrict_axis(axis: &Axis, r: f64) -> Result<(Axis, usize)> {
    let inside: Vec<usize> = (0..axis.cells)
        .filter(|&i| axis.center(i).abs() < r)
        .collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return Err(Error::Coverage(format!("no cell centers within radius {r}")));
    };
    let h = axis.spacing();
    let sub = Axis {
        lo: axis.face(first),
        hi: axis.face(last + 1),
        cells: last - first + 1,
    };
    debug_assert!((sub.spacing() - h).abs() < 1e-12 * h);
    Ok((sub, first))
}

/// A phase-space grid in one space and one velocity dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid {
    pub time: TimeAxis,
    pub space: SpaceGrid,
}

impl PhaseGrid {
    pub const MIN_RESOLUTION: usize = 4;

    pub fn new(time: TimeAxis, x: Axis, v: Axis) -> Result<Self> {
        for (name, n) in [("n_t", time.steps), ("n_x", x.cells), ("n_v", v.cells)] {
            if n < Self::MIN_RESOLUTION {
                return Err(invalid(
                    "grid",
                    format!("{name} = {n} is below the minimum resolution {}", Self::MIN_RESOLUTION),
                ));
            }
        }
        Ok(Self {
            time,
            space: SpaceGrid { x, v },
        })
    }

    /// Box `[t0, t1] x [-rx, rx] x [-rv, rv]` with `cells` cells per space axis.
    pub fn centered(t0: f64, t1: f64, steps: usize, rx: f64, rv: f64, cells: usize) -> Result<Self> {
        Self::new(
            TimeAxis::new(t0, t1, steps)?,
            Axis::symmetric(rx, cells)?,
            Axis::symmetric(rv, cells)?,
        )
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn dt(&self) -> f64 {
        self.time.dt()
    }

    /// Spacing of the coarsest axis.
    pub fn max_spacing(&self) -> f64 {
        self.space.x.spacing().max(self.space.v.spacing())
    }
}

/// Volume of the Euclidean ball of radius `r` in `R^dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => {
            let half = dim as f64 / 2.0;
            PI.powf(half) / gamma_half_integer(dim + 2) * r.powi(dim as i32)
        }
    }
}

// Gamma(m / 2) for a positive integer m.
fn gamma_half_integer(m: usize) -> f64 {
    let mut value = if m % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if m % 2 == 0 { 1.0 } else { 0.5 };
    while x < m as f64 / 2.0 - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CylinderKind {
    /// `(-r, 0) x B(0, r) x B(0, r)`.
    Standard,
    /// `(-3/2, -1] x B(0, 1) x B(0, 1)`.
    Hat,
    /// Explicit time interval and radii.
    Shifted,
}

/// A kinetic cylinder `(t_lo, t_hi) x B(0, rx) x B(0, rv)` in `R x R^N x R^N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    pub kind: CylinderKind,
    pub dim: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_radius: f64,
    pub v_radius: f64,
}

impl Cylinder {
    /// `Q[r]` in dimension `dim`.
    pub fn standard(dim: usize, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("cylinder radius must be positive, got {r}")));
        }
        Self::check_dim(dim)?;
        Ok(Self {
            kind: CylinderKind::Standard,
            dim,
            t_lo: -r,
            t_hi: 0.0,
            x_radius: r,
            v_radius: r,
        })
    }

    pub fn hat(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self {
            kind: CylinderKind::Hat,
            dim,
            t_lo: -1.5,
            t_hi: -1.0,
            x_radius: 1.0,
            v_radius: 1.0,
        })
    }

    pub fn shifted(dim: usize, t_lo: f64, t_hi: f64, x_radius: f64, v_radius: f64) -> Result<Self> {
        Self::check_dim(dim)?;
        if !(t_hi > t_lo) || !(x_radius > 0.0) || !(v_radius > 0.0) {
            return Err(invalid(
                "cylinder",
                format!("degenerate cylinder ({t_lo}, {t_hi}) x B({x_radius}) x B({v_radius})"),
            ));
        }
        Ok(Self {
            kind: CylinderKind::Shifted,
            dim,
            t_lo,
            t_hi,
            x_radius,
            v_radius,
        })
    }

    /// `Q_k = (T_k, 0) x B_k x B_k`.
    pub fn dyadic(dim: usize, level: DyadicLevel) -> Result<Self> {
        Self::shifted(dim, level.t(), 0.0, level.radius(), level.radius())
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim == 0 || dim > 3 {
            return Err(invalid("dim", format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    pub fn measure(&self) -> f64 {
        self.duration() * ball_volume(self.dim, self.x_radius) * ball_volume(self.dim, self.v_radius)
    }

    /// Whether the time slice `t` represents a cell of this cylinder. Slices own
    /// the interval `(t - dt, t]`, so the test is half-open on the left.
    pub fn holds_slice(&self, t: f64) -> bool {
        t > self.t_lo + MEMBERSHIP_SLACK && t <= self.t_hi + MEMBERSHIP_SLACK
    }

    pub fn holds_space(&self, x: f64, v: f64) -> bool {
        x.abs() < self.x_radius && v.abs() < self.v_radius
    }

    /// Same cylinder with the time interval closed on the left; used for sup-in-time sets.
    pub fn holds_time_closed(&self, t: f64) -> bool {
        t >= self.t_lo - MEMBERSHIP_SLACK && t <= self.t_hi + MEMBERSHIP_SLACK
    }

    /// Errors unless the cylinder lies inside the trajectory's phase-space box.
    pub fn check_covered(&self, traj: &Trajectory) -> Result<()> {
        let g = &traj.grid;
        let (t0, t1) = traj.time_span();
        let fits = self.t_lo >= t0 - MEMBERSHIP_SLACK
            && self.t_hi <= t1 + MEMBERSHIP_SLACK
            && -self.x_radius >= g.x.lo - MEMBERSHIP_SLACK
            && self.x_radius <= g.x.hi + MEMBERSHIP_SLACK
            && -self.v_radius >= g.v.lo - MEMBERSHIP_SLACK
            && self.v_radius <= g.v.hi + MEMBERSHIP_SLACK;
        if fits {
            Ok(())
        } else {
            Err(Error::Coverage(format!(
                "cylinder ({}, {}) x B({}) x B({}) exceeds grid [{t0}, {t1}] x [{}, {}] x [{}, {}]",
                self.t_lo, self.t_hi, self.x_radius, self.v_radius, g.x.lo, g.x.hi, g.v.lo, g.v.hi
            )))
        }
    }
}

/// `R_k = (1 + 2^-k) / 2`, defined for `k >= -1`.
pub fn dyadic_radius(k: i32) -> Result<f64> {
    match k {
        -1 => Ok(1.5),
        k if k >= 0 => Ok(0.5 * (1.0 + pow2(-k))),
        _ => Err(invalid("k", format!("radius index must be >= -1, got {k}"))),
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// The level-`k` objects `T_k`, `R_k`, `C_k` and the cutoff `eta_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicLevel {
    pub k: u32,
}

impl DyadicLevel {
    pub fn new(k: i64) -> Result<Self> {
        if !(0..=60).contains(&k) {
            return Err(invalid("k", format!("level must be in 0..=60, got {k}")));
        }
        Ok(Self { k: k as u32 })
    }

    fn e(&self) -> f64 {
        pow2(-(self.k as i32))
    }

    /// `T_k = -(1 + 2^-k) / 2`.
    pub fn t(&self) -> f64 {
        -0.5 * (1.0 + self.e())
    }

    /// `R_k = (1 + 2^-k) / 2`.
    pub fn radius(&self) -> f64 {
        0.5 * (1.0 + self.e())
    }

    /// `C_k = (1 - 2^-k) / 2`.
    pub fn level(&self) -> f64 {
        0.5 * (1.0 - self.e())
    }

    /// `R_{k-1}`, the outer radius of the cutoff annulus.
    pub fn outer_radius(&self) -> f64 {
        dyadic_radius(self.k as i32 - 1).expect("k >= 0")
    }

    /// `T_{k-1}`, which is `-3/2` for `k = 0`.
    pub fn previous_t(&self) -> f64 {
        -self.outer_radius()
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.t(), self.radius(), self.level())
    }

    pub fn cutoff(&self) -> Cutoff {
        Cutoff::new(self.radius(), self.outer_radius()).expect("R_k < R_{k-1}")
    }
}

/// Quintic smoothstep `6s^5 - 15s^4 + 10s^3` on `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

pub fn smoothstep_slope(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Radial cutoff: 1 on `|p| <= inner`, 0 on `|p| >= outer`, quintic in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 <= inner && inner < outer) {
            return Err(invalid("cutoff", format!("need 0 <= inner < outer, got {inner}, {outer}")));
        }
        Ok(Self { inner, outer })
    }

    fn s(&self, r: f64) -> f64 {
        (r - self.inner) / (self.outer - self.inner)
    }

    /// Profile value at radius `r >= 0`.
    pub fn profile(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            1.0 - smoothstep(self.s(r))
        }
    }

    /// Radial derivative of the profile (nonpositive).
    pub fn profile_slope(&self, r: f64) -> f64 {
        if r <= self.inner || r >= self.outer {
            0.0
        } else {
            -smoothstep_slope(self.s(r)) / (self.outer - self.inner)
        }
    }

    /// `max |profile'| = (15/8) / (outer - inner)`.
    pub fn max_slope(&self) -> f64 {
        1.875 / (self.outer - self.inner)
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.profile(norm(p))
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let r = norm(p);
        if r == 0.0 {
            return vec![0.0; p.len()];
        }
        let d = self.profile_slope(r) / r;
        p.iter().map(|c| d * c).collect()
    }

    /// One-dimensional derivative `d/dx eta(|x|)`.
    pub fn derivative_1d(&self, x: f64) -> f64 {
        self.profile_slope(x.abs()) * x.signum()
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Pointwise threshold predicate for level sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Above(f64),
    AtLeast(f64),
    AtMost(f64),
    /// Open interval `(lo, hi)`.
    Between(f64, f64),
}

impl Threshold {
    pub fn test(&self, value: f64) -> bool {
        match *self {
            Threshold::Above(c) => value > c,
            Threshold::AtLeast(c) => value >= c,
            Threshold::AtMost(c) => value <= c,
            Threshold::Between(lo, hi) => lo < value && value < hi,
        }
    }
}

/// Space-time measure of `{f satisfies predicate} ∩ region` by cell counting.
///
/// A space-time cell counts when its center satisfies both the predicate and
/// the region membership; slice `n` owns the time interval `(t_n - dt, t_n]`.
pub fn level_set_measure(traj: &Trajectory, predicate: Threshold, region: &Cylinder) -> Result<f64> {
    region.check_covered(traj)?;
    let g = &traj.grid;
    let weight = g.cell_area() * traj.dt;
    let mut count = 0usize;
    for field in traj.fields.iter().skip(1) {
        if !region.holds_slice(field.time) {
            continue;
        }
        count += region_cells(g, region)
            .filter(|&idx| predicate.test(field.values[idx]))
            .count();
    }
    Ok(count as f64 * weight)
}

/// Flat indices of the cells whose centers lie in the region's balls.
pub fn region_cells<'a>(g: &'a SpaceGrid, region: &'a Cylinder) -> impl Iterator<Item = usize> + 'a {
    (0..g.x.cells).flat_map(move |ix| {
        let x = g.x.center(ix);
        (0..g.v.cells)
            .filter(move |&iv| region.holds_space(x, g.v.center(iv)))
            .map(move |iv| g.index(ix, iv))
    })
}
