use crate::error::{invalid, Result};
use crate::field::Trajectory;

use super::oscillation::linear_fit;
use super::zoom::check_omega;

#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    /// Base point after snapping to the nearest node.
    pub base: (f64, f64, f64),
    pub radii: Vec<f64>,
    /// `sup |F - F(base)|` over nodes at kinetic distance below each radius.
    pub sups: Vec<f64>,
    /// `None` when fewer than three sups are positive.
    pub sigma: Option<f64>,
    pub c: Option<f64>,
    pub r_squared: Option<f64>,
}

fn nearest(n: usize, idx: f64) -> usize {
    idx.round().clamp(0.0, (n - 1) as f64) as usize
}

/// Log-log fit of `sup |F - F(base)|` against the radius of the neighbourhood
/// `(1 + |v0|)|t - t0| + |x - x0| + |v - v0| < r`.
pub fn holder_fit(traj: &Trajectory, base: (f64, f64, f64), radii: &[f64]) -> Result<HolderFit> {
    if radii.len() < 3 {
        return Err(invalid("radii", format!("need at least 3 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("radii", "radii must be positive"));
    }
    let g = &traj.grid;
    let (t_start, _) = traj.time_span();
    let it = nearest(traj.len(), (base.0 - t_start) / traj.dt);
    let ix = nearest(g.x.cells, g.x.fractional_index(base.1));
    let iv = nearest(g.v.cells, g.v.fractional_index(base.2));
    let (t0, x0, v0) = (traj.fields[it].time, g.x.center(ix), g.v.center(iv));
    let f0 = traj.fields[it].values[g.index(ix, iv)];
    let mut sups = vec![0.0f64; radii.len()];
    for f in &traj.fields {
        let dt = (1.0 + v0.abs()) * (f.time - t0).abs();
        for jx in 0..g.x.cells {
            let dx = (g.x.center(jx) - x0).abs();
            for jv in 0..g.v.cells {
                let d = dt + dx + (g.v.center(jv) - v0).abs();
                let diff = (f.values[g.index(jx, jv)] - f0).abs();
                for (s, r) in sups.iter_mut().zip(radii) {
                    if d < *r {
                        *s = s.max(diff);
                    }
                }
            }
        }
    }
    let (lr, ls): (Vec<f64>, Vec<f64>) =
        radii.iter().zip(&sups).filter(|(_, s)| **s > 0.0).map(|(r, s)| (r.ln(), s.ln())).unzip();
    let (sigma, c, r_squared) = if lr.len() >= 3 {
        let (slope, intercept, r2) = linear_fit(&lr, &ls);
        (Some(slope), Some(intercept.exp()), Some(r2))
    } else {
        (None, None, None)
    };
    Ok(HolderFit { base: (t0, x0, v0), radii: radii.to_vec(), sups, sigma, c, r_squared })
}

/// Zoom denominator in the exponent formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModulusDenominator {
    /// `ω^2/27`, the factor of the zoom iteration.
    #[default]
    TwentySeven,
    /// `ω^2/28`.
    TwentyEight,
}

/// `σ = ln μ / ln(ω^2/27)` (or `/28`).
pub fn modulus_from_constants(mu: f64, omega: f64, denominator: ModulusDenominator) -> Result<f64> {
    check_omega(omega)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(invalid("mu", format!("need 0 < mu < 1, got {mu}")));
    }
    let d = match denominator {
        ModulusDenominator::TwentySeven => 27.0,
        ModulusDenominator::TwentyEight => 28.0,
    };
    Ok(mu.ln() / (omega * omega / d).ln())
}
