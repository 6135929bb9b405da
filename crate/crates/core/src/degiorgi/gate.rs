use crate::error::{invalid, Error, Result};
use crate::field::Trajectory;
use crate::geometry::{region_cells, Cylinder};

use super::truncation::cylinder_integral;

#[derive(Clone, Debug, PartialEq)]
pub struct GateVerdict {
    /// `log10 ∫ f_+^2` over the premise cylinder (`-∞` when the integral vanishes).
    pub log10_premise: f64,
    /// `log10` of the threshold the premise is compared with.
    pub log10_threshold: f64,
    /// Largest value of `f` over the conclusion cylinder.
    pub sup_conclusion: f64,
    pub premise_holds: bool,
    pub conclusion_holds: bool,
}

impl GateVerdict {
    /// A premise that holds with a failing conclusion.
    pub fn is_counterexample(&self) -> bool {
        self.premise_holds && !self.conclusion_holds
    }
}

fn sup_over(traj: &Trajectory, region: &Cylinder) -> Result<f64> {
    let cells: Vec<usize> = region_cells(&traj.grid, region).collect();
    if cells.is_empty() {
        return Err(Error::Coverage(format!(
            "no grid cell lies in the cylinder of radius {}",
            region.x_radius
        )));
    }
    let mut sup = f64::NEG_INFINITY;
    for f in traj.fields.iter().filter(|f| region.holds_slice(f.time)) {
        sup = cells.iter().fold(sup, |m, &i| m.max(f.values[i]));
    }
    if sup == f64::NEG_INFINITY {
        return Err(Error::Coverage("no stored slice in the conclusion cylinder".into()));
    }
    Ok(sup)
}

/// Evaluates the premise and conclusion of the `L^∞` bound.
///
/// Plain form: `∫_{Q[3/2]} f_+^2 < κ` against `f <= 1/2` on `Q[1/2]`.
/// With `zoom = Some(ω)`: `∫_{Q[ω/2]} f_+^2 < (ω/3)^{4N+2} κ` against
/// `f <= 1/2` on `Q[ω^3/54]`, where `κ` is the constant for `γ = ω^2/9`.
pub fn linfty_gate(traj: &Trajectory, log10_kappa: f64, zoom: Option<f64>) -> Result<GateVerdict> {
    // trajectories live on one-dimensional phase grids
    let dim = 1;
    let (premise_q, conclusion_q, log10_threshold) = match zoom {
        None => (Cylinder::standard(dim, 1.5)?, Cylinder::standard(dim, 0.5)?, log10_kappa),
        Some(w) if w > 0.0 && w < 1.0 => (
            Cylinder::standard(dim, 0.5 * w)?,
            Cylinder::standard(dim, w.powi(3) / 54.0)?,
            log10_kappa + (4 * dim + 2) as f64 * (w / 3.0).log10(),
        ),
        Some(w) => return Err(invalid("omega", format!("need 0 < omega < 1, got {w}"))),
    };
    premise_q.check_covered(traj)?;
    conclusion_q.check_covered(traj)?;
    let log10_premise = cylinder_integral(traj, &premise_q, |u| u.max(0.0).powi(2)).log10();
    let sup_conclusion = sup_over(traj, &conclusion_q)?;
    Ok(GateVerdict {
        log10_premise,
        log10_threshold,
        sup_conclusion,
        premise_holds: log10_premise < log10_threshold,
        conclusion_holds: sup_conclusion <= 0.5,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KappaEmpirical {
    /// Largest tested premise value, in `log10`, whose run satisfied the conclusion.
    pub log10_kappa: f64,
    /// Amplitude of that run.
    pub amplitude: f64,
    /// Whether a failing amplitude was found above it.
    pub bracketed: bool,
    /// `(amplitude, verdict)` for every evaluated run.
    pub evaluations: Vec<(f64, GateVerdict)>,
}

impl KappaEmpirical {
    /// Whether the runs contain a premise below `log10_kappa` with a failing conclusion.
    pub fn counterexample(&self, log10_kappa: f64) -> bool {
        self.evaluations
            .iter()
            .any(|(_, v)| v.log10_premise < log10_kappa && !v.conclusion_holds)
    }
}

/// Bisection over the amplitude of the initial data for the empirical threshold.
///
/// `run(amplitude)` must return a trajectory covering `Q[3/2]`.
pub fn kappa_empirical(
    run: impl Fn(f64) -> Result<Trajectory>,
    amp_max: f64,
    iterations: usize,
) -> Result<KappaEmpirical> {
    if !(amp_max > 0.0 && amp_max.is_finite()) {
        return Err(invalid("amp_max", format!("must be positive, got {amp_max}")));
    }
    let mut evaluations = Vec::new();
    let mut eval = |amp: f64| -> Result<bool> {
        let verdict = linfty_gate(&run(amp)?, f64::NEG_INFINITY, None)?;
        let ok = verdict.conclusion_holds;
        evaluations.push((amp, verdict));
        Ok(ok)
    };
    let best = |evals: &[(f64, GateVerdict)]| {
        evals
            .iter()
            .filter(|(_, v)| v.conclusion_holds)
            .map(|(a, v)| (v.log10_premise, *a))
            .fold((f64::NEG_INFINITY, 0.0), |m, x| if x.0 > m.0 { x } else { m })
    };
    if eval(amp_max)? {
        let (log10_kappa, amplitude) = best(&evaluations);
        return Ok(KappaEmpirical { log10_kappa, amplitude, bracketed: false, evaluations });
    }
    if !eval(0.0)? {
        return Ok(KappaEmpirical { log10_kappa: f64::NEG_INFINITY, amplitude: 0.0, bracketed: true, evaluations });
    }
    let (mut lo, mut hi) = (0.0, amp_max);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (log10_kappa, amplitude) = best(&evaluations);
    Ok(KappaEmpirical { log10_kappa, amplitude, bracketed: true, evaluations })
}
