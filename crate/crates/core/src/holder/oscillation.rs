use std::sync::Arc;

use crate::coefficients::{DiffusionField, SourceField};
use crate::degiorgi::{ConstantInputs, IterationConstants};
use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};
use crate::geometry::{level_set_measure, region_cells, Cylinder, Threshold};
use crate::solver::{solve, SolverParams};

use super::scaling::ScalingMap;
use super::zoom::{check_omega, pullback_boundary, Sampler, ZoomTarget};

/// `max - min` over the grid nodes of `region`.
pub fn oscillation(traj: &Trajectory, region: &Cylinder) -> Result<f64> {
    let cells: Vec<usize> = region_cells(&traj.grid, region).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in traj.fields.iter().filter(|f| region.holds_slice(f.time)) {
        for &i in &cells {
            lo = lo.min(f.values[i]);
            hi = hi.max(f.values[i]);
        }
    }
    if lo > hi {
        return Err(Error::Coverage("no grid node lies in the region".into()));
    }
    Ok(hi - lo)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderConfig {
    pub omega: f64,
    pub levels: usize,
    /// Cells per axis of the re-solved unit box.
    pub cells: usize,
    /// Time steps over `s ∈ [-3/2, 0]`.
    pub steps: usize,
    pub params: SolverParams,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self { omega: 0.4, levels: 4, cells: 48, steps: 48, params: SolverParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillationLadder {
    pub eps: f64,
    /// `osc` over `Q[ω/2]` of the level-`n` field.
    pub entries: Vec<f64>,
    /// `exp` of the least-squares slope of `ln entries`; `None` with fewer than two
    /// positive entries. With two or more re-solved levels the fit skips level 0,
    /// whose grid resolves `Q[ω/2]` differently.
    pub mu_emp: Option<f64>,
}

/// Least-squares slope and intercept of `y` against `x`, with `R^2`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Repeatedly zooms by `ε = ω^2/27` at the origin and records the oscillation
/// over `Q[ω/2]`.
///
/// Level 0 is `f0` itself. Each further level solves the zoomed equation
/// `(a ∘ T, ε^2 g ∘ T)` on the unit box, started from and bounded by the
/// previous level sampled through the map.
pub fn oscillation_ladder(
    f0: &Trajectory,
    a: &Arc<DiffusionField>,
    g: &Arc<SourceField>,
    cfg: &LadderConfig,
) -> Result<OscillationLadder> {
    check_omega(cfg.omega)?;
    let eps = cfg.omega * cfg.omega / 27.0;
    let map = ScalingMap::at_origin(eps)?;
    let region = Cylinder::standard(1, 0.5 * cfg.omega)?;
    let target = ZoomTarget::unit_box(cfg.cells, cfg.steps)?;
    let mut current = Arc::new(f0.clone());
    let (mut a_n, mut g_n) = (Arc::clone(a), Arc::clone(g));
    let mut entries = vec![oscillation(&current, &region)?];
    for _ in 0..cfg.levels {
        a_n = Arc::new(a_n.zoomed(map)?);
        g_n = Arc::new(g_n.zoomed(map));
        let sampler = Sampler::new(&current);
        let s0 = target.t0;
        let mut values = Vec::with_capacity(target.grid.len());
        for ix in 0..target.grid.x.cells {
            for iv in 0..target.grid.v.cells {
                let (t, x, v) = map.apply(s0, target.grid.x.center(ix), target.grid.v.center(iv));
                let p = sampler
                    .sample(t, x, v)
                    .ok_or_else(|| Error::Coverage("zoomed initial data leave the previous level".into()))?;
                values.push(p.value);
            }
        }
        let start = PhaseField::new(target.grid, s0, values)?;
        let bc = pullback_boundary(Arc::clone(&current), map);
        let next = solve(start, &a_n, &g_n, 0.0, target.dt, &bc, &cfg.params)?;
        entries.push(oscillation(&next, &region)?);
        current = Arc::new(next);
    }
    let skip = usize::from(cfg.levels >= 2);
    let (n, ln): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, m)| **m > 0.0)
        .map(|(i, m)| (i as f64, m.ln()))
        .unzip();
    let mu_emp = (n.len() >= 2).then(|| linear_fit(&n, &ln).0.exp());
    Ok(OscillationLadder { eps, entries, mu_emp })
}

/// `Q̂ ∪ Q[1] = (-3/2, 0] x B(1)^2`.
fn probe_region() -> Result<Cylinder> {
    Cylinder::shifted(1, -1.5, 0.0, 1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSequence {
    pub fields: Vec<Trajectory>,
    /// `|{f_k <= 0} ∩ (Q̂ ∪ Q[1])|`.
    pub m: Vec<f64>,
    pub monotone: bool,
    pub m_nondecreasing: bool,
}

/// `f_k = (f_{k-1} - 1)/θ + 1` starting from `f_0 = f`.
pub fn theta_sequence(f: &Trajectory, theta: f64, k_max: usize) -> Result<ThetaSequence> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(invalid("theta", format!("need 0 < theta < 1/2, got {theta}")));
    }
    if f.max() > 1.0 {
        return Err(invalid("f", format!("need f <= 1, got max {}", f.max())));
    }
    let region = probe_region()?;
    let mut fields = vec![f.clone()];
    for k in 1..=k_max {
        fields.push(fields[k - 1].map(|u| (u - 1.0) / theta + 1.0));
    }
    let m = fields
        .iter()
        .map(|fk| level_set_measure(fk, Threshold::AtMost(0.0), &region))
        .collect::<Result<Vec<_>>>()?;
    let monotone = fields.windows(2).all(|w| {
        w[0].fields
            .iter()
            .zip(&w[1].fields)
            .all(|(a, b)| a.values.iter().zip(&b.values).all(|(p, q)| q <= p))
    });
    let m_nondecreasing = m.windows(2).all(|w| w[1] >= w[0]);
    Ok(ThetaSequence { fields, m, monotone, m_nondecreasing })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoperimetricProbe {
    /// `|{f <= 0} ∩ Q̂|`.
    pub m_below: f64,
    /// `|{f >= 1 - θ} ∩ Q[ω/2]|`.
    pub m_top: f64,
    /// `|{0 < f < 1 - θ} ∩ (Q̂ ∪ Q[1])|`.
    pub m_middle: f64,
    /// The probe ran on `-f`.
    pub flipped: bool,
    pub first_alternative: bool,
    pub second_alternative: bool,
}

impl IsoperimetricProbe {
    pub fn holds(&self) -> bool {
        self.first_alternative || self.second_alternative
    }
}

/// Measures the three sets of the intermediate-value dichotomy.
pub fn isoperimetric_probe(f: &Trajectory, theta: f64, omega: f64, eta: f64, alpha: f64) -> Result<IsoperimetricProbe> {
    check_omega(omega)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", format!("need 0 < theta < 1, got {theta}")));
    }
    let hat = Cylinder::hat(1)?;
    let union = probe_region()?;
    let top = Cylinder::standard(1, 0.5 * omega)?;
    union.check_covered(f)?;
    let admissible = |h: &Trajectory| -> Result<Option<f64>> {
        let above = level_set_measure(h, Threshold::Above(1.0), &union)?;
        let below = level_set_measure(h, Threshold::AtMost(0.0), &hat)?;
        Ok((above == 0.0 && below >= 0.5 * hat.measure() - 1e-12).then_some(below))
    };
    let (h, m_below, flipped) = match admissible(f)? {
        Some(m) => (f.clone(), m, false),
        None => {
            let neg = f.map(|u| -u);
            match admissible(&neg)? {
                Some(m) => (neg, m, true),
                None => {
                    return Err(invalid(
                        "f",
                        "neither f nor -f satisfies f <= 1 with |{f <= 0} ∩ Q̂| >= |Q̂|/2",
                    ))
                }
            }
        }
    };
    let m_top = level_set_measure(&h, Threshold::AtLeast(1.0 - theta), &top)?;
    let m_middle = level_set_measure(&h, Threshold::Between(0.0, 1.0 - theta), &union)?;
    Ok(IsoperimetricProbe {
        m_below,
        m_top,
        m_middle,
        flipped,
        first_alternative: m_top < eta,
        second_alternative: m_middle >= alpha,
    })
}

/// `(F/L, G/L, L)` with `L = (1 + ||F||_∞)(1 + ||G||_∞/β)`, using the declared
/// bound of `G`.
pub fn normalize(f: &Trajectory, g: &Arc<SourceField>, beta: f64) -> Result<(Trajectory, SourceField, f64)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    let sup = f.max().abs().max(f.min().abs());
    let l = (1.0 + sup) * (1.0 + g.bound() / beta);
    Ok((f.map(|u| u / l), g.scaled(1.0 / l), l))
}

/// Constants of the oscillation lemma derived from configured `θ` and `α_iso`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaConstants {
    pub omega: f64,
    pub theta: f64,
    pub alpha_iso: f64,
    /// `log10 (ω/3)^{4N+2} κ[N, Λ, ω^2/9, ∞]`.
    pub log10_eta_iso: f64,
    /// `⌊(|Q̂|/2 + |Q[1]|)/α_iso⌋ + 1`.
    pub k_star: u64,
    /// Largest `ln β` with `ln(1/β) >= ((|Q̂|/2 + |Q[1]|)/α_iso + 2) ln(1/θ)`.
    pub ln_beta: f64,
    /// `1 - θ^{k* + 3}`.
    pub mu: f64,
}

impl LemmaConstants {
    pub fn new(lambda: f64, omega: f64, theta: f64, alpha_iso: f64) -> Result<Self> {
        check_omega(omega)?;
        if !(theta > 0.0 && theta < 0.5) {
            return Err(invalid("theta", format!("need 0 < theta < 1/2, got {theta}")));
        }
        if !(alpha_iso > 0.0) {
            return Err(invalid("alpha_iso", format!("must be positive, got {alpha_iso}")));
        }
        let kappa = IterationConstants::new(ConstantInputs::placeholder(1, lambda, omega * omega / 9.0))?;
        let log10_eta_iso = 6.0 * (omega / 3.0).log10() + kappa.log10_kappa;
        let mass = 0.5 * Cylinder::hat(1)?.measure() + Cylinder::standard(1, 1.0)?.measure();
        let k_star = (mass / alpha_iso).floor() as u64 + 1;
        let ln_beta = -(mass / alpha_iso + 2.0) * (1.0 / theta).ln();
        let mu = 1.0 - theta.powi(k_star as i32 + 3);
        Ok(Self { omega, theta, alpha_iso, log10_eta_iso, k_star, ln_beta, mu })
    }
}
