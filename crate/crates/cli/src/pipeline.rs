//! The run pipeline: solve, then the selected diagnostic stages.
//!
//! Stage failures do not abort the run; the summary is marked incomplete and
//! records the error next to whatever was computed before it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use kfp_core::averaging::{
    averaging_estimate_audit, fit_constant, interpolation_audit, velocity_average, AveragingInputs, Padding,
    SpectralField, TestFunction,
};
use kfp_core::degiorgi::{
    barrier_comparison, chebyshev_audit, is_monotone, kappa_empirical, linfty_gate, recursion_audit,
    refinement_difference, truncation_sequence, BarrierComparison, BarrierVariant, IterationConstants,
};
use kfp_core::geometry::{region_cells, DyadicLevel};
use kfp_core::holder::{
    holder_fit, isoperimetric_probe, modulus_from_constants, normalize, oscillation_ladder, pullback_boundary,
    theta_sequence, zoom, LadderConfig, LemmaConstants, ScalingMap, ZoomTarget,
};
use kfp_core::solver::{energy_budget, local_energy_check, solve};
use kfp_core::{Cylinder, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Stage, Validated};
use crate::snapshot;

pub const CSV_VERSION: u32 = 1;

/// Audits in the order they appear in summaries and sweep tables.
pub const AUDIT_NAMES: [&str; 14] = [
    "energy_slack",
    "local_energy",
    "uk_monotone",
    "chebyshev",
    "barrier_comparison",
    "kappa_consistency",
    "linfty_gate",
    "plancherel",
    "interpolation",
    "mu_emp",
    "theta_sequence",
    "holder_fit",
    "zoom_covariance",
    "modulus",
];

#[derive(Clone, Debug)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip rendering, stable across runs.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub name: String,
    pub stage: Stage,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub name: String,
    pub seed: u64,
    pub status: Status,
    pub error: Option<String>,
    pub csv_version: u32,
    /// Column lists of every written CSV file.
    pub tables: BTreeMap<String, Vec<String>>,
    pub constants: BTreeMap<String, Option<f64>>,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub audits: Vec<Audit>,
    pub config: RunConfig,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.status == Status::Complete && self.audits.iter().all(|a| a.pass)
    }

    pub fn audit(&self, name: &str) -> Option<&Audit> {
        self.audits.iter().find(|a| a.name == name)
    }
}

pub struct RunOutcome {
    pub summary: Summary,
    pub tables: Vec<Table>,
    pub trajectory: Option<Trajectory>,
}

impl RunOutcome {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes the CSV tables, the solution snapshot and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &self.tables {
            t.write(dir)?;
        }
        if let Some(traj) = &self.trajectory {
            snapshot::export_snapshot(traj, &dir.join("solution.snap"))?;
        }
        let json = serde_json::to_string_pretty(&self.summary)?;
        fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

struct Builder<'a> {
    v: &'a Validated,
    tables: Vec<Table>,
    audits: Vec<Audit>,
    constants: BTreeMap<String, Option<f64>>,
    metrics: BTreeMap<String, Option<f64>>,
}

impl Builder<'_> {
    fn audit(&mut self, name: &str, stage: Stage, value: f64, tolerance: Option<f64>, pass: bool, detail: String) {
        self.audits.push(Audit { name: name.into(), stage, value: finite(value), tolerance, pass, detail });
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), finite(value));
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), finite(value));
    }

    fn lambda(&self) -> f64 {
        self.v.config.coefficients.lambda
    }

    fn solve_on(&self, refine: u32, amplitude: f64) -> kfp_core::Result<Trajectory> {
        let (grid, dt) = self.v.config.grid_spec(refine);
        let f0 = self.v.initial_field(grid, amplitude);
        solve(f0, &self.v.a, &self.v.g, self.v.config.grid.t_end, dt, &self.v.bc, &self.v.params)
    }
}

/// Runs every selected stage on a validated config.
pub fn execute(v: &Validated) -> RunOutcome {
    let mut b = Builder { v, tables: Vec::new(), audits: Vec::new(), constants: BTreeMap::new(), metrics: BTreeMap::new() };
    let mut trajectory = None;
    let error = run_stages(&mut b, &mut trajectory).err().map(|e| format!("{e:#}"));
    let tables = std::mem::take(&mut b.tables);
    let c = &v.config;
    let summary = Summary {
        kind: "run".into(),
        name: c.name.clone().unwrap_or_else(|| "run".into()),
        seed: c.seed,
        status: if error.is_none() { Status::Complete } else { Status::Incomplete },
        error,
        csv_version: CSV_VERSION,
        tables: tables
            .iter()
            .map(|t| (format!("{}.csv", t.name), t.columns.iter().map(|s| s.to_string()).collect()))
            .collect(),
        constants: b.constants,
        metrics: b.metrics,
        audits: b.audits,
        config: c.clone(),
    };
    RunOutcome { summary, tables, trajectory }
}

/// Validates, executes and writes to the configured output directory.
pub fn run_config(config: &RunConfig) -> Result<RunOutcome> {
    let v = config.validate()?;
    let outcome = execute(&v);
    if let Some(dir) = &config.output {
        outcome.write(dir)?;
    }
    Ok(outcome)
}

fn run_stages(b: &mut Builder, trajectory: &mut Option<Trajectory>) -> Result<()> {
    let cfg = &b.v.config;
    let amp = cfg.initial.amplitude;
    let f = b.solve_on(0, amp).context("solving on the base grid")?;
    let fine = if cfg.grid.refine { Some(b.solve_on(1, amp).context("solving on the refined grid")?) } else { None };
    *trajectory = Some(f.clone());
    b.metric("max_abs_f", f.max().abs().max(f.min().abs()));
    let stages = cfg.diagnostics.stages.clone();
    let has = |s: Stage| stages.contains(&s);
    if has(Stage::Energy) {
        energy_stage(b, &f, fine.as_ref()).context("energy stage")?;
    }
    if has(Stage::Degiorgi) || has(Stage::Averaging) {
        let barriers = barriers(b, &f, fine.as_ref()).context("barrier problems")?;
        if has(Stage::Degiorgi) {
            degiorgi_stage(b, &f, &barriers).context("De Giorgi stage")?;
        }
        if has(Stage::Averaging) {
            averaging_stage(b, &f, &barriers).context("averaging stage")?;
        }
    }
    if has(Stage::Holder) {
        holder_stage(b, &f).context("holder stage")?;
    }
    Ok(())
}

fn energy_stage(b: &mut Builder, f: &Trajectory, fine: Option<&Trajectory>) -> Result<()> {
    let lambda = b.lambda();
    let ledger = energy_budget(f, &b.v.g, lambda);
    let mut t = Table::new("energy", &["time", "half_norm_sq", "dissipation", "source_work", "slack"]);
    for e in &ledger.entries {
        t.push(vec![num(e.time), num(e.half_norm_sq), num(e.dissipation), num(e.source_work), num(e.slack)]);
    }
    b.tables.push(t);
    b.metric("energy_tolerance", ledger.tolerance);
    if let Some(fine) = fine {
        let fl = energy_budget(fine, &b.v.g, lambda);
        b.metric("energy_slack_refined", fl.min_slack);
        b.metric("energy_tolerance_refined", fl.tolerance);
    }
    let detail = format!("min slack {} vs -tol {}", ledger.min_slack, -ledger.tolerance);
    b.audit("energy_slack", Stage::Energy, ledger.min_slack, Some(ledger.tolerance), ledger.passes(1.0), detail);

    let dt = f.dt;
    let dv2 = f.grid.v.spacing().powi(2);
    let snap = |t: f64| (t / dt).round() * dt;
    let mut t = Table::new(
        "local_energy",
        &["k", "s", "t", "energy_t", "dissipation", "energy_s", "cutoff_term", "transport_term", "source_term", "residual", "tolerance", "pass"],
    );
    let (mut worst, mut worst_tol, mut all) = (f64::INFINITY, 0.0, true);
    for k in 1..=b.v.config.diagnostics.levels.min(3) {
        let level = DyadicLevel::new(k as i64)?;
        let tk = level.t();
        for (s, e) in [(tk, 0.0), (tk, snap(0.5 * tk)), (snap(0.5 * tk), 0.0)] {
            let r = local_energy_check(f, &b.v.g, k, level.level(), lambda, s, e)?;
            let tol = (dt + dv2) * r.magnitude;
            let pass = r.residual >= -tol;
            all &= pass;
            if r.residual + tol < worst + worst_tol {
                worst = r.residual;
                worst_tol = tol;
            }
            t.push(vec![
                k.to_string(),
                num(s),
                num(e),
                num(r.energy_t),
                num(r.dissipation),
                num(r.energy_s),
                num(r.cutoff_term),
                num(r.transport_term),
                num(r.source_term),
                num(r.residual),
                num(tol),
                flag(pass),
            ]);
        }
    }
    b.tables.push(t);
    b.audit("local_energy", Stage::Energy, worst, Some(worst_tol), all, "smallest residual against its tolerance".into());
    Ok(())
}

struct Barriers {
    coarse: Vec<BarrierComparison>,
    tau: Vec<f64>,
}

fn barriers(b: &mut Builder, f: &Trajectory, fine: Option<&Trajectory>) -> Result<Barriers> {
    let (mut coarse, mut tau) = (Vec::new(), Vec::new());
    for k in 1..=2 {
        let c = barrier_comparison(f, k, &b.v.a, &b.v.g, BarrierVariant::TimeCutoff, &b.v.params)?;
        let t = match fine {
            Some(ff) => {
                let fc = barrier_comparison(ff, k, &b.v.a, &b.v.g, BarrierVariant::TimeCutoff, &b.v.params)?;
                refinement_difference(&c, &fc)?
            }
            None => (f.dt + f.grid.v.spacing().powi(2)) * c.max_fk.abs(),
        };
        coarse.push(c);
        tau.push(t);
    }
    Ok(Barriers { coarse, tau })
}

fn degiorgi_stage(b: &mut Builder, f: &Trajectory, barriers: &Barriers) -> Result<()> {
    let lambda = b.lambda();
    let d = &b.v.config.diagnostics;
    let levels = d.levels;
    let reports = truncation_sequence(f, levels, lambda)?;
    let mut t = Table::new(
        "truncation",
        &["k", "u_k", "sup_energy", "dissipation", "level_set_measure", "cheb_bound", "cheb_chained", "cheb_chained_tight", "cheb_holds"],
    );
    let mut cheb_all = true;
    let mut cheb_worst = f64::INFINITY;
    for r in &reports {
        let (bound, chained, tight, holds) = if r.k == 0 {
            (f64::NAN, f64::NAN, f64::NAN, true)
        } else {
            let c = chebyshev_audit(f, r.k, lambda)?;
            cheb_all &= c.holds;
            cheb_worst = cheb_worst.min(c.bound - c.measure);
            (c.bound, c.chained, c.chained_tight, c.holds)
        };
        t.push(vec![
            r.k.to_string(),
            num(r.u_k),
            num(r.sup_energy),
            num(r.dissipation),
            num(r.level_set_measure),
            num(bound),
            num(chained),
            num(tight),
            flag(holds),
        ]);
    }
    b.tables.push(t);
    let upto = reports.len().min(5);
    let tol = 1e-12 * reports[0].u_k.max(1.0);
    let monotone = is_monotone(&reports[..upto], tol);
    let worst_step = reports[..upto].windows(2).map(|w| w[0].u_k - w[1].u_k).fold(f64::INFINITY, f64::min);
    let u: Vec<f64> = reports.iter().map(|r| r.u_k).collect();
    b.audit("uk_monotone", Stage::Degiorgi, worst_step, Some(tol), monotone, format!("U_0..U_{} = {u:?}", upto - 1));
    b.audit("chebyshev", Stage::Degiorgi, cheb_worst, Some(0.0), cheb_all, "smallest bound - measure".into());

    let mut t = Table::new(
        "barrier",
        &["k", "min_gap", "min_gap_late", "tau", "min_fk", "max_fk", "min_gk", "s1", "s2", "s1_bound", "s2_bound", "within_bounds", "pass"],
    );
    let (mut all, mut worst) = (true, f64::INFINITY);
    let mut worst_tau = 0.0;
    for (c, &tau) in barriers.coarse.iter().zip(&barriers.tau) {
        let pass = c.min_gap >= -10.0 * tau && c.min_fk >= -10.0 * tau;
        all &= pass;
        if c.min_gap < worst {
            worst = c.min_gap;
            worst_tau = tau;
        }
        let n = &c.norms;
        t.push(vec![
            c.k.to_string(),
            num(c.min_gap),
            num(c.min_gap_late),
            num(tau),
            num(c.min_fk),
            num(c.max_fk),
            num(c.min_gk),
            num(n.s1),
            num(n.s2),
            num(n.s1_bound),
            num(n.s2_bound),
            flag(n.within_bounds()),
            flag(pass),
        ]);
    }
    b.tables.push(t);
    b.audit("barrier_comparison", Stage::Degiorgi, worst, Some(10.0 * worst_tau), all, "min (G_k - F_k) against -10 tau".into());

    let k = IterationConstants::new(b.v.constants)?;
    b.constant("log10_kappa", k.log10_kappa);
    b.constant("kappa_exponent", k.kappa_exponent);
    b.constant("alpha", k.alpha);
    b.constant("ln_rho", k.ln_rho);
    b.constant("a", k.a);
    b.constant("big_c", k.big_c);
    if u.len() >= 3 {
        let rec = recursion_audit(&u, &k)?;
        b.metric("recursion_pass_rate", rec.pass_rate);
    }

    let gate = linfty_gate(f, k.log10_kappa, None)?;
    b.audit(
        "linfty_gate",
        Stage::Degiorgi,
        gate.log10_premise,
        Some(k.log10_kappa),
        !gate.is_counterexample(),
        format!("premise holds: {}, sup on Q[1/2] = {}", gate.premise_holds, gate.sup_conclusion),
    );

    let emp = kappa_empirical(|amp| b.solve_on(0, amp), d.kappa_amp_max, d.kappa_iterations)?;
    let mut t = Table::new("kappa", &["amplitude", "log10_premise", "sup_conclusion", "conclusion_holds"]);
    let mut evals = emp.evaluations.clone();
    evals.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (amp, v) in &evals {
        t.push(vec![num(*amp), num(v.log10_premise), num(v.sup_conclusion), flag(v.conclusion_holds)]);
    }
    b.tables.push(t);
    b.metric("log10_kappa_emp", emp.log10_kappa);
    let pass = emp.log10_kappa >= k.log10_kappa && !emp.counterexample(k.log10_kappa);
    b.audit(
        "kappa_consistency",
        Stage::Degiorgi,
        emp.log10_kappa,
        Some(k.log10_kappa),
        pass,
        format!("bracketed: {}", emp.bracketed),
    );
    Ok(())
}

fn averaging_stage(b: &mut Builder, f: &Trajectory, barriers: &Barriers) -> Result<()> {
    let lambda = b.lambda();
    let mut t = Table::new(
        "spectral",
        &["field", "plancherel_error", "interp_lhs", "interp_rhs", "interp_holds", "avg_lhs", "avg_rhs_unit", "c_n_ratio"],
    );
    let (mut worst_planch, mut interp_all) = (0.0f64, true);
    let mut audits = Vec::new();
    let solution = SpectralField::from_trajectory(f, Padding::Double)?;
    let mut fields: Vec<(String, SpectralField, Option<AveragingInputs>)> = vec![("f".into(), solution, None)];
    for c in &barriers.coarse {
        let spec = SpectralField::from_trajectory(&c.g_k, Padding::Double)?;
        let level = DyadicLevel::new(c.k as i64)?;
        let inputs = AveragingInputs { s1_l2: c.norms.s1, s2_l2: c.norms.s2, lambda, radius: level.radius() };
        fields.push((format!("G_{}", c.k), spec, Some(inputs)));
    }
    for (name, spec, inputs) in &fields {
        let p = spec.plancherel_error();
        worst_planch = worst_planch.max(p);
        let ia = interpolation_audit(spec)?;
        interp_all &= ia.holds();
        let (lhs, rhs, ratio) = match inputs {
            Some(i) => {
                let a = averaging_estimate_audit(spec, *i)?;
                audits.push(a);
                (a.lhs, a.rhs_unit, a.ratio.unwrap_or(f64::NAN))
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        t.push(vec![name.clone(), num(p), num(ia.lhs), num(ia.rhs), flag(ia.holds()), num(lhs), num(rhs), num(ratio)]);
    }
    b.tables.push(t);
    b.audit("plancherel", Stage::Averaging, worst_planch, Some(1e-12), worst_planch <= 1e-12, "largest relative error".into());
    b.audit("interpolation", Stage::Averaging, f64::NAN, Some(1e-12), interp_all, "lhs <= rhs (1 + 1e-12) on every field".into());
    if let Some(fit) = fit_constant(&audits) {
        b.metric("c_n_fit_max", fit.max);
        b.metric("c_n_fit_median", fit.median);
    }
    let avg = velocity_average(f, TestFunction::Bump { center: 0.0, radius: 1.0 }, 1.0 / 3.0, Padding::Double)?;
    b.metric("averaging_gain", avg.gain.unwrap_or(f64::NAN));
    Ok(())
}

/// `(min, max)` over the nodes of `region`.
fn range(f: &Trajectory, region: &Cylinder) -> (f64, f64) {
    let cells: Vec<usize> = region_cells(&f.grid, region).collect();
    let mut out = (f64::INFINITY, f64::NEG_INFINITY);
    for s in f.fields.iter().filter(|s| region.holds_time_closed(s.time)) {
        for &i in &cells {
            out = (out.0.min(s.values[i]), out.1.max(s.values[i]));
        }
    }
    out
}

fn holder_stage(b: &mut Builder, f: &Trajectory) -> Result<()> {
    let d = b.v.config.diagnostics.clone();
    let lemma = LemmaConstants::new(b.lambda(), d.omega, d.theta, d.alpha_iso)?;
    b.constant("k_star", lemma.k_star as f64);
    b.constant("ln_beta", lemma.ln_beta);
    b.constant("mu_lemma", lemma.mu);
    b.constant("log10_eta_iso", lemma.log10_eta_iso);
    let sigma_paper = modulus_from_constants(lemma.mu, d.omega, b.v.denominator)?;
    b.constant("sigma_lemma", sigma_paper);
    let beta = d.beta.unwrap_or_else(|| lemma.ln_beta.exp());
    b.constant("beta", beta);

    let (fn_, gn, l) = normalize(f, &b.v.g, beta)?;
    b.metric("normalization", l);
    let cfg = LadderConfig {
        omega: d.omega,
        levels: d.ladder_levels,
        cells: d.ladder_cells,
        steps: d.ladder_steps,
        params: b.v.params,
    };
    let ladder = oscillation_ladder(&fn_, &b.v.a, &Arc::new(gn), &cfg)?;
    let mut t = Table::new("ladder", &["level", "oscillation"]);
    for (n, m) in ladder.entries.iter().enumerate() {
        t.push(vec![n.to_string(), num(*m)]);
    }
    b.tables.push(t);
    let mu = ladder.mu_emp.unwrap_or(f64::NAN);
    b.metric("mu_emp", mu);
    let detail = match ladder.mu_emp {
        Some(_) => format!("entries {:?}", ladder.entries),
        None => "degenerate: fewer than two nonzero entries".into(),
    };
    b.audit("mu_emp", Stage::Holder, mu, Some(1.0), ladder.mu_emp.is_some_and(|m| m < 1.0), detail);
    let sigma_mu = if mu > 0.0 && mu < 1.0 { modulus_from_constants(mu, d.omega, b.v.denominator)? } else { f64::NAN };
    b.metric("sigma_from_mu_emp", sigma_mu);
    b.audit("modulus", Stage::Holder, sigma_paper, Some(0.0), sigma_paper > 0.0, "σ from the lemma constants".into());

    // centre and scale so that |f| <= 1 on the probe region, then pick the sign
    let union = Cylinder::shifted(1, -1.5, 0.0, 1.0, 1.0)?;
    let (lo, hi) = range(&fn_, &union);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let centred = if half > 0.0 { fn_.map(|u| (u - mid) / half) } else { fn_.map(|_| 0.0) };
    let centred = centred.map(|u| u.clamp(-1.0, 1.0));
    match isoperimetric_probe(&centred, d.theta, d.omega, d.eta_iso, d.alpha_iso) {
        Ok(p) => {
            b.metric("iso_m_below", p.m_below);
            b.metric("iso_m_top", p.m_top);
            b.metric("iso_m_middle", p.m_middle);
            b.metric("iso_holds", f64::from(u8::from(p.holds())));
            let signed = if p.flipped { centred.map(|u| -u) } else { centred };
            let seq = theta_sequence(&signed, d.theta, d.theta_levels)?;
            let mut t = Table::new("theta", &["k", "m_k"]);
            for (k, m) in seq.m.iter().enumerate() {
                t.push(vec![k.to_string(), num(*m)]);
            }
            b.tables.push(t);
            b.audit(
                "theta_sequence",
                Stage::Holder,
                seq.m.last().copied().unwrap_or(0.0),
                None,
                seq.monotone && seq.m_nondecreasing,
                "f_k <= f_(k-1) and m_k nondecreasing".into(),
            );
        }
        Err(e) => b.metric(&format!("iso_skipped: {e}"), f64::NAN),
    }

    let [t0, x0, v0] = d.holder_base;
    let fit = holder_fit(f, (t0, x0, v0), &d.radii)?;
    let mut t = Table::new("holder", &["radius", "sup"]);
    for (r, s) in fit.radii.iter().zip(&fit.sups) {
        t.push(vec![num(*r), num(*s)]);
    }
    b.tables.push(t);
    let sigma = fit.sigma.unwrap_or(f64::NAN);
    let r2 = fit.r_squared.unwrap_or(f64::NAN);
    b.metric("sigma_emp", sigma);
    b.metric("holder_r2", r2);
    b.metric("holder_c", fit.c.unwrap_or(f64::NAN));
    b.audit("holder_fit", Stage::Holder, sigma, Some(0.0), sigma > 0.0 && r2 > 0.9, format!("R^2 = {r2}"));

    let mut t = Table::new("zoom", &["eps", "max_residual", "interpolation_tol", "scheme_tol", "node_aligned", "pass"]);
    let shared = Arc::new(f.clone());
    let (mut all, mut worst) = (true, 0.0f64);
    for eps in [1.0, d.omega / 3.0, d.omega * d.omega / 27.0] {
        let map = ScalingMap::at_origin(eps)?;
        let (target, bc) = if eps == 1.0 {
            (ZoomTarget::like(f), b.v.bc.clone())
        } else {
            (ZoomTarget::unit_box(d.ladder_cells, d.ladder_steps)?, pullback_boundary(Arc::clone(&shared), map))
        };
        let z = zoom(f, &map, &b.v.a, &b.v.g, &target, &bc, &b.v.params)?;
        let r = z.residual;
        all &= r.passes();
        worst = worst.max(r.max_residual / (r.interpolation_tol + r.scheme_tol));
        t.push(vec![num(eps), num(r.max_residual), num(r.interpolation_tol), num(r.scheme_tol), flag(r.node_aligned()), flag(r.passes())]);
    }
    b.tables.push(t);
    b.audit("zoom_covariance", Stage::Holder, worst, Some(1.0), all, "largest residual / tolerance".into());
    Ok(())
}
