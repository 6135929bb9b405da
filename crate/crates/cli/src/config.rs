//! Run and sweep configuration.
//!
//! Configs are TOML. Every key may also be written as a dotted path at top
//! level (`grid.cells = 48`), which keeps one setting per line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kfp_core::coefficients::{build_diffusion, build_source, validate_ellipticity, DiffusionField, DiffusionSpec, SourceField, SourceSpec};
use kfp_core::degiorgi::{AChoice, ConstantInputs};
use kfp_core::holder::ModulusDenominator;
use kfp_core::solver::{BoundaryCondition, Reconstruction, SolverParams};
use kfp_core::{Axis, PhaseField, PhaseGrid, SpaceGrid, TimeAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

fn bad(path: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), reason: reason.into() }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub cells: usize,
    /// Half-width of the `x` and `v` boxes.
    pub radius: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Also solve on the twice refined grid to calibrate tolerances.
    pub refine: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, cells: 48, radius: 1.5, t_start: -1.5, t_end: 0.0, dt: 1.0 / 32.0, refine: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    #[default]
    Constant,
    Checkerboard,
    Random,
    Oscillatory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientConfig {
    pub kind: CoefficientKind,
    pub lambda: f64,
    pub value: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub cell: Option<f64>,
    pub offset: Option<f64>,
    pub mean: Option<f64>,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            kind: CoefficientKind::Constant,
            lambda: 2.0,
            value: None,
            low: None,
            high: None,
            cell: None,
            offset: None,
            mean: None,
            amplitude: None,
            frequency: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Zero,
    Constant,
    Bump,
    Noise,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub kind: SourceKind,
    pub value: Option<f64>,
    pub amplitude: Option<f64>,
    pub center: Option<[f64; 3]>,
    pub width: Option<f64>,
    pub bound: Option<f64>,
    pub cell: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Random Gaussian bumps, damped to zero near the box faces.
    #[default]
    Bumps,
    Constant,
    /// `f = v`.
    LinearV,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub count: usize,
    pub width: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { kind: InitialKind::Bumps, amplitude: 0.8, count: 4, width: 0.35 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    KineticIbvp,
    WholeSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub bc: BoundaryKind,
    pub tolerance: f64,
    /// `limited` or `upwind`.
    pub reconstruction: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { bc: BoundaryKind::KineticIbvp, tolerance: 1e-12, reconstruction: "limited".into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Energy,
    Degiorgi,
    Averaging,
    Holder,
}

pub const ALL_STAGES: [Stage; 4] = [Stage::Energy, Stage::Degiorgi, Stage::Averaging, Stage::Holder];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub stages: Vec<Stage>,
    /// Truncation levels `1..=levels`.
    pub levels: u32,
    pub k_s: f64,
    pub c_n: f64,
    /// Fixed `a`; ignored when `assemble_a` is set.
    pub a: f64,
    pub assemble_a: bool,
    /// Integrability exponent of `g`; absent means `q = ∞`.
    pub q: Option<f64>,
    pub omega: f64,
    pub theta: f64,
    pub alpha_iso: f64,
    pub eta_iso: f64,
    /// Defaults to the value implied by `theta` and `alpha_iso`.
    pub beta: Option<f64>,
    pub theta_levels: usize,
    pub ladder_levels: usize,
    pub ladder_cells: usize,
    pub ladder_steps: usize,
    pub radii: Vec<f64>,
    pub holder_base: [f64; 3],
    pub kappa_iterations: usize,
    pub kappa_amp_max: f64,
    pub modulus_denominator: u32,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            stages: ALL_STAGES.to_vec(),
            levels: 4,
            k_s: 1.0,
            c_n: 1.0,
            a: 1.0,
            assemble_a: false,
            q: None,
            omega: 0.4,
            theta: 0.25,
            alpha_iso: 0.5,
            eta_iso: 0.01,
            beta: None,
            theta_levels: 4,
            ladder_levels: 3,
            ladder_cells: 48,
            ladder_steps: 48,
            radii: vec![0.1, 0.15, 0.2, 0.3, 0.4, 0.6],
            holder_base: [-0.75, 0.0, 0.0],
            kappa_iterations: 12,
            kappa_amp_max: 4.0,
            modulus_denominator: 27,
        }
    }
}

/// A validated configuration with all fields built.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: RunConfig,
    pub grid: SpaceGrid,
    pub a: Arc<DiffusionField>,
    pub g: Arc<SourceField>,
    pub bc: BoundaryCondition,
    pub params: SolverParams,
    pub constants: ConstantInputs,
    pub denominator: ModulusDenominator,
    /// `(initial-data seed, coefficient seed, source seed)`.
    pub seeds: [u64; 3],
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(path, format!("must be positive and finite, got {v}")))
    }
}

fn required(path: &str, v: Option<f64>, kind: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(bad(path, format!("must be finite, got {x}"))),
        None => Err(bad(path, format!("required for kind = {kind}"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid_spec(&self, refine: u32) -> (SpaceGrid, f64) {
        let g = &self.grid;
        let factor = 1usize << refine;
        let axis = Axis::symmetric(g.radius, g.cells * factor).expect("validated grid");
        (SpaceGrid::new(axis, axis), g.dt / factor as f64)
    }

    /// Checks every parameter and builds the fields. No pipeline starts without
    /// passing through here.
    pub fn validate(&self) -> Result<Validated> {
        let g = &self.grid;
        if g.dim != 1 {
            return Err(bad("grid.dim", format!("the solver supports dim = 1 only, got {}", g.dim)));
        }
        if g.cells < 8 || g.cells > 96 {
            return Err(bad("grid.cells", format!("need 8 <= cells <= 96, got {}", g.cells)));
        }
        positive("grid.radius", g.radius)?;
        positive("grid.dt", g.dt)?;
        if !(g.t_end > g.t_start) {
            return Err(bad("grid.t_end", format!("must exceed grid.t_start = {}", g.t_start)));
        }
        let span = (g.t_end - g.t_start) / g.dt;
        if (span - span.round()).abs() > 1e-9 * span.max(1.0) {
            return Err(bad("grid.dt", format!("time span {} is not a whole number of steps", g.t_end - g.t_start)));
        }
        let (grid, _) = self.grid_spec(0);
        let limit = grid.x.spacing() / grid.v.max_abs();
        if g.dt > limit * (1.0 + 1e-12) {
            return Err(bad("grid.dt", format!("CFL bound dt <= dx / v_max = {limit} violated by {}", g.dt)));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let seeds = [rng.gen(), rng.gen(), rng.gen()];
        let a = self.build_diffusion(seeds[1])?;
        let phase = PhaseGrid::new(
            TimeAxis::new(g.t_start, g.t_end, span.round() as usize).map_err(|e| bad("grid", e.to_string()))?,
            grid.x,
            grid.v,
        )
        .map_err(|e| bad("grid", e.to_string()))?;
        validate_ellipticity(&a, &phase, 256, seeds[1]).map_err(|e| bad("coefficients", e.to_string()))?;
        let src = self.build_source(seeds[2])?;

        self.initial_checks()?;
        let s = &self.solver;
        positive("solver.tolerance", s.tolerance)?;
        let reconstruction = match s.reconstruction.as_str() {
            "limited" => Reconstruction::Limited,
            "upwind" => Reconstruction::Upwind,
            other => return Err(bad("solver.reconstruction", format!("expected `limited` or `upwind`, got `{other}`"))),
        };
        let bc = match s.bc {
            BoundaryKind::KineticIbvp => BoundaryCondition::KineticIbvp,
            BoundaryKind::WholeSpace => BoundaryCondition::WholeSpace,
        };
        let params = SolverParams { reconstruction, tolerance: s.tolerance };

        let (constants, denominator) = self.diagnostic_checks()?;
        Ok(Validated { config: self.clone(), grid, a: Arc::new(a), g: Arc::new(src), bc, params, constants, denominator, seeds })
    }

    fn build_diffusion(&self, seed: u64) -> Result<DiffusionField> {
        let c = &self.coefficients;
        let lambda = c.lambda;
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(bad("coefficients.lambda", format!("must exceed 1, got {lambda}")));
        }
        let kind = match c.kind {
            CoefficientKind::Constant => "constant",
            CoefficientKind::Checkerboard => "checkerboard",
            CoefficientKind::Random => "random",
            CoefficientKind::Oscillatory => "oscillatory",
        };
        let in_range = |path: &str, v: f64| -> Result<f64> {
            if v >= 1.0 / lambda && v <= lambda {
                Ok(v)
            } else {
                Err(bad(path, format!("{v} lies outside [1/lambda, lambda] = [{}, {lambda}]", 1.0 / lambda)))
            }
        };
        let spec = match c.kind {
            CoefficientKind::Constant => DiffusionSpec::Constant {
                value: in_range("coefficients.value", c.value.unwrap_or(1.0))?,
            },
            CoefficientKind::Checkerboard => DiffusionSpec::Checkerboard {
                low: in_range("coefficients.low", required("coefficients.low", c.low, kind)?)?,
                high: in_range("coefficients.high", required("coefficients.high", c.high, kind)?)?,
                cell: positive("coefficients.cell", required("coefficients.cell", c.cell, kind)?)?,
                offset: c.offset,
            },
            CoefficientKind::Random => DiffusionSpec::CellwiseRandom {
                low: in_range("coefficients.low", required("coefficients.low", c.low, kind)?)?,
                high: in_range("coefficients.high", required("coefficients.high", c.high, kind)?)?,
                cell: positive("coefficients.cell", required("coefficients.cell", c.cell, kind)?)?,
                seed,
            },
            CoefficientKind::Oscillatory => {
                let mean = required("coefficients.mean", c.mean, kind)?;
                let amplitude = required("coefficients.amplitude", c.amplitude, kind)?;
                in_range("coefficients.mean - |coefficients.amplitude|", mean - amplitude.abs())?;
                in_range("coefficients.mean + |coefficients.amplitude|", mean + amplitude.abs())?;
                DiffusionSpec::Oscillatory {
                    mean,
                    amplitude,
                    frequency: positive("coefficients.frequency", required("coefficients.frequency", c.frequency, kind)?)?,
                }
            }
        };
        if let (Some(lo), Some(hi)) = (c.low, c.high) {
            if lo > hi {
                return Err(bad("coefficients.high", format!("must be >= coefficients.low = {lo}")));
            }
        }
        build_diffusion(1, lambda, &spec).map_err(|e| bad("coefficients", e.to_string()))
    }

    fn build_source(&self, seed: u64) -> Result<SourceField> {
        let s = &self.source;
        let spec = match s.kind {
            SourceKind::Zero => SourceSpec::Zero,
            SourceKind::Constant => SourceSpec::Constant { value: required("source.value", s.value, "constant")? },
            SourceKind::Bump => SourceSpec::Bump {
                amplitude: required("source.amplitude", s.amplitude, "bump")?,
                center: s.center.unwrap_or([-0.5, 0.0, 0.0]),
                width: positive("source.width", required("source.width", s.width, "bump")?)?,
            },
            SourceKind::Noise => {
                let bound = required("source.bound", s.bound, "noise")?;
                if bound < 0.0 {
                    return Err(bad("source.bound", format!("must be nonnegative, got {bound}")));
                }
                SourceSpec::Noise { bound, cell: positive("source.cell", s.cell.unwrap_or(0.25))?, seed }
            }
        };
        build_source(&spec).map_err(|e| bad("source", e.to_string()))
    }

    fn initial_checks(&self) -> Result<()> {
        let i = &self.initial;
        if !i.amplitude.is_finite() {
            return Err(bad("initial.amplitude", "must be finite"));
        }
        if i.kind == InitialKind::Bumps {
            if i.count == 0 {
                return Err(bad("initial.count", "need at least one bump"));
            }
            positive("initial.width", i.width)?;
        }
        Ok(())
    }

    fn diagnostic_checks(&self) -> Result<(ConstantInputs, ModulusDenominator)> {
        let d = &self.diagnostics;
        if d.stages.is_empty() {
            return Err(bad("diagnostics.stages", "select at least one stage"));
        }
        if d.levels == 0 || d.levels > 6 {
            return Err(bad("diagnostics.levels", format!("need 1 <= levels <= 6, got {}", d.levels)));
        }
        positive("diagnostics.k_s", d.k_s)?;
        positive("diagnostics.c_n", d.c_n)?;
        positive("diagnostics.a", d.a)?;
        let n = self.grid.dim as f64;
        if let Some(q) = d.q {
            let need = 12.0 * n + 6.0;
            if !(q > need) {
                return Err(bad("diagnostics.q", format!("each q > 12N+6 requires q > {need} for N = {}, got {q}", self.grid.dim)));
            }
        }
        let half = 1.0 - 0.5f64.powf(1.0 / n);
        if !(d.omega > 0.0 && d.omega < half) {
            return Err(bad("diagnostics.omega", format!("need 0 < omega < 1 - 2^(-1/N) = {half}, got {}", d.omega)));
        }
        if !(d.theta > 0.0 && d.theta < 0.5) {
            return Err(bad("diagnostics.theta", format!("need 0 < theta < 1/2, got {}", d.theta)));
        }
        positive("diagnostics.alpha_iso", d.alpha_iso)?;
        positive("diagnostics.eta_iso", d.eta_iso)?;
        if let Some(b) = d.beta {
            positive("diagnostics.beta", b)?;
        }
        if d.radii.len() < 3 {
            return Err(bad("diagnostics.radii", format!("need at least 3 radii, got {}", d.radii.len())));
        }
        for (i, r) in d.radii.iter().enumerate() {
            positive(&format!("diagnostics.radii[{i}]"), *r)?;
        }
        let [t, x, v] = d.holder_base;
        let g = &self.grid;
        if !(t >= g.t_start && t <= g.t_end && x.abs() < g.radius && v.abs() < g.radius) {
            return Err(bad("diagnostics.holder_base", format!("({t}, {x}, {v}) lies outside the grid")));
        }
        if d.ladder_levels > 6 {
            return Err(bad("diagnostics.ladder_levels", format!("need at most 6, got {}", d.ladder_levels)));
        }
        if d.ladder_cells < 8 || d.ladder_cells > 96 {
            return Err(bad("diagnostics.ladder_cells", format!("need 8 <= cells <= 96, got {}", d.ladder_cells)));
        }
        // unit box: dx = 2 / cells, v_max < 1, dt = 1.5 / steps
        if 1.5 / (d.ladder_steps as f64) > 2.0 / d.ladder_cells as f64 {
            return Err(bad("diagnostics.ladder_steps", "CFL bound violated on the unit box"));
        }
        positive("diagnostics.kappa_amp_max", d.kappa_amp_max)?;
        let denominator = match d.modulus_denominator {
            27 => ModulusDenominator::TwentySeven,
            28 => ModulusDenominator::TwentyEight,
            other => return Err(bad("diagnostics.modulus_denominator", format!("expected 27 or 28, got {other}"))),
        };
        let constants = ConstantInputs {
            dim: self.grid.dim,
            lambda: self.coefficients.lambda,
            gamma: self.source_bound_hint(),
            q: d.q,
            k_s: d.k_s,
            c_n: d.c_n,
            a: if d.assemble_a { AChoice::Assembled } else { AChoice::Fixed(d.a) },
        };
        Ok((constants, denominator))
    }

    /// Declared bound of `g` without building it.
    fn source_bound_hint(&self) -> f64 {
        let s = &self.source;
        match s.kind {
            SourceKind::Zero => 0.0,
            SourceKind::Constant => s.value.unwrap_or(0.0).abs(),
            SourceKind::Bump => s.amplitude.unwrap_or(0.0).abs(),
            SourceKind::Noise => s.bound.unwrap_or(0.0),
        }
    }
}

impl Validated {
    /// Initial data at `t_start` on `grid`, scaled by `amplitude`.
    pub fn initial_field(&self, grid: SpaceGrid, amplitude: f64) -> PhaseField {
        let c = &self.config;
        let t0 = c.grid.t_start;
        let r = c.grid.radius;
        match c.initial.kind {
            InitialKind::Constant => PhaseField::from_fn(grid, t0, |_, _| amplitude),
            InitialKind::LinearV => PhaseField::from_fn(grid, t0, |_, v| amplitude * v),
            InitialKind::Bumps => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seeds[0]);
                let bumps: Vec<(f64, f64, f64)> = (0..c.initial.count)
                    .map(|_| (rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-1.0..1.0)))
                    .collect();
                let w2 = 2.0 * c.initial.width * c.initial.width;
                let shape = |x: f64, v: f64| {
                    let damp = (1.0 - (x / r).powi(2)).max(0.0).powi(2) * (1.0 - (v / r).powi(2)).max(0.0).powi(2);
                    damp * bumps.iter().map(|(cx, cv, s)| s * (-((x - cx).powi(2) + (v - cv).powi(2)) / w2).exp()).sum::<f64>()
                };
                // normalize on the coarse grid so refined runs share the shape
                let (coarse, _) = c.grid_spec(0);
                let peak = (0..coarse.x.cells)
                    .flat_map(|ix| (0..coarse.v.cells).map(move |iv| (ix, iv)))
                    .map(|(ix, iv)| shape(coarse.x.center(ix), coarse.v.center(iv)).abs())
                    .fold(0.0, f64::max);
                let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
                PhaseField::from_fn(grid, t0, |x, v| scale * shape(x, v))
            }
        }
    }
}

/// An ensemble: every template is run once per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub output: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// One config per `(template, seed)`, named `<name>-s<seed>`, all validated.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        if self.runs.is_empty() {
            return Err(bad("runs", "the ensemble is empty"));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "the ensemble is empty"));
        }
        let mut out = Vec::new();
        for (i, template) in self.runs.iter().enumerate() {
            let base = template.name.clone().unwrap_or_else(|| format!("run{i}"));
            for &seed in &self.seeds {
                let mut cfg = template.clone();
                let name = format!("{base}-s{seed}");
                cfg.seed = seed;
                cfg.output = Some(self.output.join(&name));
                cfg.name = Some(name);
                cfg.validate().map_err(|e| match e {
                    ConfigError::Invalid { path, reason } => bad(&format!("runs[{i}].{path}"), reason),
                    other => other,
                })?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunConfig {
        RunConfig::from_toml(text, Path::new("test.toml")).unwrap()
    }

    #[test]
    fn defaults_validate() {
        let v = RunConfig::default().validate().unwrap();
        assert_eq!(v.grid.x.cells, 48);
        assert_eq!(v.denominator, ModulusDenominator::TwentySeven);
    }

    #[test]
    fn dotted_keys_parse() {
        let c = parse("seed = 3\ngrid.cells = 32\ncoefficients.kind = \"checkerboard\"\ncoefficients.low = 0.6\ncoefficients.high = 1.5\ncoefficients.cell = 0.3\n");
        assert_eq!(c.grid.cells, 32);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn small_q_is_rejected_with_its_path() {
        let err = parse("diagnostics.q = 10.0").validate().unwrap_err().to_string();
        assert!(err.starts_with("diagnostics.q:"), "{err}");
        assert!(err.contains("q > 18"), "{err}");
        assert!(parse("diagnostics.q = 19.0").validate().is_ok());
    }

    #[test]
    fn invalid_fields_name_their_path() {
        let cases = [
            ("diagnostics.omega = 0.5", "diagnostics.omega"),
            ("diagnostics.theta = 0.5", "diagnostics.theta"),
            ("coefficients.kind = \"checkerboard\"\ncoefficients.low = 0.6\ncoefficients.cell = 0.3", "coefficients.high"),
            ("coefficients.value = 3.0", "coefficients.value"),
            ("grid.dt = 0.1", "grid.dt"),
            ("source.kind = \"noise\"", "source.bound"),
            ("diagnostics.radii = [0.1, 0.2]", "diagnostics.radii"),
        ];
        for (text, path) in cases {
            let err = parse(text).validate().unwrap_err().to_string();
            assert!(err.starts_with(&format!("{path}:")), "{text} -> {err}");
        }
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(RunConfig::from_toml("grid.cels = 4", Path::new("x")).is_err());
    }

    #[test]
    fn initial_bumps_vanish_at_the_faces() {
        let v = RunConfig::default().validate().unwrap();
        let f = v.initial_field(v.grid, 0.8);
        assert!((f.max().abs().max(f.min().abs()) - 0.8).abs() < 1e-12);
        let n = v.grid.v.cells;
        assert!((0..v.grid.x.cells).all(|ix| f.get(ix, 0).abs() < 1e-2 && f.get(ix, n - 1).abs() < 1e-2));
    }

    #[test]
    fn sweep_expansion() {
        let s: SweepConfig = toml::from_str("output = \"o\"\nseeds = [1, 2]\n[[runs]]\nname = \"c\"\n[[runs]]\n").unwrap();
        let runs = s.expand().unwrap();
        let names: Vec<_> = runs.iter().map(|r| r.name.clone().unwrap()).collect();
        assert_eq!(names, ["c-s1", "c-s2", "run1-s1", "run1-s2"]);
        let empty: SweepConfig = toml::from_str("output = \"o\"").unwrap();
        assert!(empty.expand().is_err());
    }
}
