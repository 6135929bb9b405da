//! Rough diffusion coefficients and source terms.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Cylinder, PhaseGrid};
use crate::holder::ScalingMap;

/// Description of a diffusion field before validation.
#[derive(Clone, Debug, PartialEq)]
pub enum DiffusionSpec {
    Constant { value: f64 },
    /// Two values alternating on a `(t, x, v)` lattice of cubes of side `cell`.
    /// `offset` shifts the lattice; `None` means half a cell.
    Checkerboard { low: f64, high: f64, cell: f64, offset: Option<f64> },
    /// Independent uniform values on each lattice cube.
    CellwiseRandom { low: f64, high: f64, cell: f64, seed: u64 },
    /// `mean + amplitude * sin(2 pi k t) sin(2 pi k x) sin(2 pi k v)`.
    Oscillatory { mean: f64, amplitude: f64, frequency: f64 },
}

#[derive(Clone, Debug)]
enum Kind {
    Constant(f64),
    Checkerboard { values: [f64; 2], cell: f64, offset: f64 },
    CellwiseRandom { low: f64, high: f64, cell: f64, seed: u64 },
    Oscillatory { mean: f64, amplitude: f64, frequency: f64 },
    Zoomed { inner: Arc<DiffusionField>, map: ScalingMap },
}

/// A symmetric uniformly elliptic coefficient `A(t, x, v)` with constant `lambda`.
#[derive(Clone, Debug)]
pub struct DiffusionField {
    dim: usize,
    lambda: f64,
    kind: Kind,
}

pub fn build_diffusion(dim: usize, lambda: f64, spec: &DiffusionSpec) -> Result<DiffusionField> {
    if !(1..=3).contains(&dim) {
        return Err(invalid("dim", format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("ellipticity constant must exceed 1, got {lambda}")));
    }
    let in_range = |name: &'static str, value: f64| -> Result<()> {
        if value >= 1.0 / lambda && value <= lambda {
            Ok(())
        } else {
            Err(invalid(
                name,
                format!("{value} lies outside [1/lambda, lambda] = [{}, {lambda}]", 1.0 / lambda),
            ))
        }
    };
    let positive_cell = |cell: f64| -> Result<()> {
        if cell > 0.0 && cell.is_finite() {
            Ok(())
        } else {
            Err(invalid("cell", format!("cell size must be positive, got {cell}")))
        }
    };
    let kind = match *spec {
        DiffusionSpec::Constant { value } => {
            in_range("value", value)?;
            Kind::Constant(value)
        }
        DiffusionSpec::Checkerboard { low, high, cell, offset } => {
            in_range("low", low)?;
            in_range("high", high)?;
            positive_cell(cell)?;
            Kind::Checkerboard {
                values: [low, high],
                cell,
                offset: offset.unwrap_or(0.5 * cell),
            }
        }
        DiffusionSpec::CellwiseRandom { low, high, cell, seed } => {
            in_range("low", low)?;
            in_range("high", high)?;
            if low > high {
                return Err(invalid("low", format!("empty range [{low}, {high}]")));
            }
            positive_cell(cell)?;
            Kind::CellwiseRandom { low, high, cell, seed }
        }
        DiffusionSpec::Oscillatory { mean, amplitude, frequency } => {
            in_range("mean + amplitude", mean + amplitude.abs())?;
            in_range("mean - amplitude", mean - amplitude.abs())?;
            if !frequency.is_finite() {
                return Err(invalid("frequency", "must be finite"));
            }
            Kind::Oscillatory { mean, amplitude, frequency }
        }
    };
    Ok(DiffusionField { dim, lambda, kind })
}

impl DiffusionField {
    pub fn identity(dim: usize, lambda: f64) -> Result<Self> {
        build_diffusion(dim, lambda, &DiffusionSpec::Constant { value: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The coefficient pulled back by a kinetic scaling map (no factor of `eps`).
    pub fn zoomed(self: &Arc<Self>, map: ScalingMap) -> Result<Self> {
        if self.dim != 1 {
            return Err(Error::Unsupported("zooming is implemented for N = 1".into()));
        }
        Ok(Self {
            dim: 1,
            lambda: self.lambda,
            kind: Kind::Zoomed {
                inner: Arc::clone(self),
                map,
            },
        })
    }

    /// Scalar coefficient for `N = 1`.
    pub fn scalar(&self, t: f64, x: f64, v: f64) -> f64 {
        match &self.kind {
            Kind::Constant(a) => *a,
            Kind::Checkerboard { values, cell, offset } => {
                let p = lattice(t, *offset, *cell) + lattice(x, *offset, *cell) + lattice(v, *offset, *cell);
                values[p.rem_euclid(2) as usize]
            }
            Kind::CellwiseRandom { low, high, cell, seed } => {
                let off = 0.5 * cell;
                let key = [lattice(t, off, *cell), lattice(x, off, *cell), lattice(v, off, *cell)];
                let mut rng = cell_rng(*seed, &key);
                rng.gen_range(*low..=*high)
            }
            Kind::Oscillatory { mean, amplitude, frequency } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                mean + amplitude * (w * t).sin() * (w * x).sin() * (w * v).sin()
            }
            Kind::Zoomed { inner, map } => {
                let (tt, xx, vv) = map.apply(t, x, v);
                inner.scalar(tt, xx, vv)
            }
        }
    }

    /// Matrix coefficient at a point of `R x R^N x R^N`.
    pub fn matrix(&self, t: f64, x: &[f64], v: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        debug_assert!(x.len() == n && v.len() == n);
        if n == 1 {
            return DMatrix::from_element(1, 1, self.scalar(t, x[0], v[0]));
        }
        match &self.kind {
            Kind::Constant(a) => DMatrix::identity(n, n) * *a,
            Kind::Checkerboard { values, cell, offset } => {
                let base: i64 = lattice(t, *offset, *cell)
                    + x.iter().chain(v).map(|&c| lattice(c, *offset, *cell)).sum::<i64>();
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        values[(base + i as i64).rem_euclid(2) as usize]
                    } else {
                        0.0
                    }
                })
            }
            Kind::CellwiseRandom { low, high, cell, seed } => {
                let off = 0.5 * cell;
                let mut key = vec![lattice(t, off, *cell)];
                key.extend(x.iter().chain(v).map(|&c| lattice(c, off, *cell)));
                let mut rng = cell_rng(*seed, &key);
                // shrink by a few ulps so rotation roundoff stays inside the range
                let (lo, hi) = (low * (1.0 + 1e-12), high * (1.0 - 1e-12));
                let eig: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi.max(lo))).collect();
                if n == 2 {
                    // spectral clamp: rotate a diagonal matrix with entries in range
                    let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                    let (s, c) = th.sin_cos();
                    let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
                    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
                    let m = &r * d * r.transpose();
                    (&m + m.transpose()) * 0.5
                } else {
                    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig))
                }
            }
            Kind::Oscillatory { mean, amplitude, frequency } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                let s = (w * t).sin() * x.iter().chain(v).map(|&c| (w * c).sin()).product::<f64>();
                DMatrix::identity(n, n) * (mean + amplitude * s)
            }
            Kind::Zoomed { .. } => unreachable!("zoomed fields are one-dimensional"),
        }
    }
}

fn lattice(c: f64, offset: f64, cell: f64) -> i64 {
    ((c + offset) / cell).floor() as i64
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one lattice cell.
pub(crate) fn cell_rng(seed: u64, key: &[i64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for &k in key {
        h = splitmix(h ^ k as u64);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Result of a successful ellipticity check.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityCertificate {
    pub samples: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    pub max_asymmetry: f64,
    /// `min(min_eig - 1/lambda, lambda - max_eig)`.
    pub margin: f64,
}

/// Checks symmetry and the eigenvalue bounds at grid nodes and random points.
///
/// For `N = 1` every space-time node of `grid` is checked. For `N >= 2` the
/// grid box supplies the sampling ranges for each component and only random
/// points (plus the box center) are drawn.
pub fn validate_ellipticity(
    field: &DiffusionField,
    grid: &PhaseGrid,
    budget: usize,
    seed: u64,
) -> Result<EllipticityCertificate> {
    if budget == 0 {
        return Err(invalid("budget", "sample budget must be positive"));
    }
    let n = field.dim;
    let lower = 1.0 / field.lambda;
    let upper = field.lambda;
    let mut cert = EllipticityCertificate {
        samples: 0,
        min_eig: f64::INFINITY,
        max_eig: f64::NEG_INFINITY,
        max_asymmetry: 0.0,
        margin: f64::INFINITY,
    };
    let mut check = |t: f64, x: &[f64], v: &[f64]| -> Result<()> {
        let m = field.matrix(t, x, v);
        let asym = (&m - m.transpose()).amax();
        let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues;
        let lo = eig.min();
        let hi = eig.max();
        cert.samples += 1;
        cert.min_eig = cert.min_eig.min(lo);
        cert.max_eig = cert.max_eig.max(hi);
        cert.max_asymmetry = cert.max_asymmetry.max(asym);
        if asym > 0.0 || lo < lower || hi > upper || !lo.is_finite() || !hi.is_finite() {
            let mut point = vec![t];
            point.extend_from_slice(x);
            point.extend_from_slice(v);
            return Err(Error::Ellipticity {
                point,
                min_eig: lo,
                max_eig: hi,
                lower,
                upper,
            });
        }
        Ok(())
    };
    let s = &grid.space;
    if n == 1 {
        for step in 0..=grid.time.steps {
            let t = grid.time.time(step);
            for ix in 0..s.x.cells {
                for iv in 0..s.v.cells {
                    check(t, &[s.x.center(ix)], &[s.v.center(iv)])?;
                }
            }
        }
    } else {
        let tc = 0.5 * (grid.time.start + grid.time.end);
        let xc = vec![0.5 * (s.x.lo + s.x.hi); n];
        let vc = vec![0.5 * (s.v.lo + s.v.hi); n];
        check(tc, &xc, &vc)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let t = rng.gen_range(grid.time.start..=grid.time.end);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(s.x.lo..=s.x.hi)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(s.v.lo..=s.v.hi)).collect();
        check(t, &x, &v)?;
    }
    cert.margin = (cert.min_eig - lower).min(upper - cert.max_eig);
    Ok(cert)
}

/// Description of a source term before validation.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude * exp(-|p - center|^2 / (2 width^2))` in `(t, x, v)`.
    Bump { amplitude: f64, center: [f64; 3], width: f64 },
    /// Cellwise Gaussian noise of standard deviation `bound / 2`, clamped to `[-bound, bound]`.
    Noise { bound: f64, cell: f64, seed: u64 },
}

#[derive(Clone, Debug)]
enum SourceKind {
    Zero,
    Constant(f64),
    Bump { amplitude: f64, center: [f64; 3], width: f64 },
    Noise { bound: f64, cell: f64, seed: u64 },
    Transformed { inner: Arc<SourceField>, map: Option<ScalingMap>, factor: f64 },
}

/// A source `g(t, x, v)` with a declared pointwise bound.
#[derive(Clone, Debug)]
pub struct SourceField {
    kind: SourceKind,
    bound: f64,
}

pub fn build_source(spec: &SourceSpec) -> Result<SourceField> {
    let finite = |name: &'static str, v: f64| -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(invalid(name, "must be finite"))
        }
    };
    let (kind, bound) = match *spec {
        SourceSpec::Zero => (SourceKind::Zero, 0.0),
        SourceSpec::Constant { value } => {
            finite("value", value)?;
            (SourceKind::Constant(value), value.abs())
        }
        SourceSpec::Bump { amplitude, center, width } => {
            finite("amplitude", amplitude)?;
            if !(width > 0.0) {
                return Err(invalid("width", format!("must be positive, got {width}")));
            }
            (SourceKind::Bump { amplitude, center, width }, amplitude.abs())
        }
        SourceSpec::Noise { bound, cell, seed } => {
            if !(bound >= 0.0 && bound.is_finite()) {
                return Err(invalid("bound", format!("must be nonnegative, got {bound}")));
            }
            if !(cell > 0.0) {
                return Err(invalid("cell", format!("must be positive, got {cell}")));
            }
            (SourceKind::Noise { bound, cell, seed }, bound)
        }
    };
    Ok(SourceField { kind, bound })
}

impl SourceField {
    pub fn zero() -> Self {
        Self {
            kind: SourceKind::Zero,
            bound: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero) || self.bound == 0.0
    }

    /// Declared bound on `|g|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn scaled(self: &Arc<Self>, factor: f64) -> Self {
        Self {
            kind: SourceKind::Transformed {
                inner: Arc::clone(self),
                map: None,
                factor,
            },
            bound: self.bound * factor.abs(),
        }
    }

    /// `eps^2 * g` pulled back by the map.
    pub fn zoomed(self: &Arc<Self>, map: ScalingMap) -> Self {
        let factor = map.eps * map.eps;
        Self {
            kind: SourceKind::Transformed {
                inner: Arc::clone(self),
                map: Some(map),
                factor,
            },
            bound: self.bound * factor,
        }
    }

    pub fn eval(&self, t: f64, x: f64, v: f64) -> f64 {
        match &self.kind {
            SourceKind::Zero => 0.0,
            SourceKind::Constant(c) => *c,
            SourceKind::Bump { amplitude, center, width } => {
                let d2 = (t - center[0]).powi(2) + (x - center[1]).powi(2) + (v - center[2]).powi(2);
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            SourceKind::Noise { bound, cell, seed } => {
                if *bound == 0.0 {
                    return 0.0;
                }
                let off = 0.5 * cell;
                let key = [lattice(t, off, *cell), lattice(x, off, *cell), lattice(v, off, *cell)];
                let mut rng = cell_rng(*seed, &key);
                let z = standard_normal(&mut rng);
                (0.5 * bound * z).clamp(-bound, *bound)
            }
            SourceKind::Transformed { inner, map, factor } => {
                let (tt, xx, vv) = match map {
                    Some(m) => m.apply(t, x, v),
                    None => (t, x, v),
                };
                factor * inner.eval(tt, xx, vv)
            }
        }
    }

    /// Quadrature `L^q` norm over `region` on the space-time cells of `grid`;
    /// `q = inf` gives the maximum over sampled nodes.
    pub fn lq_norm(&self, grid: &PhaseGrid, region: &Cylinder, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(invalid("q", format!("need q >= 1, got {q}")));
        }
        let s = &grid.space;
        let w = s.cell_area() * grid.dt();
        let mut acc = 0.0f64;
        let mut any = false;
        for n in 1..=grid.time.steps {
            let t = grid.time.time(n);
            if !region.holds_slice(t) {
                continue;
            }
            for ix in 0..s.x.cells {
                let x = s.x.center(ix);
                for iv in 0..s.v.cells {
                    let v = s.v.center(iv);
                    if !region.holds_space(x, v) {
                        continue;
                    }
                    any = true;
                    let g = self.eval(t, x, v).abs();
                    if q.is_infinite() {
                        acc = acc.max(g);
                    } else {
                        acc += g.powf(q) * w;
                    }
                }
            }
        }
        if !any {
            return Err(Error::Coverage("no grid cells inside the region".into()));
        }
        Ok(if q.is_infinite() { acc } else { acc.powf(1.0 / q) })
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 is kept away from zero
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PhaseGrid {
        PhaseGrid::centered(-1.5, 0.0, 12, 1.5, 1.5, 12).unwrap()
    }

    #[test]
    fn identity_certificate() {
        let a = DiffusionField::identity(1, 2.0).unwrap();
        let cert = validate_ellipticity(&a, &grid(), 100, 1).unwrap();
        assert_eq!(cert.margin, 0.5);
        assert_eq!(cert.samples, 13 * 144 + 100);
    }

    #[test]
    fn checkerboard_in_range_is_valid() {
        let spec = DiffusionSpec::Checkerboard { low: 0.6, high: 1.5, cell: 0.3, offset: None };
        let a = build_diffusion(1, 2.0, &spec).unwrap();
        let cert = validate_ellipticity(&a, &grid(), 500, 2).unwrap();
        assert_eq!(cert.min_eig, 0.6);
        assert_eq!(cert.max_eig, 1.5);
    }

    #[test]
    fn out_of_range_specs_rejected() {
        let spec = DiffusionSpec::CellwiseRandom { low: 0.4, high: 2.0, cell: 0.3, seed: 0 };
        assert!(build_diffusion(1, 2.0, &spec).is_err());
        assert!(build_diffusion(1, 1.0, &DiffusionSpec::Constant { value: 1.0 }).is_err());
    }

    #[test]
    fn constant_above_lambda_fails_validation() {
        // bypass the builder to exercise the validator itself
        let a = DiffusionField { dim: 1, lambda: 2.0, kind: Kind::Constant(2.5) };
        match validate_ellipticity(&a, &grid(), 10, 0) {
            Err(Error::Ellipticity { max_eig, point, .. }) => {
                assert_eq!(max_eig, 2.5);
                assert_eq!(point.len(), 3);
            }
            other => panic!("expected ellipticity failure, got {other:?}"),
        }
    }

    #[test]
    fn random_two_by_two_field_is_clamped() {
        let spec = DiffusionSpec::CellwiseRandom { low: 0.5, high: 2.0, cell: 0.25, seed: 9 };
        let a = build_diffusion(2, 2.0, &spec).unwrap();
        let cert = validate_ellipticity(&a, &grid(), 2000, 3).unwrap();
        assert!(cert.margin >= -1e-12);
        // direct closed-form eigenvalues of a symmetric 2x2 matrix
        let m = a.matrix(0.1, &[0.2, -0.3], &[0.4, 0.9]);
        let (p, q, r) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        let disc = ((p - r) * (p - r) / 4.0 + q * q).sqrt();
        let (lo, hi) = ((p + r) / 2.0 - disc, (p + r) / 2.0 + disc);
        assert!(lo >= 0.5 - 1e-12 && hi <= 2.0 + 1e-12);
    }

    #[test]
    fn checkerboard_is_discontinuous_off_grid_faces() {
        let spec = DiffusionSpec::Checkerboard { low: 0.6, high: 1.5, cell: 0.3, offset: None };
        let a = build_diffusion(1, 2.0, &spec).unwrap();
        // lattice face at x = 0.15
        assert_ne!(a.scalar(0.1, 0.149, 0.1), a.scalar(0.1, 0.151, 0.1));
    }

    #[test]
    fn seeded_fields_reproduce() {
        let spec = DiffusionSpec::CellwiseRandom { low: 0.5, high: 2.0, cell: 0.3, seed: 4 };
        let a = build_diffusion(1, 2.0, &spec).unwrap();
        let b = build_diffusion(1, 2.0, &spec).unwrap();
        for i in 0..50 {
            let p = (i as f64 * 0.1 - 2.0, i as f64 * 0.07 - 1.0, 0.3 - i as f64 * 0.05);
            assert_eq!(a.scalar(p.0, p.1, p.2).to_bits(), b.scalar(p.0, p.1, p.2).to_bits());
        }
    }

    #[test]
    fn source_norms() {
        let g = PhaseGrid::centered(-1.5, 0.0, 48, 1.5, 1.5, 48).unwrap();
        let q = Cylinder::standard(1, 1.5).unwrap();
        let one = build_source(&SourceSpec::Constant { value: 1.0 }).unwrap();
        assert_eq!(one.lq_norm(&g, &q, f64::INFINITY).unwrap(), 1.0);
        assert!((one.lq_norm(&g, &q, 2.0).unwrap() - 13.5f64.sqrt()).abs() < 1e-12);
        let zero = build_source(&SourceSpec::Zero).unwrap();
        assert_eq!(zero.lq_norm(&g, &q, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn noise_respects_bound() {
        let g = build_source(&SourceSpec::Noise { bound: 0.1, cell: 0.05, seed: 3 }).unwrap();
        let mut hit_clamp = false;
        for i in 0..4000 {
            let s = g.eval(i as f64 * 0.013, i as f64 * 0.031 - 1.0, 1.0 - i as f64 * 0.017);
            assert!(s.abs() <= 0.1);
            hit_clamp |= s.abs() == 0.1;
        }
        assert!(hit_clamp);
    }
}
