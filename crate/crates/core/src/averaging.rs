//! Spectral fractional norms and velocity averages.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::field::{PhaseField, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    None,
    /// Zero-pad every axis with more than one sample to twice its length.
    #[default]
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralAxis {
    T,
    X,
    V,
}

impl SpectralAxis {
    fn index(self) -> usize {
        match self {
            SpectralAxis::T => 0,
            SpectralAxis::X => 1,
            SpectralAxis::V => 2,
        }
    }
}

/// Discrete Fourier coefficients of samples on a `(t, x, v)` box, `v` fastest.
#[derive(Clone, Debug)]
pub struct SpectralField {
    coeffs: Vec<Complex64>,
    shape: [usize; 3],
    lengths: [f64; 3],
    cell_volume: f64,
    physical_sq: f64,
    /// Nonzero samples on the outer layer of an unpadded box, where the
    /// periodic extension aliases the support.
    pub touches_boundary: bool,
}

fn transform_axis(data: &mut [Complex64], shape: [usize; 3], axis: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let n = shape[axis];
    if n == 1 {
        return;
    }
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * n * stride + s;
            for (i, c) in line.iter_mut().enumerate() {
                *c = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, c) in line.iter().enumerate() {
                data[base + i * stride] = *c;
            }
        }
    }
}

/// Signed frequency index of slot `i` in a transform of length `n`.
fn frequency(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl SpectralField {
    /// `values` in `t`-major, `v`-fastest order with the given shape and spacings.
    pub fn from_samples(values: &[f64], shape: [usize; 3], spacing: [f64; 3], padding: Padding) -> Result<Self> {
        if values.len() != shape.iter().product::<usize>() || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?} samples"),
                found: values.len().to_string(),
            });
        }
        if spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(invalid("spacing", format!("must be positive, got {spacing:?}")));
        }
        let padded = shape.map(|n| match padding {
            Padding::Double if n > 1 => 2 * n,
            _ => n,
        });
        let mut coeffs = vec![Complex64::new(0.0, 0.0); padded.iter().product()];
        let mut touches_boundary = false;
        for it in 0..shape[0] {
            for ix in 0..shape[1] {
                for iv in 0..shape[2] {
                    let u = values[(it * shape[1] + ix) * shape[2] + iv];
                    coeffs[(it * padded[1] + ix) * padded[2] + iv] = Complex64::new(u, 0.0);
                    let edge = [it, ix, iv].iter().zip(&shape).any(|(&i, &n)| n > 1 && (i == 0 || i == n - 1));
                    touches_boundary |= edge && u != 0.0;
                }
            }
        }
        let cell_volume: f64 = spacing.iter().product();
        let physical_sq = values.iter().map(|u| u * u).sum::<f64>() * cell_volume;
        let mut planner = FftPlanner::new();
        for axis in 0..3 {
            transform_axis(&mut coeffs, padded, axis, false, &mut planner);
        }
        let lengths = [0, 1, 2].map(|a| padded[a] as f64 * spacing[a]);
        Ok(Self {
            coeffs,
            shape: padded,
            lengths,
            cell_volume,
            physical_sq,
            touches_boundary: touches_boundary && padding == Padding::None,
        })
    }

    /// One `(x, v)` slice, with a trivial time axis.
    pub fn from_field(f: &PhaseField, padding: Padding) -> Result<Self> {
        let g = &f.grid;
        Self::from_samples(&f.values, [1, g.x.cells, g.v.cells], [1.0, g.x.spacing(), g.v.spacing()], padding)
    }

    /// All slices after the first, each standing for the time cell it closes.
    pub fn from_trajectory(traj: &Trajectory, padding: Padding) -> Result<Self> {
        if traj.len() < 2 {
            return Err(invalid("trajectory", "need at least two slices"));
        }
        let g = &traj.grid;
        let values: Vec<f64> = traj.fields[1..].iter().flat_map(|f| f.values.iter().copied()).collect();
        Self::from_samples(
            &values,
            [traj.len() - 1, g.x.cells, g.v.cells],
            [traj.dt, g.x.spacing(), g.v.spacing()],
            padding,
        )
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    fn weighted_sq(&self, weight: impl Fn([f64; 3]) -> f64) -> f64 {
        let [nt, nx, nv] = self.shape;
        let mut acc = 0.0;
        for it in 0..nt {
            let ft = frequency(it, nt);
            for ix in 0..nx {
                let fx = frequency(ix, nx);
                let row = (it * nx + ix) * nv;
                for iv in 0..nv {
                    let w = weight([ft, fx, frequency(iv, nv)]);
                    if w != 0.0 {
                        acc += w * self.coeffs[row + iv].norm_sqr();
                    }
                }
            }
        }
        acc * self.cell_volume / self.coeffs.len() as f64
    }

    /// `L^2` norm from the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sq(|_| 1.0).sqrt()
    }

    /// `L^2` norm of the samples.
    pub fn physical_l2_norm(&self) -> f64 {
        self.physical_sq.sqrt()
    }

    pub fn plancherel_error(&self) -> f64 {
        let (a, b) = (self.l2_norm(), self.physical_l2_norm());
        if b == 0.0 {
            a
        } else {
            (a - b).abs() / b
        }
    }

    /// `|| |2π ξ / L|^s û ||` along one axis; the zero mode carries `0^s`.
    pub fn frac_norm(&self, axis: SpectralAxis, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid("s", format!("order must lie in [0, 1], got {s}")));
        }
        let a = axis.index();
        let scale = 2.0 * PI / self.lengths[a];
        Ok(self.weighted_sq(|xi| (scale * xi[a].abs()).powf(2.0 * s)).sqrt())
    }

    /// Inverse transform, truncated to the first `shape` samples of each axis.
    pub fn inverse(&self, shape: [usize; 3]) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        let mut planner = FftPlanner::new();
        for axis in 0..3 {
            transform_axis(&mut data, self.shape, axis, true, &mut planner);
        }
        let scale = 1.0 / data.len() as f64;
        let mut out = Vec::with_capacity(shape.iter().product());
        for it in 0..shape[0] {
            for ix in 0..shape[1] {
                for iv in 0..shape[2] {
                    out.push(data[(it * self.shape[1] + ix) * self.shape[2] + iv].re * scale);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationAudit {
    /// `||D_v^{1/3} G||`.
    pub lhs: f64,
    /// `||G||^{2/3} ||D_v G||^{1/3}`.
    pub rhs: f64,
}

impl InterpolationAudit {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

pub fn interpolation_audit(g: &SpectralField) -> Result<InterpolationAudit> {
    let lhs = g.frac_norm(SpectralAxis::V, 1.0 / 3.0)?;
    let rhs = g.l2_norm().powf(2.0 / 3.0) * g.frac_norm(SpectralAxis::V, 1.0)?.powf(1.0 / 3.0);
    Ok(InterpolationAudit { lhs, rhs })
}

/// Norms entering the averaging bound for one barrier triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragingInputs {
    pub s1_l2: f64,
    pub s2_l2: f64,
    pub lambda: f64,
    /// Radius `R_k` of the velocity ball.
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragingAudit {
    /// `||D_t^{1/3} G|| + ||D_x^{1/3} G||`.
    pub lhs: f64,
    /// Right side with `C_N = 1`.
    pub rhs_unit: f64,
    pub g_l2: f64,
    pub dv_g_l2: f64,
    /// `lhs / rhs_unit`, the smallest `C_N` for which this triple satisfies the
    /// bound; `None` when both sides vanish.
    pub ratio: Option<f64>,
}

impl AveragingAudit {
    pub fn holds_with(&self, c_n: f64) -> bool {
        self.lhs <= c_n * self.rhs_unit * (1.0 + 1e-12)
    }
}

/// Compares the time and space fractional norms of `G` with the three-term bound
/// `C_N ||G|| + C_N (1+R)^{2/3} ||D_v G||^{2/3} (||S_2||^{1/3} + Λ^{1/3} ||D_v G||^{1/3})
/// + C_N (1+R)^{1/2} ||D_v G||^{1/2} (||S_1||^{1/2} + ||S_2||^{1/2} + Λ^{1/2} ||D_v G||^{1/2})`.
pub fn averaging_estimate_audit(g: &SpectralField, inputs: AveragingInputs) -> Result<AveragingAudit> {
    let lhs = g.frac_norm(SpectralAxis::T, 1.0 / 3.0)? + g.frac_norm(SpectralAxis::X, 1.0 / 3.0)?;
    let g_l2 = g.l2_norm();
    let d = g.frac_norm(SpectralAxis::V, 1.0)?;
    let AveragingInputs { s1_l2, s2_l2, lambda, radius } = inputs;
    let r = 1.0 + radius;
    let rhs_unit = g_l2
        + r.powf(2.0 / 3.0) * d.powf(2.0 / 3.0) * (s2_l2.cbrt() + (lambda * d).cbrt())
        + r.sqrt() * d.sqrt() * (s1_l2.sqrt() + s2_l2.sqrt() + (lambda * d).sqrt());
    let ratio = if rhs_unit == 0.0 && lhs == 0.0 { None } else { Some(lhs / rhs_unit) };
    Ok(AveragingAudit { lhs, rhs_unit, g_l2, dv_g_l2: d, ratio })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantFit {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Number of audits with a defined ratio.
    pub samples: usize,
}

/// Summary of the per-triple `C_N` estimates; the fitted constant is `max`.
pub fn fit_constant(audits: &[AveragingAudit]) -> Option<ConstantFit> {
    let mut r: Vec<f64> = audits.iter().filter_map(|a| a.ratio).collect();
    if r.is_empty() {
        return None;
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    let median = if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) };
    Some(ConstantFit { min: r[0], median, max: r[n - 1], samples: n })
}

/// Test functions in velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// `(1 - ((v - center)/radius)^2)^2` on the support, rescaled so that its
    /// grid quadrature equals one.
    Bump { center: f64, radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityAverage {
    /// `ρ[n][ix] = Σ_v f φ dv` for every slice.
    pub rho: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `||D_x^s f|| / ||f||` over the slices after the first.
    pub roughness_f: f64,
    pub roughness_rho: f64,
    /// `roughness_f / roughness_rho`; `None` when either norm vanishes.
    pub gain: Option<f64>,
}

fn weights(phi: TestFunction, v: &crate::geometry::Axis) -> Result<Vec<f64>> {
    let TestFunction::Bump { center, radius } = phi;
    if !(radius > 0.0) || center - radius < v.lo || center + radius > v.hi {
        return Err(invalid(
            "phi",
            format!("support [{}, {}] must lie in [{}, {}]", center - radius, center + radius, v.lo, v.hi),
        ));
    }
    let raw: Vec<f64> = v
        .centers()
        .iter()
        .map(|&u| {
            let z = (u - center) / radius;
            if z.abs() < 1.0 {
                (1.0 - z * z).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let mass = raw.iter().sum::<f64>() * v.spacing();
    if mass == 0.0 {
        return Err(invalid("phi", "support contains no grid cell"));
    }
    Ok(raw.into_iter().map(|w| w / mass).collect())
}

/// Velocity average of every slice and the smoothing gain along `x` at order `s`.
pub fn velocity_average(traj: &Trajectory, phi: TestFunction, s: f64, padding: Padding) -> Result<VelocityAverage> {
    let g = &traj.grid;
    let w = weights(phi, &g.v)?;
    let (nx, nv, dv) = (g.x.cells, g.v.cells, g.v.spacing());
    let rho: Vec<Vec<f64>> = traj
        .fields
        .iter()
        .map(|f| (0..nx).map(|ix| f.values[ix * nv..(ix + 1) * nv].iter().zip(&w).map(|(u, p)| u * p).sum::<f64>() * dv).collect())
        .collect();
    let roughness = |spec: &SpectralField| -> Result<f64> {
        let n = spec.l2_norm();
        Ok(if n == 0.0 { 0.0 } else { spec.frac_norm(SpectralAxis::X, s)? / n })
    };
    let (roughness_f, roughness_rho) = if traj.len() < 2 {
        (0.0, 0.0)
    } else {
        let sf = SpectralField::from_trajectory(traj, padding)?;
        let flat: Vec<f64> = rho[1..].iter().flatten().copied().collect();
        let sr = SpectralField::from_samples(&flat, [traj.len() - 1, nx, 1], [traj.dt, g.x.spacing(), 1.0], padding)?;
        (roughness(&sf)?, roughness(&sr)?)
    };
    let gain = (roughness_f > 0.0 && roughness_rho > 0.0).then(|| roughness_f / roughness_rho);
    Ok(VelocityAverage { rho, times: traj.times(), roughness_f, roughness_rho, gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;
    use crate::SpaceGrid;

    fn grid(n: usize) -> SpaceGrid {
        SpaceGrid::new(Axis::symmetric(1.5, n).unwrap(), Axis::symmetric(1.5, n).unwrap())
    }

    #[test]
    fn single_mode_multiplier() {
        let g = grid(32);
        let m = 3.0;
        let f = PhaseField::from_fn(g, 0.0, |x, v| (1.0 + x * x) * (2.0 * PI * m * (v + 1.5) / 3.0).cos());
        let spec = SpectralField::from_field(&f, Padding::None).unwrap();
        let want = (2.0 * PI * m / 3.0).cbrt() * f.l2_norm();
        let got = spec.frac_norm(SpectralAxis::V, 1.0 / 3.0).unwrap();
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        let audit = interpolation_audit(&spec).unwrap();
        assert!((audit.lhs - audit.rhs).abs() < 1e-12 * audit.rhs);
    }

    #[test]
    fn two_modes_are_strict() {
        let g = grid(32);
        let f = PhaseField::from_fn(g, 0.0, |_, v| {
            let y = 2.0 * PI * (v + 1.5) / 3.0;
            y.cos() + (4.0 * y).cos()
        });
        let audit = interpolation_audit(&SpectralField::from_field(&f, Padding::None).unwrap()).unwrap();
        // two equal weights at frequencies 1 and 4
        let want = (0.5 * (1.0 + 4f64.powf(2.0 / 3.0))).sqrt() / 8.5f64.powf(1.0 / 6.0);
        assert!((audit.lhs / audit.rhs - want).abs() < 1e-12);
        assert!(audit.lhs < audit.rhs);
    }

    #[test]
    fn round_trip_and_plancherel() {
        let g = grid(12);
        let values: Vec<f64> = (0..5 * g.len()).map(|i| (i * 37 % 101) as f64 / 50.0 - 1.0).collect();
        let spec = SpectralField::from_samples(&values, [5, 12, 12], [0.1, 0.25, 0.25], Padding::Double).unwrap();
        let back = spec.inverse([5, 12, 12]);
        let scale = values.iter().map(|u| u.abs()).fold(0.0, f64::max);
        assert!(values.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12 * scale));
        assert!(spec.plancherel_error() < 1e-12);
        assert!((spec.frac_norm(SpectralAxis::T, 0.0).unwrap() - spec.physical_l2_norm()).abs() < 1e-12 * spec.physical_l2_norm());
        assert!(!spec.touches_boundary);
        let raw = SpectralField::from_samples(&values, [5, 12, 12], [0.1, 0.25, 0.25], Padding::None).unwrap();
        assert!(raw.touches_boundary);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let spec = SpectralField::from_field(&PhaseField::zeros(grid(8), 0.0), Padding::Double).unwrap();
        assert_eq!(spec.frac_norm(SpectralAxis::X, 0.5).unwrap(), 0.0);
        let audit = averaging_estimate_audit(&spec, AveragingInputs { s1_l2: 0.0, s2_l2: 0.0, lambda: 2.0, radius: 1.0 }).unwrap();
        assert_eq!(audit.ratio, None);
        assert!(fit_constant(&[audit]).is_none());
    }

    #[test]
    fn averages_of_simple_profiles() {
        let g = grid(24);
        let fields = (0..3)
            .map(|n| PhaseField::from_fn(g, n as f64 * 0.1, |x, v| (x + 0.1 * n as f64).sin() + 0.0 * v))
            .collect();
        let traj = Trajectory::new(g, 0.1, fields).unwrap();
        let phi = TestFunction::Bump { center: 0.0, radius: 1.0 };
        let avg = velocity_average(&traj, phi, 1.0 / 3.0, Padding::Double).unwrap();
        for (n, row) in avg.rho.iter().enumerate() {
            for (ix, r) in row.iter().enumerate() {
                assert!((r - traj.fields[n].get(ix, 0)).abs() < 1e-12);
            }
        }
        let odd = Trajectory::new(g, 0.1, vec![PhaseField::from_fn(g, 0.0, |x, v| x.cos() * v.powi(3))]).unwrap();
        let avg = velocity_average(&odd, phi, 1.0 / 3.0, Padding::Double).unwrap();
        assert!(avg.rho[0].iter().all(|r| r.abs() < 1e-12));
        let wide = TestFunction::Bump { center: 1.0, radius: 1.0 };
        assert!(velocity_average(&odd, wide, 1.0 / 3.0, Padding::Double).is_err());
    }
}
