use std::sync::Arc;

use kfp_core::coefficients::{build_diffusion, DiffusionField, DiffusionSpec, SourceField};
use kfp_core::degiorgi::*;
use kfp_core::geometry::{DyadicLevel, Threshold};
use kfp_core::solver::{solve, BoundaryCondition, BoundaryData, SolverParams};
use kfp_core::{Axis, PhaseField, SpaceGrid, Trajectory};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

const DT: f64 = 1.0 / 32.0;

fn grid(cells: usize) -> SpaceGrid {
    SpaceGrid::new(Axis::symmetric(1.5, cells).unwrap(), Axis::symmetric(1.5, cells).unwrap())
}

fn constant_trajectory(cells: usize, value: f64) -> Trajectory {
    let g = grid(cells);
    let fields = (0..=48)
        .map(|n| PhaseField::from_fn(g, -1.5 + n as f64 * DT, |_, _| value))
        .collect();
    Trajectory::new(g, DT, fields).unwrap()
}

#[test]
fn truncation_shifts_and_clips() {
    let f = PhaseField::from_fn(grid(8), 0.0, |_, _| 0.3);
    let t = truncate(&f, 1).unwrap();
    assert!(t.values.iter().all(|u| (u - 0.05).abs() < 1e-15));
    assert!(truncate(&f.map(|_| 0.2), 1).unwrap().values.iter().all(|&u| u == 0.0));
    let signed = PhaseField::from_fn(grid(8), 0.0, |x, _| x);
    assert_eq!(truncate(&signed, 0).unwrap().values, signed.map(|u| u.max(0.0)).values);
}

/// Independent evaluation of `U_k` for `f = 1`: the sup is attained at every
/// slice and the dissipation integrand is time-independent.
fn constant_u_oracle(g: &SpaceGrid, k: u32, lambda: f64) -> f64 {
    let level = DyadicLevel::new(k as i64).unwrap();
    let (tk, _, ck) = level.params();
    let eta = level.cutoff();
    let cbar = 1.0 - ck;
    let (dx, dv) = (g.x.spacing(), g.v.spacing());
    let ex: Vec<f64> = g.x.centers().iter().map(|x| eta.profile(x.abs())).collect();
    let mut ev = vec![0.0];
    ev.extend(g.v.centers().iter().map(|v| eta.profile(v.abs())));
    ev.push(0.0);
    let sx: f64 = ex.iter().sum::<f64>() * dx;
    let sv2: f64 = ev.iter().map(|e| e * e).sum::<f64>() * dv;
    // the outermost gaps are half a cell wide
    let n = ev.len();
    let grad: f64 = (1..n)
        .map(|j| {
            let w = if j == 1 || j == n - 1 { 0.5 * dv } else { dv };
            (ev[j] - ev[j - 1]).powi(2) / w
        })
        .sum();
    0.5 * sx * sv2 * cbar * cbar + tk.abs() / lambda * sx * grad * cbar * cbar
}

#[test]
fn constant_field_energy_matches_quadrature() {
    let traj = constant_trajectory(48, 1.0);
    for k in 0..=4 {
        let r = truncation_energy(&traj, k, 2.0).unwrap();
        let want = constant_u_oracle(&traj.grid, k, 2.0);
        assert!((r.u_k - want).abs() < 1e-10 * want, "k = {k}: {} vs {want}", r.u_k);
    }
    let zero = constant_trajectory(16, 0.0);
    assert_eq!(truncation_energy(&zero, 2, 2.0).unwrap().u_k, 0.0);
}

#[test]
fn constant_field_breaks_energy_monotonicity() {
    // the cutoffs steepen faster than the truncation shrinks f = 1
    let traj = constant_trajectory(48, 1.0);
    let reports = truncation_sequence(&traj, 4, 2.0).unwrap();
    assert!(reports[4].u_k > reports[3].u_k, "{} <= {}", reports[4].u_k, reports[3].u_k);
    assert!(!is_monotone(&reports, 0.0));
}

#[test]
fn truncation_energy_requires_coverage() {
    let g = grid(8);
    let fields = (0..=8).map(|n| PhaseField::zeros(g, -0.25 + n as f64 * DT)).collect();
    let short = Trajectory::new(g, DT, fields).unwrap();
    assert!(truncation_energy(&short, 0, 2.0).is_err());
}

#[test]
fn chebyshev_on_constant_fields() {
    for k in 1..=3u32 {
        let level = DyadicLevel::new(k as i64).unwrap();
        let prev = DyadicLevel::new(k as i64 - 1).unwrap();
        let delta = 1e-3;
        let value = level.level() + delta;
        let traj = constant_trajectory(48, value);
        let audit = chebyshev_audit(&traj, k, 2.0).unwrap();
        let q = previous_cylinder(level).unwrap();
        let full = kfp_core::geometry::level_set_measure(&traj, Threshold::Above(f64::NEG_INFINITY), &q).unwrap();
        assert!((audit.measure - full).abs() < 1e-12);
        let factor = 2f64.powi(2 * k as i32 + 2) * (value - prev.level()).powi(2);
        assert!((audit.bound - factor * full).abs() < 1e-12 * audit.bound);
        assert!(audit.holds && audit.chain_holds);
    }
    let zero = chebyshev_audit(&constant_trajectory(16, 0.0), 1, 2.0).unwrap();
    assert_eq!((zero.measure, zero.bound), (0.0, 0.0));
}

#[test]
fn sources_vanish_below_the_level() {
    let traj = constant_trajectory(48, 0.2);
    let a = DiffusionField::identity(1, 2.0).unwrap();
    let s = build_barrier_sources(&traj, 1, &a, &SourceField::zero(), BarrierVariant::TimeCutoff).unwrap();
    assert!(s.s1.iter().chain(&s.s1_implicit).flatten().all(|&x| x == 0.0));
    assert!(s.s2.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn face_source_of_the_constant_field() {
    let traj = constant_trajectory(48, 1.0);
    let a = DiffusionField::identity(1, 2.0).unwrap();
    for k in 1..=2u32 {
        let level = DyadicLevel::new(k as i64).unwrap();
        let eta = level.cutoff();
        let cbar = 1.0 - level.level();
        let s = build_barrier_sources(&traj, k, &a, &SourceField::zero(), BarrierVariant::Literal).unwrap();
        let (nx, nv, dv) = (s.grid.x.cells, s.grid.v.cells, s.grid.v.spacing());
        let last = s.s2.last().unwrap();
        let mut worst_exact = 0.0f64;
        let mut worst_analytic = 0.0f64;
        for ix in 0..nx {
            let ex = eta.profile(s.grid.x.center(ix).abs());
            for j in 1..nv {
                let (lo, hi) = (s.grid.v.center(j - 1), s.grid.v.center(j));
                let discrete = -cbar * ex * (eta.profile(hi.abs()).powi(2) - eta.profile(lo.abs()).powi(2)) / dv;
                let vf = s.grid.v.face(j);
                let analytic = -2.0 * ex * eta.profile(vf.abs()) * cbar * eta.derivative_1d(vf);
                let got = last[ix * (nv + 1) + j];
                worst_exact = worst_exact.max((got - discrete).abs());
                worst_analytic = worst_analytic.max((got - analytic).abs());
            }
        }
        assert!(worst_exact < 1e-10, "k = {k}: {worst_exact}");
        // second order in the face spacing
        let slope = eta.max_slope();
        assert!(worst_analytic < 2.0 * slope.powi(3) * dv * dv, "k = {k}: {worst_analytic}");
    }
}

fn rough_run(cells: usize, dt: f64, amplitude: f64) -> (Trajectory, DiffusionField) {
    let a = build_diffusion(
        1,
        2.0,
        &DiffusionSpec::Checkerboard { low: 0.6, high: 1.5, cell: 0.3, offset: None },
    )
    .unwrap();
    let g = grid(cells);
    let f0 = PhaseField::from_fn(g, -1.5, |x, v| {
        amplitude * (-(x * x + v * v) / 0.5).exp() * (1.0 - (v / 1.5).powi(2)).max(0.0)
    });
    let zero = BoundaryCondition::Dirichlet(BoundaryData(Arc::new(|_, _, _| 0.0)));
    let traj = solve(f0, &a, &SourceField::zero(), 0.0, dt, &zero, &SolverParams::default()).unwrap();
    (traj, a)
}

#[test]
fn barrier_dominates_truncated_field() {
    let (coarse, a) = rough_run(48, DT, 0.9);
    let (fine, _) = rough_run(96, DT / 2.0, 0.9);
    let params = SolverParams::default();
    let g = SourceField::zero();
    for k in 1..=2 {
        let c = barrier_comparison(&coarse, k, &a, &g, BarrierVariant::TimeCutoff, &params).unwrap();
        let f = barrier_comparison(&fine, k, &a, &g, BarrierVariant::TimeCutoff, &params).unwrap();
        let tau = refinement_difference(&c, &f).unwrap();
        assert!(c.min_fk >= 0.0);
        assert!(c.min_gap >= -10.0 * tau, "k = {k}: gap {} vs tau {tau}", c.min_gap);
        assert!(c.norms.within_bounds(), "{:?}", c.norms);
    }
}

#[test]
fn barrier_violation_shrinks_under_refinement() {
    // the checkerboard switches in time at t = -0.75 = T_1, which a source
    // sampled at slice times instead of step midpoints gets wrong
    let (coarse, a) = rough_run(48, DT, 3.0);
    let (fine, _) = rough_run(96, DT / 2.0, 3.0);
    let params = SolverParams::default();
    let g = SourceField::zero();
    for k in 1..=2 {
        let c = barrier_comparison(&coarse, k, &a, &g, BarrierVariant::TimeCutoff, &params).unwrap();
        let f = barrier_comparison(&fine, k, &a, &g, BarrierVariant::TimeCutoff, &params).unwrap();
        assert!(c.min_gap >= -0.05 * c.max_fk, "k = {k}: {} vs max F_k {}", c.min_gap, c.max_fk);
        assert!(f.min_gap.min(0.0) >= c.min_gap.min(0.0), "k = {k}: {} then {}", c.min_gap, f.min_gap);
    }
}

#[test]
fn gate_on_signed_data() {
    let neg = constant_trajectory(48, -0.3);
    let k = IterationConstants::new(ConstantInputs::placeholder(1, 2.0, 0.0)).unwrap();
    let v = linfty_gate(&neg, k.log10_kappa, None).unwrap();
    assert!(v.premise_holds && v.conclusion_holds);
    assert_eq!(v.log10_premise, f64::NEG_INFINITY);
    let one = constant_trajectory(48, 1.0);
    let v = linfty_gate(&one, k.log10_kappa, None).unwrap();
    assert!(!v.premise_holds && !v.conclusion_holds && !v.is_counterexample());
    assert!((v.log10_premise - 13.5f64.log10()).abs() < 1e-12);
}

#[test]
fn empirical_threshold_brackets_the_amplitude() {
    let g = grid(16);
    let run = |amp: f64| {
        let fields = (0..=48).map(|n| PhaseField::from_fn(g, -1.5 + n as f64 * DT, |_, _| amp)).collect();
        Trajectory::new(g, DT, fields)
    };
    let emp = kappa_empirical(run, 2.0, 30).unwrap();
    assert!(emp.bracketed);
    assert!((emp.amplitude - 0.5).abs() < 1e-8);
    assert!((emp.log10_kappa - (0.25f64 * 13.5).log10()).abs() < 1e-7);
    assert!(!emp.counterexample(-10.0));
}

#[test]
fn exponent_sum_identity_is_exact() {
    for (n, d) in [(3, 2), (2, 1), (10, 9)] {
        let alpha = BigRational::new(BigInt::from(n), BigInt::from(d));
        for k in 0..=20 {
            let (direct, closed) = exponent_sum(&alpha, k);
            assert_eq!(direct, closed, "alpha = {n}/{d}, k = {k}");
        }
    }
}

#[test]
fn large_rho_iteration_collapses() {
    let ln_rho = 12.0 * std::f64::consts::LN_2;
    let alpha = 10.0 / 9.0;
    let threshold = -ln_rho * alpha / (alpha - 1.0).powi(2);
    let it = geometric_iteration(threshold - 50.0, ln_rho, alpha, 200).unwrap();
    assert!(it.bound_holds && it.doubly_exponential);
    let above = geometric_iteration(threshold + 1.0, ln_rho, alpha, 200).unwrap();
    assert!(!above.below_threshold && !above.doubly_exponential);
}

proptest! {
    #[test]
    fn truncations_nest(values in prop::collection::vec(-1.0f64..1.5, 64), k in 1u32..8) {
        let f = PhaseField::new(grid(8), 0.0, values).unwrap();
        prop_assert_eq!(nesting_violations(&f, k).unwrap(), 0);
    }

    #[test]
    fn truncation_does_not_steepen(values in prop::collection::vec(-1.0f64..1.5, 64), k in 1u32..8) {
        let f = PhaseField::new(grid(8), 0.0, values).unwrap();
        prop_assert!(gradient_excess(&f, k).unwrap() <= 1e-15);
    }

    #[test]
    fn iteration_bound_never_fails(ln_v0 in -400.0f64..5.0, ln_rho in 0.01f64..10.0, alpha in 1.05f64..3.0) {
        let it = geometric_iteration(ln_v0, ln_rho, alpha, 25).unwrap();
        prop_assert!(it.bound_holds);
    }
}
