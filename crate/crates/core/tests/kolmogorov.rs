//! Second moments of the constant-coefficient problem against the moment ODE.

use kfp_core::coefficients::{DiffusionField, SourceField};
use kfp_core::solver::{moments, solve, BoundaryCondition, SolverParams};
use kfp_core::{Axis, PhaseField, SpaceGrid};

/// For `a = 1`, `g = 0` the covariance evolves as `Phi S0 Phi^T + K(t)` with
/// `Phi = [[1, t], [0, 1]]` and `K = [[2t^3/3, t^2], [t^2, 2t]]`.
fn excess_errors(cells: usize) -> Vec<f64> {
    let grid = SpaceGrid::new(Axis::symmetric(4.5, cells).unwrap(), Axis::symmetric(7.5, cells).unwrap());
    let w = 0.25;
    let f0 = PhaseField::from_fn(grid, 0.0, |x, v| (-(x * x + v * v) / (2.0 * w * w)).exp());
    let s0 = moments(&f0).cov;
    let dt = grid.x.spacing() / 7.5;
    let a = DiffusionField::identity(1, 2.0).unwrap();
    let traj = solve(f0, &a, &SourceField::zero(), 1.0, dt, &BoundaryCondition::WholeSpace, &SolverParams::default()).unwrap();
    let mut errors = Vec::new();
    for t in [0.25, 0.5, 1.0] {
        let m = moments(&traj.fields[traj.slice_at(t).unwrap()]).cov;
        let pushed = [
            s0[0][0] + 2.0 * t * s0[0][1] + t * t * s0[1][1],
            s0[0][1] + t * s0[1][1],
            s0[1][1],
        ];
        let got = [m[0][0] - pushed[0], m[0][1] - pushed[1], m[1][1] - pushed[2]];
        let want = [2.0 * t * t * t / 3.0, t * t, 2.0 * t];
        for i in 0..3 {
            errors.push(((got[i] - want[i]) / want[i]).abs());
        }
    }
    errors
}

#[test]
fn moments_follow_the_kolmogorov_kernel() {
    let fine = excess_errors(96);
    let worst = fine.iter().copied().fold(0.0, f64::max);
    assert!(worst < 0.02, "worst relative error {worst}: {fine:?}");
    let coarse = excess_errors(48).iter().copied().fold(0.0, f64::max);
    let order = (coarse / worst).log2();
    assert!(order >= 1.0, "observed order {order}");
}
