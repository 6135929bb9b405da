//! Conservative transport `∂t u + v ∂x u = 0` along one row of fixed `v`.

/// Reconstruction used for the face fluxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// Piecewise linear with the monotonized-central limiter (second order, TVD).
    #[default]
    Limited,
    /// Piecewise constant donor cell (first order, linear and monotone).
    Upwind,
}

/// Ghost values outside a row, ordered outward: `[u_{-1}, u_{-2}]` and `[u_n, u_{n+1}]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowEnds {
    Periodic,
    Ghost { left: [f64; 2], right: [f64; 2] },
}

fn mc(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        return 0.0;
    }
    let m = (0.5 * (a + b)).abs().min(2.0 * a.abs()).min(2.0 * b.abs());
    m.copysign(a)
}

/// Advances `u` by one transport step with Courant number `c = v dt / dx`, `|c| <= 1`.
pub fn advect_row(u: &mut [f64], c: f64, ends: RowEnds, rec: Reconstruction, ext: &mut Vec<f64>) {
    if c == 0.0 {
        return;
    }
    let n = u.len();
    if c < 0.0 {
        u.reverse();
        let ends = match ends {
            RowEnds::Periodic => RowEnds::Periodic,
            RowEnds::Ghost { left, right } => RowEnds::Ghost { left: right, right: left },
        };
        advect_right(u, -c, ends, rec, ext);
        u.reverse();
    } else {
        advect_right(u, c, ends, rec, ext);
    }
    debug_assert_eq!(u.len(), n);
}

fn advect_right(u: &mut [f64], c: f64, ends: RowEnds, rec: Reconstruction, ext: &mut Vec<f64>) {
    let n = u.len();
    // ext[j] holds u_{j-2} for j in 0..n+4
    ext.clear();
    match ends {
        RowEnds::Periodic => {
            ext.push(u[(2 * n - 2) % n]);
            ext.push(u[n - 1]);
            ext.extend_from_slice(u);
            ext.push(u[0]);
            ext.push(u[1 % n]);
        }
        RowEnds::Ghost { left, right } => {
            ext.push(left[1]);
            ext.push(left[0]);
            ext.extend_from_slice(u);
            ext.push(right[0]);
            ext.push(right[1]);
        }
    }
    let half = 0.5 * (1.0 - c);
    let flux = |j: usize| -> f64 {
        // flux through the right face of cell ext[j]
        let s = match rec {
            Reconstruction::Limited => mc(ext[j] - ext[j - 1], ext[j + 1] - ext[j]),
            Reconstruction::Upwind => 0.0,
        };
        c * (ext[j] + half * s)
    };
    let mut left_flux = flux(1);
    for i in 0..n {
        let right_flux = flux(i + 2);
        u[i] -= right_flux - left_flux;
        left_flux = right_flux;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_shift_by_one_cell_is_exact() {
        let mut u: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let orig = u.clone();
        let mut ext = Vec::new();
        advect_row(&mut u, 1.0, RowEnds::Periodic, Reconstruction::Limited, &mut ext);
        for i in 0..16 {
            assert!((u[i] - orig[(i + 15) % 16]).abs() < 1e-15);
        }
        advect_row(&mut u, -1.0, RowEnds::Periodic, Reconstruction::Limited, &mut ext);
        for i in 0..16 {
            assert!((u[i] - orig[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_mass_is_conserved() {
        let mut u: Vec<f64> = (0..32).map(|i| if (8..14).contains(&i) { 1.0 } else { 0.1 }).collect();
        let m0: f64 = u.iter().sum();
        let mut ext = Vec::new();
        for _ in 0..50 {
            advect_row(&mut u, 0.37, RowEnds::Periodic, Reconstruction::Limited, &mut ext);
        }
        let m1: f64 = u.iter().sum();
        assert!((m0 - m1).abs() < 1e-12);
        assert!(u.iter().all(|&x| (0.1 - 1e-14..=1.0 + 1e-14).contains(&x)));
    }

    #[test]
    fn inflow_ghosts_enter_the_row() {
        let mut u = vec![0.0; 8];
        let mut ext = Vec::new();
        let ends = RowEnds::Ghost { left: [1.0, 1.0], right: [0.0, 0.0] };
        advect_row(&mut u, 1.0, ends, Reconstruction::Upwind, &mut ext);
        assert_eq!(u[0], 1.0);
        assert_eq!(u[1], 0.0);
    }
}
