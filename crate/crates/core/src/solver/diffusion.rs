//! Implicit divergence-form diffusion in `v` along one column of fixed `x`.

use crate::error::{Error, Result};

/// Harmonic mean, the face value of a discontinuous coefficient.
pub fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Scratch buffers for the tridiagonal solve.
#[derive(Default)]
pub struct Column {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

/// One column's problem: `u - r D(a D u) = rhs` with Dirichlet values at both v-faces.
pub struct ColumnProblem<'a> {
    /// Cell values of the coefficient.
    pub a: &'a [f64],
    /// `dt / dv^2`.
    pub r: f64,
    pub lower_value: f64,
    pub upper_value: f64,
    /// Optional face flux `S` added as `dt (S_{j+1/2} - S_{j-1/2}) / dv`, with `m + 1` entries.
    pub face_source: Option<&'a [f64]>,
    /// `dt / dv`, the scale of the face source divergence.
    pub face_scale: f64,
    /// Optional cell source added as `dt S_j`.
    pub cell_source: Option<&'a [f64]>,
    pub dt: f64,
}

impl Column {
    /// Solves in place and returns the relative residual.
    pub fn solve(&mut self, u: &mut [f64], p: &ColumnProblem<'_>, tolerance: f64) -> Result<f64> {
        let m = u.len();
        let a = p.a;
        self.lower.clear();
        self.diag.clear();
        self.upper.clear();
        self.rhs.clear();
        for j in 0..m {
            let west = if j == 0 { 2.0 * a[0] } else { harmonic(a[j - 1], a[j]) };
            let east = if j + 1 == m { 2.0 * a[m - 1] } else { harmonic(a[j], a[j + 1]) };
            self.lower.push(if j == 0 { 0.0 } else { -p.r * west });
            self.upper.push(if j + 1 == m { 0.0 } else { -p.r * east });
            self.diag.push(1.0 + p.r * (west + east));
            let mut b = u[j];
            if j == 0 {
                b += p.r * west * p.lower_value;
            }
            if j + 1 == m {
                b += p.r * east * p.upper_value;
            }
            if let Some(s) = p.face_source {
                b += p.face_scale * (s[j + 1] - s[j]);
            }
            if let Some(s) = p.cell_source {
                b += p.dt * s[j];
            }
            self.rhs.push(b);
        }
        thomas(&self.lower, &self.diag, &self.upper, &self.rhs, u, &mut self.work);
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..m {
            let mut r = self.diag[j] * u[j] - self.rhs[j];
            if j > 0 {
                r += self.lower[j] * u[j - 1];
            }
            if j + 1 < m {
                r += self.upper[j] * u[j + 1];
            }
            res = res.max(r.abs());
            scale = scale.max(self.rhs[j].abs());
        }
        let rel = res / (1.0 + scale);
        if !(rel <= tolerance) {
            return Err(Error::LinearSolve {
                residual: rel,
                tolerance,
            });
        }
        Ok(rel)
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], x: &mut [f64], c: &mut Vec<f64>) {
    let m = diag.len();
    c.clear();
    c.resize(m, 0.0);
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for j in 1..m {
        c[j] = upper[j - 1] / beta;
        beta = diag[j] - lower[j] * c[j];
        x[j] = (rhs[j] - lower[j] * x[j - 1]) / beta;
    }
    for j in (0..m - 1).rev() {
        x[j] -= c[j + 1] * x[j + 1];
    }
}

/// Discrete velocity Dirichlet energy `sum_faces |D w|^2 h_face` of one column
/// with zero values beyond both ends (boundary faces sit at distance `dv / 2`).
pub fn column_gradient_energy(w: &[f64], dv: f64) -> f64 {
    let m = w.len();
    let mut e = 2.0 * (w[0] * w[0] + w[m - 1] * w[m - 1]) / dv;
    for j in 0..m - 1 {
        let d = w[j + 1] - w[j];
        e += d * d / dv;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        let m = 7;
        let lower: Vec<f64> = (0..m).map(|j| if j == 0 { 0.0 } else { -0.3 - 0.01 * j as f64 }).collect();
        let upper: Vec<f64> = (0..m).map(|j| if j + 1 == m { 0.0 } else { -0.2 }).collect();
        let diag = vec![2.0; m];
        let rhs: Vec<f64> = (0..m).map(|j| j as f64 - 3.0).collect();
        let mut x = vec![0.0; m];
        let mut w = Vec::new();
        thomas(&lower, &diag, &upper, &rhs, &mut x, &mut w);
        let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                lower[i]
            } else if i + 1 == j {
                upper[i]
            } else {
                0.0
            }
        });
        let y = dense.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        for j in 0..m {
            assert!((x[j] - y[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_data_is_steady() {
        let m = 10;
        let dv = 0.2;
        let centers: Vec<f64> = (0..m).map(|j| -1.0 + (j as f64 + 0.5) * dv).collect();
        let mut u = centers.clone();
        let a = vec![1.3; m];
        let p = ColumnProblem { a: &a, r: 5.0, lower_value: -1.0, upper_value: 1.0, face_source: None, face_scale: 0.0, cell_source: None, dt: 0.0 };
        Column::default().solve(&mut u, &p, 1e-12).unwrap();
        for j in 0..m {
            assert!((u[j] - centers[j]).abs() < 1e-13);
        }
    }
}
