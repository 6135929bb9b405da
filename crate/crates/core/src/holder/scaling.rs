//! The kinetic scaling map.

use crate::error::{invalid, Result};

/// `(s, y, xi) -> (t0 + eps^2 s, x0 + eps^3 y + eps^2 s v0, v0 + eps xi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingMap {
    pub eps: f64,
    pub t0: f64,
    pub x0: f64,
    pub v0: f64,
}

impl ScalingMap {
    pub fn new(eps: f64, t0: f64, x0: f64, v0: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", format!("scaling factor must be positive, got {eps}")));
        }
        if !(t0.is_finite() && x0.is_finite() && v0.is_finite()) {
            return Err(invalid("base", "base point must be finite"));
        }
        Ok(Self { eps, t0, x0, v0 })
    }

    /// Map centered at the origin.
    pub fn at_origin(eps: f64) -> Result<Self> {
        Self::new(eps, 0.0, 0.0, 0.0)
    }

    pub fn apply(&self, s: f64, y: f64, xi: f64) -> (f64, f64, f64) {
        let e2 = self.eps * self.eps;
        (
            self.t0 + e2 * s,
            self.x0 + e2 * self.eps * y + e2 * s * self.v0,
            self.v0 + self.eps * xi,
        )
    }

    /// Map whose pullback equals pulling back by `self` and then by `inner`:
    /// `(T_self (T_inner F)) = T_{composed} F`. Both maps must be centered at the origin.
    pub fn then(&self, inner: &ScalingMap) -> Result<Self> {
        let centered = |m: &ScalingMap| m.t0 == 0.0 && m.x0 == 0.0 && m.v0 == 0.0;
        if !centered(self) || !centered(inner) {
            return Err(invalid("base", "composition is implemented for maps centered at the origin"));
        }
        Self::at_origin(self.eps * inner.eps)
    }
}
