use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{invalid, Result};
use crate::geometry::ball_volume;

/// How the constant `a[Λ, γ]` of the barrier bounds is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AChoice {
    Fixed(f64),
    /// Largest of the explicit coefficients in the bounds on `G_k`, `D_v G_k`,
    /// `S_{k,1}` and `S_{k,2}`, see [`AAssembly`].
    Assembled,
}

/// Coefficients of `2^{2k} U_{k-1}^{1-2/r}` and `2^{2k} U_{k-1}` in the sum of the
/// four squared barrier norms, with `||g||_{L^r} <= |Q[3/2]|^{1/2} γ` and
/// `2^{(2k+1)(1-2/r)} <= 2^{2k+1}`. Then `a^2 = max(power_term, linear_term)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AAssembly {
    pub power_term: f64,
    pub linear_term: f64,
}

impl AAssembly {
    pub fn new(dim: usize, lambda: f64, gamma: f64) -> Self {
        let g2 = ambient_measure(dim) * gamma * gamma;
        let l = lambda;
        // G_k: 54 g^2 and 9(27+24Λ^3) 2^4; D_v G_k: 9Λ g^2 and 3(27Λ+24Λ^4) 2^3;
        // S_{k,1}: 6 g^2 and (27+16Λ^3) 2^4; S_{k,2}: 3Λ^2 2^6
        let power_term = 2.0 * (54.0 + 9.0 * l + 6.0) * g2;
        let linear_term = 144.0 * (27.0 + 24.0 * l.powi(3))
            + 24.0 * (27.0 * l + 24.0 * l.powi(4))
            + 16.0 * (27.0 + 16.0 * l.powi(3))
            + 192.0 * l * l;
        Self { power_term, linear_term }
    }

    pub fn a(&self) -> f64 {
        self.power_term.max(self.linear_term).sqrt()
    }
}

/// `|Q[3/2]|`.
fn ambient_measure(dim: usize) -> f64 {
    1.5 * ball_volume(dim, 1.5).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantInputs {
    pub dim: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Integrability of `g`; `None` is `q = ∞`.
    pub q: Option<f64>,
    pub k_s: f64,
    pub c_n: f64,
    pub a: AChoice,
}

impl ConstantInputs {
    /// `K_S = C_N = a = 1` and `q = ∞`.
    pub fn placeholder(dim: usize, lambda: f64, gamma: f64) -> Self {
        Self { dim, lambda, gamma, q: None, k_s: 1.0, c_n: 1.0, a: AChoice::Fixed(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationConstants {
    pub inputs: ConstantInputs,
    /// Hölder exponent used on `g`, equal to `q`.
    pub r: Option<f64>,
    /// Sobolev exponent, `1/p = 1/2 - 1/(6N+3)`.
    pub p: f64,
    pub alpha: f64,
    pub a: f64,
    pub a_assembly: Option<AAssembly>,
    pub b: f64,
    pub c: f64,
    pub big_c: f64,
    pub ln_rho: f64,
    /// `2α/(α-1)^2`.
    pub kappa_exponent: f64,
    pub log10_kappa: f64,
}

impl IterationConstants {
    pub fn new(inputs: ConstantInputs) -> Result<Self> {
        let ConstantInputs { dim, lambda, gamma, q, k_s, c_n, a } = inputs;
        if !(1..=3).contains(&dim) {
            return Err(invalid("dim", format!("expected 1, 2 or 3, got {dim}")));
        }
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("need 1 <= lambda < inf, got {lambda}")));
        }
        for (name, v) in [("gamma", gamma), ("k_s", k_s), ("c_n", c_n)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        let n = dim as f64;
        let inv_q = match q {
            None => 0.0,
            Some(q) if q > 12.0 * n + 6.0 => 1.0 / q,
            Some(q) => return Err(invalid("q", format!("need q > 12N+6 = {}, got {q}", 12 * dim + 6))),
        };
        let alpha = 1.0 + 1.0 / (6.0 * n + 3.0) - 2.0 * inv_q;
        if alpha <= 1.0 {
            return Err(invalid("alpha", format!("recursion exponent {alpha} must exceed 1")));
        }
        let p = 1.0 / (0.5 - 1.0 / (6.0 * n + 3.0));
        let (a, a_assembly) = match a {
            AChoice::Fixed(a) if a > 0.0 && a.is_finite() => (a, None),
            AChoice::Fixed(a) => return Err(invalid("a", format!("must be positive, got {a}"))),
            AChoice::Assembled => {
                let asm = AAssembly::new(dim, lambda, gamma);
                (asm.a(), Some(asm))
            }
        };
        let b = a * (1.0 + (6.0 + 5.0 * lambda) * c_n).sqrt();
        let c = 8.0 * (1.0 + 2.0 * lambda) + gamma * ambient_measure(dim).sqrt();
        let c2q = c.powf(2.0 * inv_q);
        let big_c = 12.0 * k_s * k_s * (1.0 + 2.0 * lambda) * c.powf(1.0 / (6.0 * n + 3.0)) * (1.0 + c2q) * b * b
            + 3.0 * k_s * (1.0 + c2q).sqrt() * b * gamma;
        let ln_rho = 12.0 * std::f64::consts::LN_2 + big_c.ln_1p();
        let kappa_exponent = 2.0 * alpha / (alpha - 1.0).powi(2);
        let log10_kappa =
            0.5f64.log10().min(-kappa_exponent * ln_rho / std::f64::consts::LN_10 - 2.0 * c.log10());
        Ok(Self { inputs, r: q, p, alpha, a, a_assembly, b, c, big_c, ln_rho, kappa_exponent, log10_kappa })
    }

    pub fn log10_rho(&self) -> f64 {
        self.ln_rho / std::f64::consts::LN_10
    }

    /// Threshold `ln ρ^{-α/(α-1)^2}` below which `ln V_0` forces `V_k -> 0`.
    pub fn ln_v0_threshold(&self) -> f64 {
        -self.ln_rho * self.alpha / (self.alpha - 1.0).powi(2)
    }
}

/// `2α/(α-1)^2` as an exact rational, for `α = 1 + 1/(6N+3) - 2/q` with integer
/// `q` (`None` is `q = ∞`).
pub fn kappa_exponent_exact(dim: usize, q: Option<u64>) -> Result<BigRational> {
    let m = BigInt::from(6 * dim as u64 + 3);
    let mut alpha = BigRational::one() + BigRational::new(BigInt::one(), m);
    if let Some(q) = q {
        alpha -= BigRational::new(BigInt::from(2), BigInt::from(q));
    }
    let e = &alpha - BigRational::one();
    if e <= BigRational::zero() {
        return Err(invalid("q", "recursion exponent must exceed 1"));
    }
    Ok(BigRational::from_integer(BigInt::from(2)) * &alpha / (&e * &e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursionRow {
    pub k: usize,
    /// `ln C + 6k ln 2 + α ln U_{k-2} - ln U_k`; `+∞` when `U_k = 0`.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursionAudit {
    pub rows: Vec<RecursionRow>,
    pub pass_rate: f64,
}

/// Checks `U_k <= C 2^{6k} U_{k-2}^α` for every `k >= 2`, in log space.
pub fn recursion_margins(u: &[f64], ln_c: f64, alpha: f64) -> Result<RecursionAudit> {
    if u.len() < 3 {
        return Err(invalid("u", format!("need U_0..U_K with K >= 2, got {} values", u.len())));
    }
    if let Some(bad) = u.iter().find(|x| !(**x >= 0.0)) {
        return Err(invalid("u", format!("energies must be nonnegative, got {bad}")));
    }
    let rows: Vec<RecursionRow> = (2..u.len())
        .map(|k| {
            let margin = if u[k] == 0.0 {
                f64::INFINITY
            } else {
                ln_c + 6.0 * k as f64 * std::f64::consts::LN_2 + alpha * u[k - 2].ln() - u[k].ln()
            };
            RecursionRow { k, margin, holds: margin >= 0.0 }
        })
        .collect();
    let pass_rate = rows.iter().filter(|r| r.holds).count() as f64 / rows.len() as f64;
    Ok(RecursionAudit { rows, pass_rate })
}

pub fn recursion_audit(u: &[f64], constants: &IterationConstants) -> Result<RecursionAudit> {
    recursion_margins(u, constants.big_c.ln(), constants.alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricIteration {
    /// `ln V_k` for `k = 0..=k_max`, with `V_k = ρ^k V_{k-1}^α`.
    pub ln_v: Vec<f64>,
    /// `α^k (ln V_0 + ln ρ · α/(α-1)^2)`.
    pub ln_bound: Vec<f64>,
    pub bound_holds: bool,
    /// `ln V_0` is below the threshold `-ln ρ · α/(α-1)^2`.
    pub below_threshold: bool,
    /// `ln V_k` decreases and `ln V_{k+1} / ln V_k` has settled to `α`.
    pub doubly_exponential: bool,
}

/// Iterates the recursion at equality in log space.
pub fn geometric_iteration(ln_v0: f64, ln_rho: f64, alpha: f64, k_max: usize) -> Result<GeometricIteration> {
    if !(ln_rho > 0.0) {
        return Err(invalid("rho", "need rho > 1"));
    }
    if !(alpha > 1.0) {
        return Err(invalid("alpha", "need alpha > 1"));
    }
    if !ln_v0.is_finite() {
        return Err(invalid("v0", "need 0 < V0 < inf"));
    }
    let shift = ln_rho * alpha / (alpha - 1.0).powi(2);
    let mut ln_v = vec![ln_v0];
    let mut ln_bound = vec![ln_v0 + shift];
    for k in 1..=k_max {
        let prev = ln_v[k - 1];
        ln_v.push(k as f64 * ln_rho + alpha * prev);
        ln_bound.push(alpha.powi(k as i32) * (ln_v0 + shift));
    }
    let bound_holds = ln_v
        .iter()
        .zip(&ln_bound)
        .all(|(v, b)| v.is_finite() && *v <= b + 1e-12 * b.abs().max(1.0));
    let below_threshold = ln_v0 < -shift;
    let doubly_exponential = below_threshold
        && k_max >= 2
        && ln_v.windows(2).skip(k_max / 2).all(|w| w[1] < w[0])
        && {
            let (a, b) = (ln_v[k_max - 1], ln_v[k_max]);
            a < 0.0 && ((b / a) - alpha).abs() < 1e-3 * alpha
        };
    Ok(GeometricIteration { ln_v, ln_bound, bound_holds, below_threshold, doubly_exponential })
}

/// `Σ_{j<k} α^j (k-j)` by direct summation and by the closed form
/// `(α(α^k - 1) - k(α - 1)) / (α - 1)^2`.
pub fn exponent_sum(alpha: &BigRational, k: u32) -> (BigRational, BigRational) {
    let kk = BigRational::from_integer(BigInt::from(k));
    let mut direct = BigRational::zero();
    let mut power = BigRational::one();
    for j in 0..k {
        direct += &power * BigRational::from_integer(BigInt::from(k - j));
        power *= alpha;
    }
    let one = BigRational::one();
    let e = alpha - &one;
    let closed = (alpha * (&power - &one) - &kk * &e) / (&e * &e);
    (direct, closed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exponent_is_180_in_one_dimension() {
        assert_eq!(kappa_exponent_exact(1, None).unwrap(), ratio(180, 1));
        let k = IterationConstants::new(ConstantInputs::placeholder(1, 2.0, 1.0)).unwrap();
        assert!((k.alpha - 10.0 / 9.0).abs() < 1e-15);
        assert!((k.kappa_exponent - 180.0).abs() < 1e-9);
    }

    #[test]
    fn c_matches_closed_form() {
        let k = IterationConstants::new(ConstantInputs::placeholder(1, 2.0, 1.0)).unwrap();
        assert!((k.c - (40.0 + 13.5f64.sqrt())).abs() < 1e-12);
        assert!(k.log10_kappa <= 0.5f64.log10());
        let log10_kappa = -180.0 * k.log10_rho() - 2.0 * k.c.log10();
        assert!((k.log10_kappa - log10_kappa).abs() < 1e-9);
    }

    #[test]
    fn q_must_exceed_threshold() {
        let mut inputs = ConstantInputs::placeholder(1, 2.0, 1.0);
        inputs.q = Some(18.0);
        assert!(IterationConstants::new(inputs).is_err());
        inputs.q = Some(19.0);
        let k = IterationConstants::new(inputs).unwrap();
        assert!(k.alpha > 1.0);
    }

    #[test]
    fn assembled_a_dominates_both_terms() {
        let mut inputs = ConstantInputs::placeholder(1, 2.0, 1.0);
        inputs.a = AChoice::Assembled;
        let k = IterationConstants::new(inputs).unwrap();
        let asm = k.a_assembly.unwrap();
        assert!(k.a * k.a >= asm.power_term && k.a * k.a >= asm.linear_term);
        // Λ = 2: 144·219 + 24·438 + 16·155 + 768
        assert!((asm.linear_term - 45_296.0).abs() < 1e-9);
        assert!((asm.power_term - 156.0 * 13.5).abs() < 1e-9);
    }

    #[test]
    fn recursion_margins_match_arithmetic() {
        let u: Vec<f64> = (0..8).map(|k| 2f64.powi(-7 * k)).collect();
        let audit = recursion_margins(&u, 0.0, 10.0 / 9.0).unwrap();
        for row in &audit.rows {
            let expect = std::f64::consts::LN_2 * (47.0 * row.k as f64 + 140.0) / 9.0;
            assert!((row.margin - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(audit.pass_rate, 1.0);
        let zeros = recursion_margins(&[0.0; 5], 0.0, 10.0 / 9.0).unwrap();
        assert_eq!(zeros.pass_rate, 1.0);
    }

    #[test]
    fn exponent_sum_small_case() {
        let (direct, closed) = exponent_sum(&ratio(2, 1), 3);
        assert_eq!(direct, ratio(11, 1));
        assert_eq!(closed, ratio(11, 1));
    }

    #[test]
    fn iteration_below_threshold_collapses() {
        let it = geometric_iteration(0.2f64.ln(), 2f64.ln(), 2.0, 30).unwrap();
        assert!(it.below_threshold && it.bound_holds && it.doubly_exponential);
        let edge = geometric_iteration(-2.0 * 2f64.ln(), 2f64.ln(), 2.0, 30).unwrap();
        assert!(edge.ln_bound.iter().all(|b| b.abs() < 1e-9));
        assert!(edge.bound_holds && !edge.doubly_exponential);
    }
}
