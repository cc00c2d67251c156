//! Bifurcation exponent: the x with r_p^x = r_c1^x + r_c2^x.

use thiserror::Error;

/// Search bracket for the exponent.
pub const EXPONENT_BRACKET: (f64, f64) = (0.1, 20.0);
/// Required absolute residual of the normalised equation.
pub const EXPONENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum NoExponent {
    #[error("radii must be positive and finite")]
    NonPositive,
    #[error("a child radius is not smaller than the parent radius (r_p <= max(r_c1, r_c2))")]
    ChildNotSmaller,
    #[error("the children are too thin (r_c1 + r_c2 <= r_p)")]
    ChildrenTooThin,
    #[error("no root inside the search bracket")]
    OutOfBracket,
}

/// Solve by bisection on [0.1, 20] for (r_c1/r_p)^x + (r_c2/r_p)^x = 1,
/// which is strictly decreasing in x.
pub fn solve_bifurcation_exponent(r_p: f64, r_c1: f64, r_c2: f64) -> Result<f64, NoExponent> {
    if !(r_p > 0.0 && r_c1 > 0.0 && r_c2 > 0.0) || !(r_p.is_finite() && r_c1.is_finite() && r_c2.is_finite()) {
        return Err(NoExponent::NonPositive);
    }
    if r_p <= r_c1.max(r_c2) {
        return Err(NoExponent::ChildNotSmaller);
    }
    if r_c1 + r_c2 <= r_p {
        return Err(NoExponent::ChildrenTooThin);
    }
    let (a, b) = (r_c1 / r_p, r_c2 / r_p);
    let f = |x: f64| a.powf(x) + b.powf(x) - 1.0;
    let (mut lo, mut hi) = EXPONENT_BRACKET;
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(NoExponent::OutOfBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < EXPONENT_TOLERANCE * 1e-3 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
