//! Safeguarded Newton iteration for scalar monotone equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<S> {
    pub x: S,
    /// `|h(x)|` at the returned point.
    pub residual: S,
    pub iterations: usize,
}

/// Solves `h(x) = 0` for a nondecreasing `h` on a bracket with `h(lo) ≤ 0 ≤ h(hi)`.
///
/// `h` returns the value and, when available, the derivative. A Newton step is
/// taken whenever it lands strictly inside the current bracket; otherwise the
/// bracket is bisected. Converged when `|h(x)| ≤ tol` or the bracket has
/// collapsed to a few ulps.
pub fn solve_increasing<S, H>(h: H, mut lo: S, mut hi: S, tol: S, max_iter: usize) -> Result<Root<S>>
where
    S: Scalar,
    H: Fn(S) -> (S, Option<S>),
{
    let (h_lo, _) = h(lo);
    if h_lo >= S::zero() {
        return Ok(Root {
            x: lo,
            residual: h_lo.abs(),
            iterations: 0,
        });
    }
    let (h_hi, _) = h(hi);
    if h_hi <= S::zero() {
        return Ok(Root {
            x: hi,
            residual: h_hi.abs(),
            iterations: 0,
        });
    }

    let mut x = lo - h_lo * (hi - lo) / (h_hi - h_lo);
    if !(x > lo && x < hi) {
        x = S::lit(0.5) * (lo + hi);
    }
    let ulps = S::lit(4.0) * S::epsilon();
    for it in 1..=max_iter {
        let (hx, dh) = h(x);
        if !hx.is_finite() {
            break;
        }
        if hx.abs() <= tol {
            return Ok(Root {
                x,
                residual: hx.abs(),
                iterations: it,
            });
        }
        if hx < S::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ulps * lo.abs().max(hi.abs()) {
            return Ok(Root {
                x,
                residual: hx.abs(),
                iterations: it,
            });
        }
        let newton = dh
            .filter(|d| *d > S::zero() && d.is_finite())
            .map(|d| x - hx / d)
            .filter(|&xn| xn > lo && xn < hi);
        x = newton.unwrap_or_else(|| S::lit(0.5) * (lo + hi));
    }
    let (hx, _) = h(x);
    Err(Error::ResolventDiverged {
        residual: hx.abs().to_f64_lossy(),
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = solve_increasing(|x: f64| (x * x * x - 2.0, Some(3.0 * x * x)), 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn no_derivative_falls_back_to_bisection() {
        let r = solve_increasing(|x: f64| (x - 0.3, None), 0.0, 1.0, 1e-12, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn endpoint_roots() {
        let r = solve_increasing(|x: f64| (x, Some(1.0)), 0.0, 1.0, 1e-14, 10).unwrap();
        assert_eq!(r.x, 0.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn iteration_cap_is_a_fault() {
        let e = solve_increasing(|x: f64| (x * x * x - 0.3, None), 0.0, 1.0, 0.0, 3).unwrap_err();
        assert!(matches!(e, Error::ResolventDiverged { iterations: 3, .. }));
    }
}
