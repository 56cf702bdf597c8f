//! Existence-time estimate from the comparison ODE `Z' = c (1 + Z³)`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Time at which the solution of `Z' = c (1 + Z³)`, `Z(0) = y0`, first
/// reaches `cap`. Returns `0` when `y0 ≥ cap`.
pub fn estimate_t0<T: Real>(c: T, y0: T, cap: T) -> Result<T> {
    estimate_t0_with_horizon(c, y0, cap, T::lit(1e6) / c)
}

/// As [`estimate_t0`], failing with [`Error::CapNotReached`] past `horizon`.
pub fn estimate_t0_with_horizon<T: Real>(c: T, y0: T, cap: T, horizon: T) -> Result<T> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("growth constant must be positive, got {c}")));
    }
    if !(y0 >= T::zero()) || !cap.is_finite() {
        return Err(Error::InvalidParameter(format!("need y0 >= 0 and finite cap, got y0={y0}, cap={cap}")));
    }
    if y0 >= cap {
        return Ok(T::zero());
    }
    let f = |z: T| c * (T::one() + z * z * z);
    let rk4 = |z: T, h: T| {
        let k1 = f(z);
        let k2 = f(z + T::half() * h * k1);
        let k3 = f(z + T::half() * h * k2);
        let k4 = f(z + h * k3);
        z + h / T::lit(6.0) * (k1 + T::two() * k2 + T::two() * k3 + k4)
    };
    let tol = T::lit(1e-11);
    let mut t = T::zero();
    let mut z = y0;
    let mut h = T::lit(1e-3) / c;
    let mut steps = 0usize;
    while t < horizon {
        steps += 1;
        if steps > 10_000_000 {
            break;
        }
        let full = rk4(z, h);
        let half = rk4(rk4(z, T::half() * h), T::half() * h);
        let err = (half - full).abs() / T::lit(15.0);
        let scale = T::one().max(half.abs());
        if !half.is_finite() || err > tol * scale {
            h = T::half() * h;
            continue;
        }
        if half >= cap {
            // Locate the crossing inside [t, t + h] on the two-half-step map,
            // which is monotone in the step length.
            let (mut lo, mut hi) = (T::zero(), h);
            for _ in 0..200 {
                let mid = T::half() * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if rk4(rk4(z, T::half() * mid), T::half() * mid) >= cap {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(t + hi);
        }
        t = t + h;
        z = half;
        if err < tol * scale / T::lit(64.0) {
            h = T::two() * h;
        }
    }
    Err(Error::CapNotReached { horizon: horizon.to_f64_lossy() })
}
