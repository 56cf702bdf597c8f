//! Scalar nonlinearities of the model and pointwise inequality oracles.
//!
//! The configuration potential is the logarithmic (Flory–Huggins) one,
//!
//! ```text
//! F(r) = (1+r) ln(1+r) + (1-r) ln(1-r) - (λ/2) r²,     r ∈ (-1, 1),
//! ```
//!
//! split as `F' = β - λ r` with the monotone part `β(r) = ln(1+r) - ln(1-r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_open_interval<T: Real>(r: T, context: &'static str) -> Result<()> {
    if r.abs() < T::one() {
        Ok(())
    } else {
        Err(Error::OutOfDomain { context, value: r.to_f64_lossy() })
    }
}

/// Convex part `(1+r) ln(1+r) + (1-r) ln(1-r)` of the potential.
pub fn potential_convex<T: Real>(r: T) -> Result<T> {
    check_open_interval(r, "potential")?;
    Ok((T::one() + r) * r.ln_1p() + (T::one() - r) * (-r).ln_1p())
}

/// `F(r)`.
pub fn potential<T: Real>(r: T, lambda: T) -> Result<T> {
    Ok(potential_convex(r)? - T::half() * lambda * r * r)
}

/// `F'(r) = β(r) - λ r`.
pub fn potential_prime<T: Real>(r: T, lambda: T) -> Result<T> {
    Ok(beta(r)? - lambda * r)
}

/// Monotone part of `F'`.
pub fn beta<T: Real>(r: T) -> Result<T> {
    check_open_interval(r, "beta")?;
    Ok(r.ln_1p() - (-r).ln_1p())
}

/// `β'(r) = 2 / (1 - r²) ≥ 2`.
pub fn beta_prime<T: Real>(r: T) -> Result<T> {
    check_open_interval(r, "beta'")?;
    Ok(T::two() / ((T::one() - r) * (T::one() + r)))
}

/// `γ(r) = -ln(1 + r₋)` with `r₋ = max(-r, 0)`.
pub fn gamma<T: Real>(r: T) -> T {
    let neg = (-r).max(T::zero());
    -neg.ln_1p()
}

/// `γ̂(r) = (1 + r₋) ln(1 + r₋) - r₋`, the antiderivative of `γ` vanishing on `r ≥ 0`.
pub fn gamma_hat<T: Real>(r: T) -> T {
    let neg = (-r).max(T::zero());
    (T::one() + neg) * neg.ln_1p() - neg
}

/// Pointwise relative entropy `s - s̃ - s̃ ln(s / s̃) ≥ 0`, evaluated without
/// cancellation when `s ≈ s̃`.
pub fn relative_entropy_density<T: Real>(s: T, s_ref: T) -> T {
    let d = (s - s_ref) / s_ref;
    let g = if d.abs() < T::lit(1e-3) {
        let d2 = d * d;
        d2 * (T::half() - d * (T::lit(1.0 / 3.0) - d * (T::lit(0.25) - d * (T::lit(0.2) - d / T::lit(6.0)))))
    } else {
        d - d.ln_1p()
    };
    s_ref * g
}

/// `e^x - 1 - x` without cancellation for small `x`.
fn exp_remainder<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-3) {
        let x2 = x * x;
        x2 * (T::half() + x * (T::lit(1.0 / 6.0) + x * (T::lit(1.0 / 24.0) + x / T::lit(120.0))))
    } else {
        x.exp_m1() - x
    }
}

/// `Λ(u | ũ) = e^{u/2} - e^{ũ/2} - ½ e^{ũ/2} (u - ũ)`, the Bregman distance of
/// the convex map `x ↦ e^{x/2}`.
pub fn half_exp_bregman<T: Real>(u: T, u_ref: T) -> T {
    (T::half() * u_ref).exp() * exp_remainder(T::half() * (u - u_ref))
}

/// Right side minus left side of the Fenchel–Young estimate
///
/// ```text
/// (w - w̃)(u - ũ) ≤ max{1/(4r), 4r} (ũ |w - w̃|² + u - ũ - ũ (ln u - ln ũ)),
/// ```
///
/// valid for `|w|, |w̃| < r` and `u, ũ > 0`. Nonnegative on its domain.
pub fn fenchel_gap<T: Real>(r: T, w: T, w_ref: T, u: T, u_ref: T) -> Result<T> {
    if !(r > T::zero()) || w.abs() >= r || w_ref.abs() >= r || !(u > T::zero()) || !(u_ref > T::zero()) {
        return Err(Error::DomainViolation(format!(
            "fenchel_gap needs r > 0, |w|, |w~| < r and u, u~ > 0 (r={r}, w={w}, w~={w_ref}, u={u}, u~={u_ref})"
        )));
    }
    let four = T::lit(4.0);
    let k = (four * r).recip().max(four * r);
    let dw = w - w_ref;
    Ok(k * (u_ref * dw * dw + relative_entropy_density(u, u_ref)) - dw * (u - u_ref))
}

/// Nondecreasing interpolation `h` with `h(-1) = 0`, `h(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Interpolant<T> {
    /// `h(r) = (1 + r) / 2`.
    Linear,
    /// Piecewise-linear through sorted `(r, h)` nodes, constant outside.
    Table(Vec<(T, T)>),
}

impl<T: Real> Interpolant<T> {
    pub fn table(nodes: Vec<(T, T)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter("interpolation table needs at least two nodes".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::InvalidParameter(
                    "interpolation table must have increasing nodes and nondecreasing values".into(),
                ));
            }
        }
        let tol = T::lit(1e-12);
        let at = |r: T| Interpolant::Table(nodes.clone()).eval(r);
        if nodes[0].0 > -T::one() || nodes[nodes.len() - 1].0 < T::one() || at(-T::one()).abs() > tol
            || (at(T::one()) - T::one()).abs() > tol
        {
            return Err(Error::InvalidParameter(
                "interpolation table must cover [-1, 1] with h(-1) = 0 and h(1) = 1".into(),
            ));
        }
        Ok(Interpolant::Table(nodes))
    }

    pub fn eval(&self, r: T) -> T {
        match self {
            Interpolant::Linear => T::half() * (T::one() + r),
            Interpolant::Table(nodes) => {
                let first = nodes[0];
                let last = nodes[nodes.len() - 1];
                if r <= first.0 {
                    return first.1;
                }
                if r >= last.0 {
                    return last.1;
                }
                let k = nodes.partition_point(|&(x, _)| x <= r);
                let (x0, y0) = nodes[k - 1];
                let (x1, y1) = nodes[k];
                y0 + (y1 - y0) * (r - x0) / (x1 - x0)
            }
        }
    }
}

/// Reaction rate `α(φ, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec<T> {
    Constant(T),
    /// `α(φ, σ) = h(φ) (1 - ℓ σ^p)`, `ℓ > 0`, `p ∈ (0, 1]`.
    Logistic { ell: T, p: T, interp: Interpolant<T> },
}

impl<T: Real> AlphaSpec<T> {
    pub fn logistic(ell: T, p: T) -> Result<Self> {
        Self::logistic_with(ell, p, Interpolant::Linear)
    }

    pub fn logistic_with(ell: T, p: T, interp: Interpolant<T>) -> Result<Self> {
        if !(ell > T::zero()) {
            return Err(Error::InvalidParameter(format!("logistic ell must be positive, got {ell}")));
        }
        if !(p > T::zero() && p <= T::one()) {
            return Err(Error::InvalidParameter(format!("logistic exponent must lie in (0, 1], got {p}")));
        }
        Ok(AlphaSpec::Logistic { ell, p, interp })
    }

    pub fn eval(&self, phi: T, sigma: T) -> Result<T> {
        if sigma < T::zero() {
            return Err(Error::NegativeSigma(sigma.to_f64_lossy()));
        }
        Ok(match self {
            AlphaSpec::Constant(c) => *c,
            AlphaSpec::Logistic { ell, p, interp } => interp.eval(phi) * (T::one() - *ell * sigma.powf(*p)),
        })
    }

    /// Declared bounds `[α̲, ᾱ]` over `|φ| ≤ 1`, `0 ≤ σ ≤ sigma_max`.
    ///
    /// The logistic rate is unbounded below as `σ → ∞`; its lower bound only
    /// holds on the stated sampling box.
    pub fn declared_bounds(&self, sigma_max: T) -> (T, T) {
        match self {
            AlphaSpec::Constant(c) => (*c, *c),
            AlphaSpec::Logistic { ell, p, interp } => {
                let h_lo = interp.eval(-T::one());
                let h_hi = interp.eval(T::one());
                let f_lo = T::one() - *ell * sigma_max.max(T::zero()).powf(*p);
                let corners = [h_lo * f_lo, h_lo, h_hi * f_lo, h_hi];
                let lo = corners.iter().copied().fold(T::infinity(), T::min);
                let hi = corners.iter().copied().fold(T::neg_infinity(), T::max);
                (lo, hi)
            }
        }
    }

    /// Global upper bound of the positive part of `α`, which is finite for
    /// every variant.
    pub fn positive_part_bound(&self) -> T {
        match self {
            AlphaSpec::Constant(c) => c.max(T::zero()),
            AlphaSpec::Logistic { interp, .. } => interp.eval(T::one()).max(T::zero()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, AlphaSpec::Constant(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtLipschitzReport<T> {
    /// Sampled `sup |f(θ) - f(η)| / |√θ - √η|`.
    pub lipschitz: T,
    /// Sampled `sup |f(θ)| / (1 + √θ)`.
    pub growth: T,
    /// False if any sample of `f` (or a quotient) was not finite.
    pub all_finite: bool,
    pub samples: usize,
}

/// Estimates the square-root Lipschitz and growth constants of `f` on
/// `[0, cap]` from `samples` random pairs.
pub fn check_sqrt_lipschitz<T: Real>(f: impl Fn(T) -> T, cap: T, samples: usize, seed: u64) -> SqrtLipschitzReport<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap64 = cap.to_f64_lossy();
    let mut lipschitz = T::zero();
    let mut growth = T::zero();
    let mut all_finite = true;
    // Sampling uniformly in √θ puts mass near 0 where √ is steepest.
    let draw = |rng: &mut ChaCha8Rng| T::lit((rng.gen::<f64>() * cap64.sqrt()).powi(2));
    for _ in 0..samples {
        let theta = draw(&mut rng);
        let eta = draw(&mut rng);
        let (ft, fe) = (f(theta), f(eta));
        if !ft.is_finite() || !fe.is_finite() {
            all_finite = false;
            continue;
        }
        growth = growth.max(ft.abs() / (T::one() + theta.sqrt()));
        let ds = (theta.sqrt() - eta.sqrt()).abs();
        if ds > T::zero() {
            let q = (ft - fe).abs() / ds;
            if q.is_finite() {
                lipschitz = lipschitz.max(q);
            } else {
                all_finite = false;
            }
        }
    }
    // Include the endpoints deterministically.
    for theta in [T::zero(), cap] {
        let ft = f(theta);
        if ft.is_finite() {
            growth = growth.max(ft.abs() / (T::one() + theta.sqrt()));
        } else {
            all_finite = false;
        }
    }
    SqrtLipschitzReport { lipschitz, growth, all_finite, samples }
}

/// Constant from the mean-value argument: `sup_ξ |2 ξ α'(ξ²)|` over
/// `ξ ∈ [0, √cap]`, sampled on `n` uniform points.
pub fn sqrt_lipschitz_mean_value_bound<T: Real>(alpha_prime: impl Fn(T) -> T, cap: T, n: usize) -> T {
    let top = cap.sqrt();
    (0..=n)
        .map(|k| {
            let xi = top * T::from_usize_lossy(k) / T::from_usize_lossy(n.max(1));
            (T::two() * xi * alpha_prime(xi * xi)).abs()
        })
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_values() {
        assert_eq!(potential::<f64>(0.0, 3.0).unwrap(), 0.0);
        // 1.5 ln 1.5 + 0.5 ln 0.5
        let expected = 0.261_624_071_882_273_9;
        assert!((potential::<f64>(0.5, 0.0).unwrap() - expected).abs() < 1e-15);
        assert!(potential::<f64>(1.0, 0.0).is_err());
        assert!(potential::<f64>(-1.0, 0.0).is_err());
        assert!(potential_prime::<f64>(1.2, 0.0).is_err());
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta::<f64>(0.0).unwrap(), 0.0);
        assert!((beta::<f64>(0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((beta::<f64>(0.5).unwrap() - 1.098_612_288_668_109_8).abs() < 1e-15);
        assert!(matches!(beta::<f64>(1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn potential_prime_is_beta_minus_linear() {
        for &r in &[-0.9_f64, -0.3, 0.0, 0.4, 0.99] {
            let lhs = potential_prime(r, 0.7).unwrap();
            assert!((lhs - (beta(r).unwrap() - 0.7 * r)).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma::<f64>(2.0), 0.0);
        assert_eq!(gamma_hat::<f64>(2.0), 0.0);
        assert!((gamma::<f64>(-1.0) + 0.693_147_180_559_945_3).abs() < 1e-15);
        assert!((gamma_hat::<f64>(-1.0) - 0.386_294_361_119_890_6).abs() < 1e-15);
    }

    #[test]
    fn alpha_logistic_examples() {
        let a = AlphaSpec::logistic(1.0, 1.0).unwrap();
        assert_eq!(a.eval(-1.0, 7.0).unwrap(), 0.0);
        assert_eq!(a.eval(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(a.eval(0.0, 4.0).unwrap(), -1.5);
        assert!(matches!(a.eval(0.0, -1.0), Err(Error::NegativeSigma(_))));
        assert_eq!(AlphaSpec::Constant(0.3).eval(0.2, 5.0).unwrap(), 0.3);
    }

    #[test]
    fn alpha_bounds_hold_on_box() {
        let a = AlphaSpec::logistic(1.0, 0.5).unwrap();
        let (lo, hi) = a.declared_bounds(9.0);
        assert_eq!((lo, hi), (-2.0, 1.0));
        for i in 0..=20 {
            for j in 0..=20 {
                let phi = -1.0 + 0.1 * i as f64;
                let s = 9.0 * j as f64 / 20.0;
                let v = a.eval(phi, s).unwrap();
                assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
            }
        }
        assert!(AlphaSpec::logistic(0.0, 1.0).is_err());
        assert!(AlphaSpec::logistic(1.0, 1.5).is_err());
    }

    #[test]
    fn table_interpolant() {
        let h = Interpolant::<f64>::table(vec![(-1.0, 0.0), (0.0, 0.2), (1.0, 1.0)]).unwrap();
        assert_eq!(h.eval(-1.0), 0.0);
        assert!((h.eval(0.5) - 0.6).abs() < 1e-15);
        assert_eq!(h.eval(2.0), 1.0);
        assert!(Interpolant::table(vec![(-1.0, 0.0), (1.0, -1.0)]).is_err());
        assert!(Interpolant::table(vec![(-0.5, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn fenchel_gap_examples() {
        assert_eq!(fenchel_gap(1.0, 0.2, 0.2, 1.5, 1.5).unwrap(), 0.0);
        let expected = 4.0 * (1.0 + 1.0 - 2f64.ln()) - 1.0;
        let got = fenchel_gap(1.0, 0.5, -0.5, 2.0, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 4.227_411_277_760_219).abs() < 1e-12);
        assert!(fenchel_gap(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(fenchel_gap(1.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn relative_entropy_density_branches_agree() {
        for &(s, r) in &[(1.0005, 1.0), (2.0, 1.0), (1.0, 2.0), (0.9991, 1.0)] {
            let direct: f64 = s - r - r * (s / r as f64).ln();
            assert!((relative_entropy_density(s, r) - direct).abs() < 1e-12);
        }
        assert_eq!(relative_entropy_density(3.0, 3.0), 0.0);
        assert!((relative_entropy_density(2.0, 1.0) - (1.0 - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn sqrt_lipschitz_examples() {
        let c = check_sqrt_lipschitz(|_| 2.5_f64, 10.0, 1000, 1);
        assert_eq!(c.lipschitz, 0.0);
        let s = check_sqrt_lipschitz(|t: f64| t.sqrt(), 10.0, 1000, 2);
        assert!((s.lipschitz - 1.0).abs() < 1e-9);
        // (θ - η)/(√θ - √η) = √θ + √η ≤ 2√cap
        let lin = check_sqrt_lipschitz(|t: f64| t, 100.0, 20_000, 3);
        assert!(lin.lipschitz <= 20.0 + 1e-9 && lin.lipschitz > 19.0, "{}", lin.lipschitz);
        assert!(lin.all_finite);
        let bad = check_sqrt_lipschitz(|t: f64| 1.0 / t, 1.0, 10, 4);
        assert!(!bad.all_finite);
    }
}
