//! Convex-splitting step for the phase equation.
//!
//! With `K = -Δ_h` and `g = λ φⁿ + χ σ` the step solves
//!
//! ```text
//! φ - φⁿ + τ K μ = 0,      μ = K φ + β(φ) - g,
//! ```
//!
//! after eliminating `μ`. Newton runs in the variable `u = artanh φ`, where
//! `β(tanh u) = 2u` is linear and the logarithmic singularity disappears from
//! the linear model: `G(u) = φ(u) - φⁿ + τ K (K φ(u) + 2u - g)` with Jacobian
//! `(I + τ K K) diag(1 - φ²) + 2τ K`. Newton in `φ` instead tends to drive
//! cells onto the bound, after which the step restriction stalls it.
//! `Σ G = Σ (φ - φⁿ)`, so at convergence `∫φ` is preserved to the residual.
//! Damping backtracks on `‖G‖` inside the box `|φ| ≤ 1 - δ_safe`.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::linalg::BandedMatrix;
use crate::model::ModelParams;
use crate::scalar::{ordered_sum, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions<T> {
    /// Stop when `‖G‖_{L²} ≤ tol`.
    pub tol: T,
    pub max_iters: usize,
    /// Step-length reduction factor of the backtracking search.
    pub backtrack: T,
    pub max_halvings: usize,
    /// Updates below `stagnation · max(1, ‖φ‖∞)` in max-norm count as
    /// converged (rounding floor of the residual).
    pub stagnation: T,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iters: 50, backtrack: T::half(), max_halvings: 30, stagnation: T::lit(1e-14) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChStep<T> {
    pub phi: Field<T>,
    /// `K φ + β(φ) - λ φⁿ - χ σ`, the potential the step actually used.
    pub mu: Field<T>,
    pub iters: usize,
    pub residual: T,
}

/// Rows of `K = -Δ_h` as `(column, value)` lists, diagonal first.
fn neg_laplacian_rows<T: Real>(grid: &GridSpec<T>) -> Vec<Vec<(usize, T)>> {
    let mut nbrs = Vec::with_capacity(4);
    (0..grid.num_cells())
        .map(|i| {
            grid.neighbors(i, &mut nbrs);
            let diag = ordered_sum(nbrs.iter().map(|&(_, w)| w));
            let mut row = Vec::with_capacity(nbrs.len() + 1);
            row.push((i, diag));
            row.extend(nbrs.iter().map(|&(j, w)| (j, -w)));
            row
        })
        .collect()
}

fn apply<T: Real>(rows: &[Vec<(usize, T)>], x: &[T]) -> Vec<T> {
    rows.iter().map(|row| row.iter().fold(T::zero(), |acc, &(j, v)| acc + v * x[j])).collect()
}

struct Problem<'a, T> {
    rows: Vec<Vec<(usize, T)>>,
    phi_n: &'a [T],
    g: Vec<T>,
    tau: T,
    vol: T,
}

impl<T: Real> Problem<'_, T> {
    /// `(G, μ)` at `φ = tanh u`.
    fn residual(&self, u: &[T], phi: &[T]) -> (Vec<T>, Vec<T>) {
        let k_phi = apply(&self.rows, phi);
        let mu: Vec<T> = (0..u.len()).map(|i| k_phi[i] + T::two() * u[i] - self.g[i]).collect();
        let k_mu = apply(&self.rows, &mu);
        let g = (0..u.len()).map(|i| phi[i] - self.phi_n[i] + self.tau * k_mu[i]).collect();
        (g, mu)
    }

    fn norm(&self, g: &[T]) -> T {
        (ordered_sum(g.iter().map(|&v| v * v)) * self.vol).sqrt()
    }

    fn jacobian(&self, phi: &[T], band: usize) -> BandedMatrix<T> {
        let n = phi.len();
        let mut a = BandedMatrix::zeros(n, 2 * band, 2 * band);
        let dphi: Vec<T> = phi.iter().map(|&p| (T::one() - p) * (T::one() + p)).collect();
        for i in 0..n {
            a.add(i, i, dphi[i]);
            for &(k, kik) in &self.rows[i] {
                a.add(i, k, T::two() * self.tau * kik);
                for &(j, kkj) in &self.rows[k] {
                    a.add(i, j, self.tau * kik * kkj * dphi[j]);
                }
            }
        }
        a
    }
}

/// One implicit step of the phase equation with `σ` frozen.
pub fn step_cahn_hilliard<T: Real>(
    phi_n: &Field<T>,
    sigma_frozen: &Field<T>,
    params: &ModelParams<T>,
    dt: T,
    opts: &NewtonOptions<T>,
) -> Result<ChStep<T>> {
    phi_n.check_same_grid(sigma_frozen)?;
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let bound = T::one() - params.delta_safe;
    if let Some(&v) = phi_n.values().iter().find(|v| !(v.abs() <= bound)) {
        return Err(Error::DomainViolation(format!("phase value {v} violates |phi| <= 1 - delta_safe")));
    }
    let u_max = bound.atanh();
    let grid = *phi_n.grid();
    let problem = Problem {
        rows: neg_laplacian_rows(&grid),
        phi_n: phi_n.values(),
        g: phi_n
            .values()
            .iter()
            .zip(sigma_frozen.values())
            .map(|(&p, &s)| params.lambda * p + params.chi * s)
            .collect(),
        tau: dt,
        vol: grid.cell_volume(),
    };
    let band = grid.stencil_bandwidth();

    let mut phi = phi_n.values().to_vec();
    let mut u: Vec<T> = phi.iter().map(|p| p.atanh()).collect();
    let (mut g, mut mu) = problem.residual(&u, &phi);
    let mut res = problem.norm(&g);
    let mut iters = 0;
    loop {
        if res <= opts.tol {
            break;
        }
        if iters == opts.max_iters {
            return Err(Error::NewtonDiverged { iters, residual: res.to_f64_lossy() });
        }
        iters += 1;
        let mut delta: Vec<T> = g.iter().map(|&x| -x).collect();
        problem.jacobian(&phi, band).solve(&mut delta)?;
        let step_size = delta.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let scale = u.iter().fold(T::one(), |m, x| m.max(x.abs()));
        if step_size <= opts.stagnation * scale {
            break;
        }

        let mut s = T::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let u_t: Vec<T> = u.iter().zip(&delta).map(|(&a, &d)| a + s * d).collect();
            if u_t.iter().all(|x| x.abs() <= u_max) {
                let phi_t: Vec<T> = u_t.iter().map(|x| x.tanh()).collect();
                let (g_t, mu_t) = problem.residual(&u_t, &phi_t);
                let r_t = problem.norm(&g_t);
                if r_t < res || r_t <= opts.tol {
                    u = u_t;
                    phi = phi_t;
                    g = g_t;
                    mu = mu_t;
                    res = r_t;
                    accepted = true;
                    break;
                }
            }
            s = s * opts.backtrack;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iters, residual: res.to_f64_lossy() });
        }
    }
    // `tanh` may round onto the box edge from just inside in `u`.
    for p in &mut phi {
        *p = p.max(-bound).min(bound);
    }
    Ok(ChStep {
        phi: Field::from_vec_unchecked(grid, phi),
        mu: Field::from_vec_unchecked(grid, mu),
        iters,
        residual: res,
    })
}
