//! Basis-pursuit denoising
//!
//! ```text
//! minimize ||g||_1  subject to  ||G - Psi g||_2 <= delta
//! ```
//!
//! solved by root-finding on the Pareto curve `phi(tau) = ||G - Psi g_tau||_2`,
//! where `g_tau` solves the LASSO subproblem `min ||G - Psi g||_2` over the
//! l1-ball `||g||_1 <= tau`. `phi` is convex and non-increasing with slope
//! `-||Psi^T r||_inf / ||r||_2`, so Newton steps on `phi(tau) = delta` started
//! from the left approach the root monotonically. Subproblems are solved by
//! spectral projected gradient with a non-monotone line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnOptions {
    /// Relative duality-gap tolerance of each LASSO subproblem.
    pub gap_tol: f64,
    /// Cap on SPG iterations, summed over all subproblems.
    pub max_iter: usize,
    /// Non-monotone line-search memory.
    pub line_search_window: usize,
    /// Relative feasibility tolerance on `||r|| <= delta`.
    pub feas_tol: f64,
    /// Absolute residual floor, relative to `||G||`, for `delta = 0`.
    pub zero_delta_floor: f64,
    pub max_newton: usize,
    /// Stop at the least-squares solution once `||Psi^T r||_inf` falls below
    /// `ls_tol * max_k ||psi_k|| * ||r||`; `delta` is then unattainable.
    pub ls_tol: f64,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        BpdnOptions {
            gap_tol: 1e-6,
            max_iter: 10_000,
            line_search_window: 3,
            feas_tol: 1e-6,
            zero_delta_floor: 1e-10,
            max_newton: 60,
            ls_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub coefficients: DVector<f64>,
    pub residual_norm: f64,
    pub delta: f64,
    pub tau: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `delta` lies below the least-squares residual; `coefficients` is the
    /// least-squares solution reached along the Pareto curve.
    pub least_squares: bool,
}

impl BpdnSolution {
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.lp_norm(1)
    }

    pub fn nonzeros(&self, threshold: f64) -> usize {
        self.coefficients.iter().filter(|c| c.abs() > threshold).count()
    }
}

/// Euclidean projection onto `{x : ||x||_1 <= tau}` (sort-based).
pub fn project_l1_ball(x: &mut DVector<f64>, tau: f64) {
    if tau <= 0.0 {
        x.fill(0.0);
        return;
    }
    if x.lp_norm(1) <= tau {
        return;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - tau) / (j + 1) as f64;
        if m - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for v in x.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

struct Lasso<'a> {
    psi: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
    opts: &'a BpdnOptions,
    iterations: usize,
    col_max: f64,
}

struct LassoState {
    x: DVector<f64>,
    r: DVector<f64>,
    /// `Psi^T r`, the negative gradient of `||r||^2 / 2`.
    grad_neg: DVector<f64>,
}

impl<'a> Lasso<'a> {
    fn at_least_squares(&self, st: &LassoState) -> bool {
        st.grad_neg.amax() <= self.opts.ls_tol * self.col_max * st.r.norm()
    }

    fn state_at(&self, x: DVector<f64>) -> LassoState {
        let r = self.rhs - self.psi * &x;
        let grad_neg = self.psi.tr_mul(&r);
        LassoState { x, r, grad_neg }
    }

    /// SPG on `min ||r||^2 / 2` over the `tau`-ball, warm-started from `x0`.
    fn solve(&mut self, x0: DVector<f64>, tau: f64) -> LassoState {
        let mut x0 = x0;
        project_l1_ball(&mut x0, tau);
        let mut st = self.state_at(x0);
        let mut f = 0.5 * st.r.norm_squared();
        let mut history = vec![f; self.opts.line_search_window.max(1)];
        let mut hpos = 0;
        let ginf = st.grad_neg.amax();
        let mut alpha = if ginf > 0.0 { 1.0 / ginf } else { 1.0 };

        while self.iterations < self.opts.max_iter {
            let rr = st.r.norm_squared();
            let gap = rr - self.rhs.dot(&st.r) + tau * st.grad_neg.amax();
            if gap <= self.opts.gap_tol * rr.max(f64::MIN_POSITIVE) || rr == 0.0 || self.at_least_squares(&st) {
                break;
            }
            self.iterations += 1;

            let mut trial = &st.x + alpha * &st.grad_neg;
            project_l1_ball(&mut trial, tau);
            let d = &trial - &st.x;
            let slope = -st.grad_neg.dot(&d);
            if slope >= 0.0 {
                // projected gradient step is stationary to rounding
                break;
            }
            let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut lambda = 1.0;
            let mut next;
            loop {
                let x_new = &st.x + lambda * &d;
                next = self.state_at(x_new);
                let f_new = 0.5 * next.r.norm_squared();
                if f_new <= f_ref + 1e-4 * lambda * slope || lambda < 1e-12 {
                    f = f_new;
                    break;
                }
                lambda *= 0.5;
            }
            let s = &next.x - &st.x;
            let y = &st.grad_neg - &next.grad_neg;
            let sty = s.dot(&y);
            alpha = if sty > 0.0 { (s.norm_squared() / sty).clamp(1e-10, 1e10) } else { 1e10 };
            history[hpos] = f;
            hpos = (hpos + 1) % history.len();
            st = next;
        }
        st
    }
}

/// BPDN by Pareto-curve root finding with SPG subproblems.
pub fn bpdn_solve(psi: &DMatrix<f64>, rhs: &DVector<f64>, delta: f64, opts: &BpdnOptions) -> Result<BpdnSolution> {
    bpdn_solve_warm(psi, rhs, delta, opts, None)
}

/// As [`bpdn_solve`], optionally warm-started from a previous solution with
/// a larger `delta`.
pub fn bpdn_solve_warm(
    psi: &DMatrix<f64>,
    rhs: &DVector<f64>,
    delta: f64,
    opts: &BpdnOptions,
    warm: Option<&BpdnSolution>,
) -> Result<BpdnSolution> {
    if psi.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch { expected: psi.nrows(), got: rhs.len() });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("BPDN delta must be non-negative, got {delta}")));
    }
    if psi.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("BPDN matrix is identically zero".into()));
    }
    let n = psi.ncols();
    let bnorm = rhs.norm();
    if bnorm <= delta {
        return Ok(BpdnSolution {
            coefficients: DVector::zeros(n),
            residual_norm: bnorm,
            delta,
            tau: 0.0,
            iterations: 0,
            converged: true,
            least_squares: false,
        });
    }
    let target = delta.max(opts.zero_delta_floor * bnorm);
    let accept = delta * (1.0 + opts.feas_tol) + opts.zero_delta_floor * bnorm;

    let col_max = psi.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut lasso = Lasso { psi, rhs, opts, iterations: 0, col_max };
    let (mut x, mut tau) = match warm {
        Some(w) if w.tau > 0.0 => (w.coefficients.clone(), w.tau),
        _ => (DVector::zeros(n), 0.0),
    };
    let mut st = lasso.state_at(x.clone());
    let mut converged = false;
    let mut least_squares = false;
    for _ in 0..opts.max_newton {
        st = lasso.solve(x, tau);
        x = st.x.clone();
        let rnorm = st.r.norm();
        if rnorm <= accept {
            converged = true;
            break;
        }
        if lasso.at_least_squares(&st) {
            least_squares = true;
            break;
        }
        let ginf = st.grad_neg.amax();
        if ginf == 0.0 || lasso.iterations >= opts.max_iter {
            break;
        }
        let step = (rnorm - target) * rnorm / ginf;
        if step <= 0.0 {
            // inexact subproblem put us right of the root; the ball is large enough
            converged = rnorm <= accept;
            break;
        }
        tau += step;
    }
    let residual_norm = st.r.norm();
    if !converged {
        log::debug!(
            "BPDN not converged: residual {residual_norm:.3e} vs delta {delta:.3e} after {} iterations",
            lasso.iterations
        );
    }
    Ok(BpdnSolution {
        coefficients: st.x,
        residual_norm,
        delta,
        tau,
        iterations: lasso.iterations,
        converged,
        least_squares,
    })
}
