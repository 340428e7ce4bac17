//! PC coefficient computation from forward-model ensembles.

pub mod bpdn;
pub mod cv;
mod nisp;
mod nre;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{OutputLabel, PcBasis, PcExpansion};
use crate::error::{Error, Result};

pub use bpdn::{bpdn_solve, project_l1_ball, BpdnOptions, BpdnSolution};
pub use cv::{cross_validate_delta, log_spaced_deltas, CvOutcome};
pub use nisp::{nisp_project, nisp_project_values};
pub use nre::{nre, nre_values};

/// Coefficients below this magnitude count as zero in sparsity reports.
pub const SPARSITY_THRESHOLD: f64 = 1e-10;

/// Basis evaluations at sample points paired with one output column.
#[derive(Debug, Clone)]
pub struct RegressionSystem {
    pub psi: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl RegressionSystem {
    pub fn new(psi: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if psi.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch { expected: psi.nrows(), got: rhs.len() });
        }
        if psi.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in regression system".into()));
        }
        Ok(RegressionSystem { psi, rhs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Nisp,
    Bpdn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpdnFitOptions {
    pub folds: usize,
    pub candidates: usize,
    /// Candidate range as fractions of `||G||_2`.
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub cv_seed: u64,
    /// Skip cross-validation and use `fixed_delta * ||G||_2`.
    pub fixed_delta: Option<f64>,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for BpdnFitOptions {
    fn default() -> Self {
        BpdnFitOptions {
            folds: 4,
            candidates: 9,
            delta_lo: 1e-4,
            delta_hi: 1.0,
            cv_seed: 0,
            fixed_delta: None,
            gap_tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

impl BpdnFitOptions {
    fn solver(&self) -> BpdnOptions {
        BpdnOptions { gap_tol: self.gap_tol, max_iter: self.max_iter, ..BpdnOptions::default() }
    }
}

/// Per-output summary of a BPDN fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub label: OutputLabel,
    pub delta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub nonzeros: usize,
    pub converged: bool,
}

/// BPDN fit of every output column. The system is posed in the orthonormal
/// scaling `psi_k / sqrt(<psi_k^2>)` and coefficients are mapped back to the
/// non-normalized basis.
pub fn fit_bpdn(
    points: &[Vec<f64>],
    values: &DMatrix<f64>,
    basis: &PcBasis,
    labels: Vec<OutputLabel>,
    opts: &BpdnFitOptions,
) -> Result<(PcExpansion, Vec<ColumnReport>)> {
    if points.len() != values.nrows() {
        return Err(Error::Misaligned(format!("{} points for {} model runs", points.len(), values.nrows())));
    }
    if labels.len() != values.ncols() {
        return Err(Error::DimensionMismatch { expected: values.ncols(), got: labels.len() });
    }
    let scale: Vec<f64> = basis.norms_sq().iter().map(|n| n.sqrt()).collect();
    let mut psi = basis.design_matrix(points)?;
    for (mut col, s) in psi.column_iter_mut().zip(&scale) {
        col /= *s;
    }
    let solver = opts.solver();

    let fit_column = |j: usize| -> Result<(DVector<f64>, ColumnReport)> {
        let rhs = values.column(j).into_owned();
        let system = RegressionSystem::new(psi.clone(), rhs)?;
        let gnorm = system.rhs.norm();
        let delta = if gnorm == 0.0 {
            0.0
        } else if let Some(frac) = opts.fixed_delta {
            frac * gnorm
        } else {
            let candidates = log_spaced_deltas(gnorm, opts.delta_lo, opts.delta_hi, opts.candidates);
            cross_validate_delta(&system.psi, &system.rhs, opts.folds, &candidates, opts.cv_seed, &solver)?.delta
        };
        let sol = if gnorm == 0.0 {
            BpdnSolution {
                coefficients: DVector::zeros(basis.len()),
                residual_norm: 0.0,
                delta: 0.0,
                tau: 0.0,
                iterations: 0,
                converged: true,
                least_squares: false,
            }
        } else {
            bpdn_solve(&system.psi, &system.rhs, delta, &solver)?
        };
        if !sol.converged {
            log::warn!("output {j}: BPDN stopped before reaching delta");
        }
        let coeffs = DVector::from_fn(basis.len(), |k, _| sol.coefficients[k] / scale[k]);
        let report = ColumnReport {
            label: labels[j].clone(),
            delta,
            residual: sol.residual_norm,
            iterations: sol.iterations,
            nonzeros: sol.nonzeros(SPARSITY_THRESHOLD),
            converged: sol.converged,
        };
        Ok((coeffs, report))
    };

    let fitted: Vec<(DVector<f64>, ColumnReport)> =
        (0..values.ncols()).into_par_iter().map(fit_column).collect::<Result<_>>()?;
    let mut coefficients = DMatrix::zeros(basis.len(), values.ncols());
    let mut reports = Vec::with_capacity(fitted.len());
    for (j, (c, r)) in fitted.into_iter().enumerate() {
        coefficients.set_column(j, &c);
        reports.push(r);
    }
    Ok((PcExpansion::new(basis.clone(), coefficients, labels)?, reports))
}
