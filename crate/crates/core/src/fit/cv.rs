use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bpdn::{bpdn_solve_warm, BpdnOptions, BpdnSolution};
use crate::error::{Error, Result};

/// `count` log-spaced values spanning `[lo, hi] * scale`, largest first.
pub fn log_spaced_deltas(scale: f64, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi * scale];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).rev().map(|i| scale * (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Row partition into `folds` validation blocks after a seeded shuffle.
pub fn fold_assignment(rows: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, row) in order.into_iter().enumerate() {
        out[pos % folds].push(row);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    /// Tolerance for the full system, `delta_r* * sqrt(S / S_r)`.
    pub delta: f64,
    pub delta_reconstruction: f64,
    /// Mean validation residual per candidate, in candidate order.
    pub validation_errors: Vec<f64>,
}

fn select_rows(psi: &DMatrix<f64>, rhs: &DVector<f64>, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let sub = DMatrix::from_fn(rows.len(), psi.ncols(), |i, j| psi[(rows[i], j)]);
    let b = DVector::from_fn(rows.len(), |i, _| rhs[rows[i]]);
    (sub, b)
}

/// K-fold choice of the BPDN tolerance. For each candidate `delta_r` the
/// system is solved on the reconstruction rows of every fold and scored by
/// the residual on the held-out rows; the best mean score wins and is
/// rescaled by `sqrt(S / S_r)` for use on all `S` rows.
pub fn cross_validate_delta(
    psi: &DMatrix<f64>,
    rhs: &DVector<f64>,
    folds: usize,
    candidates: &[f64],
    seed: u64,
    opts: &BpdnOptions,
) -> Result<CvOutcome> {
    let rows = psi.nrows();
    if folds < 2 || rows < 2 * folds {
        return Err(Error::InvalidInput(format!("{folds}-fold CV needs K >= 2 and at least {} rows", 2 * folds)));
    }
    if candidates.is_empty() || candidates.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidInput("degenerate delta candidate list".into()));
    }
    let blocks = fold_assignment(rows, folds, seed);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].total_cmp(&candidates[a]));

    let mut errors = vec![0.0; candidates.len()];
    let mut recon_rows_total = 0usize;
    for block in &blocks {
        let recon: Vec<usize> = (0..rows).filter(|r| block.binary_search(r).is_err()).collect();
        recon_rows_total += recon.len();
        let (psi_r, b_r) = select_rows(psi, rhs, &recon);
        let (psi_v, b_v) = select_rows(psi, rhs, block);
        let mut warm: Option<BpdnSolution> = None;
        for &c in &order {
            let sol = bpdn_solve_warm(&psi_r, &b_r, candidates[c], opts, warm.as_ref())?;
            errors[c] += (&b_v - &psi_v * &sol.coefficients).norm() / folds as f64;
            warm = Some(sol);
        }
    }
    let best = (0..candidates.len())
        .min_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)))
        .expect("non-empty candidates");
    let mean_recon = recon_rows_total as f64 / folds as f64;
    let delta_r = candidates[best];
    Ok(CvOutcome {
        delta: delta_r * (rows as f64 / mean_recon).sqrt(),
        delta_reconstruction: delta_r,
        validation_errors: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_folds() {
        let d = log_spaced_deltas(2.0, 1e-6, 1.0, 12);
        assert_eq!(d.len(), 12);
        assert!((d[0] - 2.0).abs() < 1e-12 && (d[11] - 2e-6).abs() < 1e-18);
        assert!(d.windows(2).all(|w| w[0] > w[1]));

        let f = fold_assignment(10, 4, 1);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(f.iter().all(|b| b.len() >= 2));
    }

    #[test]
    fn single_candidate_is_rescaled() {
        let psi = DMatrix::from_fn(12, 3, |i, j| ((i * 3 + j) as f64).sin());
        let b = DVector::from_fn(12, |i, _| (i as f64).cos());
        let out = cross_validate_delta(&psi, &b, 4, &[0.3], 0, &BpdnOptions::default()).unwrap();
        assert_eq!(out.delta_reconstruction, 0.3);
        assert!((out.delta - 0.3 * (12.0f64 / 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_setups() {
        let psi = DMatrix::identity(6, 6);
        let b = DVector::from_element(6, 1.0);
        let opts = BpdnOptions::default();
        assert!(cross_validate_delta(&psi, &b, 4, &[0.1], 0, &opts).is_err());
        assert!(cross_validate_delta(&psi, &b, 2, &[], 0, &opts).is_err());
        assert!(cross_validate_delta(&psi, &b, 1, &[0.1], 0, &opts).is_err());
    }
}
