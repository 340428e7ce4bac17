use nalgebra::DMatrix;

use crate::basis::{OutputLabel, PcBasis, PcExpansion};
use crate::design::SparseQuadrature;
use crate::error::{Error, Result};
use crate::swe::EnsembleMatrix;

/// Galerkin projection by quadrature:
/// `g_k = sum_q G(xi_q) psi_k(xi_q) w_q / <psi_k^2>` for every output column.
pub fn nisp_project_values(
    values: &DMatrix<f64>,
    quad: &SparseQuadrature,
    basis: &PcBasis,
    labels: Vec<OutputLabel>,
) -> Result<PcExpansion> {
    if values.nrows() != quad.len() {
        return Err(Error::Misaligned(format!(
            "{} model runs for {} quadrature nodes",
            values.nrows(),
            quad.len()
        )));
    }
    if quad.dim != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: quad.dim });
    }
    let mut weighted = basis.design_matrix(&quad.nodes)?;
    for (mut row, &w) in weighted.row_iter_mut().zip(&quad.weights) {
        row *= w;
    }
    let mut coefficients = weighted.transpose() * values;
    for (mut row, norm) in coefficients.row_iter_mut().zip(basis.norms_sq()) {
        row /= norm;
    }
    PcExpansion::new(basis.clone(), coefficients, labels)
}

/// NISP on an ensemble whose rows align one-to-one with the quadrature nodes.
pub fn nisp_project(ensemble: &EnsembleMatrix, quad: &SparseQuadrature, basis: &PcBasis) -> Result<PcExpansion> {
    if ensemble.len() != quad.len() {
        return Err(Error::Misaligned(format!(
            "ensemble has {} realizations but the quadrature has {} nodes",
            ensemble.len(),
            quad.len()
        )));
    }
    let values = ensemble.output_matrix()?;
    nisp_project_values(&values, quad, basis, ensemble.labels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::legendre_eval;
    use crate::design::smolyak_grid;

    fn project(f: impl Fn(&[f64]) -> f64, dim: usize, level: usize, order: usize) -> PcExpansion {
        let quad = smolyak_grid(dim, level).unwrap();
        let values = DMatrix::from_iterator(quad.len(), 1, quad.nodes.iter().map(|x| f(x)));
        let basis = PcBasis::total_order(dim, order).unwrap();
        let labels = vec![OutputLabel { gauge: "x".into(), step: 0, time_s: 0.0 }];
        nisp_project_values(&values, &quad, &basis, labels).unwrap()
    }

    #[test]
    fn constant_model() {
        let exp = project(|_| 3.25, 4, 3, 3);
        assert!((exp.coefficients()[(0, 0)] - 3.25).abs() < 1e-12);
        assert!(exp.coefficients().iter().skip(1).all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn second_legendre_mode() {
        // exactness 2*2+1 = 5 >= 4 at level 2
        let exp = project(|x| 2.0 + 3.0 * legendre_eval(2, x[0]).unwrap(), 6, 2, 2);
        let k = exp.basis().indices().iter().position(|i| i.degrees() == [2, 0, 0, 0, 0, 0]).unwrap();
        for (j, c) in exp.coefficients().column(0).iter().enumerate() {
            let expected = match j {
                0 => 2.0,
                _ if j == k => 3.0,
                _ => 0.0,
            };
            assert!((c - expected).abs() < 1e-10, "term {j}: {c}");
        }
    }

    #[test]
    fn misaligned_ensemble() {
        let quad = smolyak_grid(2, 1).unwrap();
        let basis = PcBasis::total_order(2, 1).unwrap();
        let values = DMatrix::zeros(quad.len() + 1, 1);
        let labels = vec![OutputLabel { gauge: "x".into(), step: 0, time_s: 0.0 }];
        assert!(matches!(nisp_project_values(&values, &quad, &basis, labels), Err(Error::Misaligned(_))));
    }
}
