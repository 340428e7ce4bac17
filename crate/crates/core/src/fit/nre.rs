use nalgebra::DMatrix;

use crate::basis::PcExpansion;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::swe::EnsembleMatrix;

/// Normalized relative error per output column,
/// `||G_val - PC(xi_val)||_2 / ||G_val||_2`. `None` marks a zero denominator.
pub fn nre_values(surrogate: &PcExpansion, points: &[Vec<f64>], values: &DMatrix<f64>) -> Result<Vec<Option<f64>>> {
    if points.len() != values.nrows() {
        return Err(Error::Misaligned(format!("{} points for {} validation rows", points.len(), values.nrows())));
    }
    if values.ncols() != surrogate.n_outputs() {
        return Err(Error::Misaligned(format!(
            "{} validation outputs for a surrogate with {}",
            values.ncols(),
            surrogate.n_outputs()
        )));
    }
    let psi = surrogate.basis().design_matrix(points)?;
    let predicted = psi * surrogate.coefficients();
    Ok((0..values.ncols())
        .map(|j| {
            let truth = values.column(j);
            let denom = truth.norm();
            let num = (truth - predicted.column(j)).norm();
            (denom > 0.0).then(|| num / denom)
        })
        .collect())
}

/// NRE against a validation ensemble. Points that coincide with `fit_points`
/// only trigger a warning.
pub fn nre(
    surrogate: &PcExpansion,
    validation: &EnsembleMatrix,
    design: &DesignMatrix,
    fit_points: Option<&[Vec<f64>]>,
) -> Result<Vec<Option<f64>>> {
    if let Some(fit) = fit_points {
        let shared = design
            .points
            .iter()
            .filter(|p| fit.iter().any(|f| f.iter().zip(p.iter()).all(|(a, b)| (a - b).abs() < 1e-12)))
            .count();
        if shared > 0 {
            log::warn!("{shared} validation points were also used for fitting");
        }
    }
    nre_values(surrogate, &design.points, &validation.output_matrix()?)
}
