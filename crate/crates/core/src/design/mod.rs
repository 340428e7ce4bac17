//! Experiment designs in canonical space and the slip <-> canonical mapping.

mod lhs;
pub mod patterson;
mod smolyak;

use serde::{Deserialize, Serialize};

use crate::basis::CanonicalPoint;
use crate::error::{Error, Result};

pub use lhs::lhs_sample;
pub use smolyak::{one_dimensional_rule, smolyak_grid, smolyak_grid_with, Growth, SparseQuadrature};

/// Number of subfaults in the default fault parameterization.
pub const N_SUBFAULTS: usize = 6;

/// Slip bounds in meters, shared by every subfault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for SlipBounds {
    fn default() -> Self {
        SlipBounds { min: 0.0, max: 30.0 }
    }
}

impl SlipBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidInput(format!("slip bounds require min < max, got [{min}, {max}]")));
        }
        Ok(SlipBounds { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.min && s <= self.max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Per-subfault slip in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipVector(pub Vec<f64>);

impl SlipVector {
    pub fn new(slips: Vec<f64>, bounds: &SlipBounds) -> Result<Self> {
        if let Some(s) = slips.iter().find(|&&s| !bounds.contains(s)) {
            return Err(Error::Domain(format!(
                "slip {s} m outside [{}, {}]",
                bounds.min, bounds.max
            )));
        }
        Ok(SlipVector(slips))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `xi_i = (2 s_i - (s_min + s_max)) / (s_max - s_min)`.
pub fn slip_to_canonical(s: &SlipVector, bounds: &SlipBounds) -> Result<CanonicalPoint> {
    let coords = s
        .as_slice()
        .iter()
        .map(|&si| {
            if !bounds.contains(si) {
                return Err(Error::Domain(format!("slip {si} m outside bounds")));
            }
            Ok((2.0 * si - (bounds.min + bounds.max)) / bounds.width())
        })
        .collect::<Result<Vec<_>>>()?;
    CanonicalPoint::new(coords)
}

/// Inverse of [`slip_to_canonical`]; results are clamped into the bounds to
/// absorb rounding at the endpoints.
pub fn canonical_to_slip(xi: &CanonicalPoint, bounds: &SlipBounds) -> Result<SlipVector> {
    let slips = xi
        .coords()
        .iter()
        .map(|&x| (0.5 * (bounds.min + bounds.max) + 0.5 * x * bounds.width()).clamp(bounds.min, bounds.max))
        .collect();
    Ok(SlipVector(slips))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Smolyak,
    Lhs,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Smolyak => "smolyak",
            DesignKind::Lhs => "lhs",
        }
    }
}

/// Sample points in `[-1, 1]^m`, one row per forward-model run.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub kind: DesignKind,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    /// Quadrature weights, present for Smolyak designs.
    pub weights: Option<Vec<f64>>,
    pub level: Option<usize>,
    pub seed: Option<u64>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_quadrature(q: &SparseQuadrature) -> Self {
        DesignMatrix {
            kind: DesignKind::Smolyak,
            dim: q.dim,
            points: q.nodes.clone(),
            weights: Some(q.weights.clone()),
            level: Some(q.level),
            seed: None,
        }
    }

    pub fn to_quadrature(&self) -> Result<SparseQuadrature> {
        match (&self.weights, self.level) {
            (Some(w), Some(level)) => Ok(SparseQuadrature {
                dim: self.dim,
                level,
                rule: "gauss-patterson".into(),
                nodes: self.points.clone(),
                weights: w.clone(),
            }),
            _ => Err(Error::InvalidInput("design carries no quadrature weights".into())),
        }
    }

    pub fn slips(&self, bounds: &SlipBounds) -> Result<Vec<SlipVector>> {
        self.points
            .iter()
            .map(|p| canonical_to_slip(&CanonicalPoint::new(p.clone())?, bounds))
            .collect()
    }

    /// Rows whose indices are listed, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        DesignMatrix {
            kind: self.kind,
            dim: self.dim,
            points: rows.iter().map(|&r| self.points[r].clone()).collect(),
            weights: None,
            level: self.level,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mapping_endpoints() {
        let b = SlipBounds::default();
        let xi = slip_to_canonical(&SlipVector(vec![0.0, 30.0, 15.0]), &b).unwrap();
        assert_eq!(xi.coords(), &[-1.0, 1.0, 0.0]);
        assert!(slip_to_canonical(&SlipVector(vec![-0.1]), &b).is_err());
        assert!(SlipBounds::new(3.0, 3.0).is_err());
    }

    proptest! {
        #[test]
        fn mapping_round_trip(s in proptest::collection::vec(0.0f64..=30.0, 6)) {
            let b = SlipBounds::default();
            let xi = slip_to_canonical(&SlipVector(s.clone()), &b).unwrap();
            let back = canonical_to_slip(&xi, &b).unwrap();
            for (a, c) in s.iter().zip(back.as_slice()) {
                prop_assert!((a - c).abs() <= 1e-14 * 30.0);
            }
        }
    }
}
