use crate::design::SlipVector;
use crate::error::{Error, Result};

/// Offset in `Mw = (log10 M0 - 9.05) / 1.5`, with `M0` in N m.
pub const MAGNITUDE_OFFSET: f64 = 9.05;

pub fn moment_magnitude(m0: f64) -> Result<f64> {
    if !(m0 > 0.0) {
        return Err(Error::Domain(format!("seismic moment must be positive, got {m0}")));
    }
    Ok((m0.log10() - MAGNITUDE_OFFSET) / 1.5)
}

/// `M0 = sum_i mu A_i s_i` (N m) and its moment magnitude.
pub fn seismic_moment(s: &SlipVector, rigidity_pa: f64, areas_m2: &[f64]) -> Result<(f64, f64)> {
    if !(rigidity_pa > 0.0) || areas_m2.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInput("rigidity and subfault areas must be positive".into()));
    }
    if areas_m2.len() != s.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), got: areas_m2.len() });
    }
    let m0: f64 = s.as_slice().iter().zip(areas_m2).map(|(slip, a)| rigidity_pa * a * slip).sum();
    Ok((m0, moment_magnitude(m0)?))
}
