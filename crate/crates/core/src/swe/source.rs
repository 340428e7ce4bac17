use std::f64::consts::PI;

use super::solver::Grid;
use super::{Footprint, ModelConfig};
use crate::design::SlipVector;
use crate::error::{Error, Result};

/// 1 inside `[a, b]`, cosine taper to 0 over `w` outside it.
fn taper(x: f64, a: f64, b: f64, w: f64) -> f64 {
    let d = if x < a {
        a - x
    } else if x > b {
        x - b
    } else {
        0.0
    };
    if d == 0.0 {
        1.0
    } else if w > 0.0 && d < w {
        0.5 * (1.0 + (PI * d / w).cos())
    } else {
        0.0
    }
}

/// Sea-surface displacement per meter of slip on one subfault, at cell
/// centers (row-major, `ny` rows of `nx`).
pub fn unit_displacement(cfg: &ModelConfig, footprint: &Footprint) -> Vec<f64> {
    let grid = Grid::new(cfg);
    let mut out = vec![0.0; cfg.nx * cfg.ny];
    for j in 0..cfg.ny {
        let ty = taper(grid.yc_km(j), footprint.y0_km, footprint.y1_km, cfg.taper_km);
        if ty == 0.0 {
            continue;
        }
        for i in 0..cfg.nx {
            let tx = taper(grid.xc_km(i), footprint.x0_km, footprint.x1_km, cfg.taper_km);
            out[j * cfg.nx + i] = cfg.uplift_per_slip * tx * ty;
        }
    }
    out
}

/// `eta_0 = sum_i s_i U_i`, linear in the slips.
pub fn slip_to_initial_surface(s: &SlipVector, cfg: &ModelConfig) -> Result<Vec<f64>> {
    if s.len() != cfg.subfaults.len() {
        return Err(Error::DimensionMismatch { expected: cfg.subfaults.len(), got: s.len() });
    }
    let mut eta = vec![0.0; cfg.nx * cfg.ny];
    for (&slip, fp) in s.as_slice().iter().zip(&cfg.subfaults) {
        if slip == 0.0 {
            continue;
        }
        for (e, u) in eta.iter_mut().zip(unit_displacement(cfg, fp)) {
            *e += slip * u;
        }
    }
    Ok(eta)
}
