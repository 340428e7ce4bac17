//! Desk-scale tsunami forward model: first-order well-balanced finite-volume
//! solver of the 2D nonlinear shallow-water equations, driven by an
//! instantaneous slip-proportional sea-surface displacement.

mod ensemble;
mod gauge;
mod solver;
mod source;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ensemble::{run_ensemble, EnsembleMatrix, Realization};
pub use gauge::{arrival_time, max_wave_amplitude, GaugeRecord};
pub use solver::{simulate, simulate_with_state, Grid, StateField};
pub use source::{slip_to_initial_surface, unit_displacement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero-order extrapolation on every edge.
    #[default]
    Outflow,
    /// Solid walls on every edge.
    Reflective,
}

/// Optional linear shelf: depth ramps from the basin depth at `x_start_km`
/// to `edge_depth_m` at the eastern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shelf {
    pub x_start_km: f64,
    pub edge_depth_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bathymetry {
    pub depth_m: f64,
    #[serde(default)]
    pub shelf: Option<Shelf>,
}

impl Bathymetry {
    /// Bed elevation (negative below the still-water level) at `x` km.
    pub fn bed(&self, x_km: f64, lx_km: f64) -> f64 {
        let depth = match self.shelf {
            Some(s) if x_km > s.x_start_km => {
                let frac = ((x_km - s.x_start_km) / (lx_km - s.x_start_km)).clamp(0.0, 1.0);
                self.depth_m + frac * (s.edge_depth_m - self.depth_m)
            }
            _ => self.depth_m,
        };
        -depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSite {
    pub id: String,
    pub x_km: f64,
    pub y_km: f64,
}

/// Rectangular subfault footprint in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub x0_km: f64,
    pub x1_km: f64,
    pub y0_km: f64,
    pub y1_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx_km: f64,
    pub ly_km: f64,
    pub bathymetry: Bathymetry,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Coriolis parameter, 1/s.
    #[serde(default)]
    pub coriolis: f64,
    /// Quadratic bottom-friction coefficient.
    #[serde(default)]
    pub friction: f64,
    pub t_end_s: f64,
    pub output_dt_s: f64,
    pub cfl: f64,
    #[serde(default)]
    pub boundary: Boundary,
    pub gauges: Vec<GaugeSite>,
    pub subfaults: Vec<Footprint>,
    pub taper_km: f64,
    /// Sea-surface uplift of a subfault plateau per meter of slip.
    pub uplift_per_slip: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl Default for ModelConfig {
    /// 200 x 150 cells over a 2000 x 1500 km basin, 4000 m deep, with a
    /// 2 x 3 subfault patch near the western side and four gauges at
    /// staggered ranges to the east.
    fn default() -> Self {
        let mut subfaults = Vec::with_capacity(6);
        for row in 0..3 {
            for col in 0..2 {
                let x0 = 250.0 + 100.0 * col as f64;
                let y0 = 450.0 + 200.0 * row as f64;
                subfaults.push(Footprint { x0_km: x0, x1_km: x0 + 100.0, y0_km: y0, y1_km: y0 + 200.0 });
            }
        }
        let gauge = |id: &str, x, y| GaugeSite { id: id.into(), x_km: x, y_km: y };
        ModelConfig {
            nx: 200,
            ny: 150,
            lx_km: 2000.0,
            ly_km: 1500.0,
            bathymetry: Bathymetry { depth_m: 4000.0, shelf: None },
            gravity: 9.81,
            coriolis: 0.0,
            friction: 0.0,
            t_end_s: 7200.0,
            output_dt_s: 120.0,
            cfl: 0.45,
            boundary: Boundary::Outflow,
            gauges: vec![
                gauge("G1", 700.0, 800.0),
                gauge("G2", 950.0, 350.0),
                gauge("G3", 1300.0, 1100.0),
                gauge("G4", 1750.0, 600.0),
            ],
            subfaults,
            taper_km: 40.0,
            uplift_per_slip: 0.25,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.nx < 8 || self.ny < 8 {
            return bad(format!("grid must be at least 8 x 8, got {} x {}", self.nx, self.ny));
        }
        if !(self.lx_km > 0.0 && self.ly_km > 0.0) {
            return bad("domain extents must be positive".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return bad(format!("CFL must lie in (0, 0.9], got {}", self.cfl));
        }
        if !(self.t_end_s > 0.0 && self.output_dt_s > 0.0) {
            return bad("end time and output cadence must be positive".into());
        }
        if !(self.gravity > 0.0) || self.friction < 0.0 || self.taper_km < 0.0 {
            return bad("gravity must be positive; friction and taper non-negative".into());
        }
        if !(self.bathymetry.depth_m > 0.0) {
            return bad("basin depth must be positive".into());
        }
        let inside = |x: f64, y: f64| (0.0..=self.lx_km).contains(&x) && (0.0..=self.ly_km).contains(&y);
        for g in &self.gauges {
            if !inside(g.x_km, g.y_km) {
                return bad(format!("gauge {} lies outside the domain", g.id));
            }
        }
        if self.gauges.is_empty() {
            return bad("at least one gauge is required".into());
        }
        for (i, f) in self.subfaults.iter().enumerate() {
            if !(f.x0_km < f.x1_km && f.y0_km < f.y1_km) || !inside(f.x0_km, f.y0_km) || !inside(f.x1_km, f.y1_km) {
                return bad(format!("subfault {i} footprint is empty or outside the domain"));
            }
        }
        Ok(())
    }

    pub fn dx_m(&self) -> f64 {
        self.lx_km * 1000.0 / self.nx as f64
    }

    pub fn dy_m(&self) -> f64 {
        self.ly_km * 1000.0 / self.ny as f64
    }

    /// Output times `0, dt, 2 dt, ...` up to and including `t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        let n = (self.t_end_s / self.output_dt_s + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.output_dt_s).collect()
    }
}
