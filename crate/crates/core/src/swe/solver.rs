use super::gauge::GaugeRecord;
use super::source::slip_to_initial_surface;
use super::{Boundary, ModelConfig};
use crate::design::SlipVector;
use crate::error::{Error, Result};

/// Depth below which a cell's velocity is taken as zero.
const DRY_TOL: f64 = 1e-8;

/// Cell-centered uniform grid geometry.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(cfg: &ModelConfig) -> Self {
        Grid { nx: cfg.nx, ny: cfg.ny, dx: cfg.dx_m(), dy: cfg.dy_m() }
    }

    pub fn xc_km(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx / 1000.0
    }

    pub fn yc_km(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy / 1000.0
    }
}

/// Conserved variables and bed elevation with one ghost layer; storage is
/// row-major over `(ny + 2) x (nx + 2)`.
#[derive(Debug, Clone)]
pub struct StateField {
    pub grid: Grid,
    pub h: Vec<f64>,
    pub hu: Vec<f64>,
    pub hv: Vec<f64>,
    pub b: Vec<f64>,
}

impl StateField {
    #[inline]
    fn stride(&self) -> usize {
        self.grid.nx + 2
    }

    /// Storage index of interior cell `(i, j)`, zero-based.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        (j + 1) * self.stride() + i + 1
    }

    /// Lake at the given free-surface displacement over the configured bed.
    pub fn from_surface(cfg: &ModelConfig, eta0: &[f64]) -> Result<Self> {
        let grid = Grid::new(cfg);
        if eta0.len() != grid.nx * grid.ny {
            return Err(Error::DimensionMismatch { expected: grid.nx * grid.ny, got: eta0.len() });
        }
        let n = (grid.nx + 2) * (grid.ny + 2);
        let mut st = StateField { grid, h: vec![0.0; n], hu: vec![0.0; n], hv: vec![0.0; n], b: vec![0.0; n] };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = st.at(i, j);
                let bed = cfg.bathymetry.bed(grid.xc_km(i), cfg.lx_km);
                st.b[k] = bed;
                st.h[k] = (eta0[j * grid.nx + i] - bed).max(0.0);
            }
        }
        Ok(st)
    }

    pub fn eta(&self, i: usize, j: usize) -> f64 {
        let k = self.at(i, j);
        self.h[k] + self.b[k]
    }

    /// Water volume over the interior, m^3.
    pub fn volume(&self) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.grid.ny {
            let row = self.at(0, j);
            sum += self.h[row..row + self.grid.nx].iter().sum::<f64>();
        }
        sum * self.grid.dx * self.grid.dy
    }

    /// Bilinear interpolation of `eta` between cell centers; positions
    /// outside the ring of centers are clamped to it.
    pub fn eta_at(&self, x_km: f64, y_km: f64) -> f64 {
        let g = self.grid;
        let locate = |pos_m: f64, d: f64, n: usize| {
            let f = (pos_m / d - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (f.floor() as usize).min(n - 2);
            (i0, f - i0 as f64)
        };
        let (i0, tx) = locate(x_km * 1000.0, g.dx, g.nx);
        let (j0, ty) = locate(y_km * 1000.0, g.dy, g.ny);
        let e00 = self.eta(i0, j0);
        let e10 = self.eta(i0 + 1, j0);
        let e01 = self.eta(i0, j0 + 1);
        let e11 = self.eta(i0 + 1, j0 + 1);
        (1.0 - ty) * ((1.0 - tx) * e00 + tx * e10) + ty * ((1.0 - tx) * e01 + tx * e11)
    }

    fn fill_ghosts(&mut self, boundary: Boundary) {
        let (nx, ny, s) = (self.grid.nx, self.grid.ny, self.stride());
        let normal_sign = match boundary {
            Boundary::Outflow => 1.0,
            Boundary::Reflective => -1.0,
        };
        for j in 1..=ny {
            for (ghost, inner) in [(j * s, j * s + 1), (j * s + nx + 1, j * s + nx)] {
                self.h[ghost] = self.h[inner];
                self.b[ghost] = self.b[inner];
                self.hu[ghost] = normal_sign * self.hu[inner];
                self.hv[ghost] = self.hv[inner];
            }
        }
        for i in 0..nx + 2 {
            for (ghost, inner) in [(i, s + i), ((ny + 1) * s + i, ny * s + i)] {
                self.h[ghost] = self.h[inner];
                self.b[ghost] = self.b[inner];
                self.hu[ghost] = self.hu[inner];
                self.hv[ghost] = normal_sign * self.hv[inner];
            }
        }
    }
}

/// Hydrostatically reconstructed Rusanov flux across one face, in face-normal
/// coordinates. Returns `(mass, normal momentum seen by the left cell, normal
/// momentum seen by the right cell, tangential momentum)`. The `g h^2 / 2`
/// pressure of the cell's own depth cancels inside each cell and is left out
/// of both momentum values, which keeps a lake at rest exactly at rest.
#[inline]
#[allow(clippy::too_many_arguments)]
fn face_flux(
    g: f64,
    hl: f64,
    qnl: f64,
    qtl: f64,
    bl: f64,
    hr: f64,
    qnr: f64,
    qtr: f64,
    br: f64,
) -> (f64, f64, f64, f64) {
    let bstar = bl.max(br);
    let hls = (hl + bl - bstar).max(0.0);
    let hrs = (hr + br - bstar).max(0.0);
    let (ul, vl) = if hl > DRY_TOL { (qnl / hl, qtl / hl) } else { (0.0, 0.0) };
    let (ur, vr) = if hr > DRY_TOL { (qnr / hr, qtr / hr) } else { (0.0, 0.0) };
    let a = (ul.abs() + (g * hls).sqrt()).max(ur.abs() + (g * hrs).sqrt());
    let pl = 0.5 * g * hls * hls;
    let pr = 0.5 * g * hrs * hrs;
    let mass = 0.5 * (hls * ul + hrs * ur) - 0.5 * a * (hrs - hls);
    let mom = 0.5 * ((hls * ul * ul + pl) + (hrs * ur * ur + pr)) - 0.5 * a * (hrs * ur - hls * ul);
    let tan = 0.5 * (hls * ul * vl + hrs * ur * vr) - 0.5 * a * (hrs * vr - hls * vl);
    (mass, mom - pl, mom - pr, tan)
}

/// Explicit first-order solver state.
pub struct Solver<'a> {
    cfg: &'a ModelConfig,
    pub state: StateField,
    pub time: f64,
    pub steps: usize,
    dh: Vec<f64>,
    dhu: Vec<f64>,
    dhv: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(cfg: &'a ModelConfig, eta0: &[f64]) -> Result<Self> {
        cfg.validate()?;
        let state = StateField::from_surface(cfg, eta0)?;
        let n = state.h.len();
        Ok(Solver { cfg, state, time: 0.0, steps: 0, dh: vec![0.0; n], dhu: vec![0.0; n], dhv: vec![0.0; n] })
    }

    /// `cfl * min(dx, dy) / max(|u| + c, |v| + c)`; infinite when dry and still.
    pub fn stable_dt(&self) -> f64 {
        let st = &self.state;
        let g = self.cfg.gravity;
        let mut smax: f64 = 0.0;
        for j in 0..st.grid.ny {
            for i in 0..st.grid.nx {
                let k = st.at(i, j);
                let h = st.h[k];
                if h <= DRY_TOL {
                    continue;
                }
                let c = (g * h).sqrt();
                let s = (st.hu[k] / h).abs().max((st.hv[k] / h).abs()) + c;
                smax = smax.max(s);
            }
        }
        if smax > 0.0 {
            self.cfg.cfl * st.grid.dx.min(st.grid.dy) / smax
        } else {
            f64::INFINITY
        }
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let g = self.cfg.gravity;
        self.state.fill_ghosts(self.cfg.boundary);
        let st = &self.state;
        let (nx, ny) = (st.grid.nx, st.grid.ny);
        let s = nx + 2;
        let (rx, ry) = (dt / st.grid.dx, dt / st.grid.dy);
        self.dh.iter_mut().for_each(|v| *v = 0.0);
        self.dhu.iter_mut().for_each(|v| *v = 0.0);
        self.dhv.iter_mut().for_each(|v| *v = 0.0);

        // x faces: between storage columns i and i + 1
        for j in 1..=ny {
            for i in 0..=nx {
                let l = j * s + i;
                let r = l + 1;
                let (fm, fl, fr, ft) =
                    face_flux(g, st.h[l], st.hu[l], st.hv[l], st.b[l], st.h[r], st.hu[r], st.hv[r], st.b[r]);
                self.dh[l] -= rx * fm;
                self.dh[r] += rx * fm;
                self.dhu[l] -= rx * fl;
                self.dhu[r] += rx * fr;
                self.dhv[l] -= rx * ft;
                self.dhv[r] += rx * ft;
            }
        }
        // y faces: between storage rows j and j + 1
        for j in 0..=ny {
            for i in 1..=nx {
                let l = j * s + i;
                let r = l + s;
                let (fm, fl, fr, ft) =
                    face_flux(g, st.h[l], st.hv[l], st.hu[l], st.b[l], st.h[r], st.hv[r], st.hu[r], st.b[r]);
                self.dh[l] -= ry * fm;
                self.dh[r] += ry * fm;
                self.dhv[l] -= ry * fl;
                self.dhv[r] += ry * fr;
                self.dhu[l] -= ry * ft;
                self.dhu[r] += ry * ft;
            }
        }

        let (cf, f) = (self.cfg.friction, self.cfg.coriolis);
        let (sin_f, cos_f) = (f * dt).sin_cos();
        let st = &mut self.state;
        for j in 1..=ny {
            for i in 1..=nx {
                let k = j * s + i;
                let mut h = st.h[k] + self.dh[k];
                let mut hu = st.hu[k] + self.dhu[k];
                let mut hv = st.hv[k] + self.dhv[k];
                if !(h.is_finite() && hu.is_finite() && hv.is_finite()) {
                    return Err(Error::Instability {
                        step: self.steps,
                        time: self.time,
                        detail: format!("non-finite state in cell ({}, {})", i - 1, j - 1),
                    });
                }
                if h <= DRY_TOL {
                    h = h.max(0.0);
                    hu = 0.0;
                    hv = 0.0;
                } else {
                    if f != 0.0 {
                        let (a, c) = (hu, hv);
                        hu = cos_f * a + sin_f * c;
                        hv = -sin_f * a + cos_f * c;
                    }
                    if cf > 0.0 {
                        let speed = (hu * hu + hv * hv).sqrt() / h;
                        let damp = 1.0 / (1.0 + dt * cf * speed / h);
                        hu *= damp;
                        hv *= damp;
                    }
                }
                st.h[k] = h;
                st.hu[k] = hu;
                st.hv[k] = hv;
            }
        }
        self.time += dt;
        self.steps += 1;
        Ok(())
    }

    fn sample(&self, records: &mut [Vec<f64>]) {
        for (rec, site) in records.iter_mut().zip(&self.cfg.gauges) {
            rec.push(self.state.eta_at(site.x_km, site.y_km));
        }
    }

    /// Advances to `t_end`, sampling gauges at every output time.
    pub fn run(&mut self) -> Result<Vec<GaugeRecord>> {
        let times = self.cfg.output_times();
        let mut values = vec![Vec::with_capacity(times.len()); self.cfg.gauges.len()];
        self.sample(&mut values);
        for &target in &times[1..] {
            while self.time < target {
                let remaining = target - self.time;
                let dt = self.stable_dt();
                if dt >= remaining {
                    self.step(remaining)?;
                    self.time = target;
                } else {
                    self.step(dt)?;
                }
            }
            self.sample(&mut values);
        }
        self.cfg
            .gauges
            .iter()
            .zip(values)
            .map(|(site, eta)| GaugeRecord::new(site.id.clone(), times.clone(), eta))
            .collect()
    }
}

/// Gauge records for a slip vector.
pub fn simulate(cfg: &ModelConfig, s: &SlipVector) -> Result<Vec<GaugeRecord>> {
    let eta0 = slip_to_initial_surface(s, cfg)?;
    Solver::new(cfg, &eta0)?.run()
}

/// Gauge records and final state from an arbitrary initial surface.
pub fn simulate_with_state(cfg: &ModelConfig, eta0: &[f64]) -> Result<(Vec<GaugeRecord>, StateField, usize)> {
    let mut solver = Solver::new(cfg, eta0)?;
    let records = solver.run()?;
    Ok((records, solver.state, solver.steps))
}
