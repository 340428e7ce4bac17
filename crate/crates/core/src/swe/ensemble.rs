use nalgebra::DMatrix;
use rayon::prelude::*;

use super::gauge::GaugeRecord;
use super::solver::simulate;
use super::ModelConfig;
use crate::basis::{CanonicalPoint, OutputLabel};
use crate::design::{canonical_to_slip, DesignMatrix, SlipBounds};
use crate::error::{Error, Result};

/// Outcome of one forward run.
pub type Realization = std::result::Result<Vec<GaugeRecord>, String>;

/// Forward-model outputs over a design, addressed by design row.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMatrix {
    pub gauge_ids: Vec<String>,
    pub times: Vec<f64>,
    pub realizations: Vec<Realization>,
}

impl EnsembleMatrix {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn failures(&self) -> usize {
        self.realizations.iter().filter(|r| r.is_err()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.failures() == 0
    }

    pub fn n_outputs(&self) -> usize {
        self.gauge_ids.len() * self.times.len()
    }

    /// Output columns, gauge-major: all times of the first gauge, then the next.
    pub fn labels(&self) -> Vec<OutputLabel> {
        self.gauge_ids
            .iter()
            .flat_map(|g| {
                self.times
                    .iter()
                    .enumerate()
                    .map(move |(step, &t)| OutputLabel { gauge: g.clone(), step, time_s: t })
            })
            .collect()
    }

    /// `S x (gauges * times)` matrix of surface elevations.
    pub fn output_matrix(&self) -> Result<DMatrix<f64>> {
        if !self.is_complete() {
            return Err(Error::IncompleteEnsemble { failed: self.failures(), total: self.len() });
        }
        let nt = self.times.len();
        let mut out = DMatrix::zeros(self.len(), self.n_outputs());
        for (row, real) in self.realizations.iter().enumerate() {
            let recs = real.as_ref().expect("checked complete");
            for (g, rec) in recs.iter().enumerate() {
                if rec.eta.len() != nt {
                    return Err(Error::Misaligned(format!("realization {row} gauge {} length", rec.id)));
                }
                for (k, &e) in rec.eta.iter().enumerate() {
                    out[(row, g * nt + k)] = e;
                }
            }
        }
        Ok(out)
    }

    /// Rows listed, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        EnsembleMatrix {
            gauge_ids: self.gauge_ids.clone(),
            times: self.times.clone(),
            realizations: rows.iter().map(|&r| self.realizations[r].clone()).collect(),
        }
    }
}

/// One `simulate` per design row on a pool of `workers` threads. Results are
/// stored by row index, so the ensemble does not depend on scheduling.
pub fn run_ensemble(
    design: &DesignMatrix,
    cfg: &ModelConfig,
    bounds: &SlipBounds,
    workers: usize,
) -> Result<EnsembleMatrix> {
    cfg.validate()?;
    if design.dim != cfg.subfaults.len() {
        return Err(Error::DimensionMismatch { expected: cfg.subfaults.len(), got: design.dim });
    }
    let run_one = |row: &Vec<f64>| -> Realization {
        let slips = CanonicalPoint::new(row.clone())
            .and_then(|xi| canonical_to_slip(&xi, bounds))
            .map_err(|e| e.to_string())?;
        simulate(cfg, &slips).map_err(|e| e.to_string())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let realizations: Vec<Realization> = pool.install(|| design.points.par_iter().map(run_one).collect());
    for (row, r) in realizations.iter().enumerate() {
        if let Err(msg) = r {
            log::warn!("realization {row} failed: {msg}");
        }
    }
    Ok(EnsembleMatrix {
        gauge_ids: cfg.gauges.iter().map(|g| g.id.clone()).collect(),
        times: cfg.output_times(),
        realizations,
    })
}
