//! Forward-UQ summaries and goodness-of-fit checks.

use nalgebra::DMatrix;

use crate::basis::{OutputLabel, PcExpansion};
use crate::design::{DesignMatrix, SlipBounds};
use crate::error::{Error, Result};
use crate::swe::{arrival_time, max_wave_amplitude, EnsembleMatrix, GaugeRecord};

/// Mean and two-standard-deviation band of one gauge over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBand {
    pub gauge: String,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Bands for every gauge, in order of first appearance among the labels.
pub fn moment_bands(exp: &PcExpansion) -> Vec<MomentBand> {
    let mean = exp.mean();
    let var = exp.variance();
    let mut bands: Vec<MomentBand> = Vec::new();
    for (j, label) in exp.labels().iter().enumerate() {
        let idx = match bands.iter().position(|b| b.gauge == label.gauge) {
            Some(i) => i,
            None => {
                bands.push(MomentBand {
                    gauge: label.gauge.clone(),
                    times: vec![],
                    mean: vec![],
                    lower: vec![],
                    upper: vec![],
                });
                bands.len() - 1
            }
        };
        let sd = var[j].max(0.0).sqrt();
        let b = &mut bands[idx];
        b.times.push(label.time_s);
        b.mean.push(mean[j]);
        b.lower.push(mean[j] - 2.0 * sd);
        b.upper.push(mean[j] + 2.0 * sd);
    }
    bands
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empirical CDF of an empty sample".into()));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN in CDF sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `#{x_i <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Jump locations and the CDF value just after each jump.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = f,
                _ => out.push((x, f)),
            }
        }
        out
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    a.sorted
        .iter()
        .chain(&b.sorted)
        .map(|&x| (a.eval(x) - b.eval(x)).abs())
        .fold(0.0, f64::max)
}

fn check_aligned(obs: &GaugeRecord, model: &GaugeRecord) -> Result<()> {
    if obs.len() != model.len() || obs.is_empty() {
        return Err(Error::Misaligned(format!(
            "gauge {}: {} observed vs {} modelled samples",
            obs.id,
            obs.len(),
            model.len()
        )));
    }
    let tol = 1e-9 * obs.times.iter().fold(1.0f64, |a, t| a.max(t.abs()));
    if obs.times.iter().zip(&model.times).any(|(a, b)| (a - b).abs() > tol) {
        return Err(Error::Misaligned(format!("gauge {}: time bases differ", obs.id)));
    }
    Ok(())
}

/// Population variance of `model - obs`; a constant offset does not count.
pub fn residual_variance(obs: &GaugeRecord, model: &GaugeRecord) -> Result<f64> {
    check_aligned(obs, model)?;
    let n = obs.len() as f64;
    let bias = mean_bias(obs, model)?;
    Ok(obs.eta.iter().zip(&model.eta).map(|(o, m)| (m - o - bias).powi(2)).sum::<f64>() / n)
}

/// Mean of `model - obs`.
pub fn mean_bias(obs: &GaugeRecord, model: &GaugeRecord) -> Result<f64> {
    check_aligned(obs, model)?;
    Ok(obs.eta.iter().zip(&model.eta).map(|(o, m)| m - o).sum::<f64>() / obs.len() as f64)
}

/// Output times whose validation norm is below this fraction of the gauge's
/// largest are left out of NRE summaries: before the first arrival the
/// relative error divides by numerical noise.
pub const ACTIVE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct NreSummary {
    pub gauge: String,
    pub mean: f64,
    pub peak: f64,
    pub peak_time_s: f64,
    pub active_steps: usize,
}

/// Mean and peak NRE per gauge over the active output times.
pub fn summarize_nre(nre: &[Option<f64>], labels: &[OutputLabel], values: &DMatrix<f64>) -> Result<Vec<NreSummary>> {
    if nre.len() != labels.len() || values.ncols() != labels.len() {
        return Err(Error::Misaligned("NRE, labels and validation outputs differ in length".into()));
    }
    let mut gauges: Vec<&str> = Vec::new();
    for l in labels {
        if !gauges.contains(&l.gauge.as_str()) {
            gauges.push(&l.gauge);
        }
    }
    let norms: Vec<f64> = (0..values.ncols()).map(|j| values.column(j).norm()).collect();
    Ok(gauges
        .into_iter()
        .map(|g| {
            let cols: Vec<usize> = (0..labels.len()).filter(|&j| labels[j].gauge == g).collect();
            let top = cols.iter().map(|&j| norms[j]).fold(0.0, f64::max);
            let active: Vec<(usize, f64)> = cols
                .iter()
                .filter(|&&j| top > 0.0 && norms[j] >= ACTIVE_FRACTION * top)
                .filter_map(|&j| nre[j].map(|v| (j, v)))
                .collect();
            let (peak_col, peak) = active.iter().copied().fold((usize::MAX, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            NreSummary {
                gauge: g.to_string(),
                mean: if active.is_empty() { 0.0 } else { active.iter().map(|a| a.1).sum::<f64>() / active.len() as f64 },
                peak,
                peak_time_s: if peak_col == usize::MAX { f64::NAN } else { labels[peak_col].time_s },
                active_steps: active.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub slip: f64,
    pub arrival_s: Option<f64>,
    pub max_amplitude: f64,
}

/// Arrival time and maximum amplitude at one gauge along one slip axis, with
/// every other slip at the midpoint of the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub gauge: String,
    pub axis: usize,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSweep {
    pub tables: Vec<SweepTable>,
    pub note: Option<String>,
}

const ON_MIDPOINT: f64 = 1e-12;

pub fn ensemble_sweep(
    ens: &EnsembleMatrix,
    design: &DesignMatrix,
    bounds: &SlipBounds,
    arrival_threshold: f64,
) -> Result<EnsembleSweep> {
    if ens.len() != design.len() {
        return Err(Error::Misaligned(format!("{} runs for {} design points", ens.len(), design.len())));
    }
    let slips = design.slips(bounds)?;
    let mut tables = Vec::new();
    for axis in 0..design.dim {
        let mut rows: Vec<usize> = (0..design.len())
            .filter(|&r| {
                design.points[r].iter().enumerate().all(|(k, x)| k == axis || x.abs() <= ON_MIDPOINT)
                    && ens.realizations[r].is_ok()
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|&a, &b| design.points[a][axis].total_cmp(&design.points[b][axis]));
        for (g, gauge) in ens.gauge_ids.iter().enumerate() {
            let mut table = SweepTable { gauge: gauge.clone(), axis, rows: Vec::with_capacity(rows.len()) };
            for &r in &rows {
                let rec = &ens.realizations[r].as_ref().expect("filtered")[g];
                table.rows.push(SweepRow {
                    slip: slips[r].0[axis],
                    arrival_s: arrival_time(rec, arrival_threshold)?,
                    max_amplitude: max_wave_amplitude(rec)?,
                });
            }
            tables.push(table);
        }
    }
    let note = tables
        .is_empty()
        .then(|| "design has no one-dimensional slices through the midpoint".to_string());
    Ok(EnsembleSweep { tables, note })
}
