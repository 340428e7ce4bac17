//! Pipeline stages and their on-disk artifacts.
//!
//! ```text
//! <out>/design/{smolyak,lhs}.csv + .manifest
//! <out>/ensemble/{smolyak,lhs}/manifest.txt, status.csv, runs/run_NNNNN.csv
//! <out>/expansion/{nisp,bpdn}-p<order>/manifest.txt, indices.csv, outputs.csv, coefficients.csv
//! <out>/validate/<expansion>/  nre.csv, summary.txt, cdf_<gauge>.csv, ks.csv
//! <out>/moments/<expansion>/   bands.csv, sobol.csv
//! <out>/infer/, <out>/twin/    chain.csv, summary.csv, kde_<param>.csv, moment.txt
//! <out>/sweep/sweep.csv
//! ```
//!
//! Every manifest records the configuration hash and the seeds it used.
//! Stages read upstream artifacts only and never modify them.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::{CanonicalPoint, MultiIndex, OutputLabel, PcBasis, PcExpansion};
use crate::config::PipelineConfig;
use crate::design::{lhs_sample, slip_to_canonical, smolyak_grid_with, DesignKind, DesignMatrix, SlipVector};
use crate::diagnostics::{empirical_cdf, ensemble_sweep, ks_distance, moment_bands, summarize_nre, NreSummary};
use crate::error::{Error, Result};
use crate::fit::{fit_bpdn, nisp_project_values, nre_values, FitMethod};
use crate::infer::{
    align_observations, hpd_interval, kde, map_estimate, sample_posterior, seismic_moment, AmOptions, Bandwidth,
    Posterior, PosteriorChain, PosteriorState,
};
use crate::io::{ensure_dir, fmt_f64, sha256_file, Manifest, Table};
use crate::swe::{run_ensemble, simulate, EnsembleMatrix, GaugeRecord, Realization};

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Nisp => "nisp",
        FitMethod::Bpdn => "bpdn",
    }
}

fn parse_kind(s: &str, path: &Path) -> Result<DesignKind> {
    match s {
        "smolyak" => Ok(DesignKind::Smolyak),
        "lhs" => Ok(DesignKind::Lhs),
        other => Err(Error::parse(path, format!("unknown design kind '{other}'"))),
    }
}

/// Paths of every artifact below an output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn design_csv(&self, kind: DesignKind) -> PathBuf {
        self.root.join("design").join(format!("{}.csv", kind.as_str()))
    }

    pub fn design_manifest(&self, kind: DesignKind) -> PathBuf {
        self.root.join("design").join(format!("{}.manifest", kind.as_str()))
    }

    pub fn ensemble_dir(&self, kind: DesignKind) -> PathBuf {
        self.root.join("ensemble").join(kind.as_str())
    }

    pub fn expansion_dir(&self, method: FitMethod, order: usize) -> PathBuf {
        self.root.join("expansion").join(format!("{}-p{order}", method_name(method)))
    }

    /// `path` relative to the root when it lies below it.
    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).display().to_string()
    }

    pub fn stage_dir(&self, stage: &str, expansion: &Path) -> PathBuf {
        let name = expansion.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.root.join(stage).join(name)
    }
}

fn require_stage(manifest: &Path, stage: &str) -> Result<()> {
    if manifest.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is missing; run the {stage} stage first", manifest.display())))
    }
}

fn base_manifest(cfg: &PipelineConfig, stage: &str) -> Manifest {
    let mut m = Manifest::new();
    m.set("stage", stage).set("config_hash", cfg.hash()).set("model_hash", model_hash(cfg));
    m
}

fn model_hash(cfg: &PipelineConfig) -> String {
    #[derive(serde::Serialize)]
    struct Model<'a> {
        model: &'a crate::swe::ModelConfig,
        bounds: &'a crate::design::SlipBounds,
    }
    let text = toml::to_string(&Model { model: &cfg.model, bounds: &cfg.bounds }).expect("model serializes");
    crate::io::sha256_hex(text.as_bytes())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let n = if workers == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { workers };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn resolved_workers(cfg: &PipelineConfig) -> usize {
    if cfg.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cfg.workers
    }
}

// ---------------------------------------------------------------- design

pub fn build_design(cfg: &PipelineConfig, kind: DesignKind) -> Result<DesignMatrix> {
    match kind {
        DesignKind::Smolyak => {
            let q = smolyak_grid_with(cfg.dim(), cfg.design.smolyak_level, cfg.design.growth)?;
            Ok(DesignMatrix::from_quadrature(&q))
        }
        DesignKind::Lhs => lhs_sample(cfg.dim(), cfg.design.lhs_samples, cfg.design.lhs_seed),
    }
}

pub fn write_design(layout: &Layout, cfg: &PipelineConfig, design: &DesignMatrix) -> Result<()> {
    ensure_dir(&layout.root.join("design"))?;
    let mut header: Vec<String> = (1..=design.dim).map(|i| format!("xi{i}")).collect();
    if design.weights.is_some() {
        header.push("weight".into());
    }
    let mut t = Table::new(header);
    for (r, p) in design.points.iter().enumerate() {
        let mut row = p.clone();
        if let Some(w) = &design.weights {
            row.push(w[r]);
        }
        t.push_f64(&row);
    }
    let csv = layout.design_csv(design.kind);
    t.write(&csv)?;
    let mut m = base_manifest(cfg, "design");
    m.set("kind", design.kind.as_str())
        .set("dim", design.dim)
        .set("points", design.len())
        .set("points_sha256", sha256_file(&csv)?);
    if let Some(level) = design.level {
        m.set("level", level).set("growth", format!("{:?}", cfg.design.growth).to_lowercase());
    }
    if let Some(seed) = design.seed {
        m.set("seed", seed);
    }
    m.write(&layout.design_manifest(design.kind))
}

/// Design and the hash of its point file.
pub fn read_design(layout: &Layout, kind: DesignKind) -> Result<(DesignMatrix, String)> {
    let csv = layout.design_csv(kind);
    let mpath = layout.design_manifest(kind);
    require_stage(&mpath, &format!("design --kind {}", kind.as_str()))?;
    let m = Manifest::read(&mpath)?;
    let sha = sha256_file(&csv)?;
    if m.require("points_sha256", &mpath)? != sha {
        return Err(Error::Integrity(format!("{} does not match its manifest", csv.display())));
    }
    let dim: usize = m.require_parsed("dim", &mpath)?;
    let t = Table::read(&csv)?;
    let has_weights = t.header.last().map(|h| h == "weight").unwrap_or(false);
    let cols: Vec<usize> = (0..t.header.len()).collect();
    let rows = t.numeric(&cols, &csv)?;
    let points: Vec<Vec<f64>> = rows.iter().map(|r| r[..dim].to_vec()).collect();
    let weights = has_weights.then(|| rows.iter().map(|r| r[dim]).collect());
    let design = DesignMatrix {
        kind: parse_kind(m.require("kind", &mpath)?, &mpath)?,
        dim,
        points,
        weights,
        level: m.get("level").and_then(|v| v.parse().ok()),
        seed: m.get("seed").and_then(|v| v.parse().ok()),
    };
    Ok((design, sha))
}

pub fn cmd_design(cfg: &PipelineConfig, layout: &Layout, kinds: &[DesignKind]) -> Result<()> {
    for &kind in kinds {
        let design = build_design(cfg, kind)?;
        write_design(layout, cfg, &design)?;
        log::info!("{} design: {} points", kind.as_str(), design.len());
    }
    Ok(())
}

// -------------------------------------------------------------- ensemble

pub fn write_ensemble(layout: &Layout, cfg: &PipelineConfig, kind: DesignKind, design_sha: &str, ens: &EnsembleMatrix) -> Result<()> {
    let dir = layout.ensemble_dir(kind);
    let runs = dir.join("runs");
    if runs.exists() {
        fs::remove_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    }
    ensure_dir(&runs)?;
    let mut status = Table::new(["row", "status", "message"]);
    for (row, real) in ens.realizations.iter().enumerate() {
        match real {
            Ok(recs) => {
                let mut t = Table::new(std::iter::once("time_s".to_string()).chain(ens.gauge_ids.iter().cloned()));
                for (k, &time) in ens.times.iter().enumerate() {
                    let mut r = vec![time];
                    r.extend(recs.iter().map(|rec| rec.eta[k]));
                    t.push_f64(&r);
                }
                t.write(&runs.join(format!("run_{row:05}.csv")))?;
                status.push(vec![row.to_string(), "ok".into(), String::new()]);
            }
            Err(msg) => status.push(vec![row.to_string(), "failed".into(), msg.clone()]),
        }
    }
    status.write(&dir.join("status.csv"))?;
    let mut m = base_manifest(cfg, "ensemble");
    m.set("kind", kind.as_str())
        .set("design_sha256", design_sha)
        .set("realizations", ens.len())
        .set("failures", ens.failures())
        .set("gauges", ens.gauge_ids.join(" "))
        .set("output_times", ens.times.len())
        .set("output_dt_s", fmt_f64(cfg.model.output_dt_s))
        .set("status_sha256", sha256_file(&dir.join("status.csv"))?);
    m.write(&dir.join("manifest.txt"))
}

pub fn read_ensemble(layout: &Layout, kind: DesignKind) -> Result<(EnsembleMatrix, Manifest)> {
    let dir = layout.ensemble_dir(kind);
    let mpath = dir.join("manifest.txt");
    require_stage(&mpath, &format!("ensemble --kind {}", kind.as_str()))?;
    let m = Manifest::read(&mpath)?;
    let gauge_ids: Vec<String> = m.require("gauges", &mpath)?.split(' ').map(String::from).collect();
    let status_path = dir.join("status.csv");
    let status = Table::read(&status_path)?;
    let mut times: Vec<f64> = Vec::new();
    let mut realizations: Vec<Realization> = Vec::with_capacity(status.rows.len());
    for (i, row) in status.rows.iter().enumerate() {
        if row[0] != i.to_string() {
            return Err(Error::parse(&status_path, format!("row {i} is out of order")));
        }
        if row[1] != "ok" {
            realizations.push(Err(row[2].clone()));
            continue;
        }
        let path = dir.join("runs").join(format!("run_{i:05}.csv"));
        let t = Table::read(&path)?;
        if t.header.len() != gauge_ids.len() + 1 || t.header[1..] != gauge_ids[..] {
            return Err(Error::Misaligned(format!("{}: gauge columns differ from the manifest", path.display())));
        }
        let cols: Vec<usize> = (0..t.header.len()).collect();
        let data = t.numeric(&cols, &path)?;
        let ts: Vec<f64> = data.iter().map(|r| r[0]).collect();
        if times.is_empty() {
            times = ts.clone();
        } else if ts != times {
            return Err(Error::Misaligned(format!("{}: output times differ from run 0", path.display())));
        }
        let recs = gauge_ids
            .iter()
            .enumerate()
            .map(|(g, id)| GaugeRecord::new(id.clone(), ts.clone(), data.iter().map(|r| r[g + 1]).collect()))
            .collect::<Result<Vec<_>>>()?;
        realizations.push(Ok(recs));
    }
    Ok((EnsembleMatrix { gauge_ids, times, realizations }, m))
}

pub fn cmd_ensemble(cfg: &PipelineConfig, layout: &Layout, kind: DesignKind) -> Result<EnsembleMatrix> {
    let (design, sha) = read_design(layout, kind)?;
    if design.dim != cfg.dim() {
        return Err(Error::Config(format!("design has {} dimensions but the model has {} subfaults", design.dim, cfg.dim())));
    }
    let ens = run_ensemble(&design, &cfg.model, &cfg.bounds, resolved_workers(cfg))?;
    write_ensemble(layout, cfg, kind, &sha, &ens)?;
    if !ens.is_complete() {
        log::warn!("{} of {} realizations failed", ens.failures(), ens.len());
    }
    Ok(ens)
}

/// Ensemble plus its design, after checking that the ensemble was produced
/// from the design file and model configuration now on disk.
pub fn checked_ensemble(cfg: &PipelineConfig, layout: &Layout, kind: DesignKind) -> Result<(DesignMatrix, EnsembleMatrix, Manifest)> {
    let (design, sha) = read_design(layout, kind)?;
    let (ens, m) = read_ensemble(layout, kind)?;
    let mpath = layout.ensemble_dir(kind).join("manifest.txt");
    if m.require("design_sha256", &mpath)? != sha {
        return Err(Error::Integrity(format!(
            "{} ensemble was run on a different design than {}; rerun the ensemble stage",
            kind.as_str(),
            layout.design_csv(kind).display()
        )));
    }
    if m.require("model_hash", &mpath)? != model_hash(cfg) {
        return Err(Error::Integrity(format!(
            "{} ensemble was run with a different model configuration; rerun the ensemble stage",
            kind.as_str()
        )));
    }
    if ens.len() != design.len() {
        return Err(Error::Integrity(format!("{} realizations for {} design points", ens.len(), design.len())));
    }
    Ok((design, ens, m))
}

// ------------------------------------------------------------- expansion

pub fn write_expansion(dir: &Path, cfg: &PipelineConfig, method: FitMethod, exp: &PcExpansion, upstream: &Manifest) -> Result<()> {
    ensure_dir(dir)?;
    let basis = exp.basis();
    let mut idx = Table::new(std::iter::once("term".to_string()).chain((1..=basis.dim()).map(|i| format!("n{i}"))));
    for (k, mi) in basis.indices().iter().enumerate() {
        idx.push(std::iter::once(k.to_string()).chain(mi.degrees().iter().map(|d| d.to_string())).collect());
    }
    idx.write(&dir.join("indices.csv"))?;
    let mut out = Table::new(["column", "gauge", "step", "time_s"]);
    for (j, l) in exp.labels().iter().enumerate() {
        out.push(vec![j.to_string(), l.gauge.clone(), l.step.to_string(), fmt_f64(l.time_s)]);
    }
    out.write(&dir.join("outputs.csv"))?;
    let c = exp.coefficients();
    let mut coef = Table::new(std::iter::once("term".to_string()).chain((0..c.ncols()).map(|j| format!("c{j}"))));
    for k in 0..c.nrows() {
        coef.push(std::iter::once(k.to_string()).chain(c.row(k).iter().map(|v| fmt_f64(*v))).collect());
    }
    coef.write(&dir.join("coefficients.csv"))?;
    let mut m = base_manifest(cfg, "fit");
    m.set("method", method_name(method))
        .set("dim", basis.dim())
        .set("order", basis.order())
        .set("terms", basis.len())
        .set("outputs", exp.n_outputs())
        .set("output_dt_s", fmt_f64(cfg.model.output_dt_s))
        .set("ensemble_config_hash", upstream.get("config_hash").unwrap_or(""))
        .set("ensemble_design_sha256", upstream.get("design_sha256").unwrap_or(""))
        .set("coefficients_sha256", sha256_file(&dir.join("coefficients.csv"))?);
    m.write(&dir.join("manifest.txt"))
}

pub fn read_expansion(dir: &Path) -> Result<(PcExpansion, Manifest)> {
    let mpath = dir.join("manifest.txt");
    require_stage(&mpath, "fit")?;
    let m = Manifest::read(&mpath)?;
    let dim: usize = m.require_parsed("dim", &mpath)?;
    let order: usize = m.require_parsed("order", &mpath)?;
    let cpath = dir.join("coefficients.csv");
    if m.require("coefficients_sha256", &mpath)? != sha256_file(&cpath)? {
        return Err(Error::Integrity(format!("{} does not match its manifest", cpath.display())));
    }
    let ipath = dir.join("indices.csv");
    let it = Table::read(&ipath)?;
    let cols: Vec<usize> = (1..=dim).collect();
    let indices = it
        .numeric(&cols, &ipath)?
        .into_iter()
        .map(|r| MultiIndex::new(r.into_iter().map(|v| v as u32).collect()))
        .collect();
    let basis = PcBasis::from_indices(dim, order, indices)?;
    let opath = dir.join("outputs.csv");
    let ot = Table::read(&opath)?;
    let labels = ot
        .rows
        .iter()
        .map(|r| {
            Ok(OutputLabel {
                gauge: r[1].clone(),
                step: r[2].parse().map_err(|_| Error::parse(&opath, "bad step"))?,
                time_s: r[3].parse().map_err(|_| Error::parse(&opath, "bad time"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ct = Table::read(&cpath)?;
    let ccols: Vec<usize> = (1..ct.header.len()).collect();
    let rows = ct.numeric(&ccols, &cpath)?;
    if rows.len() != basis.len() {
        return Err(Error::Integrity(format!("{} coefficient rows for {} basis terms", rows.len(), basis.len())));
    }
    let coefficients = DMatrix::from_fn(rows.len(), ccols.len(), |k, j| rows[k][j]);
    Ok((PcExpansion::new(basis, coefficients, labels)?, m))
}

/// Training set of each method: NISP projects the Smolyak ensemble, BPDN
/// regresses on the LHS ensemble.
pub fn training_kind(method: FitMethod) -> DesignKind {
    match method {
        FitMethod::Nisp => DesignKind::Smolyak,
        FitMethod::Bpdn => DesignKind::Lhs,
    }
}

pub fn holdout_kind(method: FitMethod) -> DesignKind {
    match method {
        FitMethod::Nisp => DesignKind::Lhs,
        FitMethod::Bpdn => DesignKind::Smolyak,
    }
}

/// Fits the surrogate and writes it; returns the expansion directory.
pub fn cmd_fit(cfg: &PipelineConfig, layout: &Layout, method: FitMethod, order: usize) -> Result<PathBuf> {
    let kind = training_kind(method);
    let (design, ens, upstream) = checked_ensemble(cfg, layout, kind)?;
    let values = ens.output_matrix()?;
    let basis = PcBasis::total_order(design.dim, order)?;
    let dir = layout.expansion_dir(method, order);
    let exp = match method {
        FitMethod::Nisp => nisp_project_values(&values, &design.to_quadrature()?, &basis, ens.labels())?,
        FitMethod::Bpdn => {
            let (exp, reports) =
                pool(cfg.workers)?.install(|| fit_bpdn(&design.points, &values, &basis, ens.labels(), &cfg.fit.bpdn))?;
            ensure_dir(&dir)?;
            let mut t = Table::new(["gauge", "step", "time_s", "delta", "residual", "iterations", "nonzeros", "converged"]);
            for r in &reports {
                t.push(vec![
                    r.label.gauge.clone(),
                    r.label.step.to_string(),
                    fmt_f64(r.label.time_s),
                    fmt_f64(r.delta),
                    fmt_f64(r.residual),
                    r.iterations.to_string(),
                    r.nonzeros.to_string(),
                    r.converged.to_string(),
                ]);
            }
            t.write(&dir.join("fit_report.csv"))?;
            exp
        }
    };
    write_expansion(&dir, cfg, method, &exp, &upstream)?;
    Ok(dir)
}

// ------------------------------------------------------------ validation

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub nre: Vec<Option<f64>>,
    pub summaries: Vec<NreSummary>,
    pub ks: Vec<(String, f64)>,
}

impl ValidationReport {
    pub fn mean_nre(&self) -> f64 {
        let n: usize = self.summaries.iter().map(|s| s.active_steps).sum();
        self.summaries.iter().map(|s| s.mean * s.active_steps as f64).sum::<f64>() / n.max(1) as f64
    }

    pub fn peak_nre(&self) -> f64 {
        self.summaries.iter().map(|s| s.peak).fold(0.0, f64::max)
    }
}

fn holdout_rows(total: usize, size: Option<usize>, seed: u64) -> Vec<usize> {
    match size {
        Some(k) if k < total => {
            let mut rows = sample(&mut ChaCha8Rng::seed_from_u64(seed), total, k).into_vec();
            rows.sort_unstable();
            rows
        }
        _ => (0..total).collect(),
    }
}

pub fn cmd_validate(cfg: &PipelineConfig, layout: &Layout, expansion: &Path) -> Result<ValidationReport> {
    let (exp, em) = read_expansion(expansion)?;
    let emp = expansion.join("manifest.txt");
    let method = match em.require("method", &emp)? {
        "nisp" => FitMethod::Nisp,
        "bpdn" => FitMethod::Bpdn,
        other => return Err(Error::parse(&emp, format!("unknown method '{other}'"))),
    };
    let (design, ens, _) = checked_ensemble(cfg, layout, holdout_kind(method))?;
    let rows = holdout_rows(design.len(), cfg.validate.holdout_size, cfg.validate.holdout_seed);
    let hold_design = design.subset(&rows);
    let hold_values = ens.subset(&rows).output_matrix()?;
    if ens.labels() != exp.labels() {
        return Err(Error::Misaligned("holdout ensemble outputs differ from the surrogate outputs".into()));
    }
    let nre = nre_values(&exp, &hold_design.points, &hold_values)?;
    let summaries = summarize_nre(&nre, exp.labels(), &hold_values)?;

    let dir = layout.stage_dir("validate", expansion);
    ensure_dir(&dir)?;
    let mut t = Table::new(["gauge", "step", "time_s", "nre"]);
    for (l, v) in exp.labels().iter().zip(&nre) {
        t.push(vec![l.gauge.clone(), l.step.to_string(), fmt_f64(l.time_s), v.map(fmt_f64).unwrap_or_default()]);
    }
    t.write(&dir.join("nre.csv"))?;

    // CDF at each gauge's peak-variance time: LHS model runs (a uniform
    // sample) against surrogate draws at uniform random points.
    let (lhs_design, lhs_ens, _) = checked_ensemble(cfg, layout, DesignKind::Lhs)?;
    let lhs_values = lhs_ens.output_matrix()?;
    let _ = lhs_design;
    let variance = exp.variance();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.validate.cdf_seed);
    let draws: Vec<Vec<f64>> = (0..cfg.validate.cdf_samples)
        .map(|_| (0..exp.basis().dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let psi = exp.basis().design_matrix(&draws)?;
    let mut ks = Vec::new();
    let mut ks_table = Table::new(["gauge", "step", "time_s", "ks_distance"]);
    for s in &summaries {
        let cols: Vec<usize> = (0..exp.n_outputs()).filter(|&j| exp.labels()[j].gauge == s.gauge).collect();
        let j = *cols.iter().max_by(|&&a, &&b| variance[a].total_cmp(&variance[b])).expect("gauge has outputs");
        let model: Vec<f64> = lhs_values.column(j).iter().copied().collect();
        let pc: Vec<f64> = (&psi * exp.coefficients().column(j)).iter().copied().collect();
        let (fm, fp) = (empirical_cdf(&model)?, empirical_cdf(&pc)?);
        let d = ks_distance(&fm, &fp);
        let mut c = Table::new(["source", "value", "cdf"]);
        for (name, f) in [("model", &fm), ("surrogate", &fp)] {
            for (x, v) in f.steps() {
                c.push(vec![name.into(), fmt_f64(x), fmt_f64(v)]);
            }
        }
        c.write(&dir.join(format!("cdf_{}.csv", s.gauge)))?;
        let l = &exp.labels()[j];
        ks_table.push(vec![s.gauge.clone(), l.step.to_string(), fmt_f64(l.time_s), fmt_f64(d)]);
        ks.push((s.gauge.clone(), d));
    }
    ks_table.write(&dir.join("ks.csv"))?;

    let report = ValidationReport { nre, summaries, ks };
    let mut m = base_manifest(cfg, "validate");
    m.set("expansion", layout.relative(expansion))
        .set("holdout_kind", holdout_kind(method).as_str())
        .set("holdout_rows", rows.len())
        .set("holdout_seed", cfg.validate.holdout_seed)
        .set("cdf_seed", cfg.validate.cdf_seed)
        .set("mean_nre", fmt_f64(report.mean_nre()))
        .set("peak_nre", fmt_f64(report.peak_nre()));
    for s in &report.summaries {
        m.set(&format!("mean_nre_{}", s.gauge), fmt_f64(s.mean))
            .set(&format!("peak_nre_{}", s.gauge), fmt_f64(s.peak))
            .set(&format!("peak_time_s_{}", s.gauge), fmt_f64(s.peak_time_s));
    }
    m.write(&dir.join("summary.txt"))?;
    Ok(report)
}

// --------------------------------------------------------------- moments

pub fn cmd_moments(cfg: &PipelineConfig, layout: &Layout, expansion: &Path) -> Result<PathBuf> {
    let (exp, _) = read_expansion(expansion)?;
    let dir = layout.stage_dir("moments", expansion);
    ensure_dir(&dir)?;
    let mut t = Table::new(["gauge", "time_s", "mean", "lower", "upper"]);
    for b in moment_bands(&exp) {
        for k in 0..b.times.len() {
            t.push(
                std::iter::once(b.gauge.clone())
                    .chain([b.times[k], b.mean[k], b.lower[k], b.upper[k]].map(fmt_f64))
                    .collect(),
            );
        }
    }
    t.write(&dir.join("bands.csv"))?;
    let dim = exp.basis().dim();
    let sobol = (0..dim).map(|i| exp.sobol_indices(i)).collect::<Result<Vec<_>>>()?;
    let quiet = sobol[0].iter().filter(|s| s.degenerate).count();
    if quiet > 0 {
        log::warn!("{quiet} outputs have zero variance; their Sobol indices are reported as 0");
    }
    let header = ["gauge".to_string(), "time_s".to_string()]
        .into_iter()
        .chain((1..=dim).map(|i| format!("main_s{i}")))
        .chain((1..=dim).map(|i| format!("total_s{i}")));
    let mut st = Table::new(header);
    for (j, l) in exp.labels().iter().enumerate() {
        let mut row = vec![l.gauge.clone(), fmt_f64(l.time_s)];
        row.extend((0..dim).map(|i| fmt_f64(sobol[i][j].main)));
        row.extend((0..dim).map(|i| fmt_f64(sobol[i][j].total)));
        st.push(row);
    }
    st.write(&dir.join("sobol.csv"))?;
    let mut m = base_manifest(cfg, "moments");
    m.set("expansion", layout.relative(expansion));
    m.write(&dir.join("manifest.txt"))?;
    Ok(dir)
}

// ------------------------------------------------------------- inference

/// Observations in long format: `gauge,time_s,eta_m`.
pub fn read_observations(path: &Path) -> Result<Vec<GaugeRecord>> {
    let t = Table::read(path)?;
    let (g, tc, e) = (t.column_index("gauge", path)?, t.column_index("time_s", path)?, t.column_index("eta_m", path)?);
    let mut order: Vec<String> = Vec::new();
    let mut series: std::collections::HashMap<String, Vec<(f64, f64)>> = Default::default();
    for (i, r) in t.rows.iter().enumerate() {
        let parse = |c: usize| r[c].parse::<f64>().map_err(|_| Error::parse(path, format!("row {}: bad number", i + 1)));
        let (time, eta) = (parse(tc)?, parse(e)?);
        if !order.contains(&r[g]) {
            order.push(r[g].clone());
        }
        series.entry(r[g].clone()).or_default().push((time, eta));
    }
    order
        .into_iter()
        .map(|id| {
            let mut pts = series.remove(&id).unwrap_or_default();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            GaugeRecord::new(id, pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())
        })
        .collect()
}

pub fn write_observations(path: &Path, records: &[GaugeRecord]) -> Result<()> {
    let mut t = Table::new(["gauge", "time_s", "eta_m"]);
    for r in records {
        for (time, eta) in r.times.iter().zip(&r.eta) {
            t.push(vec![r.id.clone(), fmt_f64(*time), fmt_f64(*eta)]);
        }
    }
    t.write(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub map: f64,
    pub mean: f64,
    pub hpd: (f64, f64),
    pub map_tied: bool,
}

#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub parameters: Vec<ParameterSummary>,
    pub acceptance_rate: f64,
    pub initial_state: PosteriorState,
    /// `(M0, Mw)` at the MAP and at the posterior-mean slips.
    pub moment_map: (f64, f64),
    pub moment_mean: (f64, f64),
    pub chain: PosteriorChain,
}

/// Best of the midpoint and `candidates` LHS points under the posterior, with
/// each variance set to its gauge's mean squared residual.
pub fn initial_state(post: &Posterior<'_>, candidates: usize, seed: u64) -> Result<PosteriorState> {
    let m = post.n_slips();
    let bounds = post.bounds();
    let lhs = lhs_sample(m, candidates, seed)?;
    let counts: Vec<f64> = post.observation_counts().iter().map(|&n| n as f64).collect();
    let mut best: Option<(f64, PosteriorState)> = None;
    let midpoint = CanonicalPoint::origin(m);
    for xi in std::iter::once(midpoint.coords().to_vec()).chain(lhs.points) {
        let slips = crate::design::canonical_to_slip(&CanonicalPoint::new(xi)?, &bounds)?.0;
        let ss = post.squared_residuals(&slips)?;
        let variances = ss.iter().zip(&counts).map(|(s, n)| (s / n).max(1e-12)).collect();
        let state = PosteriorState { slips, variances };
        let lp = post.log_posterior(&state)?;
        if best.as_ref().is_none_or(|(b, _)| lp > *b) {
            best = Some((lp, state));
        }
    }
    Ok(best.expect("at least the midpoint").1)
}

pub fn run_inference(cfg: &PipelineConfig, exp: &PcExpansion, observations: &[GaugeRecord], n_iter: usize) -> Result<InferenceReport> {
    let obs = align_observations(observations, exp.labels(), cfg.model.output_dt_s)?;
    let post = Posterior::new(exp, &obs, cfg.bounds)?;
    let init = initial_state(&post, cfg.mcmc.init_candidates, cfg.mcmc.seed)?;
    let opts = AmOptions {
        n_iter,
        seed: cfg.mcmc.seed,
        adapt_start: cfg.mcmc.adapt_start,
        checkpoint_every: cfg.mcmc.checkpoint_every,
        ..AmOptions::default()
    };
    let chain = sample_posterior(&post, &init, &opts)?;
    let from = chain.burn_in_index(cfg.mcmc.burn_in);
    let ids: Vec<String> = obs.gauges.iter().map(|g| g.id.clone()).collect();
    let names = chain.parameter_names(&ids);
    let mut parameters = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let x = chain.param(k, from);
        let density = kde(&x, Bandwidth::Silverman, cfg.mcmc.kde_points)?;
        let map = map_estimate(&density)?;
        parameters.push(ParameterSummary {
            name: name.clone(),
            map: map.value,
            mean: x.iter().sum::<f64>() / x.len() as f64,
            hpd: hpd_interval(&x, cfg.mcmc.hpd_mass)?,
            map_tied: map.tied,
        });
    }
    let m = post.n_slips();
    let areas = cfg.subfault_areas();
    let moment = |slips: Vec<f64>| seismic_moment(&SlipVector(slips), cfg.moment.rigidity_pa, &areas);
    let moment_map = moment(parameters[..m].iter().map(|p| p.map.max(cfg.bounds.min)).collect())?;
    let moment_mean = moment(parameters[..m].iter().map(|p| p.mean).collect())?;
    Ok(InferenceReport {
        parameters,
        acceptance_rate: chain.acceptance_rate(),
        initial_state: init,
        moment_map,
        moment_mean,
        chain,
    })
}

pub fn write_inference(layout: &Layout, dir: &Path, cfg: &PipelineConfig, expansion: &Path, report: &InferenceReport) -> Result<()> {
    ensure_dir(dir)?;
    let names: Vec<&str> = report.parameters.iter().map(|p| p.name.as_str()).collect();
    let chain = &report.chain;
    let header = std::iter::once("iteration")
        .chain(names.iter().copied())
        .chain(["log_posterior", "accepted"])
        .map(String::from);
    let mut t = Table::new(header);
    for i in (0..chain.len()).step_by(cfg.mcmc.chain_thin) {
        let mut row = vec![(i + 1).to_string()];
        row.extend(chain.row(i).iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(chain.log_posterior[i]));
        row.push(u8::from(chain.accepted[i]).to_string());
        t.push(row);
    }
    t.write(&dir.join("chain.csv"))?;

    let mut s = Table::new(["parameter", "map", "mean", "hpd_lo", "hpd_hi", "map_tied"]);
    for p in &report.parameters {
        s.push(vec![
            p.name.clone(),
            fmt_f64(p.map),
            fmt_f64(p.mean),
            fmt_f64(p.hpd.0),
            fmt_f64(p.hpd.1),
            p.map_tied.to_string(),
        ]);
    }
    s.write(&dir.join("summary.csv"))?;

    let from = chain.burn_in_index(cfg.mcmc.burn_in);
    for (k, name) in names.iter().enumerate() {
        let d = kde(&chain.param(k, from), Bandwidth::Silverman, cfg.mcmc.kde_points)?;
        let mut kt = Table::new(["x", "density"]);
        for (x, v) in d.grid.iter().zip(&d.values) {
            kt.push_f64(&[*x, *v]);
        }
        kt.write(&dir.join(format!("kde_{name}.csv")))?;
    }

    let mut mm = base_manifest(cfg, "moment");
    mm.set("rigidity_pa", fmt_f64(cfg.moment.rigidity_pa))
        .set("m0_map_nm", fmt_f64(report.moment_map.0))
        .set("mw_map", fmt_f64(report.moment_map.1))
        .set("m0_mean_nm", fmt_f64(report.moment_mean.0))
        .set("mw_mean", fmt_f64(report.moment_mean.1));
    mm.write(&dir.join("moment.txt"))?;

    let mut m = base_manifest(cfg, "infer");
    m.set("expansion", layout.relative(expansion))
        .set("iterations", chain.len())
        .set("burn_in_fraction", cfg.mcmc.burn_in)
        .set("seed", chain.seed)
        .set("acceptance_rate", fmt_f64(report.acceptance_rate))
        .set("chain_thin", cfg.mcmc.chain_thin)
        .set("initial_slips", report.initial_state.slips.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    for cp in &chain.checkpoints {
        m.set(&format!("proposal_trace_{:08}", cp.iteration), fmt_f64(cp.covariance.trace()));
    }
    m.write(&dir.join("manifest.txt"))
}

pub fn cmd_infer(cfg: &PipelineConfig, layout: &Layout, expansion: &Path, observations: &Path) -> Result<InferenceReport> {
    let (exp, _) = read_expansion(expansion)?;
    let obs = read_observations(observations)?;
    let report = run_inference(cfg, &exp, &obs, cfg.mcmc.iterations)?;
    write_inference(layout, &layout.root.join("infer"), cfg, expansion, &report)?;
    Ok(report)
}

// ------------------------------------------------------------------ twin

#[derive(Debug, Clone)]
pub struct TwinReport {
    pub planted: Vec<f64>,
    pub inference: InferenceReport,
    /// Planted slip inside its HPD interval, per subfault.
    pub contained: Vec<bool>,
    /// Posterior-mean noise standard deviation per gauge.
    pub sigma_hat: Vec<f64>,
    pub noise_sigma: f64,
}

impl TwinReport {
    pub fn slips_recovered(&self) -> usize {
        self.contained.iter().filter(|c| **c).count()
    }

    pub fn sigma_within_factor(&self, factor: f64) -> bool {
        self.sigma_hat.iter().all(|s| *s >= self.noise_sigma / factor && *s <= self.noise_sigma * factor)
    }

    pub fn passed(&self) -> bool {
        self.slips_recovered() + 1 >= self.planted.len() && self.sigma_within_factor(2.0)
    }
}

/// Forward-model records for the planted slips plus seeded Gaussian noise.
pub fn synthetic_observations(cfg: &PipelineConfig) -> Result<Vec<GaugeRecord>> {
    let planted = SlipVector::new(cfg.twin.slips.clone(), &cfg.bounds)?;
    let mut records = simulate(&cfg.model, &planted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.twin.noise_seed);
    if cfg.twin.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.twin.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        for r in &mut records {
            r.eta.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
    }
    Ok(records)
}

pub fn twin_experiment(cfg: &PipelineConfig, exp: &PcExpansion, n_iter: usize) -> Result<TwinReport> {
    let obs = synthetic_observations(cfg)?;
    let inference = run_inference(cfg, exp, &obs, n_iter)?;
    let m = cfg.dim();
    let contained = (0..m)
        .map(|i| {
            let (lo, hi) = inference.parameters[i].hpd;
            lo <= cfg.twin.slips[i] && cfg.twin.slips[i] <= hi
        })
        .collect();
    let sigma_hat = inference.parameters[m..].iter().map(|p| p.mean.sqrt()).collect();
    Ok(TwinReport { planted: cfg.twin.slips.clone(), inference, contained, sigma_hat, noise_sigma: cfg.twin.noise_sigma })
}

/// Runs any missing upstream stage, then the twin experiment.
pub fn cmd_twin(cfg: &PipelineConfig, layout: &Layout) -> Result<TwinReport> {
    let method = cfg.fit.method;
    let order = cfg.basis.order;
    let dir = layout.expansion_dir(method, order);
    if !dir.join("manifest.txt").exists() {
        let kind = training_kind(method);
        if !layout.design_manifest(kind).exists() {
            cmd_design(cfg, layout, &[kind])?;
        }
        if !layout.ensemble_dir(kind).join("manifest.txt").exists() {
            cmd_ensemble(cfg, layout, kind)?;
        }
        cmd_fit(cfg, layout, method, order)?;
    }
    let (exp, _) = read_expansion(&dir)?;
    let report = twin_experiment(cfg, &exp, cfg.mcmc.iterations)?;
    let out = layout.root.join("twin");
    ensure_dir(&out)?;
    write_observations(&out.join("observations.csv"), &synthetic_observations(cfg)?)?;
    write_inference(layout, &out, cfg, &dir, &report.inference)?;

    let mut t = Table::new(["parameter", "planted", "map", "mean", "hpd_lo", "hpd_hi", "recovered"]);
    for (i, p) in report.inference.parameters.iter().enumerate() {
        let (planted, ok) = if i < report.planted.len() {
            (report.planted[i], report.contained[i])
        } else {
            let s = report.sigma_hat[i - report.planted.len()];
            let truth = report.noise_sigma;
            (truth * truth, s >= truth / 2.0 && s <= truth * 2.0)
        };
        t.push(vec![
            p.name.clone(),
            fmt_f64(planted),
            fmt_f64(p.map),
            fmt_f64(p.mean),
            fmt_f64(p.hpd.0),
            fmt_f64(p.hpd.1),
            ok.to_string(),
        ]);
    }
    t.write(&out.join("twin_report.csv"))?;
    let mut m = base_manifest(cfg, "twin");
    m.set("noise_sigma", fmt_f64(cfg.twin.noise_sigma))
        .set("noise_seed", cfg.twin.noise_seed)
        .set("slips_recovered", format!("{}/{}", report.slips_recovered(), report.planted.len()))
        .set("sigma_hat", report.sigma_hat.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "))
        .set("verdict", if report.passed() { "recovered" } else { "not recovered" });
    m.write(&out.join("twin.txt"))?;
    Ok(report)
}

// ----------------------------------------------------------------- sweep

pub fn cmd_sweep(cfg: &PipelineConfig, layout: &Layout) -> Result<PathBuf> {
    let (design, ens, _) = checked_ensemble(cfg, layout, DesignKind::Smolyak)?;
    let sweep = ensemble_sweep(&ens, &design, &cfg.bounds, cfg.sweep.arrival_threshold_m)?;
    let dir = layout.root.join("sweep");
    ensure_dir(&dir)?;
    let mut t = Table::new(["gauge", "axis", "slip", "arrival_s", "max_amplitude_m"]);
    for table in &sweep.tables {
        for r in &table.rows {
            t.push(vec![
                table.gauge.clone(),
                format!("s{}", table.axis + 1),
                fmt_f64(r.slip),
                r.arrival_s.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.max_amplitude),
            ]);
        }
    }
    let path = dir.join("sweep.csv");
    t.write(&path)?;
    let mut m = base_manifest(cfg, "sweep");
    m.set("arrival_threshold_m", fmt_f64(cfg.sweep.arrival_threshold_m))
        .set("note", sweep.note.unwrap_or_default());
    m.write(&dir.join("manifest.txt"))?;
    Ok(path)
}

/// Canonical coordinates of a slip vector under the configured bounds.
pub fn to_canonical(cfg: &PipelineConfig, slips: &[f64]) -> Result<Vec<f64>> {
    Ok(slip_to_canonical(&SlipVector(slips.to_vec()), &cfg.bounds)?.into_inner())
}
