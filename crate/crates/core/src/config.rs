//! Pipeline configuration, read from a single TOML file. Every section and
//! key is optional; missing values take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Growth, SlipBounds};
use crate::error::{Error, Result};
use crate::fit::{BpdnFitOptions, FitMethod};
use crate::io::sha256_hex;
use crate::swe::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    /// Total PC order `p`.
    pub order: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { order: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub smolyak_level: usize,
    pub growth: Growth,
    pub lhs_samples: usize,
    pub lhs_seed: u64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { smolyak_level: 5, growth: Growth::Slow, lhs_samples: 729, lhs_seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// NISP projects the Smolyak ensemble; BPDN regresses on the LHS ensemble.
    pub method: FitMethod,
    pub bpdn: BpdnFitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { method: FitMethod::Bpdn, bpdn: BpdnFitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Rows drawn from the holdout ensemble; `None` keeps all of them.
    pub holdout_size: Option<usize>,
    pub holdout_seed: u64,
    /// Surrogate draws for the CDF comparison.
    pub cdf_samples: usize,
    pub cdf_seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { holdout_size: None, holdout_seed: 11, cdf_samples: 10_000, cdf_seed: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    /// Leading fraction of the chain discarded before summaries.
    pub burn_in: f64,
    pub seed: u64,
    pub adapt_start: usize,
    /// LHS candidates scored by the surrogate posterior to pick the start.
    pub init_candidates: usize,
    pub hpd_mass: f64,
    pub kde_points: usize,
    /// Every `chain_thin`-th state is written to the chain CSV.
    pub chain_thin: usize,
    pub checkpoint_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 1_000_000,
            burn_in: 0.2,
            seed: 17,
            adapt_start: 1000,
            init_candidates: 2000,
            hpd_mass: 0.95,
            kde_points: 512,
            chain_thin: 10,
            checkpoint_every: 100_000,
        }
    }
}

/// Inputs of the seismic-moment report. The defaults are schematic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub rigidity_pa: f64,
    /// Per-subfault areas; `None` uses the model footprints.
    pub subfault_areas_m2: Option<Vec<f64>>,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig { rigidity_pa: 3.0e10, subfault_areas_m2: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    pub slips: Vec<f64>,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig { slips: vec![2.7, 23.0, 0.3, 6.5, 21.5, 0.3], noise_sigma: 0.05, noise_seed: 23 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub arrival_threshold_m: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { arrival_threshold_m: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Worker threads for ensembles and fits; 0 uses every core.
    pub workers: usize,
    pub model: ModelConfig,
    pub bounds: SlipBounds,
    pub basis: BasisConfig,
    pub design: DesignConfig,
    pub fit: FitConfig,
    pub validate: ValidateConfig,
    pub mcmc: McmcConfig,
    pub moment: MomentConfig,
    pub twin: TwinConfig,
    pub sweep: SweepConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hash of the normalized configuration; comments, key order and the
    /// worker count do not affect it.
    pub fn hash(&self) -> String {
        let normalized = PipelineConfig { workers: 0, ..self.clone() };
        sha256_hex(normalized.to_toml().as_bytes())
    }

    /// Number of slip parameters `m`.
    pub fn dim(&self) -> usize {
        self.model.subfaults.len()
    }

    pub fn subfault_areas(&self) -> Vec<f64> {
        match &self.moment.subfault_areas_m2 {
            Some(a) => a.clone(),
            None => self
                .model
                .subfaults
                .iter()
                .map(|f| (f.x1_km - f.x0_km) * (f.y1_km - f.y0_km) * 1e6)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.model.validate()?;
        SlipBounds::new(self.bounds.min, self.bounds.max).map_err(|e| Error::Config(e.to_string()))?;
        let m = self.dim();
        if m == 0 {
            return bad("the model needs at least one subfault".into());
        }
        if self.basis.order == 0 {
            return bad("PC order must be at least 1".into());
        }
        if self.design.smolyak_level > self.design.growth.max_level() {
            return bad(format!(
                "Smolyak level {} exceeds the maximum {}",
                self.design.smolyak_level,
                self.design.growth.max_level()
            ));
        }
        if self.design.lhs_samples == 0 {
            return bad("LHS sample size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.mcmc.burn_in) {
            return bad(format!("burn-in fraction must lie in [0, 1), got {}", self.mcmc.burn_in));
        }
        if !(self.mcmc.hpd_mass > 0.0 && self.mcmc.hpd_mass <= 1.0) {
            return bad("HPD mass must lie in (0, 1]".into());
        }
        if self.mcmc.iterations <= self.mcmc.adapt_start || self.mcmc.chain_thin == 0 || self.mcmc.init_candidates == 0 {
            return bad("MCMC needs iterations > adapt_start, chain_thin >= 1 and init_candidates >= 1".into());
        }
        if !(self.moment.rigidity_pa > 0.0) {
            return bad("rigidity must be positive".into());
        }
        if self.subfault_areas().len() != m || self.subfault_areas().iter().any(|a| !(*a > 0.0)) {
            return bad(format!("need {m} positive subfault areas"));
        }
        if self.twin.slips.len() != m || self.twin.slips.iter().any(|s| !self.bounds.contains(*s)) {
            return bad(format!("twin slips must be {m} values within the bounds"));
        }
        if !(self.twin.noise_sigma >= 0.0) {
            return bad("twin noise sigma must be non-negative".into());
        }
        if !(self.sweep.arrival_threshold_m > 0.0) {
            return bad("arrival threshold must be positive".into());
        }
        let ids: std::collections::BTreeSet<&str> = self.model.gauges.iter().map(|g| g.id.as_str()).collect();
        if ids.len() != self.model.gauges.len() {
            return bad("gauge ids must be unique".into());
        }
        if self.model.gauges.iter().any(|g| g.id.is_empty() || !g.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
            return bad("gauge ids may only contain letters, digits, '_' and '-'".into());
        }
        Ok(())
    }
}
