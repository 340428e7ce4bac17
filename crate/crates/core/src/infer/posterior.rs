use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::basis::{OutputLabel, PcExpansion};
use crate::design::{slip_to_canonical, SlipBounds, SlipVector};
use crate::error::{Error, Result};
use crate::swe::GaugeRecord;

/// Observed surface elevations at one gauge, matched to surrogate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeObservations {
    pub id: String,
    pub columns: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub gauges: Vec<GaugeObservations>,
}

impl ObservationSet {
    pub fn n_points(&self) -> usize {
        self.gauges.iter().map(|g| g.values.len()).sum()
    }
}

/// Matches every surrogate output time of a gauge to the nearest observation
/// within half the output cadence. Observations farther than that from any
/// surrogate time are dropped with a warning.
pub fn align_observations(records: &[GaugeRecord], labels: &[OutputLabel], cadence_s: f64) -> Result<ObservationSet> {
    if !(cadence_s > 0.0) {
        return Err(Error::InvalidInput("output cadence must be positive".into()));
    }
    let mut by_gauge: HashMap<&str, Vec<(usize, f64)>> = HashMap::new();
    for (col, l) in labels.iter().enumerate() {
        by_gauge.entry(l.gauge.as_str()).or_default().push((col, l.time_s));
    }
    let tol = 0.5 * cadence_s + 1e-9 * cadence_s;
    let mut gauges = Vec::with_capacity(records.len());
    for rec in records {
        let slots = by_gauge
            .get(rec.id.as_str())
            .ok_or_else(|| Error::Misaligned(format!("gauge {} has no surrogate outputs", rec.id)))?;
        let mut obs = GaugeObservations { id: rec.id.clone(), columns: vec![], times: vec![], values: vec![] };
        let mut used = vec![false; rec.len()];
        for &(col, t) in slots {
            let nearest = rec
                .times
                .iter()
                .enumerate()
                .map(|(k, &to)| (k, (to - t).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, dist)) = nearest {
                if dist <= tol {
                    used[k] = true;
                    obs.columns.push(col);
                    obs.times.push(t);
                    obs.values.push(rec.eta[k]);
                }
            }
        }
        let dropped = used.iter().filter(|u| !**u).count();
        if dropped > 0 {
            log::warn!("gauge {}: {dropped} observations outside the surrogate time window dropped", rec.id);
        }
        if obs.values.is_empty() {
            return Err(Error::Misaligned(format!("gauge {}: no observation within the surrogate window", rec.id)));
        }
        gauges.push(obs);
    }
    Ok(ObservationSet { gauges })
}

/// Slips (m) and per-gauge noise variances (m^2).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub slips: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Uniform slip prior on the bounds and Jeffreys `1 / sigma^2` per gauge.
pub fn log_prior(state: &PosteriorState, bounds: &SlipBounds) -> f64 {
    if state.slips.iter().any(|&s| !bounds.contains(s)) || state.variances.iter().any(|&v| !(v > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let slip_part = state.slips.len() as f64 * (1.0 / bounds.width()).ln();
    let var_part: f64 = state.variances.iter().map(|v| -v.ln()).sum();
    slip_part + var_part
}

/// Gaussian log-likelihood with per-gauge variances, surrogate predictions at
/// `xi(s)`.
pub fn log_likelihood(
    state: &PosteriorState,
    obs: &ObservationSet,
    surrogate: &PcExpansion,
    bounds: &SlipBounds,
) -> Result<f64> {
    Posterior::new(surrogate, obs, *bounds)?.log_likelihood(state)
}

pub fn log_posterior(
    state: &PosteriorState,
    obs: &ObservationSet,
    surrogate: &PcExpansion,
    bounds: &SlipBounds,
) -> Result<f64> {
    Posterior::new(surrogate, obs, *bounds)?.log_posterior(state)
}

/// Posterior with the surrogate restricted to the observed columns.
pub struct Posterior<'a> {
    surrogate: &'a PcExpansion,
    obs: &'a ObservationSet,
    bounds: SlipBounds,
    /// `(basis term) x (observed point)` coefficients, gauge by gauge.
    coeffs: DMatrix<f64>,
    observed: DVector<f64>,
    /// Start offset of each gauge in `observed`.
    offsets: Vec<usize>,
}

impl<'a> Posterior<'a> {
    pub fn new(surrogate: &'a PcExpansion, obs: &'a ObservationSet, bounds: SlipBounds) -> Result<Self> {
        let n = obs.n_points();
        let mut coeffs = DMatrix::zeros(surrogate.basis().len(), n);
        let mut observed = DVector::zeros(n);
        let mut offsets = Vec::with_capacity(obs.gauges.len() + 1);
        let mut pos = 0;
        for g in &obs.gauges {
            offsets.push(pos);
            if g.columns.len() != g.values.len() {
                return Err(Error::Misaligned(format!("gauge {}: column/value count differ", g.id)));
            }
            for (&col, &v) in g.columns.iter().zip(&g.values) {
                let label = surrogate
                    .labels()
                    .get(col)
                    .ok_or_else(|| Error::Misaligned(format!("gauge {}: surrogate has no column {col}", g.id)))?;
                if label.gauge != g.id {
                    return Err(Error::Misaligned(format!(
                        "column {col} belongs to gauge {}, not {}",
                        label.gauge, g.id
                    )));
                }
                coeffs.set_column(pos, &surrogate.coefficients().column(col));
                observed[pos] = v;
                pos += 1;
            }
        }
        offsets.push(pos);
        Ok(Posterior { surrogate, obs, bounds, coeffs, observed, offsets })
    }

    pub fn n_slips(&self) -> usize {
        self.surrogate.basis().dim()
    }

    pub fn n_gauges(&self) -> usize {
        self.obs.gauges.len()
    }

    pub fn bounds(&self) -> SlipBounds {
        self.bounds
    }

    /// Observed points per gauge.
    pub fn observation_counts(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Surrogate predictions at the observed points, concatenated by gauge.
    pub fn predict(&self, slips: &[f64]) -> Result<DVector<f64>> {
        let xi = slip_to_canonical(&SlipVector(slips.to_vec()), &self.bounds)?;
        let psi = DVector::from_vec(self.surrogate.basis().eval(xi.coords())?);
        Ok(self.coeffs.tr_mul(&psi))
    }

    /// Sum of squared residuals per gauge.
    pub fn squared_residuals(&self, slips: &[f64]) -> Result<Vec<f64>> {
        let pred = self.predict(slips)?;
        Ok(self
            .offsets
            .windows(2)
            .map(|w| (w[0]..w[1]).map(|k| (pred[k] - self.observed[k]).powi(2)).sum())
            .collect())
    }

    fn check_shape(&self, state: &PosteriorState) -> Result<()> {
        if state.slips.len() != self.n_slips() {
            return Err(Error::DimensionMismatch { expected: self.n_slips(), got: state.slips.len() });
        }
        if state.variances.len() != self.n_gauges() {
            return Err(Error::DimensionMismatch { expected: self.n_gauges(), got: state.variances.len() });
        }
        Ok(())
    }

    pub fn log_likelihood(&self, state: &PosteriorState) -> Result<f64> {
        self.check_shape(state)?;
        if state.slips.iter().any(|&s| !self.bounds.contains(s)) || state.variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("likelihood evaluated outside the prior support".into()));
        }
        let sq = self.squared_residuals(&state.slips)?;
        Ok(self
            .offsets
            .windows(2)
            .zip(sq.iter().zip(&state.variances))
            .map(|(w, (&ss, &var))| {
                let n = (w[1] - w[0]) as f64;
                -0.5 * n * (2.0 * PI * var).ln() - ss / (2.0 * var)
            })
            .sum())
    }

    pub fn log_prior(&self, state: &PosteriorState) -> f64 {
        log_prior(state, &self.bounds)
    }

    /// Unnormalized log posterior; `-inf` outside the prior support.
    pub fn log_posterior(&self, state: &PosteriorState) -> Result<f64> {
        self.check_shape(state)?;
        let lp = self.log_prior(state);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + self.log_likelihood(state)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::PcBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(gauges: &[&str], times: &[f64]) -> Vec<OutputLabel> {
        gauges
            .iter()
            .flat_map(|g| {
                times.iter().enumerate().map(move |(step, &t)| OutputLabel { gauge: g.to_string(), step, time_s: t })
            })
            .collect()
    }

    /// Surrogate with `G_col(xi) = c0 + c1 xi_1` and matching observations.
    fn setup(values: &[f64]) -> (PcExpansion, ObservationSet) {
        let basis = PcBasis::total_order(2, 1).unwrap();
        let mut c = DMatrix::zeros(3, values.len());
        for j in 0..values.len() {
            c[(0, j)] = 0.1 * j as f64;
            c[(1, j)] = 0.5;
        }
        let times: Vec<f64> = (0..values.len()).map(|k| 60.0 * k as f64).collect();
        let exp = PcExpansion::new(basis, c, labels(&["a"], &times)).unwrap();
        let rec = GaugeRecord::new("a", times, values.to_vec()).unwrap();
        let obs = align_observations(&[rec], exp.labels(), 60.0).unwrap();
        (exp, obs)
    }

    #[test]
    fn prior_examples() {
        let b = SlipBounds::default();
        let s = PosteriorState { slips: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], variances: vec![1.0; 4] };
        assert!((log_prior(&s, &b) - 6.0 * (1.0f64 / 30.0).ln()).abs() < 1e-14);
        let mut out = s.clone();
        out.slips[0] = -0.1;
        assert_eq!(log_prior(&out, &b), f64::NEG_INFINITY);
        let mut zero = s;
        zero.variances[1] = 0.0;
        assert_eq!(log_prior(&zero, &b), f64::NEG_INFINITY);
    }

    #[test]
    fn likelihood_examples() {
        // slips at the midpoint give xi = 0, so predictions are the constants
        let (exp, obs) = setup(&[0.0]);
        let b = SlipBounds::default();
        let st = PosteriorState { slips: vec![15.0, 15.0], variances: vec![1.0] };
        let ll = log_likelihood(&st, &obs, &exp, &b).unwrap();
        assert!((ll + 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
        let doubled = PosteriorState { variances: vec![2.0], ..st };
        let ll2 = log_likelihood(&doubled, &obs, &exp, &b).unwrap();
        assert!((ll - ll2 - 0.5 * 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn likelihood_matches_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let values: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (exp, obs) = setup(&values);
        let b = SlipBounds::default();
        let st = PosteriorState { slips: vec![rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0)], variances: vec![0.37] };
        let xi0 = (2.0 * st.slips[0] - 30.0) / 30.0;
        let mut product = 1.0;
        for (j, v) in values.iter().enumerate() {
            let g = 0.1 * j as f64 + 0.5 * xi0;
            product *= (-(g - v).powi(2) / (2.0 * 0.37)).exp() / (2.0 * PI * 0.37).sqrt();
        }
        let ll = log_likelihood(&st, &obs, &exp, &b).unwrap();
        assert!((ll - product.ln()).abs() < 1e-12);
    }

    #[test]
    fn posterior_is_sum_and_monotone() {
        let (exp, obs) = setup(&[0.3, 0.1, 0.4]);
        let b = SlipBounds::default();
        let post = Posterior::new(&exp, &obs, b).unwrap();
        let st = PosteriorState { slips: vec![10.0, 20.0], variances: vec![0.2] };
        let lp = post.log_posterior(&st).unwrap();
        assert!((lp - post.log_prior(&st) - post.log_likelihood(&st).unwrap()).abs() < 1e-14);
        let out = PosteriorState { slips: vec![31.0, 20.0], ..st.clone() };
        assert_eq!(post.log_posterior(&out).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn variance_derivative_vanishes_at_mean_square_residual() {
        let (exp, obs) = setup(&[0.3, -0.1, 0.4, 0.25]);
        let post = Posterior::new(&exp, &obs, SlipBounds::default()).unwrap();
        let slips = vec![12.0, 3.0];
        let ss = post.squared_residuals(&slips).unwrap()[0];
        let n = 4.0;
        // d/dv [-n/2 ln v - ss/(2v) - ln v] = 0 at v = ss / (n + 2)
        let peak = ss / (n + 2.0);
        let f = |v: f64| post.log_posterior(&PosteriorState { slips: slips.clone(), variances: vec![v] }).unwrap();
        let h = 1e-6 * peak;
        assert!(f(peak - h) < f(peak) && f(peak + h) < f(peak));
        let mle = ss / n;
        let slope = (f(mle + h) - f(mle - h)) / (2.0 * h);
        assert!(slope < 0.0, "Jeffreys prior pulls the mode below the MLE");
    }

    #[test]
    fn alignment_snaps_and_drops() {
        let times = [0.0, 60.0, 120.0];
        let l = labels(&["a"], &times);
        let rec = GaugeRecord::new("a", vec![1.0, 62.0, 150.0, 400.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let obs = align_observations(&[rec], &l, 60.0).unwrap();
        assert_eq!(obs.gauges[0].columns, vec![0, 1, 2]);
        assert_eq!(obs.gauges[0].values, vec![0.1, 0.2, 0.3]);
        let stray = GaugeRecord::new("zz", vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(align_observations(&[stray], &l, 60.0), Err(Error::Misaligned(_))));
    }
}
