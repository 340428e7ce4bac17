use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::posterior::{Posterior, PosteriorState};
use crate::error::{Error, Result};

/// Adaptive Metropolis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmOptions {
    pub n_iter: usize,
    pub seed: u64,
    /// Iterations with the fixed diagonal proposal before the covariance
    /// adaptation starts.
    pub adapt_start: usize,
    pub epsilon: f64,
    /// Proposal scaling `s_d`; `None` uses `2.4^2 / d`.
    pub scale: Option<f64>,
    /// Rescale the diagonal proposal in blocks during the initial phase so
    /// that the chain moves even when the initial steps are far too large.
    pub tune_initial: bool,
    pub tune_block: usize,
    /// Store the proposal covariance every this many iterations (0 = never).
    pub checkpoint_every: usize,
}

impl Default for AmOptions {
    fn default() -> Self {
        AmOptions {
            n_iter: 1_000_000,
            seed: 0,
            adapt_start: 1000,
            epsilon: 1e-10,
            scale: None,
            tune_initial: true,
            tune_block: 50,
            checkpoint_every: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheckpoint {
    pub iteration: usize,
    pub covariance: DMatrix<f64>,
}

/// Chain on an unconstrained parameter vector. Row `i` of `samples` is the
/// state after iteration `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmChain {
    pub dim: usize,
    pub samples: Vec<f64>,
    pub log_target: Vec<f64>,
    pub accepted: Vec<bool>,
    pub accepted_count: usize,
    pub checkpoints: Vec<CovarianceCheckpoint>,
    pub seed: u64,
    /// Multiplier applied to the initial diagonal steps when adaptation began.
    pub initial_step_factor: f64,
}

impl AmChain {
    pub fn len(&self) -> usize {
        self.log_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_target.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, k: usize, from: usize) -> Vec<f64> {
        (from..self.len()).map(|i| self.samples[i * self.dim + k]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted_count as f64 / self.len().max(1) as f64
    }
}

/// Running mean and scatter of the chain history.
struct History {
    n: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl History {
    fn new(x: &DVector<f64>) -> Self {
        let d = x.len();
        History { n: 1.0, mean: x.clone(), scatter: DMatrix::zeros(d, d) }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1.0;
        let delta = x - &self.mean;
        self.mean += &delta / self.n;
        let delta2 = x - &self.mean;
        self.scatter.ger(1.0, &delta, &delta2, 1.0);
    }

    fn covariance(&self) -> DMatrix<f64> {
        let c = &self.scatter / (self.n - 1.0).max(1.0);
        // symmetrize against rounding drift in the rank-one updates
        (&c + c.transpose()) * 0.5
    }
}

/// Haario-style adaptive random-walk Metropolis on `log_target`.
///
/// The first `adapt_start` iterations use independent Gaussian steps with
/// standard deviations `initial_steps`; afterwards the proposal covariance is
/// `s_d (Cov(x_0..x_{t-1}) + eps I)`. The target returns `-inf` outside its
/// support.
pub fn adaptive_metropolis<F>(log_target: F, init: &[f64], initial_steps: &[f64], opts: &AmOptions) -> Result<AmChain>
where
    F: Fn(&[f64]) -> f64,
{
    let d = init.len();
    if d == 0 || initial_steps.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: initial_steps.len() });
    }
    if initial_steps.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidInput("initial proposal steps must be positive".into()));
    }
    let mut x = DVector::from_column_slice(init);
    let mut lp = log_target(init);
    if !lp.is_finite() {
        return Err(Error::Domain("initial state outside the target support".into()));
    }
    let s_d = opts.scale.unwrap_or(2.4 * 2.4 / d as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut hist = History::new(&x);
    let mut factor = 1.0;
    let mut block_accepts = 0usize;
    let mut chol: Option<DMatrix<f64>> = None;

    let mut chain = AmChain {
        dim: d,
        samples: Vec::with_capacity(opts.n_iter * d),
        log_target: Vec::with_capacity(opts.n_iter),
        accepted: Vec::with_capacity(opts.n_iter),
        accepted_count: 0,
        checkpoints: Vec::new(),
        seed: opts.seed,
        initial_step_factor: 1.0,
    };
    let mut z = DVector::zeros(d);
    for t in 1..=opts.n_iter {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let adaptive = t > opts.adapt_start;
        let proposal = if adaptive {
            // C_t from the history x_0..x_{t-1}
            let mut c = hist.covariance();
            for i in 0..d {
                c[(i, i)] += opts.epsilon;
            }
            c *= s_d;
            let l = match c.clone().cholesky() {
                Some(ch) => ch.l(),
                None => chol.clone().ok_or_else(|| Error::Sampler("proposal covariance is not positive definite".into()))?,
            };
            let step = &l * &z;
            if opts.checkpoint_every > 0 && t % opts.checkpoint_every == 0 {
                chain.checkpoints.push(CovarianceCheckpoint { iteration: t, covariance: c });
            }
            chol = Some(l);
            &x + step
        } else {
            DVector::from_fn(d, |i, _| x[i] + factor * initial_steps[i] * z[i])
        };
        let lp_new = log_target(proposal.as_slice());
        let u: f64 = rng.gen();
        let accept = lp_new.is_finite() && u.ln() < lp_new - lp;
        if accept {
            x = proposal;
            lp = lp_new;
            chain.accepted_count += 1;
            block_accepts += 1;
        }
        chain.samples.extend_from_slice(x.as_slice());
        chain.log_target.push(lp);
        chain.accepted.push(accept);
        hist.push(&x);

        if !adaptive && opts.tune_initial && opts.tune_block > 0 && t % opts.tune_block == 0 {
            let rate = block_accepts as f64 / opts.tune_block as f64;
            factor *= (2.0 * (rate - 0.234)).exp();
            block_accepts = 0;
        }
        if t == opts.adapt_start {
            if chain.accepted_count == 0 {
                return Err(Error::Sampler(format!(
                    "no proposal accepted in the first {t} iterations (log target at start {lp:.6e}, step factor {factor:.3e})"
                )));
            }
            chain.initial_step_factor = factor;
        }
    }
    Ok(chain)
}

/// Samples of slips (m) and per-gauge noise variances (m^2), stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub n_slips: usize,
    pub n_gauges: usize,
    pub params: Vec<f64>,
    pub log_posterior: Vec<f64>,
    pub accepted: Vec<bool>,
    pub accepted_count: usize,
    pub checkpoints: Vec<CovarianceCheckpoint>,
    pub seed: u64,
}

impl PosteriorChain {
    pub fn n_params(&self) -> usize {
        self.n_slips + self.n_gauges
    }

    pub fn len(&self) -> usize {
        self.log_posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_posterior.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.params[i * p..(i + 1) * p]
    }

    pub fn state(&self, i: usize) -> PosteriorState {
        let r = self.row(i);
        PosteriorState { slips: r[..self.n_slips].to_vec(), variances: r[self.n_slips..].to_vec() }
    }

    /// Values of parameter `k` from iteration index `from` on.
    pub fn param(&self, k: usize, from: usize) -> Vec<f64> {
        let p = self.n_params();
        (from..self.len()).map(|i| self.params[i * p + k]).collect()
    }

    /// First retained index after discarding `fraction` of the chain.
    pub fn burn_in_index(&self, fraction: f64) -> usize {
        ((fraction.clamp(0.0, 1.0) * self.len() as f64).floor() as usize).min(self.len().saturating_sub(1))
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted_count as f64 / self.len().max(1) as f64
    }

    pub fn parameter_names(&self, gauge_ids: &[String]) -> Vec<String> {
        (1..=self.n_slips)
            .map(|i| format!("s{i}"))
            .chain(gauge_ids.iter().map(|g| format!("sigma2_{g}")))
            .collect()
    }
}

/// Adaptive Metropolis on `(s, log sigma^2)`; the Jacobian `sigma^2` of the
/// log transform is included, so the Jeffreys prior is flat in `log sigma^2`.
pub fn sample_posterior(post: &Posterior<'_>, init: &PosteriorState, opts: &AmOptions) -> Result<PosteriorChain> {
    let m = post.n_slips();
    let g = post.n_gauges();
    if init.slips.len() != m || init.variances.len() != g {
        return Err(Error::DimensionMismatch { expected: m + g, got: init.slips.len() + init.variances.len() });
    }
    if post.log_posterior(init)? == f64::NEG_INFINITY {
        return Err(Error::Domain("initial posterior state outside the prior support".into()));
    }
    let theta0: Vec<f64> = init.slips.iter().copied().chain(init.variances.iter().map(|v| v.ln())).collect();
    let steps: Vec<f64> = std::iter::repeat_n(0.1 * post.bounds().width(), m).chain(std::iter::repeat_n(1.0, g)).collect();
    let target = |theta: &[f64]| -> f64 {
        let state = PosteriorState { slips: theta[..m].to_vec(), variances: theta[m..].iter().map(|l| l.exp()).collect() };
        match post.log_posterior(&state) {
            Ok(lp) if lp.is_finite() => lp + theta[m..].iter().sum::<f64>(),
            _ => f64::NEG_INFINITY,
        }
    };
    let chain = adaptive_metropolis(target, &theta0, &steps, opts)?;
    let p = m + g;
    let mut params = chain.samples;
    let mut log_posterior = chain.log_target;
    for (i, lp) in log_posterior.iter_mut().enumerate() {
        let row = &mut params[i * p..(i + 1) * p];
        // undo the Jacobian so the stored value is the posterior density of (s, sigma^2)
        *lp -= row[m..].iter().sum::<f64>();
        row[m..].iter_mut().for_each(|v| *v = v.exp());
    }
    Ok(PosteriorChain {
        n_slips: m,
        n_gauges: g,
        params,
        log_posterior,
        accepted: chain.accepted,
        accepted_count: chain.accepted_count,
        checkpoints: chain.checkpoints,
        seed: chain.seed,
    })
}
