//! Bayesian inversion of subfault slips and gauge noise variances.

mod mcmc;
pub mod moment;
mod posterior;
pub mod stats;

pub use mcmc::{adaptive_metropolis, sample_posterior, AmChain, AmOptions, CovarianceCheckpoint, PosteriorChain};
pub use moment::{moment_magnitude, seismic_moment};
pub use posterior::{
    align_observations, log_likelihood, log_posterior, log_prior, GaugeObservations, ObservationSet, Posterior,
    PosteriorState,
};
pub use stats::{hpd_interval, kde, map_estimate, running_mean, Bandwidth, Density, MapEstimate};
