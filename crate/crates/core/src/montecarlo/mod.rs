//! Path-level Monte Carlo: weighted ensembles of walk paths for the Gibbs
//! measure, escape-probability estimates, and the Doob-transformed chain of
//! the globular phase.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the seed and the
//! sample index, and reductions run in index order,
//! so results are bit-identical for any number of worker threads.

mod chain;
mod ensemble;
mod escape;
mod observables;
mod renewal;
mod walk;

pub use chain::{simulate_h_chain, simulate_h_chain_with, ChainOptions, ChainRun, ChainState, EXIT_RATE_TOL};
pub use ensemble::{effective_sample_size, sample_free_paths, PathSample, Sampler, WeightedEnsemble};
pub use renewal::{sample_gibbs_paths, RENEWAL_STEP};
pub use escape::{estimate_escape_probability, late_arrivals, EscapeEstimate};
pub use observables::{
    endpoint_statistics, endpoint_statistics_with, mixture_cf, mixture_variance_ratio, sigma_distribution,
    sigma_distribution_with, sigma_limit_cdf, CfRow, EndpointReport, ObservableOptions, SigmaBin, SigmaReport,
    DEFAULT_ESS_FLOOR,
};
