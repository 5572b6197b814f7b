//! Gradient-free posterior sampling of the source parameters.
//!
//! The prior is a centred Gaussian with diagonal covariance `B`, the
//! likelihood is Gaussian in the flux residual, and proposals come from the
//! preconditioned Crank-Nicolson family. Acceptance uses the data misfit
//! alone because both proposals are reversible with respect to the prior.

mod chain;
mod likelihood;
mod prior;
mod proposal;

pub use chain::{run_chain, ChainState, PosteriorEnsemble, ProposalConfig};
pub use likelihood::{misfit, ForwardMap, ForwardOutput, Observation, ObservationSet};
pub use prior::PriorSpec;
pub use proposal::{
    accept, acceptance_probability, apcn_propose, beta_from_delta, empirical_cov, pcn_propose, AdaptivePcn,
    EmpiricalCovariance,
};
