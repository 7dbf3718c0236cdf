//! The inter-GM: two agents sharing signs, each with a sign→category table
//! `theta` and a Gaussian mixture over L\*u\*v\* observations.
//!
//! Indices are 0-based throughout: categories `0..K`, signs `0..L`.

mod generate;
mod gibbs;
mod hyper;
mod posterior;
mod query;
mod state;

pub use generate::{generate, Generated};
pub use gibbs::{gibbs_fit, gibbs_theta, gibbs_theta_row, GibbsFit, GibbsOptions};
pub use hyper::Hyperparams;
pub use posterior::{
    posterior_gauss, posterior_theta, sample_dirichlet, sample_wishart, GaussPosterior,
    NormalWishart, ThetaPosterior,
};
pub(crate) use query::sample_index;
pub use query::{
    category_given_sign, category_probabilities, gaussian_log_density, sample_category,
    sign_posterior, CategoryDraw,
};
pub use state::{AgentDocument, AgentState, GaussParams, SufficientStats, AGENT_DOCUMENT_VERSION};

/// Observation dimension (L\*, u\*, v\*).
pub const DIM: usize = 3;
