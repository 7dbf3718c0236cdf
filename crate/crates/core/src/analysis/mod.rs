//! Statistical analysis of recorded decisions.
//!
//! Test 1 fits `z ~ Bern(a * r_mh + b)` and compares the fit with a
//! randomization null in which decisions ignore `r_mh`. Test 2 compares five
//! acceptance models by how often their simulated decisions match the
//! recorded ones.

mod compare;
mod decisions;
mod fit;
mod mwu;
mod randomization;
mod report;

pub use compare::{
    acceptance_rates, pairwise_model_tests, precision, simulate_model_decisions, ComparisonTable,
    ModelPrecision, Test2Report, SIGNIFICANCE,
};
pub use decisions::{
    group_by_participant, infer_decisions, DecisionRecord, InferenceOptions, InferredDecisions,
};
pub use fit::{
    fit_affine_bernoulli, fit_affine_bernoulli_with, gradient, is_feasible, log_likelihood,
    BernoulliData, FitOptions, FitResult, RatioGroups, PROB_FLOOR,
};
pub use mwu::{mann_whitney_u, mann_whitney_u_with, Alternative, UMethod, UTest};
pub use randomization::{
    describe_p, empirical_cdf_value, randomization_test, randomization_test_with, Test1Report,
    A_LEVEL, B_LOWER, B_UPPER, MIN_STABLE_REPLICATES,
};
pub use report::{acceptance_histogram, participant_table, HistogramBin, ParticipantRow};
