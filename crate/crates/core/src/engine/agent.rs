use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::acceptance::{mh_terms, MhTerms};
use crate::engine::record::KnowledgeSnapshot;
use crate::error::{invalid, Result};
use crate::model::sample_index;
use crate::model::{
    gibbs_fit, posterior_gauss, posterior_theta, sample_category, sign_posterior, AgentState,
    GibbsOptions, Hyperparams, SufficientStats,
};
use crate::stimulus::ColorPoint;

/// Whether refreshed parameters are posterior draws or posterior means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterEstimate {
    #[default]
    PosteriorMean,
    PosteriorSample,
}

/// An agent playing over one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningAgent {
    pub state: AgentState,
    pub observations: Vec<ColorPoint>,
    pub hyper: Hyperparams,
    pub estimate: ParameterEstimate,
}

impl LearningAgent {
    pub fn new(
        state: AgentState,
        observations: Vec<ColorPoint>,
        hyper: Hyperparams,
        estimate: ParameterEstimate,
    ) -> Result<Self> {
        hyper.validate()?;
        state.validate()?;
        if state.assignments.len() != observations.len() {
            return Err(invalid(format!(
                "agent has {} assignments for {} observations",
                state.assignments.len(),
                observations.len()
            )));
        }
        if state.categories() != hyper.categories() || state.sign_count() != hyper.signs() {
            return Err(invalid("agent shape does not match hyperparameters"));
        }
        Ok(Self {
            state,
            observations,
            hyper,
            estimate,
        })
    }

    /// Categorizes the observations without signs (an unsupervised Gaussian
    /// mixture fit), then names every stimulus after its category.
    pub fn initialize(
        observations: Vec<ColorPoint>,
        hyper: Hyperparams,
        estimate: ParameterEstimate,
        gibbs: GibbsOptions,
        seed: u64,
    ) -> Result<Self> {
        let n = observations.len();
        let fit = gibbs_fit(&observations, None, &vec![0; n], &hyper, gibbs, seed)?;
        let signs = fit
            .state
            .assignments
            .iter()
            .map(|c| c % hyper.signs())
            .collect();
        let state = AgentState { signs, ..fit.state };
        let mut agent = Self::new(state, observations, hyper, estimate)?;
        let mut rng = crate::rng::substream(seed, 1);
        agent.refresh(&mut rng)?;
        Ok(agent)
    }

    pub fn snapshot(&self) -> KnowledgeSnapshot {
        KnowledgeSnapshot {
            categories: self.state.assignments.clone(),
            signs: self.state.signs.clone(),
        }
    }

    /// Resamples the category of stimulus `n` given its current sign.
    pub fn perceive<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<usize> {
        let x = *self
            .observations
            .get(n)
            .ok_or_else(|| invalid(format!("stimulus {n} out of range")))?;
        let draw = sample_category(x, self.state.signs[n], &self.state, rng)?;
        self.state.assignments[n] = draw.category;
        Ok(draw.category)
    }

    /// Samples a name for stimulus `n` from `P(s | theta, c_n)`.
    pub fn propose<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<usize> {
        let c = *self
            .state
            .assignments
            .get(n)
            .ok_or_else(|| invalid(format!("stimulus {n} out of range")))?;
        speaker_propose(c, &self.state, &self.hyper.pi, rng)
    }

    /// MH quantities for judging proposal `s_star` on stimulus `n`.
    pub fn judge(&self, n: usize, s_star: usize) -> Result<MhTerms> {
        let c = self.state.assignments[n];
        mh_terms(c, &self.state.theta, s_star, self.state.signs[n])
    }

    /// Redraws (or re-estimates) `theta` and the Gaussians from the current
    /// categories and signs.
    pub fn refresh<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let stats = SufficientStats::from_data(
            &self.observations,
            &self.state.assignments,
            &self.state.signs,
            self.hyper.categories(),
            self.hyper.signs(),
        )?;
        let theta = posterior_theta(&stats.sign_category_counts, &self.hyper.alpha, rng)?;
        let gauss = posterior_gauss(&stats, &self.hyper, rng)?;
        match self.estimate {
            ParameterEstimate::PosteriorMean => {
                self.state.theta = theta.mean;
                self.state.gauss = gauss.means;
            }
            ParameterEstimate::PosteriorSample => {
                self.state.theta = theta.sample;
                self.state.gauss = gauss.samples;
            }
        }
        Ok(())
    }
}

/// Draws the speaker's proposal `s* ~ P(s | theta, c)`.
pub fn speaker_propose<R: Rng + ?Sized>(
    category: usize,
    state: &AgentState,
    pi: &[f64],
    rng: &mut R,
) -> Result<usize> {
    let posterior = sign_posterior(category, &state.theta, pi)?;
    Ok(sample_index(rng, &posterior))
}
