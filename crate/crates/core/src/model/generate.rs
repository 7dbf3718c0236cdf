use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::hyper::Hyperparams;
use super::posterior::{sample_dirichlet, NormalWishart};
use super::query::sample_index;
use super::state::AgentState;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;
use crate::stimulus::ColorPoint;

/// Forward sample of the two-agent model.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub signs: Vec<usize>,
    pub agents: [AgentState; 2],
    pub observations: [Vec<ColorPoint>; 2],
}

/// Samples shared signs from `pi`, then for each agent independently its
/// Gaussians, `theta` rows, categories, and observations.
pub fn generate(hyper: &Hyperparams, n: usize, seed: u64) -> Result<Generated> {
    hyper.validate()?;
    let mut rng = rng_from_seed(seed);
    let total_pi: f64 = hyper.pi.iter().sum();
    let pi: Vec<f64> = hyper.pi.iter().map(|p| p / total_pi).collect();
    let signs: Vec<usize> = (0..n).map(|_| sample_index(&mut rng, &pi)).collect();
    let prior = NormalWishart::prior(hyper)?;

    let agent = |rng: &mut crate::rng::SimRng| -> Result<(AgentState, Vec<ColorPoint>)> {
        let gauss = (0..hyper.categories())
            .map(|_| prior.sample(rng))
            .collect::<Result<Vec<_>>>()?;
        let theta: Vec<Vec<f64>> = (0..hyper.signs())
            .map(|_| sample_dirichlet(rng, &hyper.alpha))
            .collect();
        let mut assignments = Vec::with_capacity(n);
        let mut observations = Vec::with_capacity(n);
        for &s in &signs {
            let c = sample_index(rng, &theta[s]);
            let chol = gauss[c]
                .precision
                .cholesky()
                .ok_or_else(|| invalid("generated precision is not positive-definite"))?;
            let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let offset = chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .unwrap_or_else(Vector3::zeros);
            assignments.push(c);
            observations.push(ColorPoint::from_vector(&(gauss[c].mean + offset)));
        }
        Ok((
            AgentState {
                theta,
                gauss,
                assignments,
                signs: signs.clone(),
            },
            observations,
        ))
    };

    let (a, xa) = agent(&mut rng)?;
    let (b, xb) = agent(&mut rng)?;
    Ok(Generated {
        signs,
        agents: [a, b],
        observations: [xa, xb],
    })
}
