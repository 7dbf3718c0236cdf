use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use super::hyper::Hyperparams;
use super::posterior::{sample_dirichlet, NormalWishart};
use super::query::sample_category;
use super::state::{AgentState, GaussParams, SufficientStats};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stimulus::ColorPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsOptions {
    /// Total number of sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 500,
        }
    }
}

/// Output of [`gibbs_fit`]: an agent whose `theta` and `gauss` are Monte Carlo
/// posterior means over the kept sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsFit {
    pub state: AgentState,
    pub kept_samples: usize,
    /// Category draws that hit the all-zero-weight fallback.
    pub fallback_draws: usize,
}

struct Accumulator {
    theta: Vec<Vec<f64>>,
    mean: Vec<Vector3<f64>>,
    precision: Vec<Matrix3<f64>>,
    n: usize,
}

impl Accumulator {
    fn new(k: usize, l: usize) -> Self {
        Self {
            theta: vec![vec![0.0; k]; l],
            mean: vec![Vector3::zeros(); k],
            precision: vec![Matrix3::zeros(); k],
            n: 0,
        }
    }

    fn add(&mut self, theta: &[Vec<f64>], gauss: &[GaussParams]) {
        for (acc, row) in self.theta.iter_mut().zip(theta) {
            for (a, t) in acc.iter_mut().zip(row) {
                *a += t;
            }
        }
        for (k, g) in gauss.iter().enumerate() {
            self.mean[k] += g.mean;
            self.precision[k] += g.precision;
        }
        self.n += 1;
    }

    fn finish(self) -> (Vec<Vec<f64>>, Vec<GaussParams>) {
        let n = self.n as f64;
        let theta = self
            .theta
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                row.into_iter().map(|t| t / total).collect()
            })
            .collect();
        let gauss = self
            .mean
            .into_iter()
            .zip(self.precision)
            .map(|(m, p)| GaussParams {
                mean: m / n,
                precision: (p + p.transpose()) / (2.0 * n),
            })
            .collect();
        (theta, gauss)
    }
}

/// Gibbs sampling of one agent's parameters.
///
/// With `fixed_categories` the categories are observed and only `theta` and
/// the Gaussians are drawn (both conditionals are conjugate). Without them the
/// chain also resamples every category each sweep, starting from a uniform
/// random assignment. Signs are always observed.
pub fn gibbs_fit(
    observations: &[ColorPoint],
    fixed_categories: Option<&[usize]>,
    signs: &[usize],
    hyper: &Hyperparams,
    options: GibbsOptions,
    seed: u64,
) -> Result<GibbsFit> {
    hyper.validate()?;
    if options.iterations <= options.burn_in {
        return Err(invalid(format!(
            "iterations ({}) must exceed burn-in ({})",
            options.iterations, options.burn_in
        )));
    }
    if signs.len() != observations.len() {
        return Err(invalid("signs and observations must align"));
    }
    if let Some(c) = fixed_categories {
        if c.len() != observations.len() {
            return Err(invalid("categories and observations must align"));
        }
    }
    let (k, l) = (hyper.categories(), hyper.signs());
    let prior = NormalWishart::prior(hyper)?;

    if observations.is_empty() {
        let alpha_total: f64 = hyper.alpha.iter().sum();
        return Ok(GibbsFit {
            state: AgentState {
                theta: vec![hyper.alpha.iter().map(|a| a / alpha_total).collect(); l],
                gauss: vec![prior.mean(); k],
                assignments: vec![],
                signs: vec![],
            },
            kept_samples: 0,
            fallback_draws: 0,
        });
    }

    let mut rng = rng_from_seed(seed);
    let mut categories: Vec<usize> = match fixed_categories {
        Some(c) => c.to_vec(),
        None => (0..observations.len())
            .map(|_| rng.random_range(0..k))
            .collect(),
    };
    let mut acc = Accumulator::new(k, l);
    let mut fallback_draws = 0;

    // observed categories: the conditionals never change, so update once
    let fixed_posteriors = match fixed_categories {
        Some(c) => Some(conditionals(observations, c, signs, hyper, &prior)?),
        None => None,
    };

    for sweep in 0..options.iterations {
        let owned;
        let (dirichlet, normal_wishart) = match &fixed_posteriors {
            Some(p) => (&p.0, &p.1),
            None => {
                owned = conditionals(observations, &categories, signs, hyper, &prior)?;
                (&owned.0, &owned.1)
            }
        };
        let theta: Vec<Vec<f64>> = dirichlet
            .iter()
            .map(|p| sample_dirichlet(&mut rng, p))
            .collect();
        let gauss = normal_wishart
            .iter()
            .map(|nw| nw.sample(&mut rng))
            .collect::<Result<Vec<_>>>()?;

        if fixed_categories.is_none() {
            let current = AgentState {
                theta,
                gauss,
                assignments: vec![],
                signs: vec![],
            };
            for (n, x) in observations.iter().enumerate() {
                let draw = sample_category(*x, signs[n], &current, &mut rng)?;
                fallback_draws += usize::from(draw.fallback);
                categories[n] = draw.category;
            }
            if sweep >= options.burn_in {
                acc.add(&current.theta, &current.gauss);
            }
        } else if sweep >= options.burn_in {
            acc.add(&theta, &gauss);
        }
    }

    let kept_samples = acc.n;
    let (theta, gauss) = acc.finish();
    if fallback_draws > 0 {
        log::debug!("gibbs_fit: {fallback_draws} category draws used the argmax fallback");
    }
    Ok(GibbsFit {
        state: AgentState {
            theta,
            gauss,
            assignments: categories,
            signs: signs.to_vec(),
        },
        kept_samples,
        fallback_draws,
    })
}

/// The `theta` half of an observed-category chain: `iterations` Dirichlet
/// draws per sign row from `Dir(alpha + counts_l)`, burn-in discarded, kept
/// draws averaged. Cheaper than [`gibbs_fit`] when only `theta` is needed.
/// Row `l` is drawn from its own stream `derive_seed(seed, l)`.
pub fn gibbs_theta(
    counts: &[Vec<u64>],
    alpha: &[f64],
    options: GibbsOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    counts
        .iter()
        .enumerate()
        .map(|(l, row)| gibbs_theta_row(row, alpha, options, derive_seed(seed, l as u64)))
        .collect()
}

/// One row of [`gibbs_theta`].
pub fn gibbs_theta_row(
    counts: &[u64],
    alpha: &[f64],
    options: GibbsOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    if options.iterations <= options.burn_in {
        return Err(invalid(format!(
            "iterations ({}) must exceed burn-in ({})",
            options.iterations, options.burn_in
        )));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(invalid("alpha entries must be positive"));
    }
    if counts.len() != alpha.len() {
        return Err(invalid(format!(
            "count row has {} entries, expected {}",
            counts.len(),
            alpha.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let params: Vec<f64> = counts
        .iter()
        .zip(alpha)
        .map(|(&n, a)| a + n as f64)
        .collect();
    let mut acc = vec![0.0; params.len()];
    for sweep in 0..options.iterations {
        let draw = sample_dirichlet(&mut rng, &params);
        if sweep >= options.burn_in {
            for (a, d) in acc.iter_mut().zip(draw) {
                *a += d;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    Ok(acc.into_iter().map(|a| a / total).collect())
}

fn conditionals(
    observations: &[ColorPoint],
    categories: &[usize],
    signs: &[usize],
    hyper: &Hyperparams,
    prior: &NormalWishart,
) -> Result<(Vec<Vec<f64>>, Vec<NormalWishart>)> {
    let stats = SufficientStats::from_data(
        observations,
        categories,
        signs,
        hyper.categories(),
        hyper.signs(),
    )?;
    let dirichlet = stats
        .sign_category_counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&hyper.alpha)
                .map(|(&n, a)| a + n as f64)
                .collect()
        })
        .collect();
    let normal_wishart = stats
        .categories
        .iter()
        .map(|c| prior.update(c.count, &c.sum, &c.scatter))
        .collect::<Result<Vec<_>>>()?;
    Ok((dirichlet, normal_wishart))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(n: usize) -> Vec<ColorPoint> {
        (0..n)
            .map(|i| ColorPoint::new(50.0 + i as f64, (i % 3) as f64, -(i as f64)))
            .collect()
    }

    #[test]
    fn burn_in_must_be_below_iterations() {
        let err = gibbs_fit(
            &points(3),
            Some(&[0, 1, 2]),
            &[0, 0, 0],
            &Hyperparams::default(),
            GibbsOptions {
                iterations: 10,
                burn_in: 10,
            },
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_dataset_gives_prior_means() {
        let fit = gibbs_fit(
            &[],
            Some(&[]),
            &[],
            &Hyperparams::default(),
            GibbsOptions::default(),
            1,
        )
        .unwrap();
        for row in &fit.state.theta {
            for t in row {
                assert!((t - 0.2).abs() < 1e-15);
            }
        }
        assert_eq!(fit.state.gauss[0].mean, Vector3::new(50.0, 0.0, 0.0));
    }

    #[test]
    fn theta_chain_matches_dirichlet_mean() {
        let counts = vec![
            vec![40, 0, 0, 0, 0],
            vec![20, 20, 20, 20, 20],
            vec![30, 30, 10, 0, 20],
        ];
        let alpha = [0.1; 5];
        let theta = gibbs_theta(
            &counts,
            &alpha,
            GibbsOptions {
                iterations: 2500,
                burn_in: 500,
            },
            4,
        )
        .unwrap();
        for (row, c) in theta.iter().zip(&counts) {
            let total: f64 = c.iter().map(|&n| n as f64 + 0.1).sum();
            let tv: f64 = row
                .iter()
                .zip(c)
                .map(|(t, &n)| (t - (n as f64 + 0.1) / total).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.01, "{row:?}");
        }
        assert!(gibbs_theta(
            &counts,
            &alpha,
            GibbsOptions {
                iterations: 5,
                burn_in: 5
            },
            4
        )
        .is_err());
    }

    #[test]
    fn same_seed_same_result() {
        let xs = points(12);
        let c: Vec<usize> = (0..12).map(|i| i % 5).collect();
        let s: Vec<usize> = (0..12).map(|i| (i * 2) % 5).collect();
        let opts = GibbsOptions {
            iterations: 300,
            burn_in: 100,
        };
        let a = gibbs_fit(&xs, Some(&c), &s, &Hyperparams::default(), opts, 9).unwrap();
        let b = gibbs_fit(&xs, Some(&c), &s, &Hyperparams::default(), opts, 9).unwrap();
        assert_eq!(a, b);
        let u1 = gibbs_fit(&xs, None, &s, &Hyperparams::default(), opts, 9).unwrap();
        let u2 = gibbs_fit(&xs, None, &s, &Hyperparams::default(), opts, 9).unwrap();
        assert_eq!(u1, u2);
        assert_eq!(a.kept_samples, 200);
    }
}
