use rand::Rng;

use super::state::{AgentState, GaussParams};
use crate::error::{invalid, Result};
use crate::stimulus::ColorPoint;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln N(x | mean, precision^-1)` in three dimensions.
pub fn gaussian_log_density(x: ColorPoint, g: &GaussParams) -> f64 {
    let d = x.to_vector() - g.mean;
    let quad = (d.transpose() * g.precision * d)[(0, 0)];
    0.5 * g.precision.determinant().ln() - 1.5 * LN_2PI - 0.5 * quad
}

/// Normalized `P(c | x, s)` over categories and whether the log-space
/// fallback fired (every weight was zero, so the result is one-hot on the
/// category with the highest Gaussian likelihood).
pub fn category_probabilities(
    x: ColorPoint,
    sign: usize,
    state: &AgentState,
) -> Result<(Vec<f64>, bool)> {
    let row = state
        .theta
        .get(sign)
        .ok_or_else(|| invalid(format!("sign {sign} out of range")))?;
    let log_weights: Vec<f64> = row
        .iter()
        .zip(&state.gauss)
        .map(|(&t, g)| t.ln() + gaussian_log_density(x, g))
        .collect();
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let best = state
            .gauss
            .iter()
            .map(|g| gaussian_log_density(x, g))
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
            )
            .0;
        let mut probs = vec![0.0; state.gauss.len()];
        probs[best] = 1.0;
        return Ok((probs, true));
    }
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok((weights.into_iter().map(|w| w / total).collect(), false))
}

/// Result of a category draw.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDraw {
    pub category: usize,
    pub probabilities: Vec<f64>,
    pub fallback: bool,
}

/// Draws `c` with probability proportional to `theta[s][c] * N(x | mu_c, Lambda_c^-1)`.
pub fn sample_category<R: Rng + ?Sized>(
    x: ColorPoint,
    sign: usize,
    state: &AgentState,
    rng: &mut R,
) -> Result<CategoryDraw> {
    let (probabilities, fallback) = category_probabilities(x, sign, state)?;
    let category = sample_index(rng, &probabilities);
    Ok(CategoryDraw {
        category,
        probabilities,
        fallback,
    })
}

/// Inverse-CDF draw from a normalized probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// `P(c | theta, s) = theta[s][c]`.
pub fn category_given_sign(category: usize, sign: usize, theta: &[Vec<f64>]) -> Result<f64> {
    theta
        .get(sign)
        .and_then(|row| row.get(category))
        .copied()
        .ok_or_else(|| invalid(format!("category {category} / sign {sign} out of range")))
}

/// `P(s | theta, c)`, proportional to `pi[s] * theta[s][c]`.
pub fn sign_posterior(category: usize, theta: &[Vec<f64>], pi: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != pi.len() {
        return Err(invalid(format!(
            "theta has {} rows but pi has {} entries",
            theta.len(),
            pi.len()
        )));
    }
    let weights = theta
        .iter()
        .zip(pi)
        .map(|(row, p)| {
            row.get(category)
                .map(|t| p * t)
                .ok_or_else(|| invalid(format!("category {category} out of range")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("sign posterior has no mass"));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use nalgebra::{Matrix3, Vector3};

    fn state_with(theta_row: Vec<f64>, gauss: Vec<GaussParams>) -> AgentState {
        let k = gauss.len();
        AgentState {
            theta: vec![theta_row; 2]
                .into_iter()
                .chain(std::iter::once(vec![1.0 / k as f64; k]))
                .collect(),
            gauss,
            assignments: vec![],
            signs: vec![],
        }
    }

    fn unit(mean: [f64; 3], prec: f64) -> GaussParams {
        GaussParams {
            mean: Vector3::from(mean),
            precision: Matrix3::identity() * prec,
        }
    }

    #[test]
    fn log_density_matches_closed_form() {
        let g = unit([0.0; 3], 1.0);
        let v = gaussian_log_density(ColorPoint::new(1.0, 0.0, 0.0), &g);
        assert!((v - (-1.5 * LN_2PI - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn one_hot_theta_forces_category() {
        let state = state_with(vec![0.0, 1.0, 0.0], vec![unit([0.0; 3], 1.0); 3]);
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let draw =
                sample_category(ColorPoint::new(10.0, 3.0, -4.0), 0, &state, &mut rng).unwrap();
            assert_eq!(draw.category, 1);
        }
    }

    #[test]
    fn tight_component_dominates() {
        let gauss = vec![
            unit([0.0; 3], 0.01),
            unit([5.0; 3], 0.01),
            unit([60.0, 0.0, 0.0], 100.0),
        ];
        let state = state_with(vec![1.0 / 3.0; 3], gauss);
        let mut rng = rng_from_seed(2);
        let hits = (0..1000)
            .filter(|_| {
                sample_category(ColorPoint::new(60.0, 0.0, 0.0), 0, &state, &mut rng)
                    .unwrap()
                    .category
                    == 2
            })
            .count();
        assert!(hits > 990, "{hits}");
    }

    #[test]
    fn probabilities_normalized_and_fallback() {
        let gauss = vec![unit([0.0; 3], 1.0), unit([100.0; 3], 1e4)];
        let state = state_with(vec![0.5, 0.5], gauss);
        let (p, fb) = category_probabilities(ColorPoint::new(1.0, 2.0, 3.0), 0, &state).unwrap();
        assert!(!fb);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // both categories forbidden by theta: fall back to Gaussian argmax
        let state = state_with(
            vec![0.0, 0.0],
            vec![unit([0.0; 3], 1.0), unit([100.0; 3], 1.0)],
        );
        let (p, fb) = category_probabilities(ColorPoint::new(99.0, 99.0, 99.0), 0, &state).unwrap();
        assert!(fb);
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn category_given_sign_lookup() {
        let theta = vec![vec![0.2; 5], vec![0.1, 0.2, 0.3, 0.25, 0.15]];
        assert_eq!(category_given_sign(3, 0, &theta).unwrap(), 0.2);
        assert_eq!(category_given_sign(0, 1, &theta).unwrap(), 0.1);
        assert!(category_given_sign(5, 0, &theta).is_err());
        assert!(category_given_sign(0, 2, &theta).is_err());
    }

    #[test]
    fn sign_posterior_cases() {
        let pi = vec![0.2; 5];
        let uniform = vec![vec![0.2; 5]; 5];
        for p in sign_posterior(1, &uniform, &pi).unwrap() {
            assert!((p - 0.2).abs() < 1e-12);
        }
        let mut theta = vec![vec![0.025, 0.975 / 4.0, 0.975 / 4.0, 0.975 / 4.0, 0.975 / 4.0]; 5];
        theta[0] = vec![0.9, 0.025, 0.025, 0.025, 0.025];
        let post = sign_posterior(0, &theta, &pi).unwrap();
        assert!((post[0] - 0.9 / (0.9 + 4.0 * 0.025)).abs() < 1e-12);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sign_posterior(0, &vec![vec![0.0, 1.0]; 2], &[0.5, 0.5]).is_err());
    }
}
