//! Conjugate updates: Dirichlet for `theta`, Normal-Wishart for the Gaussians.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use super::hyper::Hyperparams;
use super::state::{GaussParams, SufficientStats};
use crate::error::{invalid, Result};

/// Draws from `Dir(params)`. Small shapes are handled in log space so rows
/// with concentrations well below one still land on the simplex.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, params: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = params
        .iter()
        .map(|&a| {
            if a < 1.0 {
                // G(a) = G(a + 1) * U^(1/a)
                let g: f64 = Gamma::new(a + 1.0, 1.0).unwrap().sample(rng);
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                g.ln() + u.ln() / a
            } else {
                Gamma::new(a, 1.0).unwrap().sample(rng).ln()
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Posterior draw and analytic posterior mean of every `theta` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPosterior {
    pub sample: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
}

/// `theta_l | counts ~ Dir(alpha + counts_l)` for each sign `l`.
pub fn posterior_theta<R: Rng + ?Sized>(
    counts: &[Vec<u64>],
    alpha: &[f64],
    rng: &mut R,
) -> Result<ThetaPosterior> {
    let mut sample = Vec::with_capacity(counts.len());
    let mut mean = Vec::with_capacity(counts.len());
    for (l, row) in counts.iter().enumerate() {
        if row.len() != alpha.len() {
            return Err(invalid(format!(
                "count row {l} has {} entries, expected {}",
                row.len(),
                alpha.len()
            )));
        }
        let params: Vec<f64> = row.iter().zip(alpha).map(|(&n, &a)| a + n as f64).collect();
        let total: f64 = params.iter().sum();
        mean.push(params.iter().map(|p| p / total).collect());
        sample.push(sample_dirichlet(rng, &params));
    }
    Ok(ThetaPosterior { sample, mean })
}

/// Normal-Wishart parameters: `Lambda ~ W(nu, w)`, `mu | Lambda ~ N(m, (beta Lambda)^-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalWishart {
    pub m: Vector3<f64>,
    pub beta: f64,
    pub w: Matrix3<f64>,
    pub nu: f64,
}

impl NormalWishart {
    pub fn prior(hyper: &Hyperparams) -> Result<Self> {
        let w = hyper
            .w_inv_matrix()
            .try_inverse()
            .ok_or_else(|| invalid("w_inv is singular"))?;
        Ok(Self {
            m: hyper.mean_vector(),
            beta: hyper.beta,
            w,
            nu: hyper.nu,
        })
    }

    /// Conjugate update with the statistics of one category.
    pub fn update(&self, count: usize, sum: &Vector3<f64>, scatter: &Matrix3<f64>) -> Result<Self> {
        if count == 0 {
            return Ok(*self);
        }
        let n = count as f64;
        let xbar = sum / n;
        let beta = self.beta + n;
        let m = (self.beta * self.m + sum) / beta;
        let d = xbar - self.m;
        let w_inv = self
            .w
            .try_inverse()
            .ok_or_else(|| invalid("Wishart scale is singular"))?
            + scatter
            + (self.beta * n / beta) * d * d.transpose();
        let w = w_inv
            .try_inverse()
            .ok_or_else(|| invalid("posterior Wishart scale is singular"))?;
        Ok(Self {
            m,
            beta,
            w: symmetrize(&w),
            nu: self.nu + n,
        })
    }

    pub fn mean(&self) -> GaussParams {
        GaussParams {
            mean: self.m,
            precision: self.nu * self.w,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GaussParams> {
        let precision = sample_wishart(rng, self.nu, &self.w)?;
        let chol = (self.beta * precision)
            .cholesky()
            .ok_or_else(|| invalid("sampled precision is not positive-definite"))?;
        let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        // x = m + L^-T z has covariance (L L^T)^-1
        let offset = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| invalid("singular Cholesky factor"))?;
        Ok(GaussParams {
            mean: self.m + offset,
            precision,
        })
    }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Bartlett decomposition draw from `W(nu, scale)`.
pub fn sample_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    nu: f64,
    scale: &Matrix3<f64>,
) -> Result<Matrix3<f64>> {
    if !(nu > 2.0) {
        return Err(invalid(format!(
            "Wishart degrees of freedom {nu} must exceed 2"
        )));
    }
    let l = scale
        .cholesky()
        .ok_or_else(|| invalid("Wishart scale is not positive-definite"))?
        .l();
    let mut a = Matrix3::zeros();
    for i in 0..3 {
        let chi: f64 = ChiSquared::new(nu - i as f64).unwrap().sample(rng);
        a[(i, i)] = chi.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    Ok(symmetrize(&(la * la.transpose())))
}

/// Posterior draws and posterior means of every category's Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPosterior {
    pub samples: Vec<GaussParams>,
    pub means: Vec<GaussParams>,
    pub posteriors: Vec<NormalWishart>,
}

pub fn posterior_gauss<R: Rng + ?Sized>(
    stats: &SufficientStats,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<GaussPosterior> {
    let prior = NormalWishart::prior(hyper)?;
    let mut out = GaussPosterior {
        samples: Vec::with_capacity(stats.categories.len()),
        means: Vec::with_capacity(stats.categories.len()),
        posteriors: Vec::with_capacity(stats.categories.len()),
    };
    for (k, cat) in stats.categories.iter().enumerate() {
        let s = &cat.scatter;
        if (s - s.transpose()).amax() > 1e-9 * s.amax().max(1.0) {
            return Err(invalid(format!(
                "scatter matrix of category {k} is not symmetric"
            )));
        }
        let post = prior.update(cat.count, &cat.sum, s)?;
        out.samples.push(post.sample(rng)?);
        out.means.push(post.mean());
        out.posteriors.push(post);
    }
    Ok(out)
}
