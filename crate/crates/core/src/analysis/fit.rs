//! Constrained maximum likelihood for `z ~ Bern(a * r + b)`.
//!
//! The feasible set is `0 <= b <= 1`, `0 <= a + b <= 1`, the pairs for which
//! `a * r + b` is a probability for every `r` in `[0, 1]`. The optimizer works
//! in the coordinates `(p0, p1) = (b, a + b)`, the acceptance probabilities at
//! `r = 0` and `r = 1`, where that set is the unit square and the
//! log-likelihood is concave.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::decisions::DecisionRecord;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

/// Probabilities inside logarithms are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub log_likelihood: f64,
    /// The optimum touches an edge of the feasible set.
    pub on_boundary: bool,
    /// Every `r` is identical, so `a` and `b` are not separately identified.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Starting points, the first of which is `a = 0, b = mean(z)`.
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tolerance: f64,
    /// Seeds the random starting points.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 200,
            tolerance: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// Bernoulli outcomes tallied per distinct `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliData {
    r: Vec<f64>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
}

impl BernoulliData {
    pub fn new(r: &[f64], z: &[u8]) -> Result<Self> {
        RatioGroups::new(r)?.tally(z)
    }

    pub fn from_records(records: &[DecisionRecord]) -> Result<Self> {
        let r: Vec<f64> = records.iter().map(|d| d.r_mh).collect();
        let z: Vec<u8> = records.iter().map(|d| d.z).collect();
        Self::new(&r, &z)
    }

    pub fn len(&self) -> usize {
        (self.ones.iter().sum::<f64>() + self.zeros.iter().sum::<f64>()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        let ones: f64 = self.ones.iter().sum();
        ones / (ones + self.zeros.iter().sum::<f64>())
    }

    fn distinct_ratios(&self) -> usize {
        self.r.len()
    }
}

/// The grouping of a fixed `r` vector, reusable across resampled `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioGroups {
    values: Vec<f64>,
    group_of: Vec<usize>,
}

impl RatioGroups {
    pub fn new(r: &[f64]) -> Result<Self> {
        if let Some(bad) = r.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("r = {bad} outside [0, 1]")));
        }
        let mut values = r.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let group_of = r
            .iter()
            .map(|v| {
                values
                    .binary_search_by(|probe| probe.total_cmp(v))
                    .expect("value present")
            })
            .collect();
        Ok(Self { values, group_of })
    }

    pub fn tally(&self, z: &[u8]) -> Result<BernoulliData> {
        if z.len() != self.group_of.len() {
            return Err(invalid(format!(
                "{} outcomes for {} ratios",
                z.len(),
                self.group_of.len()
            )));
        }
        let mut ones = vec![0.0; self.values.len()];
        let mut zeros = vec![0.0; self.values.len()];
        for (&g, &zi) in self.group_of.iter().zip(z) {
            match zi {
                0 => zeros[g] += 1.0,
                1 => ones[g] += 1.0,
                other => return Err(invalid(format!("z = {other} is not 0 or 1"))),
            }
        }
        Ok(BernoulliData {
            r: self.values.clone(),
            ones,
            zeros,
        })
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `sum_n z_n ln(a r_n + b) + (1 - z_n) ln(1 - a r_n - b)` with clamped probabilities.
pub fn log_likelihood(data: &BernoulliData, a: f64, b: f64) -> f64 {
    ll_p(data, b, a + b)
}

/// `(d/da, d/db)` of [`log_likelihood`].
pub fn gradient(data: &BernoulliData, a: f64, b: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for i in 0..data.r.len() {
        let p = clamp_prob(a * data.r[i] + b);
        let w = data.ones[i] / p - data.zeros[i] / (1.0 - p);
        g[0] += w * data.r[i];
        g[1] += w;
    }
    g
}

fn ll_p(data: &BernoulliData, p0: f64, p1: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..data.r.len() {
        let r = data.r[i];
        let p = clamp_prob(p0 * (1.0 - r) + p1 * r);
        if data.ones[i] > 0.0 {
            ll += data.ones[i] * p.ln();
        }
        if data.zeros[i] > 0.0 {
            ll += data.zeros[i] * (1.0 - p).ln();
        }
    }
    ll
}

// Gradient and negated Hessian in (p0, p1).
fn derivatives(data: &BernoulliData, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for i in 0..data.r.len() {
        let r = data.r[i];
        let q = [1.0 - r, r];
        let pr = clamp_prob(p[0] * q[0] + p[1] * q[1]);
        let w = data.ones[i] / pr - data.zeros[i] / (1.0 - pr);
        let v = data.ones[i] / (pr * pr) + data.zeros[i] / ((1.0 - pr) * (1.0 - pr));
        for j in 0..2 {
            g[j] += w * q[j];
            for k in 0..2 {
                h[j][k] += v * q[j] * q[k];
            }
        }
    }
    (g, h)
}

// Coordinates held at a bound because the gradient points out of the box.
fn free_mask(p: [f64; 2], g: [f64; 2]) -> [bool; 2] {
    [0, 1].map(|i| !((p[i] <= 0.0 && g[i] < 0.0) || (p[i] >= 1.0 && g[i] > 0.0)))
}

fn projected_gradient_norm(p: [f64; 2], g: [f64; 2]) -> f64 {
    let free = free_mask(p, g);
    (0..2)
        .filter(|&i| free[i])
        .map(|i| g[i] * g[i])
        .sum::<f64>()
        .sqrt()
}

fn ascent_direction(g: [f64; 2], h: [[f64; 2]; 2], free: [bool; 2]) -> [f64; 2] {
    let mut d = [0.0; 2];
    match free {
        [true, true] => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let scale = (h[0][0] * h[1][1]).max(f64::MIN_POSITIVE);
            if det > 1e-10 * scale {
                d[0] = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
                d[1] = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
            } else {
                // flat direction: scaled gradient
                let s = h[0][0].max(h[1][1]);
                let s = if s > 0.0 { s } else { 1.0 };
                d = [g[0] / s, g[1] / s];
            }
        }
        [true, false] | [false, true] => {
            let i = usize::from(free[1]);
            d[i] = if h[i][i] > 0.0 { g[i] / h[i][i] } else { g[i] };
        }
        [false, false] => {}
    }
    d
}

fn project(p: [f64; 2]) -> [f64; 2] {
    p.map(|v| v.clamp(0.0, 1.0))
}

/// Projected Newton ascent with backtracking from one start, in `(p0, p1)`.
fn ascend(data: &BernoulliData, start: [f64; 2], options: &FitOptions) -> ([f64; 2], f64) {
    let mut p = project(start);
    let mut ll = ll_p(data, p[0], p[1]);
    let gtol = 1e-9 * (data.len().max(1) as f64);
    for _ in 0..options.max_iterations {
        let (g, h) = derivatives(data, p);
        if projected_gradient_norm(p, g) < gtol {
            break;
        }
        let d = ascent_direction(g, h, free_mask(p, g));
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-16 {
            let cand = project([p[0] + t * d[0], p[1] + t * d[1]]);
            let cand_ll = ll_p(data, cand[0], cand[1]);
            let predicted = g[0] * (cand[0] - p[0]) + g[1] * (cand[1] - p[1]);
            if cand_ll >= ll + 1e-4 * predicted && cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break;
        };
        let gain = cand_ll - ll;
        p = cand;
        ll = cand_ll;
        if gain < options.tolerance {
            break;
        }
    }
    (p, ll)
}

/// Fits `(a, b)` with the default [`FitOptions`].
pub fn fit_affine_bernoulli(records: &[DecisionRecord]) -> Result<FitResult> {
    fit_affine_bernoulli_with(
        &BernoulliData::from_records(records)?,
        &FitOptions::default(),
    )
}

/// Multi-start projected ascent; the best start wins, ties going to the earliest.
pub fn fit_affine_bernoulli_with(data: &BernoulliData, options: &FitOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(invalid("no decisions to fit"));
    }
    if options.restarts == 0 {
        return Err(invalid("at least one start is required"));
    }
    let mut rng = rng_from_seed(options.seed);
    let rate = data.acceptance_rate().clamp(0.01, 0.99);
    let mut best: Option<([f64; 2], f64)> = None;
    for start_index in 0..options.restarts {
        let start = if start_index == 0 {
            [rate, rate]
        } else {
            [rng.random_range(0.02..0.98), rng.random_range(0.02..0.98)]
        };
        let (p, ll) = ascend(data, start, options);
        if best.is_none_or(|(_, best_ll)| ll > best_ll + 1e-12) {
            best = Some((p, ll));
        }
    }
    let (p, log_likelihood) = best.expect("at least one start");
    let on_boundary = p.iter().any(|&v| v <= BOUND_TOL || v >= 1.0 - BOUND_TOL);
    Ok(FitResult {
        a: p[1] - p[0],
        b: p[0],
        log_likelihood,
        on_boundary,
        degenerate: data.distinct_ratios() == 1,
    })
}

/// Whether `(a, b)` lies in the feasible set, up to `tol`.
pub fn is_feasible(a: f64, b: f64, tol: f64) -> bool {
    b >= -tol && b <= 1.0 + tol && a + b >= -tol && a + b <= 1.0 + tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn synthetic(a: f64, b: f64, n: usize, seed: u64) -> BernoulliData {
        let mut rng = substream(seed, 0);
        let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z: Vec<u8> = r
            .iter()
            .map(|&r| u8::from(rng.random::<f64>() < a * r + b))
            .collect();
        BernoulliData::new(&r, &z).unwrap()
    }

    #[test]
    fn all_accepted_goes_to_the_corner() {
        let r: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let data = BernoulliData::new(&r, &[1; 50]).unwrap();
        let fit = fit_affine_bernoulli_with(&data, &FitOptions::default()).unwrap();
        assert!(fit.a.abs() < 1e-9 && (fit.b - 1.0).abs() < 1e-9, "{fit:?}");
        assert!(fit.on_boundary);
        assert!(!fit.degenerate);
    }

    #[test]
    fn identical_ratios_are_flagged() {
        let data = BernoulliData::new(&[0.5; 10], &[1, 0, 1, 1, 0, 1, 0, 1, 1, 1]).unwrap();
        let fit = fit_affine_bernoulli_with(&data, &FitOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert!((fit.a * 0.5 + fit.b - 0.7).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn recovers_pure_mh_at_large_n() {
        let fit =
            fit_affine_bernoulli_with(&synthetic(1.0, 0.0, 100_000, 3), &FitOptions::default())
                .unwrap();
        assert!((fit.a - 1.0).abs() < 0.03 && fit.b.abs() < 0.03, "{fit:?}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = synthetic(0.5, 0.3, 300, 5);
        let (a, b) = (0.4, 0.35);
        let g = gradient(&data, a, b);
        let h = 1e-6;
        let fa = (log_likelihood(&data, a + h, b) - log_likelihood(&data, a - h, b)) / (2.0 * h);
        let fb = (log_likelihood(&data, a, b + h) - log_likelihood(&data, a, b - h)) / (2.0 * h);
        assert!((g[0] - fa).abs() <= 1e-4 * fa.abs().max(1.0));
        assert!((g[1] - fb).abs() <= 1e-4 * fb.abs().max(1.0));
    }

    #[test]
    fn empty_data_is_rejected() {
        let data = BernoulliData::new(&[], &[]).unwrap();
        assert!(fit_affine_bernoulli_with(&data, &FitOptions::default()).is_err());
        assert!(BernoulliData::new(&[1.2], &[1]).is_err());
        assert!(BernoulliData::new(&[0.2], &[2]).is_err());
    }

    #[test]
    fn deterministic() {
        let data = synthetic(0.5105, 0.4842, 1800, 9);
        let a = fit_affine_bernoulli_with(&data, &FitOptions::default()).unwrap();
        let b = fit_affine_bernoulli_with(&data, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
