use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `x` tends to be larger than `y`.
    #[default]
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    /// Normal approximation with tie and continuity corrections.
    #[default]
    Asymptotic,
    /// Exact null distribution of U, assuming no ties.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTest {
    /// U statistic of `x`.
    pub u: f64,
    pub p_value: f64,
}

/// One-sided (by default) Mann-Whitney U test with the normal approximation.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative) -> Result<UTest> {
    mann_whitney_u_with(x, y, alternative, UMethod::Asymptotic)
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    method: UMethod,
) -> Result<UTest> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("U test needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(invalid("U test samples contain NaN"));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (ranks, tie_term) = rank(x, y);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let u2 = n1 * n2 - u1;
    let p_value = match method {
        UMethod::Asymptotic => asymptotic(u1, u2, n1, n2, tie_term, alternative),
        UMethod::Exact => exact(u1, u2, x.len(), y.len(), alternative),
    };
    Ok(UTest { u: u1, p_value })
}

// Mid-ranks of the pooled sample and sum over tie groups of t^3 - t.
fn rank(x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

fn asymptotic(u1: f64, u2: f64, n1: f64, n2: f64, tie_term: f64, alternative: Alternative) -> f64 {
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        // every value tied: no evidence either way
        return 1.0;
    }
    let sd = var.sqrt();
    let (u, factor) = match alternative {
        Alternative::Greater => (u1, 1.0),
        Alternative::Less => (u2, 1.0),
        Alternative::TwoSided => (u1.max(u2), 2.0),
    };
    let z = (u - mu - 0.5) / sd;
    (factor * normal_sf(z)).clamp(0.0, 1.0)
}

// Null distribution of U by counting orderings, normalized to probabilities.
fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    let max_u = n1 * n2;
    // prev[j][u]: orderings of (i - 1) x-values and j y-values with statistic u
    let mut prev: Vec<Vec<f64>> = (0..=n2)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for _i in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n2 + 1];
        cur[0][0] = 1.0;
        for j in 1..=n2 {
            // last element is an x (exceeding all j y-values) or a y
            for u in 0..=max_u {
                let from_x = if u >= j { prev[j][u - j] } else { 0.0 };
                cur[j][u] = from_x + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    let counts = &prev[n2];
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

fn exact(u1: f64, u2: f64, n1: usize, n2: usize, alternative: Alternative) -> f64 {
    let dist = u_distribution(n1, n2);
    // P(U >= u) over the integer support
    let upper = |u: f64| -> f64 {
        let start = u.ceil().max(0.0) as usize;
        dist.iter().skip(start).sum()
    };
    let p = match alternative {
        Alternative::Greater => upper(u1),
        Alternative::Less => upper(u2),
        Alternative::TwoSided => 2.0 * upper(u1.max(u2)),
    };
    p.clamp(0.0, 1.0)
}
