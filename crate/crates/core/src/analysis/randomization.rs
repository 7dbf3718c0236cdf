use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decisions::DecisionRecord;
use super::fit::{fit_affine_bernoulli_with, BernoulliData, FitOptions, RatioGroups};
use crate::error::{invalid, Result};
use crate::rng::substream;

/// Reject "a = 0" when the upper-tail fraction at `a_hat` is at most this.
pub const A_LEVEL: f64 = 0.001;
/// Reject "b = b_bar" when the upper-tail fraction at `b_hat` leaves this band.
pub const B_LOWER: f64 = 0.0005;
pub const B_UPPER: f64 = 0.9995;
/// Fewer replicates than this draw a warning.
pub const MIN_STABLE_REPLICATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test1Report {
    pub n: usize,
    pub replicates: usize,
    pub b_bar: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub log_likelihood: f64,
    pub on_boundary: bool,
    pub degenerate: bool,
    pub null_a_samples: Vec<f64>,
    pub null_b_samples: Vec<f64>,
    pub p_a: f64,
    pub p_b: f64,
    pub reject_a: bool,
    pub reject_b: bool,
    pub warnings: Vec<String>,
}

impl Test1Report {
    pub fn p_a_text(&self) -> String {
        describe_p(self.p_a, self.replicates)
    }

    pub fn p_b_text(&self) -> String {
        describe_p(self.p_b, self.replicates)
    }
}

/// Fraction of `samples` that are `>= x`.
pub fn empirical_cdf_value(samples: &[f64], x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("empirical tail of an empty sample"));
    }
    Ok(samples.iter().filter(|&&s| s >= x).count() as f64 / samples.len() as f64)
}

/// Formats an empirical p-value; zero becomes `< 1/replicates`.
pub fn describe_p(p: f64, replicates: usize) -> String {
    if p == 0.0 && replicates > 0 {
        format!("< {}", 1.0 / replicates as f64)
    } else {
        format!("{p}")
    }
}

/// Test of whether decisions depend on `r_mh` beyond a constant acceptance rate.
///
/// The observed fit is compared with fits to `replicates` resampled decision
/// vectors drawn from `Bern(b_bar)` with the same `r_mh`. Replicate `i` uses
/// its own substream of `seed`, so the result does not depend on the number
/// of worker threads.
pub fn randomization_test(
    records: &[DecisionRecord],
    replicates: usize,
    seed: u64,
) -> Result<Test1Report> {
    randomization_test_with(records, replicates, seed, &FitOptions::default())
}

pub fn randomization_test_with(
    records: &[DecisionRecord],
    replicates: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<Test1Report> {
    if records.is_empty() {
        return Err(invalid("no decisions"));
    }
    if replicates == 0 {
        return Err(invalid("at least one replicate is required"));
    }
    let mut warnings = Vec::new();
    if replicates < MIN_STABLE_REPLICATES {
        let msg = format!("{replicates} replicates give unstable tail estimates (use at least {MIN_STABLE_REPLICATES})");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let r: Vec<f64> = records.iter().map(|d| d.r_mh).collect();
    let z: Vec<u8> = records.iter().map(|d| d.z).collect();
    let groups = RatioGroups::new(&r)?;
    let observed: BernoulliData = groups.tally(&z)?;
    let b_bar = observed.acceptance_rate();
    let fit = fit_affine_bernoulli_with(&observed, options)?;

    let null: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let z: Vec<u8> = (0..r.len())
                .map(|_| u8::from(rng.random::<f64>() < b_bar))
                .collect();
            let f = fit_affine_bernoulli_with(&groups.tally(&z)?, options)?;
            Ok((f.a, f.b))
        })
        .collect::<Result<_>>()?;
    let (null_a_samples, null_b_samples): (Vec<f64>, Vec<f64>) = null.into_iter().unzip();

    let p_a = empirical_cdf_value(&null_a_samples, fit.a)?;
    let p_b = empirical_cdf_value(&null_b_samples, fit.b)?;
    Ok(Test1Report {
        n: records.len(),
        replicates,
        b_bar,
        a_hat: fit.a,
        b_hat: fit.b,
        log_likelihood: fit.log_likelihood,
        on_boundary: fit.on_boundary,
        degenerate: fit.degenerate,
        null_a_samples,
        null_b_samples,
        p_a,
        p_b,
        reject_a: p_a <= A_LEVEL,
        reject_b: p_b >= B_UPPER || p_b <= B_LOWER,
        warnings,
    })
}
