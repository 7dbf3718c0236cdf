use serde::{Deserialize, Serialize};

use super::decisions::{group_by_participant, DecisionRecord};
use super::randomization::{randomization_test, Test1Report};
use crate::error::{invalid, Result};
use crate::rng::derive_seed;

/// One row of the per-participant Test 1 table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    /// Participant id, or `All` for the pooled row.
    pub participant: String,
    pub n: usize,
    pub b_bar: f64,
    pub a: f64,
    pub b: f64,
    pub p_a: String,
    pub p_b: String,
    pub reject_a: bool,
    pub reject_b: bool,
    pub on_boundary: bool,
}

impl ParticipantRow {
    pub fn from_report(participant: &str, report: &Test1Report) -> Self {
        Self {
            participant: participant.to_string(),
            n: report.n,
            b_bar: report.b_bar,
            a: report.a_hat,
            b: report.b_hat,
            p_a: report.p_a_text(),
            p_b: report.p_b_text(),
            reject_a: report.reject_a,
            reject_b: report.reject_b,
            on_boundary: report.on_boundary,
        }
    }
}

/// Test 1 for every participant, followed by the pooled `All` row.
pub fn participant_table(
    records: &[DecisionRecord],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(ParticipantRow, Test1Report)>> {
    let mut rows = Vec::new();
    for (i, (id, list)) in group_by_participant(records).into_iter().enumerate() {
        let report = randomization_test(&list, replicates, derive_seed(seed, i as u64 + 1))?;
        rows.push((ParticipantRow::from_report(&id, &report), report));
    }
    let pooled = randomization_test(records, replicates, seed)?;
    rows.push((ParticipantRow::from_report("All", &pooled), pooled));
    Ok(rows)
}

/// Acceptance counts for one `r_mh` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub trials: usize,
    pub accepted: usize,
    /// `None` for empty bins.
    pub acceptance_rate: Option<f64>,
}

/// Acceptance rate against `r_mh` in `bins` equal intervals of `[0, 1]`; the
/// last interval is closed.
pub fn acceptance_histogram(records: &[DecisionRecord], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    let mut trials = vec![0usize; bins];
    let mut accepted = vec![0usize; bins];
    for d in records {
        d.validate()?;
        let i = ((d.r_mh * bins as f64) as usize).min(bins - 1);
        trials[i] += 1;
        accepted[i] += usize::from(d.z);
    }
    Ok((0..bins)
        .map(|i| HistogramBin {
            lower: i as f64 / bins as f64,
            upper: (i + 1) as f64 / bins as f64,
            trials: trials[i],
            accepted: accepted[i],
            acceptance_rate: (trials[i] > 0).then(|| accepted[i] as f64 / trials[i] as f64),
        })
        .collect())
}
