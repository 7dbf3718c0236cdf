use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decisions::{group_by_participant, DecisionRecord};
use super::mwu::{mann_whitney_u, Alternative};
use crate::engine::{model_acceptance, ComparisonModel};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, substream};

/// Significance level for the pairwise U-tests.
pub const SIGNIFICANCE: f64 = 0.001;

/// Each participant's own acceptance rate.
pub fn acceptance_rates(records: &[DecisionRecord]) -> HashMap<String, f64> {
    group_by_participant(records)
        .into_iter()
        .map(|(id, list)| {
            let rate = list.iter().map(|d| f64::from(d.z)).sum::<f64>() / list.len() as f64;
            (id, rate)
        })
        .collect()
}

/// Pseudo-experimental decisions of `model` on every trial, one vector per
/// replicate. The constant model uses each participant's own acceptance rate.
pub fn simulate_model_decisions(
    records: &[DecisionRecord],
    model: ComparisonModel,
    replicates: usize,
    seed: u64,
) -> Vec<Vec<u8>> {
    let rates = acceptance_rates(records);
    let probabilities: Vec<f64> = records
        .iter()
        .map(|d| {
            let kind = model.with_rate(rates[&d.participant_id]);
            model_acceptance(&kind, d.r_mh, d.numerator, d.denominator).probability
        })
        .collect();
    (0..replicates)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, j as u64);
            probabilities
                .iter()
                .map(|&p| u8::from(rng.random::<f64>() < p))
                .collect()
        })
        .collect()
}

/// Fraction of positions where the two decision vectors agree.
pub fn precision(human: &[u8], model: &[u8]) -> Result<f64> {
    if human.len() != model.len() {
        return Err(invalid(format!(
            "decision vectors differ in length ({} vs {})",
            human.len(),
            model.len()
        )));
    }
    if human.is_empty() {
        return Err(invalid("precision of empty decision vectors"));
    }
    let matches = human.iter().zip(model).filter(|(h, m)| h == m).count();
    Ok(matches as f64 / human.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrecision {
    pub model: ComparisonModel,
    pub samples: Vec<f64>,
    pub mean: f64,
}

/// Precision samples of every model and the one-sided U-test matrix for one
/// set of trials. `p_values[i][j]` tests `Prec_i > Prec_j`; the diagonal is
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// `None` for the pooled table.
    pub participant_id: Option<String>,
    pub trials: usize,
    pub precision: Vec<ModelPrecision>,
    pub p_values: Vec<Vec<Option<f64>>>,
}

impl ComparisonTable {
    /// Whether `row` beats every other model at [`SIGNIFICANCE`].
    pub fn dominates(&self, row: ComparisonModel) -> bool {
        let i = model_index(row);
        self.p_values[i]
            .iter()
            .enumerate()
            .all(|(j, p)| j == i || p.is_some_and(|p| p < SIGNIFICANCE))
    }

    pub fn p_value(&self, row: ComparisonModel, column: ComparisonModel) -> Option<f64> {
        self.p_values[model_index(row)][model_index(column)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test2Report {
    pub models: Vec<ComparisonModel>,
    pub replicates: usize,
    pub significance: f64,
    pub participants: Vec<ComparisonTable>,
    pub pooled: ComparisonTable,
    /// `rejections[i][j]`: participants for whom `Prec_i > Prec_j` was significant.
    pub rejections: Vec<Vec<usize>>,
}

fn model_index(model: ComparisonModel) -> usize {
    ComparisonModel::ALL
        .iter()
        .position(|m| *m == model)
        .expect("model listed")
}

fn table(
    participant_id: Option<String>,
    indices: &[usize],
    human: &[u8],
    simulations: &[Vec<Vec<u8>>],
) -> Result<ComparisonTable> {
    let human_subset: Vec<u8> = indices.iter().map(|&i| human[i]).collect();
    let precision = ComparisonModel::ALL
        .iter()
        .zip(simulations)
        .map(|(&model, replicates)| {
            let samples = replicates
                .iter()
                .map(|z| {
                    let subset: Vec<u8> = indices.iter().map(|&i| z[i]).collect();
                    precision(&human_subset, &subset)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            Ok(ModelPrecision {
                model,
                samples,
                mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = precision.len();
    let mut p_values = vec![vec![None; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let t = mann_whitney_u(
                    &precision[i].samples,
                    &precision[j].samples,
                    Alternative::Greater,
                )?;
                p_values[i][j] = Some(t.p_value);
            }
        }
    }
    Ok(ComparisonTable {
        participant_id,
        trials: indices.len(),
        precision,
        p_values,
    })
}

/// Compares the five acceptance models by how often their simulated
/// decisions match the recorded ones, per participant and pooled.
pub fn pairwise_model_tests(
    records: &[DecisionRecord],
    replicates: usize,
    seed: u64,
) -> Result<Test2Report> {
    if records.is_empty() {
        return Err(invalid("no decisions"));
    }
    if replicates == 0 {
        return Err(invalid("at least one replicate is required"));
    }
    for d in records {
        d.validate()?;
    }
    let human: Vec<u8> = records.iter().map(|d| d.z).collect();
    let simulations: Vec<Vec<Vec<u8>>> = ComparisonModel::ALL
        .iter()
        .enumerate()
        .map(|(m, &model)| {
            simulate_model_decisions(records, model, replicates, derive_seed(seed, m as u64))
        })
        .collect();

    let mut participants = Vec::new();
    for (id, _) in group_by_participant(records) {
        let indices: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].participant_id == id)
            .collect();
        participants.push(table(Some(id), &indices, &human, &simulations)?);
    }
    let all: Vec<usize> = (0..records.len()).collect();
    let pooled = table(None, &all, &human, &simulations)?;

    let m = ComparisonModel::ALL.len();
    let mut rejections = vec![vec![0; m]; m];
    for t in &participants {
        for (i, row) in t.p_values.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if p.is_some_and(|p| p < SIGNIFICANCE) {
                    rejections[i][j] += 1;
                }
            }
        }
    }
    Ok(Test2Report {
        models: ComparisonModel::ALL.to_vec(),
        replicates,
        significance: SIGNIFICANCE,
        participants,
        pooled,
        rejections,
    })
}
