use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{mh_terms, TrialRecord};
use crate::error::{invalid, Result};
use crate::model::{gibbs_theta_row, GibbsOptions, Hyperparams, SufficientStats};
use crate::rng::derive_seed;
use crate::stimulus::StimulusSet;

/// One listener decision paired with the acceptance terms inferred for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub participant_id: String,
    pub dataset_id: String,
    pub trial_index: usize,
    pub r_mh: f64,
    /// `theta_{s*}[c]`.
    pub numerator: f64,
    /// `theta_{s_li}[c]`.
    pub denominator: f64,
    pub z: u8,
}

impl DecisionRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_mh", self.r_mh),
            ("numerator", self.numerator),
            ("denominator", self.denominator),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!(
                    "trial {}: {name} = {v} outside [0, 1]",
                    self.trial_index
                )));
            }
        }
        if self.z > 1 {
            return Err(invalid(format!(
                "trial {}: z = {} is not 0 or 1",
                self.trial_index, self.z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InferenceOptions {
    pub hyper: Hyperparams,
    pub gibbs: GibbsOptions,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InferredDecisions {
    pub records: Vec<DecisionRecord>,
    /// Trials dropped because the listener's categorization was not recorded.
    pub skipped: usize,
}

/// Recomputes the acceptance terms of every listener decision.
///
/// For each trial the listener's recorded categorization and signs over the
/// dataset are treated as observed, `theta` is estimated by Gibbs sampling,
/// and the numerator, denominator and `r_mh` are read off at the listener's
/// category for the stimulus. A post-decision edit replaces that category.
/// Only the two `theta` rows a decision reads are estimated. Rows are cached
/// by their counts and seeded from them, so a trial's result does not depend
/// on which other trials are in the log.
pub fn infer_decisions(
    trials: &[TrialRecord],
    datasets: &[StimulusSet],
    options: &InferenceOptions,
) -> Result<InferredDecisions> {
    options.hyper.validate()?;
    let (k, l) = (options.hyper.categories(), options.hyper.signs());
    let mut cache: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    let mut out = InferredDecisions::default();

    for trial in trials {
        let dataset = datasets
            .iter()
            .find(|d| d.id == trial.dataset_id)
            .ok_or_else(|| {
                invalid(format!(
                    "trial {} refers to unknown dataset {:?}",
                    trial.trial_index, trial.dataset_id
                ))
            })?;
        let (Some(category), Some(snapshot)) =
            (trial.effective_category(), trial.listener_snapshot.as_ref())
        else {
            out.skipped += 1;
            continue;
        };
        if snapshot.categories.len() != dataset.len() || snapshot.signs.len() != dataset.len() {
            return Err(invalid(format!(
                "trial {}: snapshot covers {} stimuli, dataset {:?} has {}",
                trial.trial_index,
                snapshot.categories.len(),
                dataset.id,
                dataset.len()
            )));
        }
        if trial.stimulus_index >= dataset.len() {
            return Err(invalid(format!(
                "trial {}: stimulus {} out of range",
                trial.trial_index, trial.stimulus_index
            )));
        }
        let mut categories = snapshot.categories.clone();
        categories[trial.stimulus_index] = category;
        let stats =
            SufficientStats::from_data(&dataset.points(), &categories, &snapshot.signs, k, l)?;
        let counts = stats.sign_category_counts;
        let mut theta = vec![Vec::new(); l];
        for sign in [trial.speaker_sign, trial.listener_sign] {
            if sign >= l {
                return Err(invalid(format!(
                    "trial {}: sign {sign} out of range",
                    trial.trial_index
                )));
            }
            let row = &counts[sign];
            if !cache.contains_key(row) {
                let seed = derive_seed(options.seed, fingerprint(row));
                cache.insert(
                    row.clone(),
                    gibbs_theta_row(row, &options.hyper.alpha, options.gibbs, seed)?,
                );
            }
            theta[sign] = cache[row].clone();
        }
        let terms = mh_terms(category, &theta, trial.speaker_sign, trial.listener_sign)?;
        out.records.push(DecisionRecord {
            participant_id: trial.listener_id.clone(),
            dataset_id: trial.dataset_id.clone(),
            trial_index: trial.trial_index,
            r_mh: terms.r_mh,
            numerator: terms.numerator,
            denominator: terms.denominator,
            z: trial.z(),
        });
    }
    if out.skipped > 0 {
        log::warn!(
            "infer_decisions: skipped {} trials without a recorded categorization",
            out.skipped
        );
    }
    Ok(out)
}

// FNV-1a over a count row, used only to derive a seed.
fn fingerprint(row: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in row.iter().flat_map(|n| n.to_le_bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Decision records grouped by participant, in order of first appearance.
pub fn group_by_participant(records: &[DecisionRecord]) -> Vec<(String, Vec<DecisionRecord>)> {
    let mut groups: Vec<(String, Vec<DecisionRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(id, _)| *id == r.participant_id) {
            Some((_, list)) => list.push(r.clone()),
            None => groups.push((r.participant_id.clone(), vec![r.clone()])),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::KnowledgeSnapshot;
    use crate::stimulus::{builtin_stimuli, DatasetKind};

    fn trial(
        speaker_sign: usize,
        listener_sign: usize,
        snapshot: Option<KnowledgeSnapshot>,
    ) -> TrialRecord {
        TrialRecord {
            trial_index: 0,
            round: 0,
            dataset_id: "hard".into(),
            stimulus_index: 0,
            speaker_id: "A".into(),
            listener_id: "B".into(),
            speaker_sign,
            listener_sign,
            listener_category: Some(0),
            r_mh: None,
            accepted: true,
            post_edit: None,
            listener_snapshot: snapshot,
        }
    }

    fn snapshot() -> KnowledgeSnapshot {
        KnowledgeSnapshot {
            categories: (0..15).map(|i| i % 5).collect(),
            signs: (0..15).map(|i| i % 5).collect(),
        }
    }

    #[test]
    fn empty_log_gives_no_records() {
        let out = infer_decisions(&[], &[], &InferenceOptions::default()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn own_sign_proposal_has_unit_ratio() {
        let set = builtin_stimuli(DatasetKind::Hard, 15, 1).unwrap();
        let out = infer_decisions(
            &[trial(0, 0, Some(snapshot()))],
            &[set],
            &InferenceOptions::default(),
        )
        .unwrap();
        assert_eq!(out.records[0].r_mh, 1.0);
        assert_eq!(out.records[0].numerator, out.records[0].denominator);
    }

    #[test]
    fn foreign_sign_has_small_ratio() {
        // sign 0 was always used for category 0, sign 3 never
        let set = builtin_stimuli(DatasetKind::Hard, 15, 1).unwrap();
        let out = infer_decisions(
            &[trial(3, 0, Some(snapshot()))],
            &[set],
            &InferenceOptions::default(),
        )
        .unwrap();
        let r = &out.records[0];
        assert!(r.r_mh < 0.2, "{r:?}");
        assert!((r.r_mh - r.numerator / r.denominator).abs() < 1e-12);
    }

    #[test]
    fn missing_categorization_is_skipped() {
        let set = builtin_stimuli(DatasetKind::Hard, 15, 1).unwrap();
        let out =
            infer_decisions(&[trial(1, 0, None)], &[set], &InferenceOptions::default()).unwrap();
        assert_eq!(out.skipped, 1);
        assert!(out.records.is_empty());
    }

    #[test]
    fn unknown_dataset_is_an_error() {
        assert!(infer_decisions(
            &[trial(1, 0, Some(snapshot()))],
            &[],
            &InferenceOptions::default()
        )
        .is_err());
    }
}
