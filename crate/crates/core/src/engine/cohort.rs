use rayon::prelude::*;

use super::acceptance::AcceptanceModelKind;
use super::agent::LearningAgent;
use super::game::{run_naming_game, EngineOptions, GameConfig};
use super::record::TrialRecord;
use crate::error::{invalid, Result};
use crate::model::GibbsOptions;
use crate::rng::derive_seed;
use crate::stimulus::StimulusSet;

/// Ids of pair `pair`: `P01`/`P02` for the first pair, and so on.
pub fn pair_ids(pair: usize) -> [String; 2] {
    [
        format!("P{:02}", 2 * pair + 1),
        format!("P{:02}", 2 * pair + 2),
    ]
}

/// Simulates `pairs` independent agent pairs, each playing every dataset of
/// `config` in order with both listeners deciding under `model`.
///
/// Trial indices run from 0 within each pair across its datasets, as in a
/// live session. Pairs are concatenated in order.
pub fn simulate_cohort(
    datasets: &[StimulusSet],
    config: &GameConfig,
    model: &AcceptanceModelKind,
    options: &EngineOptions,
    init: GibbsOptions,
    pairs: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if pairs == 0 {
        return Err(invalid("a cohort needs at least one pair"));
    }
    let ordered = config
        .datasets
        .iter()
        .map(|id| {
            datasets
                .iter()
                .find(|d| &d.id == id)
                .ok_or_else(|| invalid(format!("dataset {id:?} not supplied")))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_pair = (0..pairs)
        .into_par_iter()
        .map(|pair| {
            let pair_seed = derive_seed(seed, pair as u64);
            let ids = pair_ids(pair);
            let options = EngineOptions {
                participant_ids: ids,
                ..options.clone()
            };
            let mut trials = Vec::new();
            for (d, set) in ordered.iter().enumerate() {
                let ds = derive_seed(pair_seed, d as u64);
                let agent = |side: u64| {
                    LearningAgent::initialize(
                        set.points(),
                        options.hyper.clone(),
                        options.estimate,
                        init,
                        derive_seed(ds, side + 1),
                    )
                    .map(|a| a.state)
                };
                let agents = (agent(0)?, agent(1)?);
                let out =
                    run_naming_game(agents, set, config, model, &options, derive_seed(ds, 0))?;
                let offset = trials.len();
                trials.extend(out.history.into_iter().map(|t| TrialRecord {
                    trial_index: offset + t.trial_index,
                    ..t
                }));
            }
            Ok(trials)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}
