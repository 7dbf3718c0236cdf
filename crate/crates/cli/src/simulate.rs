use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use mhng_core::engine::{simulate_cohort, ComparisonModel, EngineOptions, GameConfig};
use mhng_core::model::GibbsOptions;
use mhng_core::rng::derive_seed;
use mhng_core::session::{engine_log, now_millis, persist_event};
use mhng_core::stimulus::{builtin_stimuli, DatasetKind, DEFAULT_STIMULI};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Listener decision rule: mh, constant, numerator, subtraction or binary.
    #[arg(long, default_value = "mh")]
    model: ComparisonModel,
    /// Acceptance rate of the constant model.
    #[arg(long, default_value_t = 0.74)]
    b_bar: f64,
    /// Datasets in play order.
    #[arg(long, value_delimiter = ',', default_value = "hard,easy")]
    dataset: Vec<DatasetKind>,
    /// Stimuli per dataset.
    #[arg(long, default_value_t = DEFAULT_STIMULI)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Agent pairs; each contributes two participants.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event log to write (JSONL).
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    ensure!(!args.dataset.is_empty(), "at least one dataset is required");
    let datasets = args
        .dataset
        .iter()
        .enumerate()
        .map(|(i, kind)| builtin_stimuli(*kind, args.n, derive_seed(args.seed, i as u64 + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let config = GameConfig {
        stimuli_per_dataset: args.n,
        rounds: args.rounds,
        datasets: datasets.iter().map(|d| d.id.clone()).collect(),
        seed: args.seed,
    };
    let model = args.model.with_rate(args.b_bar);
    model.validate()?;
    let init = GibbsOptions {
        iterations: 300,
        burn_in: 100,
    };
    let trials = simulate_cohort(
        &datasets,
        &config,
        &model,
        &EngineOptions::default(),
        init,
        args.pairs,
        args.seed,
    )?;
    let session_id = format!("sim-{}-{}", args.model.name(), args.seed);
    let records = engine_log(&session_id, &config, &datasets, &trials, now_millis());
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    for r in &records {
        persist_event(&mut out, r)?;
    }
    out.flush()?;
    println!(
        "wrote {} trials from {} participants to {}",
        trials.len(),
        2 * args.pairs,
        args.out.display()
    );
    Ok(())
}
