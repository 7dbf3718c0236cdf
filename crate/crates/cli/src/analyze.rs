use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhng_core::analysis::{
    acceptance_histogram, infer_decisions, pairwise_model_tests, participant_table, DecisionRecord,
    HistogramBin, InferenceOptions, ParticipantRow, Test1Report, Test2Report,
};
use mhng_core::engine::ComparisonModel;
use mhng_core::session::{replay_file, ReplayError};
use serde::Serialize;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Event log (JSONL); repeat for several sessions.
    #[arg(long, required = true)]
    log: Vec<PathBuf>,
    /// Run the affine-Bernoulli randomization test.
    #[arg(long)]
    test1: bool,
    /// Run the model-comparison U-tests.
    #[arg(long)]
    test2: bool,
    /// Null replicates for test 1.
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Pseudo-experiments per model for test 2.
    #[arg(long, default_value_t = 100)]
    test2_replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report document (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write CSV tables into this directory.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Bins of the acceptance-rate histogram.
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    logs: Vec<String>,
    decisions: usize,
    skipped_trials: usize,
    incomplete_sessions: Vec<String>,
    histogram: Vec<HistogramBin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test1: Option<Test1Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test2: Option<Test2Report>,
}

#[derive(Debug, Serialize)]
struct Test1Section {
    participants: Vec<ParticipantRow>,
    pooled: Test1Report,
}

struct Loaded {
    records: Vec<DecisionRecord>,
    skipped: usize,
    incomplete: Vec<String>,
}

fn load(logs: &[PathBuf], seed: u64) -> Result<Loaded> {
    let mut loaded = Loaded {
        records: Vec::new(),
        skipped: 0,
        incomplete: Vec::new(),
    };
    let mut sessions = BTreeSet::new();
    for path in logs {
        let replay = match replay_file(path) {
            Ok(r) => r,
            Err(ReplayError::Empty) => continue,
            Err(e) => return Err(e).with_context(|| format!("replaying {}", path.display())),
        };
        let id = replay.state.session_id.clone();
        if !sessions.insert(id.clone()) {
            bail!("session {id:?} appears in more than one log");
        }
        if !replay.complete {
            log::warn!(
                "{}: session {id:?} did not finish; using its {} complete trials",
                path.display(),
                replay.trials.len()
            );
            loaded.incomplete.push(id);
        }
        let options = InferenceOptions {
            seed,
            ..InferenceOptions::default()
        };
        let inferred = infer_decisions(&replay.trials, &replay.state.datasets, &options)?;
        loaded.skipped += inferred.skipped;
        loaded.records.extend(inferred.records);
    }
    Ok(loaded)
}

pub fn run(args: Args) -> Result<()> {
    let (test1, test2) = if args.test1 || args.test2 {
        (args.test1, args.test2)
    } else {
        (true, true)
    };
    let loaded = load(&args.log, args.seed)?;
    if loaded.records.is_empty() {
        bail!("no decisions found in the given log(s)");
    }
    let records = &loaded.records;
    let mut report = Report {
        logs: args.log.iter().map(|p| p.display().to_string()).collect(),
        decisions: records.len(),
        skipped_trials: loaded.skipped,
        incomplete_sessions: loaded.incomplete,
        histogram: acceptance_histogram(records, args.bins)?,
        test1: None,
        test2: None,
    };
    if test1 {
        let mut rows = participant_table(records, args.replicates, args.seed)?;
        let (_, pooled) = rows.pop().expect("pooled row");
        let section = Test1Section {
            participants: rows.into_iter().map(|(r, _)| r).collect(),
            pooled,
        };
        for w in &section.pooled.warnings {
            log::warn!("test 1: {w}");
        }
        let p = &section.pooled;
        println!(
            "test 1 (n = {}): a = {:.4}, b = {:.4}, P'_a = {} ({}), P'_b = {} ({})",
            p.n,
            p.a_hat,
            p.b_hat,
            p.p_a_text(),
            if p.reject_a { "reject" } else { "keep" },
            p.p_b_text(),
            if p.reject_b { "reject" } else { "keep" },
        );
        report.test1 = Some(section);
    }
    if test2 {
        let t2 = pairwise_model_tests(records, args.test2_replicates, args.seed)?;
        for m in &t2.pooled.precision {
            println!(
                "test 2: {:<11} mean precision {:.4}",
                m.model.name(),
                m.mean
            );
        }
        println!(
            "test 2: MH dominates every other model: {}",
            t2.pooled.dominates(ComparisonModel::Mh)
        );
        report.test2 = Some(t2);
    }
    fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(dir) = &args.tables {
        write_tables(dir, &report)?;
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn write_tables(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("histogram.csv"))?;
    for bin in &report.histogram {
        w.serialize(bin)?;
    }
    w.flush()?;
    if let Some(t1) = &report.test1 {
        let mut w = csv::Writer::from_path(dir.join("test1_participants.csv"))?;
        for row in &t1.participants {
            w.serialize(row)?;
        }
        w.serialize(ParticipantRow::from_report("All", &t1.pooled))?;
        w.flush()?;
    }
    if let Some(t2) = &report.test2 {
        let mut w = csv::Writer::from_path(dir.join("test2_pvalues.csv"))?;
        let mut header = vec!["model".to_string()];
        header.extend(t2.models.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        for (i, row) in t2.pooled.p_values.iter().enumerate() {
            let mut line = vec![t2.models[i].name().to_string()];
            line.extend(
                row.iter()
                    .map(|p| p.map(|p| format!("{p:.3e}")).unwrap_or_default()),
            );
            w.write_record(&line)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("test2_rejections.csv"))?;
        w.write_record(&header)?;
        for (i, row) in t2.rejections.iter().enumerate() {
            let mut line = vec![t2.models[i].name().to_string()];
            line.extend(row.iter().map(|n| n.to_string()));
            w.write_record(&line)?;
        }
        w.flush()?;
    }
    Ok(())
}
