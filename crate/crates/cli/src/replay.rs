use std::path::PathBuf;

use anyhow::{Context, Result};
use mhng_core::session::replay_file;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    log: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let replay =
        replay_file(&args.log).with_context(|| format!("replaying {}", args.log.display()))?;
    let state = &replay.state;
    println!("session:  {}", state.session_id);
    println!("origin:   {:?}", replay.origin);
    println!("records:  {}", replay.records);
    println!("trials:   {}", replay.trials.len());
    println!("complete: {}", replay.complete);
    println!("phase:    {}", serde_json::to_string(&state.phase)?);
    println!("hash:     {}", state.hash());
    Ok(())
}
