use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use mhng_core::color::{patch_file_name, render_patch, PatchStyle};
use mhng_core::stimulus::{builtin_stimuli, DatasetKind, DEFAULT_STIMULI};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Built-in dataset: hard or easy.
    #[arg(long)]
    dataset: DatasetKind,
    /// Number of stimuli.
    #[arg(long, default_value_t = DEFAULT_STIMULI)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Side of each PNG in pixels.
    #[arg(long, default_value_t = 128)]
    size: u32,
}

pub fn run(args: Args) -> Result<()> {
    let set = builtin_stimuli(args.dataset, args.n, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = args.out.join(format!("{}.json", set.id));
    fs::write(&manifest, set.to_manifest()?)
        .with_context(|| format!("writing {}", manifest.display()))?;
    let style = PatchStyle::default();
    for (i, s) in set.stimuli.iter().enumerate() {
        let png = render_patch(s.point(), args.size, &style)?.to_png()?;
        fs::write(args.out.join(patch_file_name(&set.id, i)), png)?;
    }
    println!(
        "wrote {} and {} images to {}",
        manifest.display(),
        set.len(),
        args.out.display()
    );
    Ok(())
}
