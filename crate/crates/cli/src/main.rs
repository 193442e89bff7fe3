//! `ellimap` — batch pipeline driver: simulate a synthetic RGBD
//! sequence, build an object map from posed frames, relocalize query
//! frames against a map, and evaluate the result against ground truth.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ellimap_core::pipeline::{
    self, dataset, Config, EvalReport, MapFile, RelocRecord,
};
use ellimap_core::sim;

#[derive(Parser)]
#[command(name = "ellimap", version, about = "Object-level mapping and camera relocalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic RGBD dataset from the `[scene]` section of
    /// the config file.
    Simulate {
        /// TOML configuration with a `[scene]` section.
        #[arg(long)]
        config: PathBuf,
        /// Output dataset directory (created if missing).
        #[arg(long)]
        output: PathBuf,
        /// Overrides the scene seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build an object map from a dataset with ground-truth poses.
    BuildMap {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Output map file (JSON).
        #[arg(long)]
        output: PathBuf,
    },
    /// Relocalize every frame of a dataset against a map. Ground-truth
    /// poses are ignored.
    Relocalize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Map file produced by `build-map`.
        #[arg(long)]
        map: PathBuf,
        /// Output results file (JSON).
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare relocalization results with the dataset's ground truth.
    Evaluate {
        /// Results file produced by `relocalize`.
        #[arg(long)]
        results: PathBuf,
        /// Dataset directory providing `groundtruth.txt`.
        #[arg(long)]
        dataset: PathBuf,
        /// Optional JSON report output; the summary table always goes
        /// to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, output, seed } => {
            let cfg = Config::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let mut scene_cfg = cfg
                .scene
                .clone()
                .context("config has no [scene] section")?;
            if let Some(s) = seed {
                scene_cfg.seed = s;
            }
            let scene = scene_cfg.to_scene()?;
            let frames: Vec<_> = (0..scene.trajectory.len())
                .map(|i| sim::render_frame(&scene, i))
                .collect::<Result<_, _>>()?;
            fs::create_dir_all(&output)
                .with_context(|| format!("creating {}", output.display()))?;
            dataset::write_dataset(&output, &scene.camera, &frames)?;
            println!(
                "wrote {} frames ({} objects) to {}",
                frames.len(),
                scene.objects.len(),
                output.display()
            );
        }
        Command::BuildMap { config, dataset: dir, output } => {
            let cfg = load_config(&config)?;
            let loaded = dataset::read_dataset(&dir)?;
            let map = pipeline::build_map(&loaded.frames, &loaded.camera, &cfg)?;
            if map.objects.is_empty() {
                bail!("mapping produced no objects");
            }
            map.save(&output)?;
            println!("mapped {} objects into {}", map.objects.len(), output.display());
        }
        Command::Relocalize { config, dataset: dir, map, output } => {
            let cfg = load_config(&config)?;
            let loaded = dataset::read_dataset(&dir)?;
            let map = MapFile::load(&map)?;
            let records = pipeline::relocalize(&loaded.frames, &map, &loaded.camera, &cfg)?;
            let ok = records.iter().filter(|r| r.status == "ok").count();
            fs::write(&output, serde_json::to_string_pretty(&records)?)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("relocalized {}/{} frames into {}", ok, records.len(), output.display());
        }
        Command::Evaluate { results, dataset: dir, output } => {
            let s = fs::read_to_string(&results)
                .with_context(|| format!("reading {}", results.display()))?;
            let records: Vec<RelocRecord> = serde_json::from_str(&s)
                .with_context(|| format!("parsing {}", results.display()))?;
            let gt = dataset::read_groundtruth(&dir)?;
            let report: EvalReport = pipeline::evaluate(&records, &gt)?;
            print!("{}", report.table());
            if let Some(path) = output {
                fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
