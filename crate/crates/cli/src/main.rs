use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cinesplat::compress::{write_conformance_vectors, Profile};
use cinesplat::pipeline::{self, PipelineError, RunManifest, StageReport};

#[derive(Parser)]
#[command(name = "cinesplat", version, about = "Volume datasets to compressed Gaussian-splat scenes")]
struct Cli {
    /// Overrides the manifest seed for every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Compression profiles to produce or evaluate, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    profile: Vec<Profile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose cameras over the volume.
    SelectViews { manifest: PathBuf },
    /// Render ground-truth images for every camera and write the train/test split.
    Render { manifest: PathBuf },
    /// Fit Gaussians to the training images.
    Train { manifest: PathBuf },
    /// Fine-tune and encode the trained scene.
    Compress { manifest: PathBuf },
    /// Score the raw and compressed scenes on the test images.
    Evaluate { manifest: PathBuf },
    /// Every stage in order.
    All { manifest: PathBuf },
    /// Decode a container into an uncompressed scene file.
    Decompress { input: PathBuf, output: PathBuf },
    /// Write a synthetic volume and its preset.
    Phantom {
        /// sphere, hollow-shell or nested-spheres
        name: String,
        dir: PathBuf,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Write container conformance vectors.
    Conformance { dir: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<RunManifest, PipelineError> {
    let mut m = RunManifest::load(path)?;
    if let Some(seed) = cli.seed {
        m.set_seed(seed);
    }
    if !cli.profile.is_empty() {
        m.compress.profiles = cli.profile.clone();
    }
    Ok(m)
}

fn print(reports: &[StageReport]) {
    for r in reports {
        for a in &r.artifacts {
            println!("{}  {}", a.sha256, a.path.display());
        }
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let reports = match &cli.command {
        Command::SelectViews { manifest } => vec![pipeline::run_select_views(&load(cli, manifest)?)?],
        Command::Render { manifest } => vec![pipeline::run_render(&load(cli, manifest)?)?],
        Command::Train { manifest } => vec![pipeline::run_train(&load(cli, manifest)?)?],
        Command::Compress { manifest } => vec![pipeline::run_compress(&load(cli, manifest)?)?],
        Command::Evaluate { manifest } => {
            let m = load(cli, manifest)?;
            let r = pipeline::run_evaluate(&m)?;
            print_summary(&m);
            vec![r]
        }
        Command::All { manifest } => {
            let m = load(cli, manifest)?;
            let r = pipeline::run_all(&m)?;
            print_summary(&m);
            r
        }
        Command::Decompress { input, output } => vec![pipeline::decompress(input, output)?],
        Command::Phantom { name, dir, size } => {
            let (raw, preset) =
                pipeline::write_phantom(name, *size, dir).map_err(|e| PipelineError::Validation(e.to_string()))?;
            println!("{}\n{}", raw.display(), preset.display());
            vec![]
        }
        Command::Conformance { dir } => {
            let m = write_conformance_vectors(dir)
                .map_err(|source| PipelineError::Stage { stage: pipeline::Stage::Compress, source })?;
            println!("{} vectors in {}", m.vectors.len(), dir.display());
            vec![]
        }
    };
    print(&reports);
    Ok(())
}

fn print_summary(m: &RunManifest) {
    let path = pipeline::Layout::new(&m.output).summary_table();
    if let Ok(table) = std::fs::read_to_string(path) {
        print!("{table}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
