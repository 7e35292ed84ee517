//! Command-line front end for the ghost imaging experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghost_imaging::error::Result;
use ghost_imaging::experiment::{
    execute, rerun, resolve_output_dir, Algorithm, Command, ExperimentConfig,
};

#[derive(Parser, Debug)]
#[command(name = "cgi", version, about = "Computational ghost imaging with a CS-CNN reconstructor")]
struct Cli {
    /// Configuration file of `key = value` lines (a manifest also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides CGI_OUT_DIR and the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied after the configuration file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    settings: Vec<String>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Frame counts, comma separated.
    #[arg(long)]
    frames: Option<String>,
    /// Algorithms, comma separated, from cgi, cs, dl, cscnn.
    #[arg(long)]
    algos: Option<String>,
    /// Measurement rate C / N of the CS-CNN arm.
    #[arg(long)]
    mr: Option<String>,
    /// Number of training blocks.
    #[arg(long)]
    train_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// `glyph:TEXT` or `pgm:PATH`.
    #[arg(long)]
    scene: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    cscnn_checkpoint: Option<String>,
    #[arg(long)]
    dl_checkpoint: Option<String>,
}

impl Common {
    fn settings(&self) -> Vec<(&'static str, &str)> {
        [
            ("frames", &self.frames),
            ("algorithms", &self.algos),
            ("mr", &self.mr),
            ("train_size", &self.train_size),
            ("epochs", &self.epochs),
            ("scene", &self.scene),
            ("noise_sigma", &self.noise_sigma),
            ("cscnn_checkpoint", &self.cscnn_checkpoint),
            ("dl_checkpoint", &self.dl_checkpoint),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Generate the training blocks and write them as image mosaics.
    GenData(#[command(flatten)] Common),
    /// Train the learned arms and write checkpoints and loss curves.
    Train(#[command(flatten)] Common),
    /// Simulate an acquisition and write the scene, patterns and buckets.
    Acquire(#[command(flatten)] Common),
    /// Reconstruct one image from stored patterns and buckets.
    Reconstruct {
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        buckets: PathBuf,
        /// Use only the first N frames.
        #[arg(long)]
        frames: Option<usize>,
        /// Ground-truth graymap; when given, metrics.csv is written.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Network checkpoint for dl and cscnn.
        #[arg(long)]
        checkpoint: Option<String>,
    },
    /// Run the algorithm comparison over the frame sweep.
    Compare(#[command(flatten)] Common),
    /// Score one graymap against a reference.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "image")]
        algo: String,
        #[arg(long, default_value_t = 0)]
        frames: usize,
    },
    /// Repeat the run recorded in a manifest.
    Rerun { manifest: PathBuf },
}

fn load_config(cli: &Cli, extra: &[(&str, &str)]) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    for s in &cli.settings {
        let (k, v) = s.split_once('=').ok_or_else(|| {
            ghost_imaging::error::Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{s}`"))
        })?;
        config.set(k.trim(), v.trim())?;
    }
    for (k, v) in extra {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let quiet = cli.quiet;
    let log = |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let (command, config) = match &cli.command {
        Sub::Rerun { manifest } => {
            let text = std::fs::read_to_string(manifest)?;
            let recorded = ghost_imaging::experiment::Manifest::parse(&text)?;
            let out = resolve_output_dir(cli.out.as_deref(), &recorded.config.output_dir);
            return rerun(&text, &out, log);
        }
        Sub::GenData(c) => (Command::GenData, load_config(cli, &c.settings())?),
        Sub::Train(c) => (Command::Train, load_config(cli, &c.settings())?),
        Sub::Acquire(c) => (Command::Acquire, load_config(cli, &c.settings())?),
        Sub::Compare(c) => (Command::Compare, load_config(cli, &c.settings())?),
        Sub::Reconstruct {
            algo,
            patterns,
            buckets,
            frames,
            reference,
            checkpoint,
        } => {
            let key = match algo {
                Algorithm::Dl => "dl_checkpoint",
                _ => "cscnn_checkpoint",
            };
            let extra: Vec<(&str, &str)> = checkpoint.as_deref().map(|c| (key, c)).into_iter().collect();
            let command = Command::Reconstruct {
                algorithm: *algo,
                patterns: patterns.clone(),
                buckets: buckets.clone(),
                frames: *frames,
                reference: reference.clone(),
            };
            (command, load_config(cli, &extra)?)
        }
        Sub::Metrics {
            reference,
            image,
            algo,
            frames,
        } => {
            let command = Command::Metrics {
                reference: reference.clone(),
                image: image.clone(),
                algorithm: algo.clone(),
                frames: *frames,
            };
            (command, load_config(cli, &[])?)
        }
    };
    let out = resolve_output_dir(cli.out.as_deref(), &config.output_dir);
    execute(&command, &config, &out, log)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
