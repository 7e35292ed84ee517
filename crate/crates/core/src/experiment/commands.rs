use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::config::{Algorithm, ExperimentConfig};
use super::output::OutputStage;
use super::pipeline::{
    acquire_frames, compare, load_scene, reconstruct_with, train_model, training_set, Acquisition,
    Models, RunRecord,
};
use crate::container::{read_buckets, read_patterns, write_buckets, write_patterns};
use crate::error::{Error, Result};
use crate::image::SceneImage;
use crate::metrics::MetricReport;
use crate::nn::write_checkpoint;

/// Header of every metrics CSV.
pub const CSV_HEADER: &str = "algorithm,frames,psnr_db,ssim,wall_ms";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RESULTS_FILE: &str = "results.csv";

/// One invocation of the tool, everything beyond the shared configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    GenData,
    Train,
    Acquire,
    Reconstruct {
        algorithm: Algorithm,
        patterns: PathBuf,
        buckets: PathBuf,
        frames: Option<usize>,
        reference: Option<PathBuf>,
    },
    Compare,
    Metrics {
        reference: PathBuf,
        image: PathBuf,
        algorithm: String,
        frames: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Acquire => "acquire",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Compare => "compare",
            Command::Metrics { .. } => "metrics",
        }
    }

    fn args(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Path| p.display().to_string();
        match self {
            Command::Reconstruct {
                algorithm,
                patterns,
                buckets,
                frames,
                reference,
            } => {
                let mut v = vec![
                    ("algorithm", algorithm.tag().to_string()),
                    ("patterns", path(patterns)),
                    ("buckets", path(buckets)),
                ];
                if let Some(n) = frames {
                    v.push(("frames", n.to_string()));
                }
                if let Some(r) = reference {
                    v.push(("reference", path(r)));
                }
                v
            }
            Command::Metrics {
                reference,
                image,
                algorithm,
                frames,
            } => vec![
                ("reference", path(reference)),
                ("image", path(image)),
                ("algorithm", algorithm.clone()),
                ("frames", frames.to_string()),
            ],
            _ => Vec::new(),
        }
    }

    fn from_parts(name: &str, args: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            args.get(k)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("manifest lacks `arg.{k}`")))
        };
        let number = |s: String| {
            s.parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad frame count `{s}`")))
        };
        Ok(match name {
            "gen-data" => Command::GenData,
            "train" => Command::Train,
            "acquire" => Command::Acquire,
            "compare" => Command::Compare,
            "reconstruct" => Command::Reconstruct {
                algorithm: get("algorithm")?.parse()?,
                patterns: get("patterns")?.into(),
                buckets: get("buckets")?.into(),
                frames: args.get("frames").cloned().map(number).transpose()?,
                reference: args.get("reference").map(PathBuf::from),
            },
            "metrics" => Command::Metrics {
                reference: get("reference")?.into(),
                image: get("image")?.into(),
                algorithm: get("algorithm")?,
                frames: number(get("frames")?)?,
            },
            other => return Err(Error::invalid(format!("unknown command `{other}`"))),
        })
    }
}

/// Plain-text record of a run: the command, its arguments, the tool version and
/// the full configuration including every seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub command: Command,
    pub version: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: Command, config: ExperimentConfig) -> Self {
        Manifest {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# reproducibility manifest\n");
        writeln!(s, "command = {}", self.command.name()).expect("String write");
        writeln!(s, "version = {}", self.version).expect("String write");
        for (k, v) in self.command.args() {
            writeln!(s, "arg.{k} = {v}").expect("String write");
        }
        s.push_str(&self.config.to_text());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut command = None;
        let mut version = None;
        let mut args = BTreeMap::new();
        let mut config_lines = String::new();
        for line in text.lines() {
            let trimmed = line.trim();
            match trimmed.split_once('=') {
                Some((k, v)) if k.trim() == "command" => command = Some(v.trim().to_string()),
                Some((k, v)) if k.trim() == "version" => version = Some(v.trim().to_string()),
                Some((k, v)) if k.trim().starts_with("arg.") => {
                    args.insert(k.trim()["arg.".len()..].to_string(), v.trim().to_string());
                }
                _ => {
                    config_lines.push_str(line);
                    config_lines.push('\n');
                }
            }
        }
        let command = command.ok_or_else(|| Error::invalid("manifest lacks `command`"))?;
        Ok(Manifest {
            command: Command::from_parts(&command, &args)?,
            version: version.ok_or_else(|| Error::invalid("manifest lacks `version`"))?,
            config: ExperimentConfig::parse(&config_lines)?,
        })
    }
}

fn format_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// CSV text for `reports`, rows in the given order.
pub fn metrics_csv(reports: &[MetricReport], wall_ms: &[f64], deterministic: bool) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for (i, r) in reports.iter().enumerate() {
        let ms = if deterministic { 0.0 } else { wall_ms.get(i).copied().unwrap_or(0.0) };
        writeln!(
            s,
            "{},{},{},{},{:.0}",
            r.algorithm,
            r.frame_count,
            format_float(r.psnr),
            format_float(r.ssim),
            ms
        )
        .expect("String write");
    }
    s
}

/// `epoch,loss` CSV, epochs numbered from 1.
pub fn loss_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        writeln!(s, "{},{l:?}", i + 1).expect("String write");
    }
    s
}

fn pgm_bytes(image: &SceneImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image.write_pgm(&mut buf)?;
    Ok(buf)
}

fn read_pgm_file(path: &Path) -> Result<SceneImage> {
    SceneImage::read_pgm(BufReader::new(File::open(path)?))
}

/// Tiles equally sized square blocks into one image, `per_row` blocks per row.
fn mosaic(blocks: &[Vec<f64>], side: usize, per_row: usize) -> Result<SceneImage> {
    let rows = blocks.len().div_ceil(per_row);
    let (w, h) = (per_row * side, rows.max(1) * side);
    SceneImage::from_clamped(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let b = (y / side) * per_row + x / side;
                blocks.get(b).map_or(0.0, |blk| blk[(y % side) * side + x % side])
            })
            .collect(),
    )
}

fn timings_text(record: &RunRecord) -> String {
    let mut s = String::new();
    for t in &record.timings {
        writeln!(s, "{} = {:.3}", t.stage, t.millis).expect("String write");
    }
    s
}

/// Runs `command`, writing its outputs and manifest into `out_dir`. Nothing
/// appears in `out_dir` unless the whole command succeeds.
pub fn execute(
    command: &Command,
    config: &ExperimentConfig,
    out_dir: &Path,
    mut log: impl FnMut(&str),
) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let mut stage = OutputStage::new(out_dir)?;
    match command {
        Command::GenData => {
            let set = training_set(config)?;
            let side = crate::nn::Architecture::BLOCK_SIDE;
            let targets: Vec<Vec<f64>> = (0..set.len()).map(|i| set.target(i).to_vec()).collect();
            stage.write("train_inputs.pgm", &pgm_bytes(&mosaic(set.inputs(), side, 25)?)?)?;
            stage.write("train_targets.pgm", &pgm_bytes(&mosaic(&targets, side, 25)?)?)?;
            log(&format!("{} training blocks", set.len()));
        }
        Command::Train => {
            let set = training_set(config)?;
            let mut timings = String::new();
            for &algorithm in config.algorithms.iter().filter(|a| a.needs_model()) {
                let model = train_model(algorithm, &set, config, |epoch, loss| {
                    log(&format!("{algorithm} epoch {} loss {loss:.6}", epoch + 1))
                })?;
                if model.init_seed != config.init_seed {
                    log(&format!("{algorithm} started from init seed {}", model.init_seed));
                }
                let mut buf = Vec::new();
                write_checkpoint(&model.params, &mut buf)?;
                stage.write(&format!("{algorithm}.csnn"), &buf)?;
                stage.write(&format!("{algorithm}_loss.csv"), loss_csv(&model.history).as_bytes())?;
                writeln!(timings, "train:{algorithm} = {:.3}", model.millis).expect("String write");
            }
            if timings.is_empty() {
                return Err(Error::invalid("no learned algorithm (dl, cscnn) selected to train"));
            }
            if !config.deterministic {
                stage.write("timings.txt", timings.as_bytes())?;
            }
        }
        Command::Acquire => {
            let scene = load_scene(config)?;
            let frames = *config.frame_counts.iter().max().expect("validated nonempty");
            let data = acquire_frames(&scene, frames, config)?;
            let mut patterns = Vec::new();
            write_patterns(&data.patterns, &mut patterns)?;
            let mut buckets = Vec::new();
            write_buckets(&data.buckets, &mut buckets)?;
            stage.write("scene.pgm", &pgm_bytes(&scene)?)?;
            stage.write("patterns.cgi", &patterns)?;
            stage.write("buckets.cgi", &buckets)?;
            log(&format!("{frames} frames acquired"));
        }
        Command::Reconstruct {
            algorithm,
            patterns,
            buckets,
            frames,
            reference,
        } => {
            let patterns = read_patterns(BufReader::new(File::open(patterns)?))?;
            let buckets = read_buckets(BufReader::new(File::open(buckets)?))?;
            let mut data = Acquisition::new(patterns, buckets)?;
            if let Some(n) = frames {
                data = data.first(*n)?;
            }
            let reference = reference.as_deref().map(read_pgm_file).transpose()?;
            let mut models = Models::default();
            if algorithm.needs_model() {
                let restricted = ExperimentConfig {
                    algorithms: vec![*algorithm],
                    ..config.clone()
                };
                models = Models::load(&restricted)?;
            }
            let start = std::time::Instant::now();
            let image = reconstruct_with(*algorithm, &data, &models, config)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let n = data.frames();
            stage.write(&format!("{algorithm}_{n}.pgm"), &pgm_bytes(&image)?)?;
            if let Some(reference) = reference {
                let report = MetricReport::evaluate(&reference, &image, n, algorithm.tag())?;
                stage.write("metrics.csv", metrics_csv(&[report], &[ms], config.deterministic).as_bytes())?;
            }
        }
        Command::Compare => {
            let models = Models::load(config)?;
            let record = compare(config, &models)?;
            stage.write(
                RESULTS_FILE,
                metrics_csv(&record.reports, &record.wall_ms, config.deterministic).as_bytes(),
            )?;
            stage.write("scene.pgm", &pgm_bytes(&record.scene)?)?;
            for (r, image) in record.reports.iter().zip(&record.reconstructions) {
                stage.write(&format!("{}_{}.pgm", r.algorithm, r.frame_count), &pgm_bytes(image)?)?;
                log(&format!(
                    "{} n={} psnr {:.3} dB ssim {:.4}",
                    r.algorithm, r.frame_count, r.psnr, r.ssim
                ));
            }
            if !config.deterministic {
                stage.write("timings.txt", timings_text(&record).as_bytes())?;
            }
        }
        Command::Metrics {
            reference,
            image,
            algorithm,
            frames,
        } => {
            let reference = read_pgm_file(reference)?;
            let image = read_pgm_file(image)?;
            let report = MetricReport::evaluate(&reference, &image, *frames, algorithm.clone())?;
            log(&format!("psnr {:.6} dB ssim {:.6}", report.psnr, report.ssim));
            stage.write("metrics.csv", metrics_csv(&[report], &[0.0], true).as_bytes())?;
        }
    }
    let manifest = Manifest::new(
        command.clone(),
        ExperimentConfig {
            output_dir: out_dir.to_path_buf(),
            ..config.clone()
        },
    );
    stage.write(MANIFEST_FILE, manifest.to_text().as_bytes())?;
    stage.commit()
}

/// Re-runs the command recorded in a manifest, writing into `out_dir`.
pub fn rerun(manifest_text: &str, out_dir: &Path, log: impl FnMut(&str)) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::parse(manifest_text)?;
    execute(&manifest.command, &manifest.config, out_dir, log)
}
