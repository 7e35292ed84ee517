use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::cs::DEFAULT_ITERATIONS;
use crate::error::{Error, Result};
use crate::nn::{Architecture, Optimizer};
use crate::optics::PatternKind;

/// A reconstruction algorithm taking part in a comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    /// Normalized correlation image.
    Cgi,
    /// Whole-image ISTA with a DCT sparsity prior.
    Cs,
    /// The network with an uncompressed first layer (C = N).
    Dl,
    /// The network with the configured measurement rate.
    CsCnn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Cgi, Algorithm::Cs, Algorithm::Dl, Algorithm::CsCnn];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Cgi => "cgi",
            Algorithm::Cs => "cs",
            Algorithm::Dl => "dl",
            Algorithm::CsCnn => "cscnn",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Algorithm::Dl | Algorithm::CsCnn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

/// Where the test scene comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum SceneSource {
    /// Text rendered by the built-in glyph generator.
    Glyph(String),
    /// An 8-bit P5 graymap.
    Graymap(PathBuf),
}

/// What the network learns to reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingTarget {
    /// Clean block in, same block out.
    Autoencoding,
    /// Normalized correlation-image block in, clean block out.
    Denoising,
}

/// Every setting of a run. Serializes to and parses from `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneSource,
    pub width: usize,
    pub height: usize,
    pub frame_counts: Vec<usize>,
    pub measurement_rate: f64,
    pub train_size: usize,
    pub algorithms: Vec<Algorithm>,
    pub pattern_kind: PatternKind,
    /// Side of the square speckle cell in pixels.
    pub grain: usize,
    pub noise_sigma: f64,
    pub pattern_seed: u64,
    pub noise_seed: u64,
    pub dataset_seed: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    pub training_target: TrainingTarget,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub cs_iterations: usize,
    /// ISTA weight as a fraction of the smallest weight giving an all-zero solution.
    pub cs_lambda_ratio: f64,
    pub cscnn_checkpoint: Option<PathBuf>,
    pub dl_checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Writes `wall_ms` as 0 so result files are byte-reproducible.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: SceneSource::Glyph("QFNU".into()),
            width: 200,
            height: 200,
            frame_counts: vec![100, 200, 300, 400],
            measurement_rate: 0.25,
            train_size: 1000,
            algorithms: Algorithm::ALL.to_vec(),
            pattern_kind: PatternKind::Binary,
            grain: 5,
            noise_sigma: 0.0,
            pattern_seed: 1,
            noise_seed: 2,
            dataset_seed: 3,
            init_seed: 4,
            train_seed: 5,
            training_target: TrainingTarget::Denoising,
            epochs: 60,
            learning_rate: 1e-4,
            batch_size: 32,
            optimizer: Optimizer::Adam,
            cs_iterations: DEFAULT_ITERATIONS,
            cs_lambda_ratio: 0.01,
            cscnn_checkpoint: None,
            dl_checkpoint: None,
            output_dir: PathBuf::from("out"),
            deterministic: true,
        }
    }
}

/// Keys a manifest carries in addition to the configuration.
const MANIFEST_KEYS: [&str; 2] = ["command", "version"];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("bad value `{value}` for `{key}`"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults. Blank lines and lines
    /// starting with `#` are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scene" => {
                self.scene = match value.split_once(':') {
                    Some(("glyph", text)) => SceneSource::Glyph(text.to_string()),
                    Some(("pgm", path)) => SceneSource::Graymap(PathBuf::from(path)),
                    _ => return Err(Error::invalid(format!("scene must be glyph:TEXT or pgm:PATH, got `{value}`"))),
                }
            }
            "width" => self.width = parse_value(key, value)?,
            "height" => self.height = parse_value(key, value)?,
            "frames" => self.frame_counts = parse_list(key, value)?,
            "mr" => self.measurement_rate = parse_value(key, value)?,
            "train_size" => self.train_size = parse_value(key, value)?,
            "algorithms" => self.algorithms = parse_list(key, value)?,
            "pattern_kind" => {
                self.pattern_kind = match value {
                    "binary" => PatternKind::Binary,
                    "gaussian" => PatternKind::GaussianIntensity,
                    _ => return Err(Error::invalid(format!("bad pattern kind `{value}`"))),
                }
            }
            "grain" => self.grain = parse_value(key, value)?,
            "noise_sigma" => self.noise_sigma = parse_value(key, value)?,
            "pattern_seed" => self.pattern_seed = parse_value(key, value)?,
            "noise_seed" => self.noise_seed = parse_value(key, value)?,
            "dataset_seed" => self.dataset_seed = parse_value(key, value)?,
            "init_seed" => self.init_seed = parse_value(key, value)?,
            "train_seed" => self.train_seed = parse_value(key, value)?,
            "training_target" => {
                self.training_target = match value {
                    "autoencoding" => TrainingTarget::Autoencoding,
                    "denoising" => TrainingTarget::Denoising,
                    _ => return Err(Error::invalid(format!("bad training target `{value}`"))),
                }
            }
            "epochs" => self.epochs = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "momentum" => Optimizer::SgdMomentum,
                    "adam" => Optimizer::Adam,
                    _ => return Err(Error::invalid(format!("bad optimizer `{value}`"))),
                }
            }
            "cs_iterations" => self.cs_iterations = parse_value(key, value)?,
            "cs_lambda_ratio" => self.cs_lambda_ratio = parse_value(key, value)?,
            "cscnn_checkpoint" => self.cscnn_checkpoint = optional_path(value),
            "dl_checkpoint" => self.dl_checkpoint = optional_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "deterministic" => self.deterministic = parse_bool(key, value)?,
            k if MANIFEST_KEYS.contains(&k) => {}
            _ => return Err(Error::invalid(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be nonzero"));
        }
        if self.frame_counts.is_empty() || self.frame_counts.iter().any(|&n| n == 0) {
            return Err(Error::invalid("frame counts must be positive"));
        }
        if !(self.measurement_rate > 0.0 && self.measurement_rate <= 1.0) {
            return Err(Error::invalid("measurement rate must lie in (0, 1]"));
        }
        if self.train_size == 0 {
            return Err(Error::invalid("training size must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithms selected"));
        }
        if self.grain == 0 {
            return Err(Error::invalid("grain must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if !(self.cs_lambda_ratio >= 0.0 && self.cs_lambda_ratio.is_finite()) {
            return Err(Error::invalid("cs lambda ratio must be finite and >= 0"));
        }
        Ok(())
    }

    /// First-layer width for the CS-CNN arm: `round(MR * N)`, at least 1.
    pub fn compression(&self) -> usize {
        let n = Architecture::BLOCK_SIDE * Architecture::BLOCK_SIDE;
        ((self.measurement_rate * n as f64).round() as usize).clamp(1, n)
    }

    /// Canonical `key = value` text; [`ExperimentConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let scene = match &self.scene {
            SceneSource::Glyph(t) => format!("glyph:{t}"),
            SceneSource::Graymap(p) => format!("pgm:{}", p.display()),
        };
        let algorithms: Vec<&str> = self.algorithms.iter().map(|a| a.tag()).collect();
        let kind = match self.pattern_kind {
            PatternKind::Binary => "binary",
            PatternKind::GaussianIntensity => "gaussian",
        };
        let target = match self.training_target {
            TrainingTarget::Autoencoding => "autoencoding",
            TrainingTarget::Denoising => "denoising",
        };
        let optimizer = match self.optimizer {
            Optimizer::Sgd => "sgd",
            Optimizer::SgdMomentum => "momentum",
            Optimizer::Adam => "adam",
        };
        let entries: [(&str, String); 26] = [
            ("scene", scene),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("frames", list(&self.frame_counts)),
            ("mr", self.measurement_rate.to_string()),
            ("train_size", self.train_size.to_string()),
            ("algorithms", algorithms.join(",")),
            ("pattern_kind", kind.into()),
            ("grain", self.grain.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("pattern_seed", self.pattern_seed.to_string()),
            ("noise_seed", self.noise_seed.to_string()),
            ("dataset_seed", self.dataset_seed.to_string()),
            ("init_seed", self.init_seed.to_string()),
            ("train_seed", self.train_seed.to_string()),
            ("training_target", target.into()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("optimizer", optimizer.into()),
            ("cs_iterations", self.cs_iterations.to_string()),
            ("cs_lambda_ratio", self.cs_lambda_ratio.to_string()),
            ("cscnn_checkpoint", path(&self.cscnn_checkpoint)),
            ("dl_checkpoint", path(&self.dl_checkpoint)),
            ("output_dir", self.output_dir.display().to_string()),
            ("deterministic", self.deterministic.to_string()),
        ];
        for (k, v) in entries {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }
}
