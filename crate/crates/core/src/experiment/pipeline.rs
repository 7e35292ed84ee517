use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, ExperimentConfig, SceneSource, TrainingTarget};
use super::dataset::{generate_cgi_dataset, generate_dataset, AcquisitionSpec, DatasetSpec};
use super::glyph::render_text;
use crate::cs::{cs_gi_system, partition, vectorize, BlockGrid, BlockVector, IstaSolver};
use crate::error::{Error, Result};
use crate::image::SceneImage;
use crate::metrics::MetricReport;
use crate::nn::{infer_image, init_params, min_live_fraction, read_checkpoint, train_with_progress, Architecture};
use crate::nn::{NetworkParams, TrainingConfig, TrainingSet};
use crate::optics::{
    acquire, generate_speckle_patterns, normalize_image, reconstruct_cgi, BucketSeries,
    CorrelationImage, PatternSet,
};

/// The test scene described by the configuration.
pub fn load_scene(config: &ExperimentConfig) -> Result<SceneImage> {
    let scene = match &config.scene {
        SceneSource::Glyph(text) => render_text(text, config.width, config.height)?,
        SceneSource::Graymap(path) => SceneImage::read_pgm(BufReader::new(File::open(path)?))?,
    };
    if scene.width() != config.width || scene.height() != config.height {
        return Err(Error::mismatch(
            format!("{}x{} scene", config.width, config.height),
            format!("{}x{}", scene.width(), scene.height()),
        ));
    }
    Ok(scene)
}

/// Patterns and the bucket readings they produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub patterns: PatternSet,
    pub buckets: BucketSeries,
}

impl Acquisition {
    pub fn new(patterns: PatternSet, buckets: BucketSeries) -> Result<Self> {
        if patterns.count() != buckets.len() {
            return Err(Error::mismatch(
                format!("{} bucket values", patterns.count()),
                buckets.len(),
            ));
        }
        if patterns.seed() != buckets.pattern_seed {
            return Err(Error::invalid(format!(
                "buckets were taken with pattern seed {}, patterns have seed {}",
                buckets.pattern_seed,
                patterns.seed()
            )));
        }
        Ok(Acquisition { patterns, buckets })
    }

    pub fn frames(&self) -> usize {
        self.patterns.count()
    }

    /// The first `n` frames.
    pub fn first(&self, n: usize) -> Result<Acquisition> {
        if n > self.frames() {
            return Err(Error::invalid(format!(
                "{n} frames requested, {} acquired",
                self.frames()
            )));
        }
        Ok(Acquisition {
            patterns: self.patterns.truncated(n),
            buckets: self.buckets.truncated(n),
        })
    }
}

/// Simulates `frames` exposures of `scene` with the configured patterns, noise and seeds.
pub fn acquire_frames(scene: &SceneImage, frames: usize, config: &ExperimentConfig) -> Result<Acquisition> {
    let patterns = generate_speckle_patterns(
        frames,
        scene.width(),
        scene.height(),
        config.pattern_kind,
        config.grain,
        config.pattern_seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
    let buckets = acquire(scene, &patterns, config.noise_sigma, &mut rng)?;
    Acquisition::new(patterns, buckets)
}

/// Normalized correlation image.
pub fn cgi_reconstruction(data: &Acquisition) -> Result<SceneImage> {
    normalize_image(&reconstruct_cgi(&data.patterns, &data.buckets)?)
}

/// Whole-image ISTA with weight `lambda_ratio` times the data's zero-solution threshold.
pub fn cs_reconstruction(data: &Acquisition, lambda_ratio: f64, iterations: usize) -> Result<SceneImage> {
    let (a, y) = cs_gi_system(&data.patterns, &data.buckets)?;
    let solver = IstaSolver::new(&a, data.patterns.width(), data.patterns.height())?;
    let lambda = lambda_ratio * solver.lambda_max(&y);
    let outcome = solver.solve(&y, lambda, iterations)?;
    normalize_image(&CorrelationImage {
        width: data.patterns.width(),
        height: data.patterns.height(),
        values: outcome.estimate,
    })
}

/// Correlation image, cut into blocks and passed through the network.
pub fn network_reconstruction(data: &Acquisition, params: &NetworkParams) -> Result<SceneImage> {
    let preliminary = cgi_reconstruction(data)?;
    let (grid, blocks) = partition(&preliminary, params.architecture().block_side)?;
    let vectors: Vec<BlockVector> = blocks.iter().map(vectorize).collect();
    infer_image(params, &vectors, &grid)
}

/// Acquires `frames` exposures, reconstructs with the network and scores the result.
pub fn run_pipeline_cscnn(
    scene: &SceneImage,
    frames: usize,
    params: &NetworkParams,
    config: &ExperimentConfig,
) -> Result<(SceneImage, MetricReport)> {
    let data = acquire_frames(scene, frames, config)?;
    let image = network_reconstruction(&data, params)?;
    let report = MetricReport::evaluate(scene, &image, frames, Algorithm::CsCnn.tag())?;
    Ok((image, report))
}

/// Trained networks for the two learned arms.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub cscnn: Option<NetworkParams>,
    pub dl: Option<NetworkParams>,
}

impl Models {
    fn get(&self, algorithm: Algorithm) -> Result<&NetworkParams> {
        let model = match algorithm {
            Algorithm::CsCnn => self.cscnn.as_ref(),
            Algorithm::Dl => self.dl.as_ref(),
            _ => None,
        };
        model.ok_or_else(|| Error::invalid(format!("no model checkpoint for `{algorithm}`")))
    }

    /// Loads the checkpoints named in the configuration for every learned algorithm it selects.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let mut models = Models::default();
        for &algorithm in &config.algorithms {
            let (path, slot) = match algorithm {
                Algorithm::CsCnn => (&config.cscnn_checkpoint, &mut models.cscnn),
                Algorithm::Dl => (&config.dl_checkpoint, &mut models.dl),
                _ => continue,
            };
            let path = path.as_ref().ok_or_else(|| {
                Error::invalid(format!("algorithm `{algorithm}` needs a model checkpoint"))
            })?;
            let params = read_checkpoint(BufReader::new(File::open(path)?))?;
            check_model(algorithm, &params, config)?;
            *slot = Some(params);
        }
        Ok(models)
    }
}

/// First-layer width each learned arm must have.
pub fn model_compression(algorithm: Algorithm, config: &ExperimentConfig) -> usize {
    match algorithm {
        Algorithm::Dl => Architecture::BLOCK_SIDE * Architecture::BLOCK_SIDE,
        _ => config.compression(),
    }
}

fn check_model(algorithm: Algorithm, params: &NetworkParams, config: &ExperimentConfig) -> Result<()> {
    let expected = Architecture::standard(model_compression(algorithm, config));
    if params.architecture() != &expected {
        return Err(Error::invalid(format!(
            "checkpoint for `{algorithm}` has C = {}, expected {}",
            params.architecture().compression,
            expected.compression
        )));
    }
    Ok(())
}

/// One reconstruction by `algorithm` from shared acquisition data.
pub fn reconstruct_with(
    algorithm: Algorithm,
    data: &Acquisition,
    models: &Models,
    config: &ExperimentConfig,
) -> Result<SceneImage> {
    match algorithm {
        Algorithm::Cgi => cgi_reconstruction(data),
        Algorithm::Cs => cs_reconstruction(data, config.cs_lambda_ratio, config.cs_iterations),
        Algorithm::Dl | Algorithm::CsCnn => network_reconstruction(data, models.get(algorithm)?),
    }
}

/// The training blocks described by the configuration.
pub fn training_set(config: &ExperimentConfig) -> Result<TrainingSet> {
    let grid = BlockGrid::new(config.width, config.height, Architecture::BLOCK_SIDE)?;
    let spec = DatasetSpec::new(config.train_size, grid, config.dataset_seed);
    match config.training_target {
        TrainingTarget::Autoencoding => generate_dataset(&spec),
        TrainingTarget::Denoising => generate_cgi_dataset(
            &spec,
            &AcquisitionSpec {
                frame_counts: config.frame_counts.clone(),
                kind: config.pattern_kind,
                noise_sigma: config.noise_sigma,
                grain: config.grain,
            },
        ),
    }
}

/// A trained network with its per-epoch loss.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub algorithm: Algorithm,
    pub params: NetworkParams,
    pub history: Vec<f64>,
    /// Seed of the initialization actually trained; see [`INIT_REDRAWS`].
    pub init_seed: u64,
    pub millis: f64,
}

/// How many seeds [`train_model`] tries for a starting point.
pub const INIT_REDRAWS: u64 = 16;
const REDRAW_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;
/// A starting point is usable when, on the first [`INIT_PROBE_BLOCKS`] training
/// inputs, every ReLU layer has at least this fraction of units firing.
pub const MIN_LIVE_FRACTION: f64 = 0.5;
pub const INIT_PROBE_BLOCKS: usize = 100;

/// First initialization from `init_seed, init_seed + s, init_seed + 2s, ...`
/// whose ReLU layers are mostly alive on `set`. Falls back to `init_seed` if
/// none is. The large odd stride keeps nearby seeds from sharing a redraw.
fn starting_point(compression: usize, set: &TrainingSet, init_seed: u64) -> Result<(u64, NetworkParams)> {
    let probe: Vec<&[f64]> = set.inputs().iter().take(INIT_PROBE_BLOCKS).map(|b| b.as_slice()).collect();
    for k in 0..INIT_REDRAWS {
        let seed = init_seed.wrapping_add(k.wrapping_mul(REDRAW_STRIDE));
        let params = init_params(compression, seed)?;
        if min_live_fraction(&params, &probe)? >= MIN_LIVE_FRACTION {
            return Ok((seed, params));
        }
    }
    Ok((init_seed, init_params(compression, init_seed)?))
}

/// Trains the arm `algorithm` on `set` with the configured budget and seeds.
pub fn train_model(
    algorithm: Algorithm,
    set: &TrainingSet,
    config: &ExperimentConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedModel> {
    if !algorithm.needs_model() {
        return Err(Error::invalid(format!("`{algorithm}` has no model to train")));
    }
    let start = Instant::now();
    let (init_seed, init) = starting_point(model_compression(algorithm, config), set, config.init_seed)?;
    let training = TrainingConfig {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed: config.train_seed,
        optimizer: config.optimizer,
        ..TrainingConfig::default()
    };
    let (params, history) = train_with_progress(&init, set, &training, on_epoch)?;
    Ok(TrainedModel {
        algorithm,
        params,
        history,
        init_seed,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Wall-clock time of one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// Everything a comparison produced.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// One report per (algorithm, frame count), sorted by algorithm then frames.
    pub reports: Vec<MetricReport>,
    pub reconstructions: Vec<SceneImage>,
    /// Reconstruction time per report.
    pub wall_ms: Vec<f64>,
    pub timings: Vec<StageTiming>,
    pub scene: SceneImage,
}

impl RunRecord {
    pub fn report(&self, algorithm: Algorithm, frames: usize) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.algorithm == algorithm.tag() && r.frame_count == frames)
    }
}

/// Runs every selected algorithm at every frame count. All of them read the
/// same acquisition: the first `n` frames of one simulated sequence.
pub fn compare(config: &ExperimentConfig, models: &Models) -> Result<RunRecord> {
    config.validate()?;
    for &a in &config.algorithms {
        if a.needs_model() {
            let params = models.get(a)?;
            check_model(a, params, config)?;
        }
    }
    let mut timings = Vec::new();
    let clock = Instant::now();
    let scene = load_scene(config)?;
    let max_frames = *config.frame_counts.iter().max().expect("validated nonempty");
    let all = acquire_frames(&scene, max_frames, config)?;
    timings.push(StageTiming {
        stage: "acquire".into(),
        millis: clock.elapsed().as_secs_f64() * 1e3,
    });

    let mut algorithms = config.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    let mut frames = config.frame_counts.clone();
    frames.sort_unstable();
    frames.dedup();

    let mut reports = Vec::new();
    let mut reconstructions = Vec::new();
    let mut wall_ms = Vec::new();
    for &algorithm in &algorithms {
        let clock = Instant::now();
        for &n in &frames {
            let cell = Instant::now();
            let data = all.first(n)?;
            let image = reconstruct_with(algorithm, &data, models, config)?;
            wall_ms.push(cell.elapsed().as_secs_f64() * 1e3);
            reports.push(MetricReport::evaluate(&scene, &image, n, algorithm.tag())?);
            reconstructions.push(image);
        }
        timings.push(StageTiming {
            stage: format!("reconstruct:{algorithm}"),
            millis: clock.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(RunRecord {
        config: config.clone(),
        reports,
        reconstructions,
        wall_ms,
        timings,
        scene,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    #[test]
    fn starting_point_skips_dead_draws() {
        let config = ExperimentConfig {
            train_size: 100,
            dataset_seed: 100,
            ..ExperimentConfig::default()
        };
        let set = training_set(&config).unwrap();
        let probe: Vec<&[f64]> = set.inputs().iter().map(|b| b.as_slice()).collect();
        let dead = init_params(100, 200).unwrap();
        assert!(min_live_fraction(&dead, &probe).unwrap() < MIN_LIVE_FRACTION);
        let (seed, params) = starting_point(100, &set, 200).unwrap();
        assert_ne!(seed, 200);
        assert_eq!(params, init_params(100, seed).unwrap());
        assert!(min_live_fraction(&params, &probe).unwrap() >= MIN_LIVE_FRACTION);
        assert_eq!(starting_point(100, &set, 201).unwrap().0, 201);
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            width: 40,
            height: 40,
            frame_counts: vec![60, 30],
            algorithms: vec![Algorithm::CsCnn, Algorithm::Cgi, Algorithm::Cs],
            grain: 2,
            cs_iterations: 50,
            ..ExperimentConfig::default()
        }
    }

    fn models() -> Models {
        Models {
            cscnn: Some(init_params(100, 0).unwrap()),
            dl: None,
        }
    }

    #[test]
    fn comparison_covers_every_cell_in_order() {
        let record = compare(&small_config(), &models()).unwrap();
        let cells: Vec<(&str, usize)> = record
            .reports
            .iter()
            .map(|r| (r.algorithm.as_str(), r.frame_count))
            .collect();
        assert_eq!(
            cells,
            vec![("cgi", 30), ("cgi", 60), ("cs", 30), ("cs", 60), ("cscnn", 30), ("cscnn", 60)]
        );
        assert_eq!(record.reconstructions.len(), 6);
    }

    #[test]
    fn algorithms_share_acquisition_data() {
        let config = small_config();
        let scene = load_scene(&config).unwrap();
        let all = acquire_frames(&scene, 60, &config).unwrap();
        let direct = acquire_frames(&scene, 30, &config).unwrap();
        let record = compare(&config, &models()).unwrap();
        let cgi30 = cgi_reconstruction(&all.first(30).unwrap()).unwrap();
        assert_eq!(record.reconstructions[0], cgi30);
        assert_eq!(direct.buckets.values.len(), 30);
    }

    #[test]
    fn missing_model_is_an_error() {
        let config = small_config();
        assert!(compare(&config, &Models::default()).is_err());
        let mut wrong = models();
        wrong.cscnn = Some(init_params(400, 0).unwrap());
        assert!(compare(&config, &wrong).is_err());
        let cgi_only = ExperimentConfig {
            algorithms: vec![Algorithm::Cgi],
            ..config
        };
        assert_eq!(compare(&cgi_only, &Models::default()).unwrap().reports.len(), 2);
    }

    #[test]
    fn untrained_pipeline_completes() {
        let config = small_config();
        let scene = load_scene(&config).unwrap();
        for n in [2, 40] {
            let (image, report) =
                run_pipeline_cscnn(&scene, n, models().cscnn.as_ref().unwrap(), &config).unwrap();
            assert_eq!(image.width(), 40);
            assert_eq!(report.psnr, psnr(&scene, &image).unwrap());
            assert!(report.psnr >= 0.0);
        }
    }

    #[test]
    fn mismatched_acquisition_rejected() {
        let config = small_config();
        let scene = load_scene(&config).unwrap();
        let a = acquire_frames(&scene, 10, &config).unwrap();
        let mut b = a.buckets.clone();
        b.pattern_seed += 1;
        assert!(Acquisition::new(a.patterns.clone(), b).is_err());
        assert!(Acquisition::new(a.patterns.clone(), a.buckets.truncated(5)).is_err());
        assert!(a.first(11).is_err());
    }
}
