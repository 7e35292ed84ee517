//! Dataset generation, end-to-end pipelines and the algorithm comparison harness.

mod commands;
mod config;
mod dataset;
mod glyph;
mod output;
mod pipeline;

pub use commands::{
    execute, loss_csv, metrics_csv, rerun, Command, Manifest, CSV_HEADER, MANIFEST_FILE,
    RESULTS_FILE,
};
pub use config::{Algorithm, ExperimentConfig, SceneSource, TrainingTarget};
pub use dataset::{generate_cgi_dataset, generate_dataset, AcquisitionSpec, DatasetSpec};
pub use glyph::{random_scene, render_text, text_extent};
pub use output::{resolve_output_dir, OutputStage, OUTPUT_DIR_ENV};
pub use pipeline::{
    acquire_frames, cgi_reconstruction, compare, cs_reconstruction, load_scene, model_compression,
    network_reconstruction, reconstruct_with, run_pipeline_cscnn, train_model, training_set,
    Acquisition, Models, RunRecord, StageTiming, TrainedModel, INIT_PROBE_BLOCKS, INIT_REDRAWS,
    MIN_LIVE_FRACTION,
};
