//! The block reconstruction network: a four-layer stacked autoencoder whose
//! first layer acts as the learned measurement operator, followed by a stack of
//! shape-preserving convolutions.

mod checkpoint;
mod dataset;
mod inference;
mod layers;
mod network;
mod params;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{Provenance, TrainingSet};
pub use inference::infer_image;
pub use layers::{Activation, ConvLayer, DenseLayer};
pub use network::{backward, forward, loss, min_live_fraction, reconstruct_block, ForwardPass};
pub use params::{init_params, Architecture, ConvSpec, Gradients, NetworkParams, CONV_INIT_STD};
pub use train::{train, train_with_progress, Optimizer, TrainingConfig};
