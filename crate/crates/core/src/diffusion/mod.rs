//! Class-conditioned denoising network that synthesises feature embeddings
//! for classes it never saw, given only their class vectors.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod noise;
pub mod train;

pub use checkpoint::{load_diffusion, save_diffusion};
pub use loss::{
    evaluate_loss, loss_components, median_bandwidth, mmd_rbf, total_loss, Bandwidth, LossComponents, LossEvaluation,
    LossWeights,
};
pub use model::{denoise_forward, DiffusionModel, ForwardCache};
pub use noise::{corrupt, corrupt_batch, jitter_class, NoiseSchedule, DEFAULT_NOISE_STD};
pub use train::{
    generate_unseen, train_diffusion, DiffusionTrainConfig, EpochTrace, GenerationConfig, TrainedDiffusion,
};
