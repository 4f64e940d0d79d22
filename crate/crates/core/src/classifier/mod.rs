//! Compatibility classifiers that score a feature embedding against any
//! class vector, so unseen classes can be ranked at test time.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod train;

pub use checkpoint::{load_classifier, save_classifier};
pub use loss::{cross_entropy_loss, rank_weight, warp_loss};
pub use model::{argmax, logits, predict_top1, score, CompatibilityModel, ScoreCache, Variant};
pub use train::{
    evaluate_top1, predict_label, train_classifier, ClassifierLoss, ClassifierTrainConfig, TrainedClassifier,
};
