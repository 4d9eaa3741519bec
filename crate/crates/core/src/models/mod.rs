//! Small trainable classifier/encoder, its training objectives and the
//! prototype read-out used to align an unsupervised encoder with the
//! target classes.

mod checkpoint;
mod mlp;
mod optim;
mod prototype;
mod train;

pub use checkpoint::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use mlp::{Gradient, MlpModel};
pub use optim::Adam;
pub use prototype::{build_prototype_classifier, AlignedModel, PrototypeClassifier};
pub use train::{
    evaluate_error, train_pretext, train_pretext_with_history, train_supervised,
    train_supervised_with_history, TrainConfig,
};

pub(crate) use train::{fit_pretext, fit_supervised, init_model, labeled_step, view_pairs, BatchCycler, Streams};
