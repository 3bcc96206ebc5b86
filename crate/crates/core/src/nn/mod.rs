//! Small dense CNN stack: layer kernels, model specs, training and
//! gradient checking.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod train;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::Mode;
pub use model::{
    build_stack, build_table4, build_table4_variant, param_slots, Classifier, LayerSpec, ModelSpec, Network,
    ParamSlot, Shape,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    evaluate, train_early_stop, train_from, EpochRecord, Example, Executor, History, Sequential, TrainConfig,
    TrainedModel,
};
