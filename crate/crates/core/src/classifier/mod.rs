//! Shared-feature pixel classifier with three heads and the conditional
//! fusion layer `f_out = w * f1 + (1 - w) * f2`.

mod fusion;
mod gradcheck;
mod model;
mod train;

pub use fusion::{
    classifier_forward, fuse_backward, fuse_backward_pixel, fuse_forward, logistic, predict_frame,
    FuseGrads, HeadOutputs,
};
pub use gradcheck::{
    grad_check, grad_check_report, grad_check_seeded, GradCheckReport, CHECK_DIMS, CHECK_FEATURES,
    CHECK_HIDDEN, REL_FLOOR,
};
pub use model::{
    decode_params, encode_params, load_params, save_params, Head, HeadKind, PixelClassifier,
};
pub use train::{loss, loss_and_gradient, train, Stage, TrainConfig, TrainFrame, TrainOutcome, PROB_CLAMP};

#[cfg(test)]
mod tests;
