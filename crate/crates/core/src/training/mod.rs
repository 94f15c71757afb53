//! Loss, optimizer, training loop and gradient verification.

mod adam;
mod gradcheck;
mod loss;
mod train;

pub use adam::Adam;
pub use gradcheck::{
    finite_difference_check, gradient_check, gradient_check_model, GradientCheckReport, GRADIENT_CHECK_SAMPLES,
};
pub use loss::{kl_divergence, total_loss, DEFAULT_ALPHA};
pub use train::{
    epoch_noise, loss_and_gradient, read_train_log, train, LossParts, TrainConfig, TrainLog, TrainOutcome,
    TrainOutputs, TrainProfile, TrainRecord,
};
