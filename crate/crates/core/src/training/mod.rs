//! Losses, optimizer, schedule and the epoch loop.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::{gesture_loss, gesture_loss_value, trajectory_loss, trajectory_loss_value};
pub use schedule::lr_schedule;
pub use trainer::{
    batch_gradients, epoch_order, frame_loss, train, LossCurve, StepRecord, TrainConfig,
};
