//! Recurrent recognition, single-shot prediction and chaining.

mod card;
mod chain;
mod decode;
mod frames;

pub use card::{
    default_notes, ModelCard, Provenance, TrainedModel, CARD_FILE, CARD_FORMAT, CHECKPOINT_FILE,
};
pub use chain::{Chain, ChainResult, GesturePredictor, Recognizer, Stage, TrajectoryPredictor};
pub use decode::{
    predict_gestures, predict_trajectory, recognize, recognize_traced, softmax_rows, start_vector,
    RecognitionResult, TrajectoryResult,
};
pub use frames::{
    infer_frame, infer_frames, predictions_tsv, window_seed, FramePrediction, Output,
};

#[cfg(test)]
mod tests;
