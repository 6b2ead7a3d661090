//! Trial ingestion, resampling, standardization and windowing.

mod frames;
mod kinematics;
mod manifest;
mod standardize;
mod transcript;
mod trial;

pub use frames::{
    frame_at, make_frames, one_hot, one_hot_rows, Frame, FrameOrigin, FrameSet, FrameSource,
    ShiftIn, Subset, WindowSpec,
};
pub use kinematics::{format_kinematics, parse_kinematics, parse_kinematics_str};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_HEADER};
pub use standardize::Standardizer;
pub use transcript::{format_transcript, parse_transcript, parse_transcript_str};
pub use trial::{prepare_trials, TrialRecord, POSITION_COLUMNS};

#[cfg(test)]
mod tests;
