//! Recordings, annotations, their file formats, downsampling and inter-rater
//! agreement.

mod annotation;
mod format;
mod recording;
mod resample;

pub use annotation::{
    adjudicate, interrater_stats, AgreementStats, AnnotationTrack, Episode, EpisodeLabel, FrameGrid,
};
pub use format::{
    annotation_path, load_recording, load_recording_pair, read_annotations, recording_paths,
    write_annotations, write_json, write_recording, ChannelMeta, Sidecar,
};
pub use recording::{Axis, Channel, ChannelKind, EogAxis, Foot, Placement, Recording};
pub use resample::{resample, resample_channel};

/// Frame size used when rasterizing annotations for agreement statistics.
pub const AGREEMENT_FRAME_S: f64 = 0.1;
