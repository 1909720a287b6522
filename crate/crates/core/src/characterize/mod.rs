//! Feature behavior around freezing onsets compared with phase-matched
//! normal turning.

mod segments;
mod stats;

pub use segments::{
    extract_freezing_segments, match_control_segments, normalize_segments, ControlMatch, Group,
    Segment, POST_ONSET_S, PRE_ONSET_S,
};
pub use stats::{
    bonferroni, pointwise_ttest, welch_ttest, wilcoxon_signed_rank, BandRow, TTestBand, WelchResult,
    PHASE_TOLERANCE_RAD,
};
