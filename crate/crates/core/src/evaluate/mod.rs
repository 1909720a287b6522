//! Epoching, event-level scoring, PR curves, leave-one-subject-out
//! evaluation and the causal streaming detector.

mod epochs;
mod loso;
mod pr;
mod scoring;
mod stream;

pub use epochs::{epoch_geometry, epochize, label_epochs, window_mean, EPOCH_OVERLAP, EPOCH_WINDOW_S, FOG_BUFFER_S};
pub use loso::{
    compare_systems, leakage_probe, loso_cv, select_features, train_fold, Comparison, FoldResult, LosoParams,
    LosoReport, SelectionMode,
};
pub use pr::{pr_curve, pr_curve_events, PrCurve, PrPoint};
pub use scoring::{metrics, score_events, ConfusionCounts, Degenerate, MeanStd, Metrics, MetricsReport, SubjectMetrics};
pub use stream::{
    causal_epochs, replay_feed, CausalEpoch, CausalExtractor, StreamDetector, StreamEvent, StreamSample, StreamStats,
    CONTEXT_S,
};
