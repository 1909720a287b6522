//! Numeric kernels shared by the feature extractors.

mod filter;
mod hilbert;
mod kmeans;
mod median;
mod morlet;
mod wavelet;

pub use filter::{apply_filter, FilterKind, FilterSpec, Phase, Section, Sos, SosState};
pub use hilbert::{analytic_signal, hilbert_phase, unwrap_phase, wrap_angle};
pub use kmeans::{kmeans, KMeansResult};
pub use median::{median_filter, median_window_len};
pub(crate) use median::sliding_median;
pub use morlet::{
    energy_scale, log_spaced, morlet_band_energy, morlet_band_power, morlet_power_rows,
    morlet_tf_power, Band, TimeFreqPower,
};
pub use wavelet::{wavelet_baseline, wavelet_baseline_remove, DB4};
