//! Streaming preprocessing and per-window feature extraction.
//!
//! EMG: 4th-order Butterworth band-pass (20–450 Hz) as cascaded second-order
//! sections, then a 50/60 Hz notch. IMU: detrend, moving median, short
//! Savitzky–Golay. All sensors are cut into 250 ms windows advancing 125 ms.

mod features;
mod fft;
mod filter;
mod smooth;
mod welch;
mod window;

pub use features::{emg_features, emg_features_auto, median_frequency, EmgFeatures, WindowFeatures, DEFAULT_HYSTERESIS_FRAC};
pub use fft::{fft_in_place, Complex};
pub use filter::{filter_stream, Biquad, FilterSpec, FilterKind, SosCascade, StreamFilter};
pub use smooth::{detrend_mean, moving_median, savitzky_golay, savitzky_golay_coefficients, MovingMedian, SavitzkyGolay};
pub use welch::{welch_psd, PsdEstimate, Taper};
pub use window::{windowize, Window, WindowIter, WINDOW_HOP_S, WINDOW_LEN_S};
