//! Clinician-facing outcomes: Tremor Index, ROM, reps per minute and the EMG
//! median-frequency fatigue slope, per window and per session.

mod fatigue;
mod kinematics;
mod outcomes;
mod pipeline;
mod tremor;

pub use fatigue::{emg_chain, fatigue_slope, fmed_series, theil_sen, FatigueTrend, FitMethod, FMED_BAND_HZ, FMED_SETTLE_S};
pub use kinematics::{count_reps, rom, rom_for, smooth_kinematic, Joint, RepCount, RomMeasure, DEFAULT_REFRACTORY_S};
pub use outcomes::{session_outcomes, session_outcomes_with, OutcomeSettings, SessionOutcomes};
pub use pipeline::{StreamingFeatures, StreamingFeaturesConfig};
pub use tremor::{
    ti_series, tremor_index, TiSettings, TremorIndex, TI_BAND_HZ, TI_REFERENCE_BAND_HZ,
};
