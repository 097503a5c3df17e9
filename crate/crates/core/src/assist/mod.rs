//! Closed-loop assist policy: need score, PD reference shaping, the safety
//! envelope and the fixed-rate control loop.

mod control;
mod envelope;

use serde::{Deserialize, Serialize};

use crate::dsp::WindowFeatures;
use crate::{Error, Result};

pub use control::{
    run_loop, AssistController, LoopInput, LoopStats, TickClock, TickInput, TickObserver, TICK_PERIOD_S,
};
pub use envelope::{apply_envelope, braking_distance, AssistCommand, ClampFlag, Measurement, SafetyEnvelope, SafetyState};

/// Anything that maps a feature vector to an assist need in [0, 1].
pub trait NeedModel {
    fn score(&self, features: &WindowFeatures) -> Result<f64>;
}

/// Per-feature weights of the logistic need model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureWeights {
    pub rms: f64,
    pub mav: f64,
    pub zc_count: f64,
    pub median_freq_hz: f64,
    pub ti: f64,
}

/// Logistic of a linear combination of window features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedScoreModel {
    pub weights: FeatureWeights,
    pub bias: f64,
}

impl NeedScoreModel {
    /// Reference weights: need rises with tremor prominence and with falling
    /// EMG median frequency.
    pub fn reference() -> Self {
        Self {
            weights: FeatureWeights {
                rms: 0.0,
                mav: 0.0,
                zc_count: 0.0,
                median_freq_hz: -0.01,
                ti: 8.0,
            },
            bias: -2.0,
        }
    }
}

impl Default for NeedScoreModel {
    fn default() -> Self {
        Self::reference()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl NeedModel for NeedScoreModel {
    fn score(&self, f: &WindowFeatures) -> Result<f64> {
        if !f.is_finite() {
            return Err(Error::NonFiniteFeature);
        }
        let w = &self.weights;
        let term = |w: f64, x: f64| if w == 0.0 { 0.0 } else { w * x };
        let z = self.bias
            + term(w.rms, f.rms)
            + term(w.mav, f.mav)
            + term(w.zc_count, f.zc_count as f64)
            + term(w.median_freq_hz, f.median_freq_hz)
            + term(w.ti, f.ti);
        if z.is_nan() {
            return Err(Error::NonFiniteFeature);
        }
        Ok(logistic(z))
    }
}

pub fn need_score(model: &dyn NeedModel, features: &WindowFeatures) -> Result<f64> {
    model.score(features)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 0.8, kd: 0.1 }
    }
}

/// `kp·(target − measured) − kd·velocity`, unclamped.
pub fn pd_reference(target_angle_deg: f64, measured_angle_deg: f64, measured_velocity_dps: f64, gains: PdGains) -> f64 {
    gains.kp * (target_angle_deg - measured_angle_deg) - gains.kd * measured_velocity_dps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(ti: f64) -> WindowFeatures {
        WindowFeatures {
            rms: 0.2,
            mav: 0.15,
            zc_count: 30,
            median_freq_hz: 100.0,
            ti,
            window_start_s: 0.0,
        }
    }

    #[test]
    fn zero_model_scores_half() {
        let m = NeedScoreModel {
            weights: FeatureWeights::default(),
            bias: 0.0,
        };
        assert_eq!(need_score(&m, &WindowFeatures::default()).unwrap(), 0.5);
    }

    #[test]
    fn very_negative_bias_scores_zero() {
        let m = NeedScoreModel {
            weights: FeatureWeights::default(),
            bias: f64::NEG_INFINITY,
        };
        assert_eq!(m.score(&features(0.4)).unwrap(), 0.0);
        let m = NeedScoreModel { bias: -1e6, ..m };
        assert!(m.score(&features(0.4)).unwrap() < 1e-300);
    }

    #[test]
    fn reference_is_monotone_in_ti() {
        let m = NeedScoreModel::reference();
        let hi = m.score(&features(0.45)).unwrap();
        let lo = m.score(&features(0.30)).unwrap();
        let expect = |ti: f64| logistic(-2.0 - 0.01 * 100.0 + 8.0 * ti);
        assert!((hi - expect(0.45)).abs() < 1e-15);
        assert!((lo - expect(0.30)).abs() < 1e-15);
        assert!(hi > lo);
    }

    #[test]
    fn non_finite_rejected() {
        let mut f = features(0.4);
        f.rms = f64::NAN;
        assert_eq!(NeedScoreModel::reference().score(&f), Err(Error::NonFiniteFeature));
    }

    #[test]
    fn pd_arithmetic() {
        let g = |kp, kd| PdGains { kp, kd };
        assert_eq!(pd_reference(30.0, 30.0, 0.0, g(0.8, 0.1)), 0.0);
        assert_eq!(pd_reference(10.0, 0.0, 0.0, g(1.0, 0.0)), 10.0);
        assert_eq!(pd_reference(10.0, 0.0, 4.0, g(1.0, 0.5)), 8.0);
    }
}
