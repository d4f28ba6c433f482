//! Heart rate efficiency math: pace conversions, per-sample and session
//! HRE, smoothing, drift and fitness classification, breathing rate and
//! grade correlation.

mod breathing;
mod drift;
mod pace;
mod series;
mod smooth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use breathing::{breathing_rate, breathing_rate_with, BreathingConfig};
pub use drift::{
    classify_fitness, drift, Band, DriftConfig, DriftReport, FitnessBand, FitnessThresholds,
    MIN_ANALYZED_SPAN_S,
};
pub use pace::{display_hre, format_pace, hre, pace_from_speed, parse_pace};
pub use series::{
    grade_series, heart_rate_series, hre_grade_correlation, hre_series, index_by_distance,
    pace_series, pearson, MIN_GRADE_RUN_M,
};
pub use smooth::{smooth, DEFAULT_SMOOTHING_WINDOW_S};

use crate::model::{Activity, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("MalformedPace: {0:?}")]
    MalformedPace(String),
    #[error("speed must be positive, got {0}")]
    NonpositiveSpeed(f64),
    #[error("heart rate and pace must be positive, got {heart_rate} bpm and {pace} min/km")]
    NonpositiveInput { heart_rate: f64, pace: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("window must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("no samples with both heart rate and moving speed")]
    NoUsableSamples,
    #[error("series spans {span} s, need more than {needed} s")]
    TooShort { span: f64, needed: f64 },
    #[error("not enough RR data for a breathing estimate")]
    InsufficientData,
    #[error("no spectral peak above the noise floor")]
    NoSpectralPeak,
    #[error("activity has no altitude with distance")]
    NoAltitude,
    #[error("a series has zero variance")]
    DegenerateVariance,
    #[error("series share fewer than two present samples")]
    NoCommonSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Tunable thresholds for per-activity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub smoothing_window_s: f64,
    pub drift: DriftConfig,
    pub fitness: FitnessThresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            smoothing_window_s: DEFAULT_SMOOTHING_WINDOW_S,
            drift: DriftConfig::default(),
            fitness: FitnessThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub drift: DriftReport,
    pub fitness: FitnessBand,
}

/// Drift report for the smoothed HRE series plus the band of its mean.
pub fn assess(activity: &Activity, cfg: &AnalysisConfig) -> Result<Assessment, MetricsError> {
    let series = hre_series(activity, cfg.smoothing_window_s)?;
    let drift = drift(&series, &cfg.drift)?;
    let fitness = classify_fitness(drift.mean_hre, &cfg.fitness);
    Ok(Assessment { drift, fitness })
}
