//! Domain vocabulary shared by the codec, metrics, aggregation and ingest layers.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default speed below which a segment counts as stopped, in m/s.
pub const DEFAULT_STOP_SPEED: f64 = 0.5;

/// Inter-sample gaps longer than this (seconds) are treated as auto-pause.
pub const AUTO_PAUSE_GAP_S: f64 = 30.0;

/// RR intervals outside this open range (seconds) are flagged as artifacts.
pub const RR_VALID_RANGE: (f64, f64) = (0.2, 3.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("time series is malformed: {0}")]
    MalformedSeries(&'static str),
}

/// One recorded instant of an activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds since the activity start.
    pub t: f64,
    pub timestamp: DateTime<Utc>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub altitude: Option<f64>,
    /// Cumulative distance in meters.
    pub distance: Option<f64>,
    /// Speed in m/s.
    pub speed: Option<f64>,
    pub heart_rate: Option<u8>,
}

/// A lap as a half-open range of sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lap {
    pub start_index: usize,
    pub end_index: usize,
    /// Seconds.
    pub total_time: f64,
    /// Meters.
    pub total_distance: f64,
    pub avg_heart_rate: Option<f64>,
    pub avg_speed: Option<f64>,
}

/// Beat-to-beat intervals. Artifacts outside [`RR_VALID_RANGE`] stay in the
/// raw list and are marked in `flagged`; [`RRSeries::cleaned`] skips them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RRSeries {
    /// Raw intervals in seconds, as recorded.
    pub intervals: Vec<f64>,
    /// Indices into `intervals` that failed the plausibility check.
    pub flagged: Vec<usize>,
}

impl RRSeries {
    pub fn new(intervals: Vec<f64>) -> Self {
        let (lo, hi) = RR_VALID_RANGE;
        let flagged = intervals
            .iter()
            .enumerate()
            .filter(|(_, &rr)| !(rr > lo && rr < hi))
            .map(|(i, _)| i)
            .collect();
        RRSeries { intervals, flagged }
    }

    pub fn is_flagged(&self, index: usize) -> bool {
        self.flagged.binary_search(&index).is_ok()
    }

    /// Intervals that passed the plausibility check, in order.
    pub fn cleaned(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_flagged(*i))
            .map(|(_, &rr)| rr)
            .collect()
    }

    /// Total recorded duration in seconds, artifacts included.
    pub fn duration(&self) -> f64 {
        self.intervals.iter().filter(|rr| rr.is_finite() && **rr > 0.0).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    FitFile,
    ManualCsv,
}

/// One row of a hand-kept training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualLogEntry {
    pub date: NaiveDate,
    pub distance_km: f64,
    /// Decimal min/km, either given directly or derived from `duration_s`.
    pub pace: f64,
    pub avg_hr: f64,
    pub duration_s: Option<f64>,
    pub note: Option<String>,
}

/// One recorded session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub start_time: DateTime<Utc>,
    /// Offset of the device's local clock from UTC, in seconds, when known.
    pub utc_offset_s: Option<i32>,
    pub sport: String,
    pub samples: Vec<Sample>,
    pub laps: Vec<Lap>,
    pub rr: Option<RRSeries>,
    pub source: Source,
    /// Present for log entries, which carry a summary but no samples.
    pub manual: Option<ManualLogEntry>,
}

impl Activity {
    /// Calendar date of the start, in local time when the offset is known.
    pub fn local_date(&self) -> NaiveDate {
        match self.utc_offset_s {
            Some(off) => (self.start_time + chrono::Duration::seconds(off as i64)).date_naive(),
            None => self.start_time.date_naive(),
        }
    }

    /// Final cumulative distance in meters.
    pub fn total_distance_m(&self) -> Option<f64> {
        if let Some(entry) = &self.manual {
            return Some(entry.distance_km * 1000.0);
        }
        self.samples.iter().rev().find_map(|s| s.distance)
    }

    pub fn elapsed_time(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn has_gps(&self) -> bool {
        self.samples.iter().any(|s| s.lat.is_some() && s.lon.is_some())
    }
}

/// Stable identifier derived from content bytes.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Per-session scalars in the layout of a training log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub date: NaiveDate,
    pub distance_km: f64,
    /// Seconds.
    pub moving_time: f64,
    pub avg_hr: Option<f64>,
    /// Decimal min/km.
    pub avg_pace: f64,
    /// Beats per km.
    pub hre: Option<f64>,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "beats/km")]
    BeatsPerKm,
    #[serde(rename = "bpm")]
    Bpm,
    #[serde(rename = "min/km")]
    MinPerKm,
    #[serde(rename = "breaths/min")]
    BreathsPerMin,
    #[serde(rename = "grade-fraction")]
    GradeFraction,
    #[serde(rename = "m")]
    Meters,
}

/// Values on a strictly increasing time axis; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub unit: Unit,
    pub t: Vec<f64>,
    pub v: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(unit: Unit, t: Vec<f64>, v: Vec<Option<f64>>) -> Result<Self, ModelError> {
        if t.len() != v.len() {
            return Err(ModelError::MalformedSeries("time and value lengths differ"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::MalformedSeries("time axis is not strictly increasing"));
        }
        Ok(TimeSeries { unit, t, v })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Iterator over `(t, value)` pairs that have a value.
    pub fn present(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().zip(&self.v).filter_map(|(&t, v)| v.map(|v| (t, v)))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            unit: self.unit,
            t: self.t.clone(),
            v: self.v.iter().map(|v| v.map(&f)).collect(),
        }
    }
}

/// Whether the segment between two consecutive samples counts as moving.
pub(crate) fn segment_is_moving(a: &Sample, b: &Sample, stop_speed: f64) -> bool {
    let dt = b.t - a.t;
    if !(dt > 0.0) || dt > AUTO_PAUSE_GAP_S {
        return false;
    }
    segment_speed(a, b).is_some_and(|v| v >= stop_speed)
}

fn segment_speed(a: &Sample, b: &Sample) -> Option<f64> {
    let dt = b.t - a.t;
    if let (Some(da), Some(db)) = (a.distance, b.distance) {
        return Some((db - da) / dt);
    }
    match (a.speed, b.speed) {
        (Some(x), Some(y)) => Some((x + y) / 2.0),
        (x, y) => x.or(y),
    }
}

/// Sum of inter-sample gaps spent moving. Segments slower than
/// `stop_speed` and gaps over [`AUTO_PAUSE_GAP_S`] are left out.
pub fn moving_time(activity: &Activity, stop_speed: f64) -> Result<f64, ModelError> {
    let samples = &activity.samples;
    if samples.len() < 2 {
        return Err(ModelError::TooFewSamples(samples.len()));
    }
    Ok(samples
        .windows(2)
        .filter(|w| segment_is_moving(&w[0], &w[1], stop_speed))
        .map(|w| w[1].t - w[0].t)
        .sum())
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn constant_run_is_fully_moving() {
        let act = activity_from(&vec![(3.0, Some(140)); 601]);
        assert_eq!(moving_time(&act, DEFAULT_STOP_SPEED).unwrap(), 600.0);
    }

    #[test]
    fn stopped_block_is_excluded() {
        let mut profile = vec![(3.0, Some(140)); 601];
        for p in &mut profile[201..=320] {
            p.0 = 0.0;
        }
        let act = activity_from(&profile);
        assert_eq!(moving_time(&act, DEFAULT_STOP_SPEED).unwrap(), 480.0);
    }

    #[test]
    fn long_gap_is_excluded() {
        let mut act = activity_from(&vec![(3.0, Some(140)); 301]);
        for s in &mut act.samples[150..] {
            s.t += 44.0;
        }
        assert_eq!(act.elapsed_time(), 344.0);
        assert_eq!(moving_time(&act, DEFAULT_STOP_SPEED).unwrap(), 299.0);
    }

    #[test]
    fn too_few_samples() {
        let act = activity_from(&[(3.0, None)]);
        assert_eq!(
            moving_time(&act, DEFAULT_STOP_SPEED),
            Err(ModelError::TooFewSamples(1))
        );
    }

    #[test]
    fn rr_outliers_are_flagged_not_dropped() {
        let rr = RRSeries::new(vec![0.8, 0.1, 0.82, 3.5, 0.81]);
        assert_eq!(rr.intervals.len(), 5);
        assert_eq!(rr.flagged, vec![1, 3]);
        assert_eq!(rr.cleaned(), vec![0.8, 0.82, 0.81]);
    }

    #[test]
    fn series_rejects_non_increasing_time() {
        let err = TimeSeries::new(Unit::Bpm, vec![0.0, 0.0], vec![None, None]).unwrap_err();
        assert!(matches!(err, ModelError::MalformedSeries(_)));
        assert!(TimeSeries::new(Unit::Bpm, vec![0.0], vec![]).is_err());
    }

    #[test]
    fn id_is_deterministic() {
        assert_eq!(content_id(b"abc"), content_id(b"abc"));
        assert_ne!(content_id(b"abc"), content_id(b"abd"));
    }
}
