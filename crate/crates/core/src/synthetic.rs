//! Synthetic activities for tests, demos and acceptance runs.
//!
//! All builders sample at 1 Hz and integrate distance from speed. Speeds
//! that are multiples of 1/1000 m/s survive FIT quantization unchanged.

use chrono::{DateTime, TimeZone, Utc};

use crate::fit::{encode_fixture, read_activities, ActivityFixture, FitError, FixtureSample};
use crate::model::{Activity, RRSeries};

const METERS_PER_DEGREE_LAT: f64 = 111_195.0;
const ORIGIN: (f64, f64) = (34.90, 33.60);

/// A stretch of constant effort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration_s: u32,
    pub heart_rate: u8,
    /// m/s
    pub speed: f64,
}

pub fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 2, 18, 8, 0, 0).unwrap()
}

/// 1 Hz run through `segments`, heading due north from a fixed origin
/// with a flat 10 m altitude.
pub fn segments_fixture(start: DateTime<Utc>, segments: &[Segment]) -> ActivityFixture {
    let mut samples = Vec::new();
    let mut dist = 0.0;
    let mut t: u32 = 0;
    let mut push = |t: u32, dist: f64, seg: &Segment| {
        samples.push(FixtureSample {
            elapsed: t,
            lat: Some(ORIGIN.0 + dist / METERS_PER_DEGREE_LAT),
            lon: Some(ORIGIN.1),
            altitude: Some(10.0),
            distance: Some(dist),
            speed: Some(seg.speed),
            heart_rate: Some(seg.heart_rate),
        });
    };
    if let Some(first) = segments.first() {
        push(0, 0.0, first);
    }
    for seg in segments {
        for _ in 0..seg.duration_s {
            t += 1;
            dist += seg.speed;
            push(t, dist, seg);
        }
    }
    ActivityFixture {
        start_time: start,
        samples,
        laps: Vec::new(),
        rr_intervals: None,
    }
}

pub fn steady_fixture(heart_rate: u8, speed: f64, duration_s: u32) -> ActivityFixture {
    segments_fixture(
        default_start(),
        &[Segment {
            duration_s,
            heart_rate,
            speed,
        }],
    )
}

/// Twenty minutes at exactly 700 beats/km (126 bpm at 3 m/s).
pub fn constant_fixture() -> ActivityFixture {
    steady_fixture(126, 3.0, 1200)
}

/// Marathon at a constant 720 beats/km: 162 bpm at 3.75 m/s for 42 km.
pub fn stable_race() -> ActivityFixture {
    let mut f = steady_fixture(162, 3.75, 11_200);
    laps_every(&mut f, 1000.0);
    f
}

/// Marathon at ~780 beats/km (156 bpm at 5:00/km) for the first 75% of
/// its duration, then the pace fades 15% at the same heart rate.
pub fn wall_race() -> ActivityFixture {
    let mut f = segments_fixture(
        default_start(),
        &[
            Segment {
                duration_s: 9_770,
                heart_rate: 156,
                speed: 3.333,
            },
            Segment {
                duration_s: 3_256,
                heart_rate: 156,
                speed: 2.898,
            },
        ],
    );
    laps_every(&mut f, 1000.0);
    f
}

/// Splits the fixture into laps each time cumulative distance crosses a
/// multiple of `meters`.
pub fn laps_every(fixture: &mut ActivityFixture, meters: f64) {
    let mut laps = Vec::new();
    let mut start = 0;
    let mut next = meters;
    for (i, s) in fixture.samples.iter().enumerate() {
        if s.distance.is_some_and(|d| d >= next) {
            laps.push(start..i + 1);
            start = i + 1;
            while s.distance.is_some_and(|d| d >= next) {
                next += meters;
            }
        }
    }
    if start < fixture.samples.len() {
        laps.push(start..fixture.samples.len());
    }
    fixture.laps = laps;
}

/// Replaces altitude with `profile(distance_m)`.
pub fn with_terrain(mut fixture: ActivityFixture, profile: impl Fn(f64) -> f64) -> ActivityFixture {
    for s in &mut fixture.samples {
        s.altitude = s.distance.map(&profile);
    }
    fixture
}

/// Encodes the fixture and decodes it back, as a file on disk would be.
pub fn to_activity(fixture: &ActivityFixture) -> Result<Activity, FitError> {
    let bytes = encode_fixture(fixture)?;
    Ok(read_activities(&bytes)?.remove(0))
}

/// RR intervals around `mean_s` modulated by a sinusoid of `freq_hz` on
/// the beat clock, covering `duration_s`.
pub fn planted_rr(mean_s: f64, amplitude_s: f64, freq_hz: f64, duration_s: f64) -> RRSeries {
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < duration_s {
        let rr = mean_s + amplitude_s * (2.0 * std::f64::consts::PI * freq_hz * t).sin();
        // 1 ms resolution, as stored in FIT hrv messages.
        let rr = (rr * 1000.0).round() / 1000.0;
        out.push(rr);
        t += rr;
    }
    RRSeries::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_integrate_distance() {
        let f = steady_fixture(140, 3.0, 100);
        assert_eq!(f.samples.len(), 101);
        assert_eq!(f.samples[100].distance, Some(300.0));
        f.validate().unwrap();
    }

    #[test]
    fn race_lengths() {
        let s = stable_race();
        let d = s.samples.last().unwrap().distance.unwrap();
        assert!((d - 42_000.0).abs() < 1.0);
        assert_eq!(s.laps.len(), 42);
        let w = wall_race();
        let d = w.samples.last().unwrap().distance.unwrap();
        assert!((d - 42_000.0).abs() < 10.0, "{d}");
    }

    #[test]
    fn laps_partition_samples() {
        let f = stable_race();
        assert_eq!(f.laps[0].start, 0);
        for w in f.laps.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(f.laps.last().unwrap().end, f.samples.len());
    }
}
