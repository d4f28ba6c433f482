use chrono::{DateTime, TimeZone, Utc};

use super::parse::{parse_fit_chain, RawFitFile, RawMessage};
use super::types::mesg;
use super::FitError;
use crate::model::{Activity, Lap, RRSeries, Sample, Source};

pub fn semicircles_to_degrees(semicircles: f64) -> f64 {
    semicircles * 180.0 / 2f64.powi(31)
}

fn fit_datetime(secs: f64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs as i64 + super::FIT_EPOCH_OFFSET, 0)
        .single()
        .expect("u32 FIT timestamps are always representable")
}

fn altitude_m(raw: f64) -> f64 {
    raw / 5.0 - 500.0
}

fn sport_name(code: Option<f64>) -> String {
    match code.map(|c| c as u32) {
        None => "unknown".into(),
        Some(0) => "generic".into(),
        Some(1) => "running".into(),
        Some(2) => "cycling".into(),
        Some(3) => "transition".into(),
        Some(4) => "fitness_equipment".into(),
        Some(5) => "swimming".into(),
        Some(11) => "walking".into(),
        Some(17) => "hiking".into(),
        Some(n) => format!("sport_{n}"),
    }
}

struct RawRecord {
    ts: u32,
    sample: Sample,
}

fn record_sample(msg: &RawMessage, ts: u32) -> Sample {
    let lat = msg.scalar(0).map(semicircles_to_degrees);
    let lon = msg.scalar(1).map(semicircles_to_degrees);
    let altitude = msg.scalar(78).or_else(|| msg.scalar(2)).map(altitude_m);
    let speed = msg.scalar(73).or_else(|| msg.scalar(6)).map(|v| v / 1000.0);
    Sample {
        t: 0.0,
        timestamp: fit_datetime(ts as f64),
        lat: lat.filter(|_| lon.is_some()),
        lon: lon.filter(|_| lat.is_some()),
        altitude,
        distance: msg.scalar(5).map(|v| v / 100.0),
        speed,
        heart_rate: msg.scalar(3).map(|v| v as u8),
    }
}

fn merge_into(dst: &mut Sample, src: Sample) {
    dst.lat = dst.lat.or(src.lat);
    dst.lon = dst.lon.or(src.lon);
    dst.altitude = dst.altitude.or(src.altitude);
    dst.distance = dst.distance.or(src.distance);
    dst.speed = dst.speed.or(src.speed);
    dst.heart_rate = dst.heart_rate.or(src.heart_rate);
}

/// Maps file_id, session, lap, record, activity and hrv messages onto an
/// [`Activity`]. Other global messages are ignored.
pub fn decode_activity(raw: &RawFitFile) -> Result<Activity, FitError> {
    let mut records: Vec<RawRecord> = Vec::new();
    for msg in raw.data_messages(mesg::RECORD) {
        let Some(ts) = msg.timestamp() else { continue };
        let sample = record_sample(msg, ts);
        match records.last_mut() {
            Some(prev) if ts < prev.ts => continue,
            Some(prev) if ts == prev.ts => merge_into(&mut prev.sample, sample),
            _ => records.push(RawRecord { ts, sample }),
        }
    }
    if records.is_empty() {
        return Err(FitError::NoRecords);
    }

    let session = raw.data_messages(mesg::SESSION).next();
    let first_ts = records[0].ts;
    let start_ts = session
        .and_then(|s| s.scalar(2))
        .map(|v| v as u32)
        .filter(|&s| s <= first_ts)
        .unwrap_or(first_ts);

    let mut max_dist = f64::NEG_INFINITY;
    let samples: Vec<Sample> = records
        .into_iter()
        .map(|r| {
            let mut s = r.sample;
            s.t = (r.ts - start_ts) as f64;
            if let Some(d) = s.distance {
                if d < max_dist {
                    s.distance = None;
                } else {
                    max_dist = d;
                }
            }
            s
        })
        .collect();

    let utc_offset_s = raw.data_messages(mesg::ACTIVITY).find_map(|m| {
        let ts = m.timestamp()? as i64;
        let local = m.scalar(5)? as i64;
        Some((local - ts) as i32)
    });

    let rr: Vec<f64> = raw
        .data_messages(mesg::HRV)
        .filter_map(|m| m.field(0).map(|f| f.array(m.endianness)))
        .flatten()
        .flatten()
        .map(|v| v / 1000.0)
        .collect();

    Ok(Activity {
        id: raw.digest.clone(),
        start_time: fit_datetime(start_ts as f64),
        utc_offset_s,
        sport: sport_name(session.and_then(|s| s.scalar(5))),
        laps: decode_laps(raw, &samples, start_ts),
        samples,
        rr: (!rr.is_empty()).then(|| RRSeries::new(rr)),
        source: Source::FitFile,
        manual: None,
    })
}

fn decode_laps(raw: &RawFitFile, samples: &[Sample], start_ts: u32) -> Vec<Lap> {
    let rel = |v: f64| v - start_ts as f64;
    let mut spans: Vec<(usize, usize, &RawMessage)> = raw
        .data_messages(mesg::LAP)
        .filter_map(|m| {
            let begin = rel(m.scalar(2)?);
            let end = rel(m.timestamp()? as f64);
            let start_index = samples.partition_point(|s| s.t < begin);
            let end_index = samples.partition_point(|s| s.t <= end);
            Some((start_index, end_index, m))
        })
        .collect();
    spans.sort_by_key(|s| s.0);
    let starts: Vec<usize> = spans.iter().map(|s| s.0).collect();
    spans
        .iter()
        .enumerate()
        .filter_map(|(i, &(start_index, end_index, m))| {
            let end_index = starts.get(i + 1).map_or(end_index, |&n| end_index.min(n.max(start_index)));
            (start_index < end_index).then(|| Lap {
                start_index,
                end_index,
                total_time: m.scalar(7).map_or_else(
                    || samples[end_index - 1].t - samples[start_index].t,
                    |v| v / 1000.0,
                ),
                total_distance: m.scalar(9).map_or(0.0, |v| v / 100.0),
                avg_heart_rate: m.scalar(15),
                avg_speed: m.scalar(110).or_else(|| m.scalar(13)).map(|v| v / 1000.0),
            })
        })
        .collect()
}

/// Decodes every file of a (possibly chained) container.
pub fn decode_activities(files: &[RawFitFile]) -> Result<Vec<Activity>, FitError> {
    files.iter().map(decode_activity).collect()
}

/// Parses and decodes all activities in `bytes`.
pub fn read_activities(bytes: &[u8]) -> Result<Vec<Activity>, FitError> {
    decode_activities(&parse_fit_chain(bytes)?)
}
