//! Session summaries and their monthly/yearly rollups.
//!
//! A rollup's `avg_hre` is the plain mean of its qualifying sessions' HRE
//! values, not `avg_hr * avg_pace`; the two differ whenever pace and heart
//! rate vary between sessions. Sums are accumulated exactly so rows do not
//! depend on session order and partial rollups merge without drift.

use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{display_hre, format_pace, hre};
use crate::model::{segment_is_moving, Activity, SessionSummary, Source};

pub const DEFAULT_MIN_DISTANCE_KM: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("NoHeartRate: activity has no heart rate data")]
    NoHeartRate,
    #[error("ZeroDistance: activity covers no distance")]
    ZeroDistance,
    #[error("activity has no moving time")]
    NoMovingTime,
}

/// Summarizes one activity in the layout of a training-log row.
pub fn summarize_session(activity: &Activity, stop_speed: f64) -> Result<SessionSummary, AggregateError> {
    let summary = summarize_allowing_missing_hr(activity, stop_speed)?;
    if summary.avg_hr.is_none() {
        return Err(AggregateError::NoHeartRate);
    }
    Ok(summary)
}

/// Like [`summarize_session`] but keeps sessions without heart rate so
/// their distance still counts toward rollup totals.
pub fn summarize_allowing_missing_hr(
    activity: &Activity,
    stop_speed: f64,
) -> Result<SessionSummary, AggregateError> {
    if let Some(entry) = &activity.manual {
        if !(entry.distance_km > 0.0) {
            return Err(AggregateError::ZeroDistance);
        }
        return Ok(SessionSummary {
            date: entry.date,
            distance_km: entry.distance_km,
            moving_time: entry
                .duration_s
                .unwrap_or(entry.pace * 60.0 * entry.distance_km),
            avg_hr: Some(entry.avg_hr),
            avg_pace: entry.pace,
            hre: hre(entry.avg_hr, entry.pace).ok(),
            source: Source::ManualCsv,
        });
    }

    let distance_km = activity.total_distance_m().unwrap_or(0.0) / 1000.0;
    if !(distance_km > 0.0) {
        return Err(AggregateError::ZeroDistance);
    }
    let mut moving = 0.0;
    let mut hr_weighted = 0.0;
    let mut hr_time = 0.0;
    for w in activity.samples.windows(2) {
        if !segment_is_moving(&w[0], &w[1], stop_speed) {
            continue;
        }
        let dt = w[1].t - w[0].t;
        moving += dt;
        let hr = match (w[0].heart_rate, w[1].heart_rate) {
            (Some(a), Some(b)) => Some((a as f64 + b as f64) / 2.0),
            (a, b) => a.or(b).map(f64::from),
        };
        if let Some(hr) = hr {
            hr_weighted += hr * dt;
            hr_time += dt;
        }
    }
    if !(moving > 0.0) {
        return Err(AggregateError::NoMovingTime);
    }
    let avg_hr = (hr_time > 0.0).then(|| hr_weighted / hr_time);
    let avg_pace = moving / 60.0 / distance_km;
    Ok(SessionSummary {
        date: activity.local_date(),
        distance_km,
        moving_time: moving,
        avg_hr,
        avg_pace,
        hre: avg_hr.and_then(|h| hre(h, avg_pace).ok()),
        source: activity.source,
    })
}

/// Exactly rounded floating-point sum (Shewchuk's non-overlapping partials).
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite());
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&top) = p.last() else { return 0.0 };
        let mut hi = top;
        let mut lo = 0.0;
        let mut j = p.len() - 1;
        while j > 0 {
            j -= 1;
            let x = hi;
            let y = p[j];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // Round half-way cases the way an infinitely precise sum would.
        if j > 0 && ((lo < 0.0 && p[j - 1] < 0.0) || (lo > 0.0 && p[j - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }

    /// Sum divided by `n`, corrected by the exact remainder so that the
    /// mean of n equal values is that value.
    pub fn mean(&self, n: usize) -> f64 {
        let n = n as f64;
        let m = self.value() / n;
        let p = m * n;
        let mut rest = self.clone();
        rest.add(-p);
        rest.add(-m.mul_add(n, -p));
        m + rest.value() / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Monthly,
    Yearly,
}

impl Granularity {
    pub fn period(self, date: chrono::NaiveDate) -> String {
        match self {
            Granularity::Monthly => format!("{:04}-{:02}", date.year(), date.month()),
            Granularity::Yearly => format!("{:04}", date.year()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollupRow {
    /// `YYYY` or `YYYY-MM`.
    pub period: String,
    pub total_distance_km: f64,
    pub session_count: usize,
    /// Sessions that entered the pace/HR/HRE averages.
    pub qualifying_count: usize,
    /// Yearly rows only: total distance over 12 months.
    pub avg_monthly_distance_km: Option<f64>,
    pub avg_pace: Option<f64>,
    pub avg_hr: Option<f64>,
    pub avg_hre: Option<f64>,
    pub min_hre: Option<f64>,
}

/// Order-independent running totals for one period.
#[derive(Debug, Clone, Default)]
pub struct RollupAccumulator {
    distance_km: ExactSum,
    sessions: usize,
    qualifying: usize,
    pace: ExactSum,
    hr: ExactSum,
    hre: ExactSum,
    min_hre: Option<f64>,
}

impl RollupAccumulator {
    pub fn add(&mut self, s: &SessionSummary, min_distance_km: f64) {
        self.distance_km.add(s.distance_km);
        self.sessions += 1;
        let (Some(hr), Some(h)) = (s.avg_hr, s.hre) else { return };
        if s.distance_km < min_distance_km {
            return;
        }
        self.qualifying += 1;
        self.pace.add(s.avg_pace);
        self.hr.add(hr);
        self.hre.add(h);
        self.min_hre = Some(self.min_hre.map_or(h, |m| m.min(h)));
    }

    pub fn merge(&mut self, other: &RollupAccumulator) {
        self.distance_km.merge(&other.distance_km);
        self.sessions += other.sessions;
        self.qualifying += other.qualifying;
        self.pace.merge(&other.pace);
        self.hr.merge(&other.hr);
        self.hre.merge(&other.hre);
        self.min_hre = match (self.min_hre, other.min_hre) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn finish(&self, period: String, granularity: Granularity) -> RollupRow {
        let total = self.distance_km.value();
        let q = self.qualifying;
        let avg = |s: &ExactSum| (q > 0).then(|| s.mean(q));
        RollupRow {
            period,
            total_distance_km: total,
            session_count: self.sessions,
            qualifying_count: q,
            avg_monthly_distance_km: (granularity == Granularity::Yearly).then(|| total / 12.0),
            avg_pace: avg(&self.pace),
            avg_hr: avg(&self.hr),
            avg_hre: avg(&self.hre),
            min_hre: self.min_hre,
        }
    }
}

pub fn accumulate(
    summaries: &[SessionSummary],
    granularity: Granularity,
    min_distance_km: f64,
) -> BTreeMap<String, RollupAccumulator> {
    let mut groups: BTreeMap<String, RollupAccumulator> = BTreeMap::new();
    for s in summaries {
        groups
            .entry(granularity.period(s.date))
            .or_default()
            .add(s, min_distance_km);
    }
    groups
}

pub fn finish_rows(
    groups: &BTreeMap<String, RollupAccumulator>,
    granularity: Granularity,
) -> Vec<RollupRow> {
    groups
        .iter()
        .map(|(p, acc)| acc.finish(p.clone(), granularity))
        .collect()
}

pub fn rollup(
    summaries: &[SessionSummary],
    granularity: Granularity,
    min_distance_km: f64,
) -> Vec<RollupRow> {
    finish_rows(&accumulate(summaries, granularity, min_distance_km), granularity)
}

/// One row per calendar month. Distance sums every session; averages use
/// only sessions of at least `min_distance_km` with heart rate.
pub fn monthly_rollup(summaries: &[SessionSummary], min_distance_km: f64) -> Vec<RollupRow> {
    rollup(summaries, Granularity::Monthly, min_distance_km)
}

/// One row per calendar year, with average monthly distance and the
/// lowest qualifying session HRE.
pub fn yearly_rollup(summaries: &[SessionSummary], min_distance_km: f64) -> Vec<RollupRow> {
    rollup(summaries, Granularity::Yearly, min_distance_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Rows that can be written as fixed-layout CSV.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl CsvRow for RollupRow {
    const HEADER: &'static [&'static str] = &[
        "period",
        "total_distance_km",
        "session_count",
        "avg_pace",
        "avg_hr",
        "avg_hre",
        "min_hre",
    ];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.period.clone(),
            format!("{:.2}", self.total_distance_km),
            self.session_count.to_string(),
            opt(self.avg_pace, format_pace),
            opt(self.avg_hr, |v| format!("{v:.1}")),
            opt(self.avg_hre, |v| display_hre(v).to_string()),
            opt(self.min_hre, |v| display_hre(v).to_string()),
        ]
    }
}

impl CsvRow for SessionSummary {
    const HEADER: &'static [&'static str] = &[
        "date",
        "distance_km",
        "moving_time_s",
        "avg_pace",
        "avg_hr",
        "hre",
        "source",
    ];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.date.to_string(),
            format!("{:.2}", self.distance_km),
            format!("{:.0}", self.moving_time),
            format_pace(self.avg_pace),
            opt(self.avg_hr, |v| format!("{v:.1}")),
            opt(self.hre, |v| display_hre(v).to_string()),
            match self.source {
                Source::FitFile => "fit-file".into(),
                Source::ManualCsv => "manual-csv".into(),
            },
        ]
    }
}

/// CSV (header always present, display rounding) or JSON (unrounded).
pub fn export<T: CsvRow + Serialize>(rows: &[T], format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(T::HEADER).expect("write to memory");
            for r in rows {
                w.write_record(r.csv_fields()).expect("write to memory");
            }
            w.into_inner().expect("flush to memory")
        }
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(rows).expect("rows serialize");
            out.push(b'\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::parse_pace;
    use crate::model::test_support::activity_from;
    use crate::model::DEFAULT_STOP_SPEED;
    use chrono::NaiveDate;

    fn session(date: &str, km: f64, pace: &str, hr: f64) -> SessionSummary {
        let pace = parse_pace(pace).unwrap();
        SessionSummary {
            date: date.parse().unwrap(),
            distance_km: km,
            moving_time: pace * 60.0 * km,
            avg_hr: Some(hr),
            avg_pace: pace,
            hre: Some(hr * pace),
            source: Source::ManualCsv,
        }
    }

    #[test]
    fn exact_sum_is_order_independent() {
        let vals = [1e16, 1.0, -1e16, 3.5, 0.1, 0.2, 0.3];
        let mut a = ExactSum::default();
        vals.iter().for_each(|&v| a.add(v));
        let mut b = ExactSum::default();
        vals.iter().rev().for_each(|&v| b.add(v));
        assert_eq!(a.value(), b.value());
        assert_eq!(a.value(), 5.1);
        assert_eq!(ExactSum::default().value(), 0.0);
    }

    #[test]
    fn constant_run_summary() {
        let act = activity_from(&vec![(1000.0 / 300.0, Some(140)); 3001]);
        let s = summarize_session(&act, DEFAULT_STOP_SPEED).unwrap();
        assert!((s.distance_km - 10.0).abs() < 1e-9);
        assert!((s.avg_pace - 5.0).abs() < 1e-9);
        assert!((s.hre.unwrap() - 700.0).abs() < 1e-6);
        assert_eq!(s.date, NaiveDate::from_ymd_opt(2018, 8, 27).unwrap());
    }

    #[test]
    fn no_heart_rate() {
        let act = activity_from(&vec![(3.0, None); 100]);
        assert_eq!(summarize_session(&act, DEFAULT_STOP_SPEED), Err(AggregateError::NoHeartRate));
        let lenient = summarize_allowing_missing_hr(&act, DEFAULT_STOP_SPEED).unwrap();
        assert_eq!(lenient.avg_hr, None);
        assert!((lenient.distance_km - 0.297).abs() < 1e-9);
    }

    #[test]
    fn zero_distance() {
        let act = activity_from(&vec![(0.0, Some(100)); 100]);
        assert_eq!(summarize_session(&act, DEFAULT_STOP_SPEED), Err(AggregateError::ZeroDistance));
    }

    #[test]
    fn short_jogs_carry_distance_only() {
        let rows = monthly_rollup(
            &[session("2018-03-01", 2.0, "6:00", 130.0), session("2018-03-02", 2.5, "6:00", 130.0)],
            DEFAULT_MIN_DISTANCE_KM,
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].total_distance_km, 4.5);
        assert_eq!(rows[0].session_count, 2);
        assert_eq!(rows[0].avg_hre, None);
        assert_eq!(rows[0].min_hre, None);
    }

    #[test]
    fn single_session_month_matches_session() {
        let s = session("2018-08-27", 15.7, "5:25", 140.0);
        let rows = monthly_rollup(std::slice::from_ref(&s), DEFAULT_MIN_DISTANCE_KM);
        assert_eq!(rows[0].period, "2018-08");
        assert_eq!(rows[0].avg_hre, s.hre);
        assert_eq!(rows[0].avg_pace, Some(s.avg_pace));
        assert_eq!(rows[0].avg_hr, s.avg_hr);
        assert_eq!(rows[0].min_hre, s.hre);
    }

    #[test]
    fn yearly_identical_sessions() {
        let sessions = vec![session("2016-05-01", 10.0, "5:00", 140.0); 6];
        let rows = yearly_rollup(&sessions, DEFAULT_MIN_DISTANCE_KM);
        assert_eq!(rows[0].avg_hre, Some(700.0));
        assert_eq!(rows[0].min_hre, Some(700.0));
        assert_eq!(rows[0].session_count, 6);
        assert_eq!(rows[0].avg_monthly_distance_km, Some(5.0));
    }

    #[test]
    fn yearly_min_hre() {
        let mut sessions = vec![session("2016-01-01", 10.0, "5:30", 140.0)];
        sessions.push(SessionSummary {
            hre: Some(685.0),
            ..session("2016-06-01", 12.0, "5:00", 137.0)
        });
        let rows = yearly_rollup(&sessions, DEFAULT_MIN_DISTANCE_KM);
        assert_eq!(rows[0].min_hre, Some(685.0));
        assert!(rows[0].min_hre <= rows[0].avg_hre);
    }

    #[test]
    fn csv_layout() {
        let empty: Vec<RollupRow> = vec![];
        assert_eq!(
            String::from_utf8(export(&empty, ExportFormat::Csv)).unwrap(),
            "period,total_distance_km,session_count,avg_pace,avg_hr,avg_hre,min_hre\n"
        );
        let one = [session("2018-08-27", 15.7, "5:25", 140.0)];
        let csv = String::from_utf8(export(&one, ExportFormat::Csv)).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "2018-08-27,15.70,5102,5:25,140.0,758,manual-csv");
    }

    #[test]
    fn json_round_trip() {
        let rows = monthly_rollup(
            &[session("2018-08-27", 15.7, "5:25", 140.0), session("2018-08-09", 12.8, "5:48", 143.0)],
            DEFAULT_MIN_DISTANCE_KM,
        );
        let bytes = export(&rows, ExportFormat::Json);
        let back: Vec<RollupRow> = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, rows);
    }
}
