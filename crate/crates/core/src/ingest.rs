//! Discovery and loading of FIT files and hand-kept CSV training logs.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeZone, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::fit::{read_activities, FitError};
use crate::metrics::{parse_pace, MetricsError};
use crate::model::{content_id, Activity, ManualLogEntry, Source};

pub const HR_RANGE: (f64, f64) = (30.0, 250.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DateOrder {
    /// `3/4/2018` is March 4th.
    #[default]
    MonthFirst,
    /// `3/4/2018` is April 3rd.
    DayFirst,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RowError {
    #[error(transparent)]
    Pace(#[from] MetricsError),
    #[error("MalformedDate: {0:?}")]
    MalformedDate(String),
    #[error("MalformedNumber: {column} = {value:?}")]
    MalformedNumber { column: &'static str, value: String },
    #[error("MissingValue: {0}")]
    MissingValue(&'static str),
    #[error("HeartRateOutOfRange: {0}")]
    HeartRateOutOfRange(f64),
    #[error("PaceAndDuration: give either pace or duration, not both")]
    PaceAndDuration,
    #[error("MalformedDuration: {0:?}")]
    MalformedDuration(String),
    #[error("unreadable row: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    pub line: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManualRow {
    pub line: u64,
    pub entry: ManualLogEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManualLog {
    pub rows: Vec<ManualRow>,
    pub issues: Vec<RowIssue>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("MissingHeader: log has no header row")]
    MissingHeader,
    #[error("MissingColumn: header lacks {0}")]
    MissingColumn(&'static str),
    #[error("NoValidRows: all {} rows are malformed", .0.len())]
    NoValidRows(Vec<RowIssue>),
    #[error("not UTF-8 text")]
    NotUtf8,
    #[error("NothingFound: no decodable activity in the given paths")]
    NothingFound(Vec<ManifestEntry>),
}

fn parse_date(text: &str, order: DateOrder) -> Result<NaiveDate, RowError> {
    let bad = || RowError::MalformedDate(text.to_string());
    if text.contains('-') {
        return NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| bad());
    }
    let fmt = match order {
        DateOrder::MonthFirst => "%m/%d/%Y",
        DateOrder::DayFirst => "%d/%m/%Y",
    };
    NaiveDate::parse_from_str(text, fmt).map_err(|_| bad())
}

/// `H:MM:SS`, `M:SS` or plain seconds.
fn parse_duration(text: &str) -> Result<f64, RowError> {
    let bad = || RowError::MalformedDuration(text.to_string());
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if nums.iter().any(|n| !n.is_finite() || *n < 0.0) {
        return Err(bad());
    }
    if nums.len() > 1 && nums[1..].iter().any(|&n| n >= 60.0) {
        return Err(bad());
    }
    let secs = match nums.as_slice() {
        [s] => *s,
        [m, s] => m * 60.0 + s,
        [h, m, s] => h * 3600.0 + m * 60.0 + s,
        _ => return Err(bad()),
    };
    if !(secs > 0.0) {
        return Err(bad());
    }
    Ok(secs)
}

struct Columns {
    date: usize,
    distance: usize,
    pace: Option<usize>,
    hr: usize,
    duration: Option<usize>,
    note: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        let need = |name: &'static str| find(name).ok_or(IngestError::MissingColumn(name));
        let cols = Columns {
            date: need("date")?,
            distance: need("distance_km")?,
            hr: need("avg_hr")?,
            pace: find("pace"),
            duration: find("duration"),
            note: find("note"),
        };
        if cols.pace.is_none() && cols.duration.is_none() {
            return Err(IngestError::MissingColumn("pace"));
        }
        Ok(cols)
    }

    fn parse_row(&self, rec: &csv::StringRecord, order: DateOrder) -> Result<ManualLogEntry, RowError> {
        let cell = |i: Option<usize>| i.and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty());
        let number = |i: usize, column: &'static str| -> Result<f64, RowError> {
            let text = cell(Some(i)).ok_or(RowError::MissingValue(column))?;
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| RowError::MalformedNumber {
                    column,
                    value: text.to_string(),
                })
        };
        let date = parse_date(cell(Some(self.date)).ok_or(RowError::MissingValue("date"))?, order)?;
        let distance_km = number(self.distance, "distance_km")?;
        if !(distance_km > 0.0) {
            return Err(RowError::MalformedNumber {
                column: "distance_km",
                value: distance_km.to_string(),
            });
        }
        let avg_hr = number(self.hr, "avg_hr")?;
        if !(HR_RANGE.0..=HR_RANGE.1).contains(&avg_hr) {
            return Err(RowError::HeartRateOutOfRange(avg_hr));
        }
        let (pace, duration_s) = match (cell(self.pace), cell(self.duration)) {
            (Some(_), Some(_)) => return Err(RowError::PaceAndDuration),
            (Some(p), None) => (parse_pace(p)?, None),
            (None, Some(d)) => {
                let secs = parse_duration(d)?;
                (secs / 60.0 / distance_km, Some(secs))
            }
            (None, None) => return Err(RowError::MissingValue("pace")),
        };
        if !(pace > 0.0) {
            return Err(MetricsError::MalformedPace(cell(self.pace).unwrap_or("").to_string()).into());
        }
        Ok(ManualLogEntry {
            date,
            distance_km,
            pace,
            avg_hr,
            duration_s,
            note: cell(self.note).map(str::to_string),
        })
    }
}

/// Reads a training log with a header naming `date`, `distance_km`,
/// `avg_hr` and `pace` or `duration` (any case, any order; `note` is
/// optional). Bad rows are reported by line and skipped.
pub fn parse_manual_csv(bytes: &[u8], order: DateOrder) -> Result<ManualLog, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(IngestError::MissingHeader);
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|_| IngestError::MissingHeader)?.clone();
    let cols = Columns::from_header(&header)?;

    let mut rows = Vec::new();
    let mut issues = Vec::new();
    for rec in reader.records() {
        let (line, parsed) = match rec {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                if rec.iter().all(|c| c.is_empty()) {
                    continue;
                }
                (line, cols.parse_row(&rec, order))
            }
            Err(e) => (
                e.position().map_or(0, |p| p.line()),
                Err(RowError::Csv(e.to_string())),
            ),
        };
        match parsed {
            Ok(entry) => rows.push(ManualRow { line, entry }),
            Err(e) => issues.push(RowIssue {
                line,
                error: e.to_string(),
            }),
        }
    }
    if rows.is_empty() {
        return Err(IngestError::NoValidRows(issues));
    }
    Ok(ManualLog { rows, issues })
}

/// Turns a log row into a sample-less activity starting at midnight UTC.
pub fn manual_activity(entry: ManualLogEntry, id: String) -> Activity {
    let start_time = Utc.from_utc_datetime(&entry.date.and_hms_opt(0, 0, 0).expect("midnight"));
    Activity {
        id,
        start_time,
        utc_offset_s: None,
        sport: "running".into(),
        samples: Vec::new(),
        laps: Vec::new(),
        rr: None,
        source: Source::ManualCsv,
        manual: Some(entry),
    }
}

/// One per-file problem found during a scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub error: String,
    pub detail: String,
}

/// Error manifest as JSON lines.
pub fn manifest_jsonl(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("manifest serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanOptions {
    pub date_order: DateOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub activities: Vec<Activity>,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Fit,
    Csv,
}

fn kind_of(path: &Path) -> Option<Kind> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "fit" => Some(Kind::Fit),
        "csv" => Some(Kind::Csv),
        _ => None,
    }
}

fn fit_error_name(e: &FitError) -> &'static str {
    match e {
        FitError::TruncatedFile { .. } => "TruncatedFile",
        FitError::BadSignature => "BadSignature",
        FitError::BadHeaderSize(_) => "BadHeaderSize",
        FitError::CrcMismatch { .. } => "CrcMismatch",
        FitError::OrphanDataMessage { .. } => "OrphanDataMessage",
        FitError::UnknownBaseType { .. } => "UnknownBaseType",
        FitError::NoRecords => "NoRecords",
        FitError::ValueOutOfRange { .. } => "ValueOutOfRange",
        FitError::InvalidFixture(_) => "InvalidFixture",
    }
}

fn ingest_error_name(e: &IngestError) -> &'static str {
    match e {
        IngestError::MissingHeader => "MissingHeader",
        IngestError::MissingColumn(_) => "MissingColumn",
        IngestError::NoValidRows(_) => "NoValidRows",
        IngestError::NotUtf8 => "NotUtf8",
        IngestError::NothingFound(_) => "NothingFound",
    }
}

fn load_file(path: &Path, opts: &ScanOptions) -> (Vec<Activity>, Vec<ManifestEntry>) {
    let shown = path.display().to_string();
    let entry = |error: &str, detail: String| ManifestEntry {
        path: shown.clone(),
        error: error.to_string(),
        detail,
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return (vec![], vec![entry("Io", e.to_string())]),
    };
    match kind_of(path) {
        Some(Kind::Fit) => match read_activities(&bytes) {
            Ok(acts) => (acts, vec![]),
            Err(e) => (vec![], vec![entry(fit_error_name(&e), e.to_string())]),
        },
        Some(Kind::Csv) => match parse_manual_csv(&bytes, opts.date_order) {
            Ok(log) => {
                let file_id = content_id(&bytes);
                let acts = log
                    .rows
                    .into_iter()
                    .map(|r| {
                        let id = content_id(format!("{file_id}#{}", r.line).as_bytes());
                        manual_activity(r.entry, id)
                    })
                    .collect();
                let issues = log
                    .issues
                    .into_iter()
                    .map(|i| entry("MalformedRow", format!("line {}: {}", i.line, i.error)))
                    .collect();
                (acts, issues)
            }
            Err(e) => (vec![], vec![entry(ingest_error_name(&e), e.to_string())]),
        },
        None => (vec![], vec![]),
    }
}

fn discover(paths: &[PathBuf], manifest: &mut Vec<ManifestEntry>) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for root in paths {
        if root.is_file() {
            files.push(root.clone());
            continue;
        }
        if !root.exists() {
            manifest.push(ManifestEntry {
                path: root.display().to_string(),
                error: "Io".into(),
                detail: "path does not exist".into(),
            });
            continue;
        }
        for item in WalkDir::new(root).sort_by_file_name() {
            match item {
                Ok(e) if e.file_type().is_file() && kind_of(e.path()).is_some() => {
                    files.push(e.into_path())
                }
                Ok(_) => {}
                Err(e) => manifest.push(ManifestEntry {
                    path: e.path().map_or_else(|| root.display().to_string(), |p| p.display().to_string()),
                    error: "Io".into(),
                    detail: e.to_string(),
                }),
            }
        }
    }
    files
}

fn dedupe_key(a: &Activity) -> (i64, i64) {
    let meters = a.total_distance_m().map_or(-1, |d| d.round() as i64);
    (a.start_time.timestamp(), meters)
}

/// Recursively loads `*.fit` and `*.csv` files, decoding in parallel.
///
/// Activities are deduplicated by content id and by identical start time
/// plus distance, then sorted by start time. Per-file failures go to the
/// manifest; the scan only fails when nothing at all could be loaded.
pub fn scan(paths: &[PathBuf], opts: &ScanOptions) -> Result<ScanOutcome, IngestError> {
    let mut manifest = Vec::new();
    let files = discover(paths, &mut manifest);
    let loaded: Vec<(Vec<Activity>, Vec<ManifestEntry>)> =
        files.par_iter().map(|p| load_file(p, opts)).collect();

    let mut seen_ids = HashSet::new();
    let mut seen_keys = HashSet::new();
    let mut activities = Vec::new();
    for (acts, issues) in loaded {
        manifest.extend(issues);
        for a in acts {
            if !seen_ids.insert(a.id.clone()) {
                continue;
            }
            if !seen_keys.insert(dedupe_key(&a)) {
                continue;
            }
            activities.push(a);
        }
    }
    if activities.is_empty() {
        return Err(IngestError::NothingFound(manifest));
    }
    activities.sort_by(|a, b| a.start_time.cmp(&b.start_time).then_with(|| a.id.cmp(&b.id)));
    Ok(ScanOutcome {
        activities,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Date,Distance_km,Pace,Avg_HR,Note\n";

    #[test]
    fn table_row() {
        let csv = format!("{HEADER}8/27/2018,15.7,5:25,140,long run\n");
        let log = parse_manual_csv(csv.as_bytes(), DateOrder::MonthFirst).unwrap();
        let e = &log.rows[0].entry;
        assert_eq!(e.date, NaiveDate::from_ymd_opt(2018, 8, 27).unwrap());
        assert!((e.pace - 5.4167).abs() < 1e-4);
        assert_eq!(e.note.as_deref(), Some("long run"));
        assert_eq!(log.rows[0].line, 2);
    }

    #[test]
    fn malformed_pace_row_is_reported() {
        let csv = format!("{HEADER}8/27/2018,15.7,5:75,140,\n2018-08-09,12.8,5:48,143,\n");
        let log = parse_manual_csv(csv.as_bytes(), DateOrder::MonthFirst).unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].line, 3);
        assert_eq!(log.issues.len(), 1);
        assert_eq!(log.issues[0].line, 2);
        assert!(log.issues[0].error.contains("MalformedPace"));
    }

    #[test]
    fn empty_file() {
        assert_eq!(parse_manual_csv(b"", DateOrder::MonthFirst), Err(IngestError::MissingHeader));
        assert_eq!(parse_manual_csv(b"  \n", DateOrder::MonthFirst), Err(IngestError::MissingHeader));
    }

    #[test]
    fn header_only() {
        assert!(matches!(
            parse_manual_csv(HEADER.as_bytes(), DateOrder::MonthFirst),
            Err(IngestError::NoValidRows(_))
        ));
    }

    #[test]
    fn missing_columns() {
        assert_eq!(
            parse_manual_csv(b"date,distance_km,avg_hr\n2018-01-01,10,140\n", DateOrder::MonthFirst),
            Err(IngestError::MissingColumn("pace"))
        );
        assert_eq!(
            parse_manual_csv(b"date,pace,avg_hr\n2018-01-01,5:00,140\n", DateOrder::MonthFirst),
            Err(IngestError::MissingColumn("distance_km"))
        );
    }

    #[test]
    fn ambiguous_dates_follow_order() {
        let csv = b"date,distance_km,pace,avg_hr\n3/4/2018,10,5:00,140\n";
        let m = parse_manual_csv(csv, DateOrder::MonthFirst).unwrap();
        assert_eq!(m.rows[0].entry.date, NaiveDate::from_ymd_opt(2018, 3, 4).unwrap());
        let d = parse_manual_csv(csv, DateOrder::DayFirst).unwrap();
        assert_eq!(d.rows[0].entry.date, NaiveDate::from_ymd_opt(2018, 4, 3).unwrap());
    }

    #[test]
    fn duration_derives_pace() {
        let csv = b"date,distance_km,duration,pace,avg_hr\n2018-01-01,10,0:50:00,,140\n2018-01-02,10,50:00,5:00,140\n";
        let log = parse_manual_csv(csv, DateOrder::MonthFirst).unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].entry.pace, 5.0);
        assert_eq!(log.rows[0].entry.duration_s, Some(3000.0));
        assert!(log.issues[0].error.contains("PaceAndDuration"));
    }

    #[test]
    fn heart_rate_bounds() {
        let csv = b"date,distance_km,pace,avg_hr\n2018-01-01,10,5:00,20\n2018-01-02,10,5:00,251\n2018-01-03,10,5:00,250\n";
        let log = parse_manual_csv(csv, DateOrder::MonthFirst).unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.issues.len(), 2);
    }

    #[test]
    fn duration_formats() {
        assert_eq!(parse_duration("1:02:03").unwrap(), 3723.0);
        assert_eq!(parse_duration("45:30").unwrap(), 2730.0);
        assert_eq!(parse_duration("600").unwrap(), 600.0);
        assert!(parse_duration("1:75").is_err());
        assert!(parse_duration("x").is_err());
    }
}
