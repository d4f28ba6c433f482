//! Read-only JSON service over a set of analyzed activities.
//!
//! The store is built once at startup and shared between requests without
//! locking. All series math happens here so the viewer only draws.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use hrekit::aggregate::{rollup, summarize_allowing_missing_hr, Granularity, RollupRow};
use hrekit::metrics::{
    assess, breathing_rate, grade_series, heart_rate_series, hre_series, pace_series,
    AnalysisConfig, DriftReport, FitnessBand, MetricsError,
};
use hrekit::{Activity, Lap, SessionSummary, TimeSeries};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 8750;

/// Thresholds applied to every activity in the store.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreConfig {
    pub analysis: AnalysisConfig,
    pub min_distance_km: f64,
    pub stop_speed: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            analysis: AnalysisConfig::default(),
            min_distance_km: hrekit::aggregate::DEFAULT_MIN_DISTANCE_KM,
            stop_speed: hrekit::model::DEFAULT_STOP_SPEED,
        }
    }
}

struct Entry {
    activity: Activity,
    summary: Option<SessionSummary>,
    listing: ActivityListing,
}

/// Immutable set of loaded activities with their summaries.
pub struct Store {
    entries: Vec<Entry>,
    by_id: HashMap<String, usize>,
    config: StoreConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityListing {
    pub id: String,
    pub start_time: DateTime<Utc>,
    pub distance_km: Option<f64>,
    pub hre: Option<f64>,
    pub band: Option<String>,
}

/// Per-sample columns of equal length; absent values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleArrays {
    /// Seconds since the activity start.
    pub t: Vec<f64>,
    /// Meters.
    pub distance: Vec<Option<f64>>,
    pub lat: Vec<Option<f64>>,
    pub lon: Vec<Option<f64>>,
    /// Meters.
    pub altitude: Vec<Option<f64>>,
    pub hr: Vec<Option<f64>>,
    /// min/km.
    pub pace: Vec<Option<f64>>,
    /// Smoothed beats/km, `null` wherever hr or pace is.
    pub hre: Vec<Option<f64>>,
    /// Grade fraction, all `null` without altitude.
    pub grade: Vec<Option<f64>>,
}

impl SampleArrays {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Builds the columns with HRE smoothed over `window` seconds.
    pub fn build(activity: &Activity, window: f64) -> Result<SampleArrays, MetricsError> {
        let n = activity.samples.len();
        let col = |f: fn(&hrekit::Sample) -> Option<f64>| activity.samples.iter().map(f).collect();
        let hr = heart_rate_series(activity)?.v;
        let pace = pace_series(activity)?.v;
        let hre = match hre_series(activity, window) {
            Ok(s) => s.v,
            Err(MetricsError::NoUsableSamples) => vec![None; n],
            Err(e) => return Err(e),
        };
        let hre = hre
            .into_iter()
            .zip(hr.iter().zip(&pace))
            .map(|(v, (h, p))| v.filter(|_| h.is_some() && p.is_some()))
            .collect();
        let grade = match grade_series(activity, window) {
            Ok(s) => s.v,
            Err(MetricsError::NoAltitude) => vec![None; n],
            Err(e) => return Err(e),
        };
        Ok(SampleArrays {
            t: activity.samples.iter().map(|s| s.t).collect(),
            distance: col(|s| s.distance),
            lat: col(|s| s.lat),
            lon: col(|s| s.lon),
            altitude: col(|s| s.altitude),
            hr,
            pace,
            hre,
            grade,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityBundle {
    pub id: String,
    pub start_time: DateTime<Utc>,
    pub sport: String,
    pub window_s: f64,
    pub summary: Option<SessionSummary>,
    pub samples: SampleArrays,
    pub laps: Vec<Lap>,
    /// `null` when the activity is too short for drift analysis.
    pub drift: Option<DriftReport>,
    pub fitness: Option<FitnessBand>,
}

impl Store {
    pub fn new(activities: Vec<Activity>, config: StoreConfig) -> Store {
        let entries: Vec<Entry> = activities
            .into_iter()
            .map(|activity| {
                let summary = summarize_allowing_missing_hr(&activity, config.stop_speed).ok();
                let band = assess(&activity, &config.analysis)
                    .ok()
                    .map(|a| a.fitness.band.as_str().to_string());
                let listing = ActivityListing {
                    id: activity.id.clone(),
                    start_time: activity.start_time,
                    distance_km: summary.as_ref().map(|s| s.distance_km),
                    hre: summary.as_ref().and_then(|s| s.hre),
                    band,
                };
                Entry {
                    activity,
                    summary,
                    listing,
                }
            })
            .collect();
        let by_id = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.activity.id.clone(), i))
            .collect();
        Store {
            entries,
            by_id,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.by_id.get(id).map(|&i| &self.entries[i].activity)
    }

    pub fn listings(&self) -> Vec<ActivityListing> {
        self.entries.iter().map(|e| e.listing.clone()).collect()
    }

    pub fn bundle(&self, id: &str, window: f64) -> Option<Result<ActivityBundle, MetricsError>> {
        let e = &self.entries[*self.by_id.get(id)?];
        let a = &e.activity;
        let cfg = AnalysisConfig {
            smoothing_window_s: window,
            ..self.config.analysis
        };
        let assessment = assess(a, &cfg).ok();
        Some(SampleArrays::build(a, window).map(|samples| ActivityBundle {
            id: a.id.clone(),
            start_time: a.start_time,
            sport: a.sport.clone(),
            window_s: window,
            summary: e.summary.clone(),
            samples,
            laps: a.laps.clone(),
            drift: assessment.as_ref().map(|x| x.drift.clone()),
            fitness: assessment.map(|x| x.fitness),
        }))
    }

    pub fn rollup(&self, granularity: Granularity) -> Vec<RollupRow> {
        let summaries: Vec<SessionSummary> =
            self.entries.iter().filter_map(|e| e.summary.clone()).collect();
        rollup(&summaries, granularity, self.config.min_distance_km)
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
        .into_response()
}

#[derive(Debug, Deserialize)]
struct BundleQuery {
    window: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RollupQuery {
    granularity: Option<String>,
}

fn parse_window(raw: Option<&str>, default: f64) -> Result<f64, Response> {
    let Some(raw) = raw else { return Ok(default) };
    match raw.trim().parse::<f64>() {
        Ok(w) if w.is_finite() && w > 0.0 => Ok(w),
        _ => Err(error(
            StatusCode::BAD_REQUEST,
            format!("window must be a positive number of seconds, got {raw:?}"),
        )),
    }
}

async fn list_activities(State(store): State<Arc<Store>>) -> Json<Vec<ActivityListing>> {
    Json(store.listings())
}

async fn get_activity(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<BundleQuery>,
) -> Response {
    let window = match parse_window(q.window.as_deref(), store.config.analysis.smoothing_window_s) {
        Ok(w) => w,
        Err(r) => return r,
    };
    match store.bundle(&id, window) {
        None => error(StatusCode::NOT_FOUND, format!("no activity {id:?}")),
        Some(Ok(b)) => Json(b).into_response(),
        Some(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn get_breathing(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Response {
    let Some(a) = store.activity(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no activity {id:?}"));
    };
    let Some(rr) = &a.rr else {
        return error(StatusCode::NOT_FOUND, "activity has no RR data");
    };
    match breathing_rate(rr, hrekit::metrics::BreathingConfig::default().window_s) {
        Ok(series) => Json::<TimeSeries>(series).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn get_rollup(State(store): State<Arc<Store>>, Query(q): Query<RollupQuery>) -> Response {
    let granularity = match q.granularity.as_deref() {
        None | Some("monthly") => Granularity::Monthly,
        Some("yearly") => Granularity::Yearly,
        Some(other) => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("granularity must be monthly or yearly, got {other:?}"),
            )
        }
    };
    Json(store.rollup(granularity)).into_response()
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such route")
}

const INDEX_HTML: &str = include_str!("index.html");

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

/// True for `http(s)://localhost`, `127.0.0.1` or `[::1]` on any port.
pub fn is_loopback_origin(origin: &str) -> bool {
    let Some(rest) = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
    else {
        return false;
    };
    let host = if let Some(v6) = rest.strip_prefix('[') {
        match v6.split_once(']') {
            Some((h, tail)) if tail.is_empty() || tail.starts_with(':') => return h == "::1",
            _ => return false,
        }
    } else {
        rest.split(':').next().unwrap_or("")
    };
    matches!(host, "localhost" | "127.0.0.1")
}

fn cors() -> CorsLayer {
    CorsLayer::new()
        .allow_methods([Method::GET])
        .allow_headers([header::CONTENT_TYPE])
        .allow_origin(AllowOrigin::predicate(|origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(is_loopback_origin)
        }))
}

/// API routes plus the viewer. With `assets` the viewer's files are served
/// from that directory; otherwise `/` is a small built-in page.
pub fn router(store: Arc<Store>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/activities", get(list_activities))
        .route("/api/activities/{id}", get(get_activity))
        .route("/api/activities/{id}/breathing", get(get_breathing))
        .route("/api/rollup", get(get_rollup))
        .route("/api/{*rest}", get(not_found));
    let app = match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir).fallback(get(not_found))),
        None => api.route("/", get(index)).fallback(not_found),
    };
    app.with_state(store).layer(cors())
}

pub fn loopback(port: u16) -> SocketAddr {
    SocketAddr::from((Ipv4Addr::LOCALHOST, port))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(store: Arc<Store>, addr: SocketAddr, assets: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, activities = store.len(), "serving");
    axum::serve(listener, router(store, assets)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_origins() {
        for ok in [
            "http://localhost",
            "http://localhost:5173",
            "https://127.0.0.1:8443",
            "http://[::1]:3000",
        ] {
            assert!(is_loopback_origin(ok), "{ok}");
        }
        for bad in [
            "http://example.com",
            "http://localhost.evil.com",
            "http://127.0.0.1.nip.io",
            "file://localhost",
            "http://[::2]:80",
            "null",
        ] {
            assert!(!is_loopback_origin(bad), "{bad}");
        }
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window(None, 30.0).unwrap(), 30.0);
        assert_eq!(parse_window(Some("12.5"), 30.0).unwrap(), 12.5);
        for bad in ["0", "-3", "abc", "NaN", "inf", ""] {
            assert!(parse_window(Some(bad), 30.0).is_err(), "{bad}");
        }
    }
}
