//! Heart rate efficiency (HRE) toolkit.
//!
//! HRE is heart rate times pace: the heartbeats a runner spends per
//! kilometer. This crate decodes FIT activity files and CSV training logs,
//! computes HRE per sample, per session and per month/year, and classifies
//! race-day stability and aerobic fitness.

pub mod aggregate;
pub mod fit;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod synthetic;

pub use model::{Activity, Lap, RRSeries, Sample, SessionSummary, Source, TimeSeries, Unit};
