use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::TimeSeries;

/// Analyzed span must exceed the warmup by at least this much (seconds).
pub const MIN_ANALYZED_SPAN_S: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Seconds dropped from the start before fitting.
    pub warmup_s: f64,
    /// Largest |drift_pct| still called stable.
    pub stability_pct: f64,
    /// Late degradation above this raises the wall flag.
    pub wall_pct: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            warmup_s: 300.0,
            stability_pct: 5.0,
            wall_pct: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub warmup_excluded: f64,
    pub mean_hre: f64,
    /// Beats/km per hour.
    pub slope: f64,
    pub drift_pct: f64,
    pub stable: bool,
    pub late_degradation_pct: f64,
    pub wall_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    WellFitted,
    Intermediate,
    PoorlyFitted,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::WellFitted => "well_fitted",
            Band::Intermediate => "intermediate",
            Band::PoorlyFitted => "poorly_fitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessThresholds {
    /// Mean HRE at or below this is well fitted.
    pub well_fitted_max: f64,
    /// Mean HRE above this is poorly fitted.
    pub poorly_fitted_min: f64,
}

impl Default for FitnessThresholds {
    fn default() -> Self {
        FitnessThresholds {
            well_fitted_max: 750.0,
            poorly_fitted_min: 800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessBand {
    pub band: Band,
    pub mean_hre: f64,
}

pub fn classify_fitness(mean_hre: f64, thresholds: &FitnessThresholds) -> FitnessBand {
    let band = if mean_hre <= thresholds.well_fitted_max {
        Band::WellFitted
    } else if mean_hre > thresholds.poorly_fitted_min {
        Band::PoorlyFitted
    } else {
        Band::Intermediate
    };
    FitnessBand { band, mean_hre }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Linear trend and late-race degradation of an HRE series after warmup.
///
/// `drift_pct` is the fitted rise across the analyzed span relative to its
/// mean. `late_degradation_pct` compares the final 20% of the span with the
/// 20%-50% window.
pub fn drift(series: &TimeSeries, cfg: &DriftConfig) -> Result<DriftReport, MetricsError> {
    let (Some(&first), Some(&last)) = (series.t.first(), series.t.last()) else {
        return Err(MetricsError::EmptySeries);
    };
    let needed = cfg.warmup_s + MIN_ANALYZED_SPAN_S;
    let too_short = || MetricsError::TooShort {
        span: last - first,
        needed,
    };
    if !(last - first > needed) {
        return Err(too_short());
    }
    let cutoff = first + cfg.warmup_s;
    let pts: Vec<(f64, f64)> = series.present().filter(|&(t, _)| t >= cutoff).collect();
    if pts.len() < 2 {
        return Err(too_short());
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let v_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &pts {
        sxy += (t - t_mean) * (v - v_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope_per_s = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a0 = pts[0].0;
    let span = pts[pts.len() - 1].0 - a0;
    let drift_pct = slope_per_s * span / v_mean * 100.0;

    let late = mean(pts.iter().filter(|p| p.0 >= a0 + 0.8 * span).map(|p| p.1));
    let middle = mean(
        pts.iter()
            .filter(|p| p.0 >= a0 + 0.2 * span && p.0 < a0 + 0.5 * span)
            .map(|p| p.1),
    );
    let (Some(late), Some(middle)) = (late, middle) else {
        return Err(too_short());
    };
    let late_degradation_pct = (late / middle - 1.0) * 100.0;

    Ok(DriftReport {
        warmup_excluded: cfg.warmup_s,
        mean_hre: v_mean,
        slope: slope_per_s * 3600.0,
        drift_pct,
        stable: drift_pct.abs() <= cfg.stability_pct,
        late_degradation_pct,
        wall_flag: late_degradation_pct > cfg.wall_pct,
    })
}
