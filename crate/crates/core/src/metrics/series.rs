use super::pace::{hre, pace_from_speed};
use super::smooth::smooth;
use super::MetricsError;
use crate::model::{Activity, TimeSeries, Unit, DEFAULT_STOP_SPEED};

/// Minimum horizontal travel over a grade window, in meters.
pub const MIN_GRADE_RUN_M: f64 = 5.0;

fn sample_times(activity: &Activity) -> Vec<f64> {
    activity.samples.iter().map(|s| s.t).collect()
}

/// Instantaneous pace (min/km) per sample; missing below the stop speed.
pub fn pace_series(activity: &Activity) -> Result<TimeSeries, MetricsError> {
    let v = activity
        .samples
        .iter()
        .map(|s| {
            s.speed
                .filter(|&v| v >= DEFAULT_STOP_SPEED)
                .and_then(|v| pace_from_speed(v).ok())
        })
        .collect();
    Ok(TimeSeries::new(Unit::MinPerKm, sample_times(activity), v)?)
}

pub fn heart_rate_series(activity: &Activity) -> Result<TimeSeries, MetricsError> {
    let v = activity
        .samples
        .iter()
        .map(|s| s.heart_rate.map(f64::from))
        .collect();
    Ok(TimeSeries::new(Unit::Bpm, sample_times(activity), v)?)
}

/// Per-sample HRE smoothed over `window` seconds. Samples without heart
/// rate or slower than the stop speed are missing.
pub fn hre_series(activity: &Activity, window: f64) -> Result<TimeSeries, MetricsError> {
    let pace = pace_series(activity)?;
    let v: Vec<Option<f64>> = activity
        .samples
        .iter()
        .zip(&pace.v)
        .map(|(s, p)| {
            let hr = s.heart_rate.filter(|&h| h > 0)?;
            hre(hr as f64, (*p)?).ok()
        })
        .collect();
    if v.iter().all(Option::is_none) {
        return Err(MetricsError::NoUsableSamples);
    }
    smooth(&TimeSeries::new(Unit::BeatsPerKm, pace.t, v)?, window)
}

/// Grade as rise over run between the edges of a `window`-second span,
/// using altitude and distance smoothed with the same window. Smoothing
/// both with identical weights keeps a linear profile's grade exact, even
/// in the truncated windows at the ends.
pub fn grade_series(activity: &Activity, window: f64) -> Result<TimeSeries, MetricsError> {
    let idx: Vec<usize> = activity
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.altitude.is_some() && s.distance.is_some())
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(MetricsError::NoAltitude);
    }
    let t: Vec<f64> = idx.iter().map(|&i| activity.samples[i].t).collect();
    let alt = TimeSeries::new(
        Unit::Meters,
        t.clone(),
        idx.iter().map(|&i| activity.samples[i].altitude).collect(),
    )?;
    let dist = TimeSeries::new(
        Unit::Meters,
        t.clone(),
        idx.iter().map(|&i| activity.samples[i].distance).collect(),
    )?;
    let alt = smooth(&alt, window)?;
    let dist = smooth(&dist, window)?;

    let half = window / 2.0;
    let mut grade = vec![None; activity.samples.len()];
    let (mut lo, mut hi) = (0, 0);
    for (k, &i) in idx.iter().enumerate() {
        while t[k] - t[lo] > half {
            lo += 1;
        }
        while hi + 1 < t.len() && t[hi + 1] - t[k] <= half {
            hi += 1;
        }
        let (Some(d1), Some(d0)) = (dist.v[hi], dist.v[lo]) else { continue };
        let (Some(a1), Some(a0)) = (alt.v[hi], alt.v[lo]) else { continue };
        let run = d1 - d0;
        if run >= MIN_GRADE_RUN_M {
            grade[i] = Some((a1 - a0) / run);
        }
    }
    Ok(TimeSeries::new(Unit::GradeFraction, sample_times(activity), grade)?)
}

/// Pearson correlation over index pairs where both values are present.
pub fn pearson(xs: &[Option<f64>], ys: &[Option<f64>]) -> Result<f64, MetricsError> {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return Err(MetricsError::NoCommonSamples);
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let degenerate = |ss: f64, m: f64| ss <= 1e-12 * n * m.abs().max(1.0).powi(2);
    if degenerate(sxx, mx) || degenerate(syy, my) {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between smoothed HRE and terrain grade on the sample grid.
pub fn hre_grade_correlation(activity: &Activity, window: f64) -> Result<f64, MetricsError> {
    let h = hre_series(activity, window)?;
    let g = grade_series(activity, window)?;
    pearson(&h.v, &g.v)
}

/// Re-keys a per-sample series by cumulative distance in km, dropping
/// samples without distance.
pub fn index_by_distance(activity: &Activity, series: &TimeSeries) -> Vec<(f64, Option<f64>)> {
    activity
        .samples
        .iter()
        .zip(&series.v)
        .filter_map(|(s, v)| s.distance.map(|d| (d / 1000.0, *v)))
        .collect()
}
