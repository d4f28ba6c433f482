use super::MetricsError;
use crate::model::TimeSeries;

pub const DEFAULT_SMOOTHING_WINDOW_S: f64 = 30.0;

/// Centered moving average over samples within `±window/2` seconds.
///
/// Missing values are left out of every mean and stay missing in the
/// output. Near the edges the window is truncated rather than padded.
pub fn smooth(series: &TimeSeries, window: f64) -> Result<TimeSeries, MetricsError> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(MetricsError::InvalidWindow(window));
    }
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let half = window / 2.0;
    let t = &series.t;
    let n = t.len();
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        while t[i] - t[lo] > half {
            lo += 1;
        }
        while hi + 1 < n && t[hi + 1] - t[i] <= half {
            hi += 1;
        }
        out.push(series.v[i].and_then(|_| window_mean(&series.v[lo..=hi])));
    }
    Ok(TimeSeries {
        unit: series.unit,
        t: series.t.clone(),
        v: out,
    })
}

fn window_mean(values: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values.iter().flatten() {
        sum += v;
        count += 1;
        min = min.min(*v);
        max = max.max(*v);
    }
    // Rounding in the sum can push the mean a ulp outside [min, max].
    (count > 0).then(|| (sum / count as f64).clamp(min, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;

    fn series(v: Vec<Option<f64>>) -> TimeSeries {
        let t = (0..v.len()).map(|i| i as f64).collect();
        TimeSeries::new(Unit::BeatsPerKm, t, v).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let s = series(vec![Some(0.1); 200]);
        assert_eq!(smooth(&s, 30.0).unwrap().v, s.v);
    }

    #[test]
    fn spike_attenuated_by_window_count() {
        let mut v = vec![Some(700.0); 101];
        v[50] = Some(700.0 + 310.0);
        let out = smooth(&series(v), 30.0).unwrap();
        // ±15 s at 1 Hz covers 31 points.
        assert!((out.v[50].unwrap() - (700.0 + 310.0 / 31.0)).abs() < 1e-9);
        assert!((out.v[35].unwrap() - 710.0).abs() < 1e-9);
        assert_eq!(out.v[34], Some(700.0));
    }

    #[test]
    fn sub_interval_window_is_identity() {
        let v: Vec<_> = (0..20).map(|i| Some((i * i) as f64)).collect();
        let s = series(v);
        assert_eq!(smooth(&s, 0.5).unwrap().v, s.v);
    }

    #[test]
    fn edges_use_truncated_window() {
        let v: Vec<_> = (0..10).map(|i| Some(i as f64)).collect();
        let out = smooth(&series(v), 4.0).unwrap();
        assert_eq!(out.v[0], Some(1.0)); // mean of 0, 1, 2
        assert_eq!(out.v[5], Some(5.0));
        assert_eq!(out.v[9], Some(8.0)); // mean of 7, 8, 9
    }

    #[test]
    fn missing_values_are_skipped() {
        let out = smooth(&series(vec![Some(1.0), None, Some(3.0)]), 4.0).unwrap();
        assert_eq!(out.v, vec![Some(2.0), None, Some(2.0)]);
    }

    #[test]
    fn errors() {
        assert!(matches!(smooth(&series(vec![]), 30.0), Err(MetricsError::EmptySeries)));
        assert!(matches!(
            smooth(&series(vec![Some(1.0)]), 0.0),
            Err(MetricsError::InvalidWindow(_))
        ));
    }
}
