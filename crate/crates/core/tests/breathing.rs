use hrekit::metrics::{breathing_rate, MetricsError};
use hrekit::synthetic::planted_rr;
use hrekit::RRSeries;

/// Every analyzed window recovers the planted rate within `tol` breaths/min.
fn assert_recovers(mean_rr: f64, amplitude: f64, freq_hz: f64, tol: f64) {
    let rr = planted_rr(mean_rr, amplitude, freq_hz, 300.0);
    let series = breathing_rate(&rr, 60.0).unwrap();
    let values: Vec<f64> = series.v.iter().flatten().copied().collect();
    assert!(values.len() >= 40, "only {} windows", values.len());
    for v in values {
        assert!(
            (v - freq_hz * 60.0).abs() <= tol,
            "planted {freq_hz} Hz, estimated {v} breaths/min"
        );
    }
}

#[test]
fn recovers_resting_rates() {
    for f in [0.20, 0.25, 0.30, 0.40, 0.50] {
        assert_recovers(0.86, 0.04, f, 0.5);
    }
}

#[test]
fn recovers_exercise_rates_at_high_heart_rate() {
    // Fast breathing is only observable when beats come faster than twice
    // the breathing frequency, i.e. during hard running.
    for f in [0.60, 0.80, 1.00] {
        assert_recovers(0.35, 0.02, f, 0.5);
    }
}

#[test]
fn windows_are_stamped_at_their_end() {
    let rr = planted_rr(0.86, 0.04, 0.25, 120.0);
    let s = breathing_rate(&rr, 60.0).unwrap();
    assert_eq!(&s.t[..3], &[60.0, 65.0, 70.0]);
    assert!(s.t.windows(2).all(|w| w[1] - w[0] == 5.0));
}

#[test]
fn flat_rr_has_no_peak() {
    let rr = RRSeries::new(vec![0.8; 200]);
    assert_eq!(breathing_rate(&rr, 60.0), Err(MetricsError::NoSpectralPeak));
}

#[test]
fn short_recording_is_insufficient() {
    let rr = RRSeries::new(vec![0.8; 20]);
    assert_eq!(breathing_rate(&rr, 60.0), Err(MetricsError::InsufficientData));
}

#[test]
fn artifacts_do_not_derail_the_estimate() {
    let mut intervals = planted_rr(0.86, 0.04, 0.25, 300.0).intervals;
    intervals[50] = 4.0;
    intervals[180] = 0.05;
    let rr = RRSeries::new(intervals);
    assert!(rr.is_flagged(50) && rr.is_flagged(180));
    let s = breathing_rate(&rr, 60.0).unwrap();
    let values: Vec<f64> = s.v.iter().flatten().copied().collect();
    let near = values.iter().filter(|v| (*v - 15.0).abs() <= 0.5).count();
    assert!(near * 10 >= values.len() * 9, "{near}/{}", values.len());
}
