use super::MetricsError;

/// Parses `"M:SS"` (seconds may carry a fraction) or a decimal min/km
/// string into decimal minutes per kilometer.
pub fn parse_pace(text: &str) -> Result<f64, MetricsError> {
    let text = text.trim();
    let bad = || MetricsError::MalformedPace(text.to_string());
    let value = match text.split_once(':') {
        Some((m, s)) => {
            if m.is_empty() || !m.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
                return Err(bad());
            }
            let minutes: f64 = m.parse().map_err(|_| bad())?;
            let seconds: f64 = s.parse().map_err(|_| bad())?;
            if !(0.0..60.0).contains(&seconds) {
                return Err(bad());
            }
            minutes + seconds / 60.0
        }
        None => text.parse::<f64>().map_err(|_| bad())?,
    };
    if !value.is_finite() || value < 0.0 {
        return Err(bad());
    }
    Ok(value)
}

/// Decimal pace in min/km for a speed in m/s.
pub fn pace_from_speed(speed: f64) -> Result<f64, MetricsError> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(MetricsError::NonpositiveSpeed(speed));
    }
    Ok(1000.0 / (60.0 * speed))
}

/// Heart rate efficiency: heartbeats spent per kilometer.
pub fn hre(heart_rate: f64, pace: f64) -> Result<f64, MetricsError> {
    if !(heart_rate > 0.0 && pace > 0.0) || !heart_rate.is_finite() || !pace.is_finite() {
        return Err(MetricsError::NonpositiveInput { heart_rate, pace });
    }
    Ok(heart_rate * pace)
}

/// Integer used when a beats/km value is displayed. Ties go to even.
pub fn display_hre(value: f64) -> i64 {
    value.round_ties_even() as i64
}

/// Renders decimal min/km as `M:SS`, rounding to the nearest second.
pub fn format_pace(pace: f64) -> String {
    let total = (pace * 60.0).round() as i64;
    format!("{}:{:02}", total / 60, total % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm_ss_paces() {
        assert!((parse_pace("5:25").unwrap() - 5.4167).abs() < 1e-4);
        assert!((parse_pace("6:04").unwrap() - 6.0667).abs() < 1e-4);
        assert_eq!(parse_pace("5:00").unwrap(), 5.0);
        assert_eq!(parse_pace("5.5").unwrap(), 5.5);
        assert_eq!(parse_pace(" 4:30 ").unwrap(), 4.5);
    }

    #[test]
    fn malformed_paces() {
        for bad in ["5:75", "5:60", "-5:00", "abc", "", "5:", ":30", "5:-1", "NaN", "inf", "-3"] {
            assert!(
                matches!(parse_pace(bad), Err(MetricsError::MalformedPace(_))),
                "{bad} should be rejected"
            );
        }
    }

    #[test]
    fn pace_speed_identity() {
        assert!((pace_from_speed(3.3333).unwrap() - 5.0).abs() < 1e-3);
        assert!((pace_from_speed(2.7778).unwrap() - 6.0).abs() < 1e-3);
        assert_eq!(pace_from_speed(1000.0 / 300.0).unwrap(), 5.0);
        assert!(matches!(pace_from_speed(0.0), Err(MetricsError::NonpositiveSpeed(_))));
        assert!(pace_from_speed(-1.0).is_err());
    }

    #[test]
    fn hre_rejects_nonpositive() {
        assert!(hre(0.0, 5.0).is_err());
        assert!(hre(140.0, 0.0).is_err());
        assert_eq!(hre(140.0, 5.0).unwrap(), 700.0);
    }

    #[test]
    fn pace_display() {
        assert_eq!(format_pace(5.4166667), "5:25");
        assert_eq!(format_pace(6.0166667), "6:01");
        assert_eq!(format_pace(4.9999), "5:00");
    }

    #[test]
    fn display_rounding_ties_to_even() {
        assert_eq!(display_hre(857.5), 858);
        assert_eq!(display_hre(856.5), 856);
        assert_eq!(display_hre(873.6), 874);
    }
}
