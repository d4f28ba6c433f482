//! Respiratory rate from beat-to-beat intervals.
//!
//! Breathing modulates the RR interval (respiratory sinus arrhythmia). Each
//! analysis window takes the intervals on their own beat clock, removes the
//! mean and linear trend, resamples to a uniform grid and picks the
//! strongest spectral line inside the breathing band.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::MetricsError;
use crate::model::{RRSeries, TimeSeries, Unit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathingConfig {
    pub window_s: f64,
    pub step_s: f64,
    pub resample_hz: f64,
    /// Search band in Hz.
    pub band_hz: (f64, f64),
    /// Least RR coverage a window needs, in seconds.
    pub min_coverage_s: f64,
    /// Zero-padded transform length; sets the frequency grid spacing.
    pub fft_len: usize,
}

impl Default for BreathingConfig {
    fn default() -> Self {
        BreathingConfig {
            window_s: 60.0,
            step_s: 5.0,
            resample_hz: 4.0,
            band_hz: (0.15, 1.2),
            min_coverage_s: 30.0,
            fft_len: 8192,
        }
    }
}

/// Detrended RR deviations below this (seconds, RMS) count as flat.
const FLAT_RMS_S: f64 = 1e-6;

/// Breathing rate in breaths/min, one value per window, stamped at the
/// window end. Windows that cannot be analyzed are missing.
pub fn breathing_rate(rr: &RRSeries, window_s: f64) -> Result<TimeSeries, MetricsError> {
    breathing_rate_with(
        rr,
        &BreathingConfig {
            window_s,
            ..BreathingConfig::default()
        },
    )
}

pub fn breathing_rate_with(rr: &RRSeries, cfg: &BreathingConfig) -> Result<TimeSeries, MetricsError> {
    if !(cfg.window_s > 0.0) || !(cfg.step_s > 0.0) {
        return Err(MetricsError::InvalidWindow(cfg.window_s));
    }
    // Beat clock: every interval advances time, artifacts included, so a
    // dropped beat does not shift the ones after it.
    let mut clock = 0.0;
    let mut beats: Vec<(f64, f64)> = Vec::with_capacity(rr.intervals.len());
    for (i, &iv) in rr.intervals.iter().enumerate() {
        if !(iv.is_finite() && iv > 0.0) {
            continue;
        }
        clock += iv;
        if !rr.is_flagged(i) {
            beats.push((clock, iv));
        }
    }
    let total = clock;
    if total < cfg.min_coverage_s || beats.len() < 4 {
        return Err(MetricsError::InsufficientData);
    }

    let mut ends = Vec::new();
    if total <= cfg.window_s {
        ends.push(total);
    } else {
        let mut e = cfg.window_s;
        while e <= total + 1e-9 {
            ends.push(e);
            e += cfg.step_s;
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut t = Vec::with_capacity(ends.len());
    let mut v = Vec::with_capacity(ends.len());
    let mut any_flat = false;
    for &end in &ends {
        let start = end - cfg.window_s;
        let lo = beats.partition_point(|b| b.0 < start);
        let hi = beats.partition_point(|b| b.0 <= end);
        let window = &beats[lo..hi];
        let value = match window_rate(window, cfg, &*fft) {
            Ok(r) => Some(r),
            Err(MetricsError::NoSpectralPeak) => {
                any_flat = true;
                None
            }
            Err(_) => None,
        };
        t.push(end);
        v.push(value);
    }
    if v.iter().all(Option::is_none) {
        return Err(if any_flat {
            MetricsError::NoSpectralPeak
        } else {
            MetricsError::InsufficientData
        });
    }
    Ok(TimeSeries::new(Unit::BreathsPerMin, t, v)?)
}

fn window_rate(
    beats: &[(f64, f64)],
    cfg: &BreathingConfig,
    fft: &dyn rustfft::Fft<f64>,
) -> Result<f64, MetricsError> {
    if beats.len() < 4 || beats[beats.len() - 1].0 - beats[0].0 < cfg.min_coverage_s {
        return Err(MetricsError::InsufficientData);
    }
    let n = beats.len() as f64;
    let tm = beats.iter().map(|b| b.0).sum::<f64>() / n;
    let vm = beats.iter().map(|b| b.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in beats {
        sxy += (t - tm) * (v - vm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let resid: Vec<(f64, f64)> = beats
        .iter()
        .map(|&(t, v)| (t, v - vm - slope * (t - tm)))
        .collect();
    let rms = (resid.iter().map(|r| r.1 * r.1).sum::<f64>() / n).sqrt();
    if rms < FLAT_RMS_S {
        return Err(MetricsError::NoSpectralPeak);
    }

    let grid = resample_linear(&resid, cfg.resample_hz);
    if grid.len() > cfg.fft_len {
        return Err(MetricsError::InvalidWindow(cfg.window_s));
    }
    let mut buf: Vec<Complex<f64>> = grid.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(cfg.fft_len, Complex::new(0.0, 0.0));
    fft.process(&mut buf);

    let df = cfg.resample_hz / cfg.fft_len as f64;
    let k_lo = (cfg.band_hz.0 / df).ceil() as usize;
    let k_hi = ((cfg.band_hz.1 / df).floor() as usize).min(cfg.fft_len / 2);
    let (k_peak, peak) = (k_lo..=k_hi)
        .map(|k| (k, buf[k].norm()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(peak > 0.0) {
        return Err(MetricsError::NoSpectralPeak);
    }
    Ok(60.0 * k_peak as f64 * df)
}

/// Samples `(t, x)` points on a uniform grid from the first to the last
/// time by linear interpolation.
fn resample_linear(points: &[(f64, f64)], hz: f64) -> Vec<f64> {
    let t0 = points[0].0;
    let t1 = points[points.len() - 1].0;
    let count = ((t1 - t0) * hz).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for i in 0..count {
        let t = t0 + i as f64 / hz;
        while j + 2 < points.len() && points[j + 1].0 <= t {
            j += 1;
        }
        let (ta, xa) = points[j];
        let (tb, xb) = points[j + 1];
        let w = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        out.push(xa + w * (xb - xa));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// RR intervals whose deviation from `mean` follows a sinusoid of
    /// `freq_hz` evaluated on the beat clock.
    fn planted(mean: f64, amp: f64, freq_hz: f64, duration: f64) -> RRSeries {
        let mut t = 0.0;
        let mut out = Vec::new();
        while t < duration {
            let rr = mean + amp * (2.0 * std::f64::consts::PI * freq_hz * t).sin();
            out.push(rr);
            t += rr;
        }
        RRSeries::new(out)
    }

    #[test]
    fn recovers_quarter_hertz() {
        let s = breathing_rate(&planted(0.86, 0.04, 0.25, 300.0), 60.0).unwrap();
        for v in s.v.iter() {
            assert!((v.unwrap() - 15.0).abs() <= 0.5, "{v:?}");
        }
    }

    #[test]
    fn recovers_half_hertz() {
        let s = breathing_rate(&planted(0.86, 0.04, 0.5, 300.0), 60.0).unwrap();
        for v in s.v.iter() {
            assert!((v.unwrap() - 30.0).abs() <= 0.5, "{v:?}");
        }
    }

    #[test]
    fn windows_step_by_five_seconds() {
        let s = breathing_rate(&planted(0.86, 0.04, 0.25, 120.0), 60.0).unwrap();
        assert_eq!(s.t[0], 60.0);
        assert_eq!(s.t[1], 65.0);
        assert!(s.t.last().unwrap() <= &120.0);
    }

    #[test]
    fn constant_rr_has_no_peak() {
        let rr = RRSeries::new(vec![0.86; 200]);
        assert!(matches!(breathing_rate(&rr, 60.0), Err(MetricsError::NoSpectralPeak)));
    }

    #[test]
    fn too_little_data() {
        let rr = RRSeries::new(vec![0.86; 20]);
        assert!(matches!(breathing_rate(&rr, 60.0), Err(MetricsError::InsufficientData)));
    }

    #[test]
    fn flagged_beats_keep_the_clock() {
        let mut rr = planted(0.86, 0.04, 0.25, 300.0).intervals;
        rr[100] = 0.05;
        let s = breathing_rate(&RRSeries::new(rr), 60.0).unwrap();
        for v in s.v.iter().flatten() {
            assert!((v - 15.0).abs() <= 0.5);
        }
    }

    #[test]
    fn resample_is_linear() {
        let g = resample_linear(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], 4.0);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0]);
    }
}
