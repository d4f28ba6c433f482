//! `key = value` settings file, overridden by command-line flags.

use std::path::Path;

use hrekit::aggregate::DEFAULT_MIN_DISTANCE_KM;
use hrekit::ingest::DateOrder;
use hrekit::metrics::{AnalysisConfig, DriftConfig, FitnessThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub smoothing_window: f64,
    pub min_distance_km: f64,
    pub warmup_s: f64,
    pub stability_pct: f64,
    pub wall_pct: f64,
    pub well_fitted_max: f64,
    pub poorly_fitted_min: f64,
    pub date_order: DateOrder,
    pub output: Option<OutputFormat>,
}

impl Default for Settings {
    fn default() -> Self {
        let a = AnalysisConfig::default();
        Settings {
            smoothing_window: a.smoothing_window_s,
            min_distance_km: DEFAULT_MIN_DISTANCE_KM,
            warmup_s: a.drift.warmup_s,
            stability_pct: a.drift.stability_pct,
            wall_pct: a.drift.wall_pct,
            well_fitted_max: a.fitness.well_fitted_max,
            poorly_fitted_min: a.fitness.poorly_fitted_min,
            date_order: DateOrder::MonthFirst,
            output: None,
        }
    }
}

/// Values given on the command line; `None` keeps the file or default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub smoothing_window: Option<f64>,
    pub min_distance_km: Option<f64>,
    pub warmup_s: Option<f64>,
    pub stability_pct: Option<f64>,
    pub wall_pct: Option<f64>,
    pub well_fitted_max: Option<f64>,
    pub poorly_fitted_min: Option<f64>,
    pub day_first: bool,
    pub output: Option<OutputFormat>,
}

fn number(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {value:?}"))
}

impl Settings {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Settings, String> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "smoothing_window" => s.smoothing_window = number(key, value)?,
                "min_distance_km" => s.min_distance_km = number(key, value)?,
                "warmup_s" => s.warmup_s = number(key, value)?,
                "stability_pct" => s.stability_pct = number(key, value)?,
                "wall_pct" => s.wall_pct = number(key, value)?,
                "well_fitted_max" => s.well_fitted_max = number(key, value)?,
                "poorly_fitted_min" => s.poorly_fitted_min = number(key, value)?,
                "date_order" => {
                    s.date_order = match value {
                        "month-first" => DateOrder::MonthFirst,
                        "day-first" => DateOrder::DayFirst,
                        _ => return Err(format!("date_order: expected month-first or day-first, got {value:?}")),
                    }
                }
                "output" => {
                    s.output = Some(
                        <OutputFormat as clap::ValueEnum>::from_str(value, true)
                            .map_err(|_| format!("output: expected json, csv or table, got {value:?}"))?,
                    )
                }
                _ => return Err(format!("line {}: unknown setting {key:?}", n + 1)),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Settings::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn apply(mut self, o: &Overrides) -> Settings {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut self.smoothing_window, o.smoothing_window);
        set(&mut self.min_distance_km, o.min_distance_km);
        set(&mut self.warmup_s, o.warmup_s);
        set(&mut self.stability_pct, o.stability_pct);
        set(&mut self.wall_pct, o.wall_pct);
        set(&mut self.well_fitted_max, o.well_fitted_max);
        set(&mut self.poorly_fitted_min, o.poorly_fitted_min);
        if o.day_first {
            self.date_order = DateOrder::DayFirst;
        }
        if o.output.is_some() {
            self.output = o.output;
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("smoothing_window", self.smoothing_window),
            ("stability_pct", self.stability_pct),
            ("wall_pct", self.wall_pct),
            ("well_fitted_max", self.well_fitted_max),
            ("poorly_fitted_min", self.poorly_fitted_min),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{k} must be positive, got {v}"));
            }
        }
        for (k, v) in [("min_distance_km", self.min_distance_km), ("warmup_s", self.warmup_s)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{k} must not be negative, got {v}"));
            }
        }
        if self.well_fitted_max > self.poorly_fitted_min {
            return Err(format!(
                "well_fitted_max ({}) exceeds poorly_fitted_min ({})",
                self.well_fitted_max, self.poorly_fitted_min
            ));
        }
        Ok(())
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            smoothing_window_s: self.smoothing_window,
            drift: DriftConfig {
                warmup_s: self.warmup_s,
                stability_pct: self.stability_pct,
                wall_pct: self.wall_pct,
            },
            fitness: FitnessThresholds {
                well_fitted_max: self.well_fitted_max,
                poorly_fitted_min: self.poorly_fitted_min,
            },
        }
    }
}
