//! `hrekit` command-line interface.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use hrekit::aggregate::{
    export, rollup, summarize_allowing_missing_hr, CsvRow, ExportFormat, Granularity,
};
use hrekit::fit::read_activities;
use hrekit::ingest::{scan, IngestError, ManifestEntry, ScanOptions};
use hrekit::metrics::{assess, breathing_rate, BreathingConfig};
use hrekit::model::DEFAULT_STOP_SPEED;
use hrekit::{Activity, SessionSummary, TimeSeries};
use hrekit_serve::{SampleArrays, Store, StoreConfig, DEFAULT_PORT};
use serde::Serialize;

use config::{OutputFormat, Overrides, Settings};

#[derive(Debug, Parser)]
#[command(name = "hrekit", version, about = "Heart rate efficiency from FIT files and training logs")]
struct Cli {
    /// Settings file of `key = value` lines; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Smoothing window in seconds [default: 30].
    #[arg(long, global = true, value_name = "S")]
    window: Option<f64>,
    /// Shortest session counted in rollup averages, km [default: 5].
    #[arg(long, global = true, value_name = "KM")]
    min_distance: Option<f64>,
    /// Seconds dropped from the start before drift analysis [default: 300].
    #[arg(long, global = true, value_name = "S")]
    warmup: Option<f64>,
    /// Largest |drift| still called stable, percent [default: 5].
    #[arg(long, global = true, value_name = "PCT")]
    stability_pct: Option<f64>,
    /// Late degradation that raises the wall flag, percent [default: 8].
    #[arg(long, global = true, value_name = "PCT")]
    wall_pct: Option<f64>,
    /// Highest mean HRE classed well fitted [default: 750].
    #[arg(long, global = true, value_name = "HRE")]
    well_fitted: Option<f64>,
    /// Mean HRE above which a run is poorly fitted [default: 800].
    #[arg(long, global = true, value_name = "HRE")]
    poorly_fitted: Option<f64>,
    /// Read ambiguous log dates as D/M/YYYY instead of M/D/YYYY.
    #[arg(long, global = true)]
    day_first: bool,
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Time,
    Distance,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode one FIT file (or log) and print it as JSON.
    Parse { file: PathBuf },
    /// One summary row per session.
    Summary {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Per-sample HR, pace, HRE, grade and breathing columns.
    Series {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "time")]
        by: Axis,
    },
    /// Drift report and fitness band as JSON.
    Classify { file: PathBuf },
    /// Monthly or yearly totals and averages.
    Rollup {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, conflicts_with = "yearly")]
        monthly: bool,
        #[arg(long)]
        yearly: bool,
        /// CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Serve the JSON API and viewer on the loopback interface.
    Serve {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory with the viewer's static files.
        #[arg(long, value_name = "DIR")]
        assets: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

type Outcome = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn emit(bytes: &[u8]) -> Outcome {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(data(e)),
        _ => Ok(()),
    }
}

fn emit_json<T: Serialize + ?Sized>(value: &T) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(data)?;
    bytes.push(b'\n');
    emit(&bytes)
}

fn warn_manifest(manifest: &[ManifestEntry]) {
    for m in manifest {
        eprintln!("warning: {}: {}: {}", m.path, m.error, m.detail);
    }
}

fn load(paths: &[PathBuf], settings: &Settings) -> Result<Vec<Activity>, Failure> {
    let opts = ScanOptions {
        date_order: settings.date_order,
    };
    match scan(paths, &opts) {
        Ok(out) => {
            warn_manifest(&out.manifest);
            Ok(out.activities)
        }
        Err(IngestError::NothingFound(manifest)) => {
            warn_manifest(&manifest);
            Err(Failure::Data("no activities could be loaded".into()))
        }
        Err(e) => Err(data(e)),
    }
}

/// Activities of a single file; FIT errors are reported as is.
fn load_file(path: &Path, settings: &Settings) -> Result<Vec<Activity>, Failure> {
    let is_fit = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("fit"));
    if is_fit {
        let bytes = std::fs::read(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        read_activities(&bytes).map_err(|e| data(format!("{}: {e}", path.display())))
    } else {
        load(&[path.to_path_buf()], settings)
    }
}

fn first_activity(path: &Path, settings: &Settings) -> Result<Activity, Failure> {
    load_file(path, settings)?
        .into_iter()
        .next()
        .ok_or_else(|| data(format!("{}: no activity", path.display())))
}

fn summaries(activities: &[Activity]) -> Vec<SessionSummary> {
    activities
        .iter()
        .filter_map(|a| match summarize_allowing_missing_hr(a, DEFAULT_STOP_SPEED) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("warning: activity {}: {e}", a.id);
                None
            }
        })
        .collect()
}

fn table<T: CsvRow>(rows: &[T]) -> Vec<u8> {
    let cells: Vec<Vec<String>> = rows.iter().map(CsvRow::csv_fields).collect();
    let widths: Vec<usize> = T::HEADER
        .iter()
        .enumerate()
        .map(|(i, h)| cells.iter().map(|r| r[i].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let line = |fields: Vec<&str>| {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:>w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(T::HEADER.to_vec());
    for r in &cells {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out.into_bytes()
}

fn rows_out<T: CsvRow + Serialize>(rows: &[T], format: OutputFormat) -> Outcome {
    match format {
        OutputFormat::Json => emit(&export(rows, ExportFormat::Json)),
        OutputFormat::Csv => emit(&export(rows, ExportFormat::Csv)),
        OutputFormat::Table => emit(&table(rows)),
    }
}

#[derive(Serialize)]
struct SeriesTable {
    axis: &'static str,
    x: Vec<f64>,
    hr: Vec<Option<f64>>,
    pace: Vec<Option<f64>>,
    hre: Vec<Option<f64>>,
    grade: Vec<Option<f64>>,
    breathing: Vec<Option<f64>>,
}

/// Spreads window-end breathing estimates over the samples that follow
/// each stamp, up to the next step.
fn breathing_column(t: &[f64], series: Option<&TimeSeries>, step: f64) -> Vec<Option<f64>> {
    let Some(s) = series else { return vec![None; t.len()] };
    t.iter()
        .map(|&x| {
            let k = s.t.partition_point(|&stamp| stamp <= x);
            (k > 0 && x - s.t[k - 1] < step).then(|| s.v[k - 1]).flatten()
        })
        .collect()
}

fn series_table(activity: &Activity, window: f64, by: Axis) -> Result<SeriesTable, Failure> {
    let cols = SampleArrays::build(activity, window).map_err(data)?;
    let cfg = BreathingConfig::default();
    let breathing = activity
        .rr
        .as_ref()
        .and_then(|rr| breathing_rate(rr, cfg.window_s).ok());
    let breathing = breathing_column(&cols.t, breathing.as_ref(), cfg.step_s);
    let keep: Vec<usize> = match by {
        Axis::Time => (0..cols.len()).collect(),
        Axis::Distance => (0..cols.len()).filter(|&i| cols.distance[i].is_some()).collect(),
    };
    let pick = |v: &[Option<f64>]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    Ok(SeriesTable {
        axis: match by {
            Axis::Time => "t_s",
            Axis::Distance => "distance_km",
        },
        x: keep
            .iter()
            .map(|&i| match by {
                Axis::Time => cols.t[i],
                Axis::Distance => cols.distance[i].unwrap_or_default() / 1000.0,
            })
            .collect(),
        hr: pick(&cols.hr),
        pace: pick(&cols.pace),
        hre: pick(&cols.hre),
        grade: pick(&cols.grade),
        breathing: pick(&breathing),
    })
}

fn series_csv(s: &SeriesTable) -> Vec<u8> {
    let f4 = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    let mut out = format!("{},hr,pace,hre,grade,breathing\n", s.axis);
    for i in 0..s.x.len() {
        out += &format!(
            "{:.4},{},{},{},{},{}\n",
            s.x[i],
            s.hr[i].map(|h| format!("{h:.0}")).unwrap_or_default(),
            f4(s.pace[i]),
            f4(s.hre[i]),
            f4(s.grade[i]),
            f4(s.breathing[i]),
        );
    }
    out.into_bytes()
}

fn run(cli: Cli) -> Outcome {
    let base = match &cli.config {
        Some(p) => Settings::load(p).map_err(Failure::Usage)?,
        None => Settings::default(),
    };
    let settings = base.apply(&Overrides {
        smoothing_window: cli.window,
        min_distance_km: cli.min_distance,
        warmup_s: cli.warmup,
        stability_pct: cli.stability_pct,
        wall_pct: cli.wall_pct,
        well_fitted_max: cli.well_fitted,
        poorly_fitted_min: cli.poorly_fitted,
        day_first: cli.day_first,
        output: cli.output,
    });
    settings.validate().map_err(Failure::Usage)?;

    match cli.command {
        Command::Parse { file } => {
            let acts = load_file(&file, &settings)?;
            match acts.as_slice() {
                [one] => emit_json(one),
                many => emit_json(many),
            }
        }
        Command::Summary { paths } => {
            let rows = summaries(&load(&paths, &settings)?);
            rows_out(&rows, settings.output.unwrap_or(OutputFormat::Table))
        }
        Command::Series { file, by } => {
            let a = first_activity(&file, &settings)?;
            let s = series_table(&a, settings.smoothing_window, by)?;
            match settings.output.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Json => emit_json(&s),
                _ => emit(&series_csv(&s)),
            }
        }
        Command::Classify { file } => {
            let a = first_activity(&file, &settings)?;
            emit_json(&assess(&a, &settings.analysis()).map_err(data)?)
        }
        Command::Rollup {
            paths,
            yearly,
            csv,
            ..
        } => {
            let granularity = if yearly {
                Granularity::Yearly
            } else {
                Granularity::Monthly
            };
            let rows = rollup(
                &summaries(&load(&paths, &settings)?),
                granularity,
                settings.min_distance_km,
            );
            let format = if csv {
                OutputFormat::Csv
            } else {
                settings.output.unwrap_or(OutputFormat::Json)
            };
            rows_out(&rows, format)
        }
        Command::Serve {
            paths,
            port,
            assets,
        } => {
            let acts = load(&paths, &settings)?;
            let store = Store::new(
                acts,
                StoreConfig {
                    analysis: settings.analysis(),
                    min_distance_km: settings.min_distance_km,
                    stop_speed: DEFAULT_STOP_SPEED,
                },
            );
            tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .with_max_level(tracing::Level::INFO)
                .init();
            let addr = hrekit_serve::loopback(port);
            eprintln!("serving {} activities on http://{addr}", store.len());
            let rt = tokio::runtime::Runtime::new().map_err(data)?;
            rt.block_on(hrekit_serve::serve(Arc::new(store), addr, assets))
                .map_err(data)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: hrekit [OPTIONS] <COMMAND> (see --help)");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
