use std::fs;
use std::path::PathBuf;

use hrekit::fit::encode_fixture;
use hrekit::ingest::{manifest_jsonl, scan, DateOrder, IngestError, ScanOptions};
use hrekit::synthetic;
use hrekit::Source;

fn opts() -> ScanOptions {
    ScanOptions::default()
}

fn write_fixture(dir: &std::path::Path, name: &str, heart_rate: u8, hours_later: i64) -> Vec<u8> {
    let mut f = synthetic::steady_fixture(heart_rate, 3.0, 600);
    f.start_time += chrono::Duration::hours(hours_later);
    let bytes = encode_fixture(&f).unwrap();
    fs::write(dir.join(name), &bytes).unwrap();
    bytes
}

#[test]
fn single_fit_file() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "run.fit", 140, 0);
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 1);
    assert!(out.manifest.is_empty());
    assert_eq!(out.activities[0].source, Source::FitFile);
}

#[test]
fn renamed_copy_is_deduplicated() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = write_fixture(dir.path(), "a.fit", 140, 0);
    fs::create_dir(dir.path().join("backup")).unwrap();
    fs::write(dir.path().join("backup").join("COPY.FIT"), &bytes).unwrap();
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 1);
}

#[test]
fn same_start_and_distance_is_deduplicated() {
    // Different heart rates give different bytes, but the same run.
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "watch.fit", 140, 0);
    write_fixture(dir.path(), "strap.fit", 141, 0);
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 1);
}

#[test]
fn distinct_runs_are_kept_in_time_order() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "a.fit", 140, 48);
    write_fixture(dir.path(), "b.fit", 140, 0);
    write_fixture(dir.path(), "c.fit", 140, 24);
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 3);
    assert!(out.activities.windows(2).all(|w| w[0].start_time < w[1].start_time));
}

#[test]
fn corrupt_file_goes_to_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "good.fit", 140, 0);
    let mut bad = write_fixture(dir.path(), "bad.fit", 150, 5);
    bad[40] ^= 0x10;
    fs::write(dir.path().join("bad.fit"), &bad).unwrap();
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 1);
    assert_eq!(out.manifest.len(), 1);
    assert_eq!(out.manifest[0].error, "CrcMismatch");
    assert!(out.manifest[0].path.ends_with("bad.fit"));
    let line = manifest_jsonl(&out.manifest);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "CrcMismatch");
}

#[test]
fn csv_logs_and_fit_files_together() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "run.fit", 140, 0);
    fs::write(
        dir.path().join("log.csv"),
        "date,distance_km,pace,avg_hr\n8/27/2018,15.7,5:25,140\n8/9/2018,12.8,5:75,143\n",
    )
    .unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let out = scan(&[dir.path().to_path_buf()], &opts()).unwrap();
    assert_eq!(out.activities.len(), 2);
    assert_eq!(out.manifest.len(), 1);
    assert_eq!(out.manifest[0].error, "MalformedRow");
    assert!(out.manifest[0].detail.contains("line 3"));
}

#[test]
fn day_first_logs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    fs::write(&path, "date,distance_km,pace,avg_hr\n3/4/2018,10,5:00,140\n").unwrap();
    let month_first = scan(&[path.clone()], &opts()).unwrap();
    let day_first = scan(&[path], &ScanOptions { date_order: DateOrder::DayFirst }).unwrap();
    assert_eq!(month_first.activities[0].local_date().to_string(), "2018-03-04");
    assert_eq!(day_first.activities[0].local_date().to_string(), "2018-04-03");
}

#[test]
fn scanning_twice_gives_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    for (i, hr) in [140u8, 145, 150, 155].into_iter().enumerate() {
        write_fixture(dir.path(), &format!("r{i}.fit"), hr, 24 * i as i64);
    }
    fs::write(dir.path().join("broken.fit"), b"not a fit file").unwrap();
    let roots = vec![dir.path().to_path_buf()];
    assert_eq!(scan(&roots, &opts()).unwrap(), scan(&roots, &opts()).unwrap());
}

#[test]
fn nothing_decodable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.fit"), b"junk").unwrap();
    match scan(&[dir.path().to_path_buf()], &opts()) {
        Err(IngestError::NothingFound(manifest)) => assert_eq!(manifest.len(), 1),
        other => panic!("{other:?}"),
    }
    let missing = PathBuf::from("/definitely/not/here");
    assert!(matches!(scan(&[missing], &opts()), Err(IngestError::NothingFound(_))));
}
