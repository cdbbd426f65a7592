use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nmdf::io::{read_dataset_json, read_factorization_json, read_report_csv};

fn nmdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmdf")).args(args).output().expect("spawn nmdf")
}

fn bundled_field() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_8x8x8.tfld")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn factorize_without_arguments_is_a_usage_error() {
    let out = nmdf(&["factorize"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(nmdf(&["bogus"]).status.code(), Some(1));
    assert_eq!(nmdf(&["factorize", "x.json", "--rank", "two", "--out", "y.json"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(nmdf(&["--help"]).status.code(), Some(0));
    assert_eq!(nmdf(&["sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn malformed_field_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tfld");
    std::fs::write(&bad, "TFLD 1\ndims 1 1 1 3\nvoxel 0 0 0 1 0\n").unwrap();
    let out = nmdf(&["ingest", s(&bad), "--out", s(&dir.path().join("ds.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn rank_larger_than_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.json");
    assert!(nmdf(&["ingest", s(&bundled_field()), "--out", s(&ds)]).status.success());
    let out = nmdf(&["factorize", s(&ds), "--rank", "50", "--out", s(&dir.path().join("f.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_basepoint_near_zero_on_spd_data() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.json");
    assert!(nmdf(&["ingest", s(&bundled_field()), "--out", s(&ds)]).status.success());
    let out = nmdf(&["check-basepoint", s(&ds), "--basepoint", "near-zero"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok=true"));
}

#[test]
fn basepoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds_path = dir.path().join("ds.json");
    assert!(nmdf(&["ingest", s(&bundled_field()), "--block", "2,2,2", "--out", s(&ds_path)]).status.success());
    let ds = read_dataset_json(std::fs::File::open(&ds_path).unwrap()).unwrap();
    let q_path = dir.path().join("q.json");
    std::fs::write(&q_path, serde_json::to_string(&ds.points[0]).unwrap()).unwrap();
    let out = nmdf(&["check-basepoint", s(&ds_path), "--basepoint", "file", "--basepoint-file", s(&q_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok="));
    let out = nmdf(&["check-basepoint", s(&ds_path), "--basepoint", "file"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline_on_bundled_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        let out = nmdf(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };

    run(&["ingest", s(&bundled_field()), "--block", "4,4,4", "--out", s(&p("ds.json"))]);
    let ds = read_dataset_json(std::fs::File::open(p("ds.json")).unwrap()).unwrap();
    assert_eq!(ds.points.len(), 8);

    run(&[
        "factorize",
        s(&p("ds.json")),
        "--method",
        "cc-nmdf",
        "--rank",
        "3",
        "--max-iter",
        "5",
        "--out",
        s(&p("fac.json")),
    ]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(p("fac.json")).unwrap()).unwrap();
    assert_eq!(json["rank"], 3);
    assert_eq!(json["method"], "cc-nmdf");
    assert_eq!(json["H"].as_array().unwrap().len(), 8);
    assert_eq!(json["F"].as_array().unwrap().len(), 3);
    assert_eq!(json["F"][0].as_array().unwrap().len(), 384);
    let fac = read_factorization_json(std::fs::File::open(p("fac.json")).unwrap()).unwrap();
    assert!(fac.h.iter().all(|&x| x >= 0.0));

    run(&["errors", s(&p("ds.json")), s(&p("fac.json")), "--out", s(&p("report.csv"))]);
    let text = std::fs::read_to_string(p("report.csv")).unwrap();
    assert!(text.starts_with("rank,exact,tangent,cc,wall_time_s\n"));
    let reports = read_report_csv(text.as_bytes()).unwrap();
    assert_eq!(reports.len(), 1);
    let r = reports[0];
    assert_eq!((r.rank, r.wall_time_s), (3, 0.0));
    assert!(r.exact > 0.0 && r.tangent > 0.0 && r.cc > 0.0);

    run(&["render", s(&p("fac.json")), "--out", s(&p("factors.svg"))]);
    let svg = std::fs::read_to_string(p("factors.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<g ").count(), 3);
    assert_eq!(svg.matches("<ellipse").count(), 3 * 64);
    assert!(svg.contains("render"));

    run(&["sweep", s(&p("ds.json")), "--ranks", "1,2", "--method", "t-nmdf", "--out", s(&p("sweep.csv"))]);
    let sweep = read_report_csv(std::fs::File::open(p("sweep.csv")).unwrap()).unwrap();
    assert_eq!(sweep.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2]);
    assert!(sweep[1].tangent <= sweep[0].tangent * (1.0 + 1e-9));
}
