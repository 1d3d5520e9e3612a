use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const EXE: &str = env!("CARGO_BIN_EXE_mixtraffic");
const LANE_CHANGE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../fuzz/corpus/segment/lane_change.csv"
);

fn mixtraffic(args: &[&str]) -> Output {
    Command::new(EXE)
        .args(args)
        .output()
        .expect("spawn mixtraffic")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&mixtraffic(&["--help"])), 0);
    assert_eq!(code(&mixtraffic(&["simulate"])), 1);
    assert_eq!(code(&mixtraffic(&["frobnicate"])), 1);
}

#[test]
fn invalid_configuration_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    for set in ["dt=1", "bogus=3", "seed=-1", "lanes=0"] {
        let o = mixtraffic(&["simulate", "--set", set, "--out", p(&out)]);
        assert_eq!(code(&o), 1, "{set}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "seed 3\n").unwrap();
    assert_eq!(
        code(&mixtraffic(&[
            "simulate",
            "--config",
            p(&bad),
            "--out",
            p(&out)
        ])),
        1
    );
}

#[test]
fn unknown_metric_lists_the_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixtraffic(&[
        "analyze",
        "-i",
        LANE_CHANGE,
        "-o",
        p(dir.path()),
        "--metric",
        "entropy",
    ]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("entropy") && err.contains("histogram"),
        "{err}"
    );
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixtraffic(&[
        "segment",
        "-i",
        p(&dir.path().join("nope.csv")),
        "-o",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_trajectory_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "t,id,mode,x,y,theta,v\n0,0,bus,1,2,0,3\n").unwrap();
    assert_eq!(
        code(&mixtraffic(&[
            "segment",
            "-i",
            p(&input),
            "-o",
            p(dir.path())
        ])),
        1
    );
}

#[test]
fn empty_trajectory_warns_and_writes_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "t,id,mode,x,y,theta,v\n").unwrap();
    let out = dir.path().join("seg");
    let o = mixtraffic(&["segment", "-i", p(&input), "-o", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(!o.stderr.is_empty());
    for f in ["events.csv", "segments.csv", "status.csv"] {
        assert!(data_lines(&out.join(f)).is_empty(), "{f}");
    }
}

#[test]
fn synthetic_lane_change_gives_one_maneuver_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixtraffic(&["segment", "-i", LANE_CHANGE, "-o", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_lines(&dir.path().join("segments.csv"));
    let maneuvers: Vec<_> = rows.iter().filter(|r| r.contains("maneuver-")).collect();
    assert_eq!(maneuvers.len(), 1, "{rows:?}");
    assert!(maneuvers[0].contains("maneuver-left"));
    assert_eq!(data_lines(&dir.path().join("events.csv")).len(), 1);
}

#[test]
fn simulated_cars_never_maneuver() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = mixtraffic(&[
        "simulate",
        "--set",
        "duration=30",
        "--set",
        "record_every=2",
        "--out",
        p(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let traj = run.join("trajectory.csv");
    let seg = dir.path().join("seg");
    let o = mixtraffic(&["segment", "-i", p(&traj), "-o", p(&seg), "--period", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cars: Vec<String> = data_lines(&traj)
        .iter()
        .filter(|r| r.split(',').nth(2) == Some("car"))
        .map(|r| r.split(',').nth(1).unwrap().to_string())
        .collect();
    assert!(!cars.is_empty());
    for row in data_lines(&seg.join("status.csv")) {
        let f: Vec<&str> = row.split(',').collect();
        if cars.iter().any(|c| c == f[0]) {
            assert_eq!(f[4], "0", "car {} reported maneuvers", f[0]);
        }
    }
}

#[test]
fn analyze_writes_requested_tables() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(
        code(&mixtraffic(&[
            "simulate",
            "--set",
            "duration=40",
            "--out",
            p(&run)
        ])),
        0
    );
    let out = dir.path().join("an");
    let o = mixtraffic(&[
        "analyze",
        "-i",
        p(&run.join("trajectory.csv")),
        "-o",
        p(&out),
        "--config",
        p(&run.join("manifest.txt")),
        "--histogram",
        "moto",
        "--lanes",
        "--fd",
        "--period",
        "5",
        "--fd-mode",
        "all",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "histogram.csv",
        "lane_formation.csv",
        "fd_points.csv",
        "fd_fit.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!data_lines(&out.join("fd_points.csv")).is_empty());
}
