use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use tempfile::TempDir;

const FAST: &str = "\
seed = 3
[de]
population = 12
generations = 8
[training]
per_class = 3
grid_points = 6
pattern_per_class = 4
[synth]
days = 56
anomalies = 4
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stigmergy"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("fast.toml");
    fs::write(&path, FAST).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir` with its bytes, sorted by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_column_is_an_input_error_naming_it() {
    let tmp = TempDir::new().unwrap();
    let trips = tmp.path().join("trips.csv");
    fs::write(
        &trips,
        "taxi_id,passenger_count,pickup_datetime,dropoff_datetime,pickup_longitude,pickup_latitude,dropoff_longitude\n",
    )
    .unwrap();
    let out = run(&["--out", s(tmp.path()), "ingest", "--input", s(&trips)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropoff_latitude"));
}

#[test]
fn missing_artifacts_and_files_exit_3() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    for cmd in [
        &["hotspots"][..],
        &["extract"],
        &["classify"],
        &["plotdata"],
        &["ingest", "--input", "/nonexistent.csv"],
    ] {
        let mut args = vec!["--out", s(&out)];
        args.extend_from_slice(cmd);
        assert_eq!(run(&args).status.code(), Some(3), "{cmd:?}");
    }
    let out = run(&["--config", "/nonexistent.toml", "synth"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_configuration_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    for text in [
        "[hotspots]\nrelevance_fraction = 2.0\n",
        "[de]\ngens = 4\n",
        "seed = \"x\"\n",
    ] {
        fs::write(&cfg, text).unwrap();
        let out = run(&["--config", s(&cfg), "--out", s(tmp.path()), "synth"]);
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    let out = run(&["--out", s(tmp.path()), "compare"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_runs_end_to_end_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path());
    let started = Instant::now();
    let mut snaps = Vec::new();
    for round in 0..2 {
        let out = tmp.path().join(format!("run{round}"));
        let o = s(&out);
        let c = s(&cfg);
        let labels = out.join("synth/year/labels.csv");
        let series = out.join("synth/year/series");
        ok(&["--config", c, "--out", o, "synth"]);
        ok(&[
            "--config",
            c,
            "--out",
            o,
            "ingest",
            "--input",
            s(&out.join("synth/trips.csv")),
        ]);
        ok(&["--config", c, "--out", o, "hotspots"]);
        ok(&["--config", c, "--out", o, "extract"]);
        ok(&["--config", c, "--out", o, "train"]);
        ok(&[
            "--config",
            c,
            "--out",
            o,
            "classify",
            "--series",
            s(&series),
            "--labels",
            s(&labels),
        ]);
        ok(&["--config", c, "--out", o, "compare", "--labels", s(&labels)]);
        ok(&[
            "--config",
            c,
            "--out",
            o,
            "plotdata",
            "--labels",
            s(&labels),
        ]);
        snaps.push(snapshot(&out));
    }
    assert!(
        started.elapsed() < Duration::from_secs(300),
        "{:?}",
        started.elapsed()
    );
    assert_eq!(snaps[0].len(), snaps[1].len());
    for (a, b) in snaps[0].iter().zip(&snaps[1]) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0.display());
    }

    let out = tmp.path().join("run0");
    let read = |p: &str| fs::read_to_string(out.join(p)).unwrap();

    let geo = read("hotspots.geojson");
    assert!(geo.contains("\"FeatureCollection\""));
    assert!(out.join("series/A").is_dir());
    let rejections = read("rejections.csv");
    assert!(rejections.starts_with("line_number,reason\n"));
    assert!(rejections.lines().count() > 1);

    let history = read("training/history_Asleep.csv");
    let rows: Vec<f64> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.windows(2).all(|w| w[1] <= w[0]));

    let matrix = read("classify/similarity_matrix.csv");
    let mut lines = matrix.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "day_id");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 56);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 57);
        assert_eq!(r[0], header[i + 1]);
    }

    let scatter = read("classify/scatter.csv");
    let mut lines = scatter.lines();
    assert_eq!(
        lines.next(),
        Some("day_index,anomaly_index,verdict,threshold")
    );
    for (i, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[0], i.to_string());
        let idx: f64 = f[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&idx));
        assert!(f[2] == "typical" || f[2] == "anomalous");
    }

    let acc = read("compare/accuracy.csv");
    let methods: Vec<&str> = acc
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, ["srf", "dtw", "frechet"]);
    assert!(read("plots/scatter.csv").starts_with("day_index,day_id,anomaly_index,event\n"));
    assert!(read("classify/thresholds.toml").contains("source = \"tuned\""));
}

#[test]
fn seed_flag_overrides_the_configuration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["--config", s(&cfg), "--out", s(&a), "synth"]);
    ok(&["--config", s(&cfg), "--seed", "4", "--out", s(&b), "synth"]);
    assert_ne!(
        fs::read(a.join("synth/year/labels.csv")).unwrap(),
        fs::read(b.join("synth/year/labels.csv")).unwrap()
    );
}
