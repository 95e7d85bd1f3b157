//! One function per subcommand. Artifacts live under the `--out` directory:
//!
//! ```text
//! buckets.csv, rejections.csv          ingest
//! hotspots.geojson, trails/, masks/    hotspots
//! series/<hotspot>/<day>.csv           extract
//! model/, training/                    train
//! classify/                            classify
//! compare/accuracy.csv                 compare
//! plots/                               plotdata
//! synth/                               synth
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use stigmergy_core::anomaly::{
    analyze_matrix, classify_day, distance_matrix, evaluate, pattern_bounds, pattern_inputs,
    report_csv, similarity_matrix, train_pattern_srf, training_split, AnomalyRecord,
    MatrixAnalysis, SimilarityMatrix,
};
use stigmergy_core::baseline::DistanceMethod;
use stigmergy_core::calibrate::{train_perceptron, SpTrainingSet, Thresholds};
use stigmergy_core::hotspot::{
    build_slot_trails, extract_hotspots, hotspots_geojson, overlap_mask, parse_hotspots_geojson,
    TimeSlot,
};
use stigmergy_core::ingest::{
    hotspot_activity, parse_trips, rejection_log_csv, spatial_batches, BucketGrid,
};
use stigmergy_core::perceptron::{ActivityLevelSeries, StigmergicPerceptron};
use stigmergy_core::series::{
    generate_archetype, synthetic_day, write_series_csv, ActivityTimeSeries, ArchetypeKind,
    DayClass,
};
use stigmergy_core::srf::SrfParams;
use stigmergy_core::stigspace::Trail2D;
use stigmergy_core::synth::{
    parse_labels_csv, pattern_set, planted_layout, synthetic_trips, synthetic_year, trips_csv,
    DayLabel, PlantedConfig, TripConfig, YearConfig,
};

use crate::config::{PipelineConfig, Stage};
use crate::failure::{list_files, read, require, write, CmdResult, Failure};

const BUCKETS: &str = "buckets.csv";
const HOTSPOTS: &str = "hotspots.geojson";
const PERCEPTRON: &str = "model/perceptron.toml";
const PATTERN_FIELD: &str = "model/pattern_srf.toml";

#[derive(Serialize, Deserialize)]
struct PatternFile {
    pattern: SrfParams,
}

#[derive(Serialize)]
struct ThresholdFile {
    thresholds: ThresholdValues,
}

#[derive(Serialize)]
struct ThresholdValues {
    working: f64,
    entertainment: f64,
    leisure: f64,
    /// `tuned` on labeled days or `configured`.
    source: String,
}

fn load_buckets(out: &Path) -> CmdResult<BucketGrid> {
    Ok(BucketGrid::from_archive_csv(&read(&out.join(BUCKETS))?)?)
}

fn load_pattern_field(out: &Path) -> CmdResult<SrfParams> {
    let path = out.join(PATTERN_FIELD);
    let file: PatternFile = toml::from_str(&read(&path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    file.pattern.validate()?;
    Ok(file.pattern)
}

fn toml_text<T: Serialize>(value: &T) -> CmdResult<String> {
    toml::to_string(value).map_err(|e| Failure::Internal(e.to_string()))
}

pub fn ingest(cfg: &PipelineConfig, input: Option<&Path>, out: &Path) -> CmdResult {
    let input = input
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.trips.clone())
        .ok_or_else(|| Failure::Input("no input: pass --input or set paths.trips".into()))?;
    let geo = cfg.geo()?;
    let parsed = parse_trips(require(&input)?, &geo)?;
    let mut grid = BucketGrid::new(geo, cfg.grid.bucket_cell_m, cfg.grid.bucket_minutes)?;
    for r in &parsed.records {
        grid.add_endpoint(&r.pickup, r.passenger_count);
        grid.add_endpoint(&r.dropoff, r.passenger_count);
    }
    write(&out.join(BUCKETS), &grid.to_archive_csv())?;
    write(
        &out.join("rejections.csv"),
        &rejection_log_csv(&parsed.rejections),
    )?;
    info!(
        "{} rows: {} accepted, {} rejected; {} passengers bucketed over {} days",
        parsed.total_rows,
        parsed.records.len(),
        parsed.rejections.len(),
        grid.total_mass(),
        grid.days().len()
    );
    Ok(())
}

pub fn hotspots(cfg: &PipelineConfig, out: &Path) -> CmdResult {
    let grid = load_buckets(out)?;
    let trail = Trail2D::enclosing(&grid.geo.projected(), cfg.grid.trail_cell_m)?;
    let all = grid.days();
    let months = &cfg.hotspots.window_months;
    let mut window: Vec<NaiveDate> = all
        .iter()
        .copied()
        .filter(|d| months.contains(&d.month()))
        .collect();
    if window.is_empty() {
        warn!(
            "no archived day falls in months {months:?}; using all {} days",
            all.len()
        );
        window = all;
    }
    let batches = spatial_batches(&grid, &window, &trail);
    let trails = build_slot_trails(&trail, &batches, &cfg.slot_trail())?;
    let found = extract_hotspots(&trails, &cfg.hotspot())?;
    for (slot, t) in TimeSlot::ALL.iter().zip(&trails) {
        write(&out.join(format!("trails/{slot}.asc")), &t.to_ascii_grid())?;
    }
    let mask = overlap_mask(&trails, cfg.hotspots.relevance_fraction)?;
    write(&out.join("masks/overlap.asc"), &mask.to_ascii_grid())?;
    write(&out.join(HOTSPOTS), &hotspots_geojson(&found))?;
    info!("{} hotspots from {} days", found.len(), window.len());
    Ok(())
}

pub fn extract(cfg: &PipelineConfig, out: &Path) -> CmdResult {
    let grid = load_buckets(out)?;
    let found = parse_hotspots_geojson(&read(&out.join(HOTSPOTS))?)?;
    let res = cfg.series.resolution_minutes;
    let mut written = 0;
    for h in &found {
        for day in grid.days() {
            let s = hotspot_activity(&grid, h, day, res)?;
            if s.is_constant() {
                warn!("hotspot {} has no activity on {day}; skipped", h.id);
                continue;
            }
            write(
                &out.join(format!("series/{}/{day}.csv", h.id)),
                &s.to_csv_string(),
            )?;
            written += 1;
        }
    }
    info!("{written} series for {} hotspots", found.len());
    Ok(())
}

pub fn train(cfg: &PipelineConfig, out: &Path) -> CmdResult {
    let set_cfg = cfg.training_set()?;
    let (global, local) = train_perceptron(
        &set_cfg,
        cfg.training.grid_points,
        &cfg.de(Stage::PerceptronDe),
    )?;
    write(&out.join(PERCEPTRON), &local.perceptron.to_toml())?;
    let mut sweep = String::from("field,delta,fitness\n");
    for s in &global.sweeps {
        for (d, f) in s.grid.iter().zip(&s.fitness) {
            sweep.push_str(&format!("{},{d},{f}\n", s.kind.name()));
        }
    }
    write(&out.join("training/delta_sweep.csv"), &sweep)?;
    let mut fields = String::from("field,delta_low,delta_high,initial_fitness,best_fitness\n");
    for (f, s) in local.fields.iter().zip(&global.sweeps) {
        fields.push_str(&format!(
            "{},{},{},{},{}\n",
            f.kind.name(),
            s.interval.0,
            s.interval.1,
            f.initial_fitness,
            f.result.best_fitness
        ));
        write(
            &out.join(format!("training/history_{}.csv", f.kind.name())),
            &f.result.history_csv(),
        )?;
    }
    write(&out.join("training/fields.csv"), &fields)?;

    let day_length = 1440 / cfg.series.resolution_minutes as usize;
    let patterns = pattern_set(
        cfg.training.pattern_per_class,
        day_length,
        cfg.stage_seed(Stage::PatternSet),
    )?;
    let levels: Vec<(DayClass, ActivityLevelSeries)> = patterns
        .iter()
        .map(|(c, s)| Ok((*c, local.perceptron.transform(s)?)))
        .collect::<CmdResult<_>>()?;
    let (pattern, result) = train_pattern_srf(
        &pattern_inputs(&levels),
        &pattern_bounds(),
        &cfg.de(Stage::PatternDe),
    )?;
    write(
        &out.join(PATTERN_FIELD),
        &toml_text(&PatternFile { pattern })?,
    )?;
    write(
        &out.join("training/pattern_history.csv"),
        &result.history_csv(),
    )?;
    let series: Vec<ActivityLevelSeries> = levels.iter().map(|(_, l)| l.clone()).collect();
    let labels: Vec<DayClass> = levels.iter().map(|(c, _)| *c).collect();
    let matrix = similarity_matrix(&series, &pattern)?;
    write(
        &out.join("training/pattern_matrix.csv"),
        &matrix.to_csv_string(),
    )?;
    let mut label_csv = String::from("day_id,class\n");
    for (c, l) in &levels {
        label_csv.push_str(&format!("{},{}\n", l.day_id, c.letter()));
    }
    write(&out.join("training/pattern_labels.csv"), &label_csv)?;
    let (within, between) = matrix.block_means(&labels);
    info!(
        "pattern field fitness {:.4}; within-class {within:.3}, between-class {between:.3}",
        result.best_fitness
    );
    Ok(())
}

fn load_series_dir(dir: &Path) -> CmdResult<Vec<ActivityTimeSeries>> {
    let mut days = Vec::new();
    for path in list_files(dir, "csv")? {
        let s = ActivityTimeSeries::from_csv_str(&read(&path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        if s.is_full_day() {
            days.push(s);
        } else {
            warn!("{}: not a full day, skipped", path.display());
        }
    }
    days.sort_by_key(|s| s.day_id());
    if days.is_empty() {
        return Err(Failure::Input(format!(
            "{}: no full-day series",
            dir.display()
        )));
    }
    Ok(days)
}

fn load_levels(out: &Path) -> CmdResult<Vec<ActivityLevelSeries>> {
    let dir = out.join("classify/levels");
    let mut levels = Vec::new();
    for path in list_files(&dir, "csv")? {
        levels.push(
            ActivityLevelSeries::from_csv_str(&read(&path)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        );
    }
    levels.sort_by_key(|l| l.day_id);
    if levels.is_empty() {
        return Err(Failure::Missing(dir));
    }
    Ok(levels)
}

fn labels_path(cfg: &PipelineConfig, arg: Option<&Path>) -> Option<PathBuf> {
    arg.map(Path::to_path_buf)
        .or_else(|| cfg.paths.labels.clone())
}

/// Labels of exactly the given days, in their order.
fn labels_for(path: &Path, days: &[NaiveDate]) -> CmdResult<Vec<DayLabel>> {
    let all: BTreeMap<NaiveDate, DayLabel> = parse_labels_csv(&read(path)?)?
        .into_iter()
        .map(|l| (l.day_id, l))
        .collect();
    days.iter()
        .map(|d| {
            all.get(d)
                .cloned()
                .ok_or_else(|| Failure::Input(format!("{}: no label for {d}", path.display())))
        })
        .collect()
}

/// Unsupervised analysis plus verdicts: tuned thresholds with labels,
/// configured ones otherwise.
struct Outcome {
    analysis: MatrixAnalysis,
    records: Vec<AnomalyRecord>,
    thresholds: ThresholdValues,
    metrics: Option<Metrics>,
}

#[derive(Serialize)]
struct Metrics {
    train_accuracy: f64,
    test_accuracy: f64,
    overall_accuracy: f64,
    point_biserial: f64,
    mean_assessment_error: Option<f64>,
}

fn run_matrix(
    cfg: &PipelineConfig,
    matrix: &SimilarityMatrix,
    labels: Option<&[DayLabel]>,
) -> CmdResult<Outcome> {
    let analysis = analyze_matrix(matrix, &cfg.fcm(), cfg.anomaly.representatives)?;
    let ids = matrix.day_ids();
    let Some(labels) = labels else {
        let a = &cfg.anomaly;
        let t = Thresholds {
            per_class: [a.threshold_w, a.threshold_e, a.threshold_l],
            accuracy: f64::NAN,
        };
        let records = ids
            .iter()
            .enumerate()
            .map(|(i, &d)| classify_day(d, analysis.classes[i], analysis.anomaly_indices[i], &t))
            .collect();
        return Ok(Outcome {
            analysis,
            records,
            thresholds: ThresholdValues {
                working: t.per_class[0],
                entertainment: t.per_class[1],
                leisure: t.per_class[2],
                source: "configured".into(),
            },
            metrics: None,
        });
    };
    let flags: Vec<bool> = labels.iter().map(|l| l.anomaly.is_some()).collect();
    let annotated: Vec<_> = labels.iter().map(|l| l.annotated).collect();
    let e = evaluate(
        &analysis,
        ids,
        &flags,
        &training_split(ids),
        &cfg.de(Stage::ThresholdDe),
    )?;
    let metrics = Metrics {
        train_accuracy: e.train_accuracy,
        test_accuracy: e.test_accuracy,
        overall_accuracy: e.overall_accuracy,
        point_biserial: e.point_biserial,
        mean_assessment_error: analysis.mean_assessment_error(&annotated),
    };
    let p = e.thresholds.per_class;
    Ok(Outcome {
        analysis,
        records: e.records,
        thresholds: ThresholdValues {
            working: p[0],
            entertainment: p[1],
            leisure: p[2],
            source: "tuned".into(),
        },
        metrics: Some(metrics),
    })
}

pub fn classify(
    cfg: &PipelineConfig,
    series: Option<&Path>,
    labels: Option<&Path>,
    out: &Path,
) -> CmdResult {
    let sp = StigmergicPerceptron::load(require(&out.join(PERCEPTRON))?)?;
    let pattern = load_pattern_field(out)?;
    let dir = series
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join("series/A"));
    let days = load_series_dir(&dir)?;
    let levels: Vec<ActivityLevelSeries> = days
        .iter()
        .map(|s| sp.transform(s))
        .collect::<Result<_, _>>()?;
    let base = out.join("classify");
    for l in &levels {
        write(
            &base.join(format!("levels/{}.csv", l.day_id)),
            &l.to_csv_string(),
        )?;
    }
    let matrix = similarity_matrix(&levels, &pattern)?;
    write(&base.join("similarity_matrix.csv"), &matrix.to_csv_string())?;
    let ids = matrix.day_ids().to_vec();
    let labels = match labels_path(cfg, labels) {
        Some(p) => Some(labels_for(&p, &ids)?),
        None => None,
    };
    let o = run_matrix(cfg, &matrix, labels.as_deref())?;
    write(&base.join("report.csv"), &report_csv(&o.records))?;
    let mut scatter = String::from("day_index,anomaly_index,verdict,threshold\n");
    for (i, r) in o.records.iter().enumerate() {
        scatter.push_str(&format!(
            "{i},{},{},{}\n",
            r.anomaly_index,
            r.verdict.name(),
            r.threshold_used
        ));
    }
    write(&base.join("scatter.csv"), &scatter)?;
    let mut triples = String::from("day_id,predicted,tie,annotated\n");
    for (i, d) in ids.iter().enumerate() {
        let (t, tie) = o.analysis.triple(i);
        let ann = labels
            .as_ref()
            .and_then(|l| l[i].annotated)
            .map(|a| a.to_string())
            .unwrap_or_default();
        triples.push_str(&format!("{d},{t},{tie},{ann}\n"));
    }
    write(&base.join("triples.csv"), &triples)?;
    write(
        &base.join("thresholds.toml"),
        &toml_text(&ThresholdFile {
            thresholds: o.thresholds,
        })?,
    )?;
    let flagged = o
        .records
        .iter()
        .filter(|r| r.verdict.name() == "anomalous")
        .count();
    if let Some(m) = &o.metrics {
        write(&base.join("metrics.toml"), &toml_text(m)?)?;
        info!(
            "{} days, {flagged} flagged; held-out accuracy {:.4}, point-biserial {:.4}",
            ids.len(),
            m.test_accuracy,
            m.point_biserial
        );
    } else {
        info!("{} days, {flagged} flagged", ids.len());
    }
    Ok(())
}

pub fn compare(cfg: &PipelineConfig, labels: Option<&Path>, out: &Path) -> CmdResult {
    let path = labels_path(cfg, labels)
        .ok_or_else(|| Failure::Input("compare needs --labels or paths.labels".into()))?;
    let pattern = load_pattern_field(out)?;
    let levels = load_levels(out)?;
    let ids: Vec<NaiveDate> = levels.iter().map(|l| l.day_id).collect();
    let labels = labels_for(&path, &ids)?;
    let mut csv = String::from("method,train_accuracy,test_accuracy,overall_accuracy,point_biserial,mean_assessment_error\n");
    let methods: [(&str, Option<DistanceMethod>); 3] = [
        ("srf", None),
        ("dtw", Some(DistanceMethod::Dtw)),
        ("frechet", Some(DistanceMethod::Frechet)),
    ];
    for (name, method) in methods {
        let matrix = match method {
            None => similarity_matrix(&levels, &pattern)?,
            Some(m) => distance_matrix(&levels, m)?,
        };
        let o = run_matrix(cfg, &matrix, Some(&labels))?;
        let m = o.metrics.expect("labels given");
        let mae = m
            .mean_assessment_error
            .map(|v| v.to_string())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{name},{},{},{},{},{mae}\n",
            m.train_accuracy, m.test_accuracy, m.overall_accuracy, m.point_biserial
        ));
        info!("{name}: held-out accuracy {:.4}", m.test_accuracy);
    }
    write(&out.join("compare/accuracy.csv"), &csv)?;
    Ok(())
}

struct ReportRow {
    day_id: NaiveDate,
    anomaly_index: f64,
}

fn parse_report(text: &str) -> CmdResult<Vec<ReportRow>> {
    let bad = |m: String| Failure::Input(format!("report: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some("day_id,class,anomaly_index,threshold,verdict") {
        return Err(bad("unexpected header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("`{line}`")));
            }
            Ok(ReportRow {
                day_id: NaiveDate::parse_from_str(f[0], "%Y-%m-%d")
                    .map_err(|e| bad(e.to_string()))?,
                anomaly_index: f[2]
                    .parse()
                    .map_err(|_| bad(format!("anomaly index `{}`", f[2])))?,
            })
        })
        .collect()
}

/// Non-zero cells of a grid as `x,y,value` rows at cell centers.
fn grid_points(grid: &Trail2D) -> String {
    let mut out = String::from("x,y,value\n");
    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            let v = grid.get(row, col);
            if v != 0.0 {
                let (x, y) = grid.cell_center(row, col);
                out.push_str(&format!("{x},{y},{v}\n"));
            }
        }
    }
    out
}

pub fn plotdata(cfg: &PipelineConfig, labels: Option<&Path>, out: &Path) -> CmdResult {
    let plots = out.join("plots");
    let matrix =
        SimilarityMatrix::from_csv_str(&read(&out.join("classify/similarity_matrix.csv"))?)?;
    write(&plots.join("heatmap.csv"), &matrix.to_csv_string())?;
    let report = parse_report(&read(&out.join("classify/report.csv"))?)?;
    let events: Option<BTreeMap<NaiveDate, bool>> = match labels_path(cfg, labels) {
        Some(p) => Some(
            parse_labels_csv(&read(&p)?)?
                .into_iter()
                .map(|l| (l.day_id, l.anomaly.is_some()))
                .collect(),
        ),
        None => None,
    };
    let mut scatter = String::from("day_index,day_id,anomaly_index,event\n");
    for (i, r) in report.iter().enumerate() {
        let event = match events.as_ref().and_then(|e| e.get(&r.day_id)) {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        scatter.push_str(&format!("{i},{},{},{event}\n", r.day_id, r.anomaly_index));
    }
    write(&plots.join("scatter.csv"), &scatter)?;

    let pattern_matrix = out.join("training/pattern_matrix.csv");
    if pattern_matrix.exists() {
        let m = SimilarityMatrix::from_csv_str(&read(&pattern_matrix)?)?;
        write(&plots.join("pattern_heatmap.csv"), &m.to_csv_string())?;
        let labels: BTreeMap<NaiveDate, DayClass> = read(&out.join("training/pattern_labels.csv"))?
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(','))
            .map(|(d, c)| {
                let d = NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|e| Failure::Input(format!("pattern labels: {e}")))?;
                Ok((d, c.parse::<DayClass>()?))
            })
            .collect::<CmdResult<_>>()?;
        let classes: Vec<DayClass> = m
            .day_ids()
            .iter()
            .map(|d| {
                labels
                    .get(d)
                    .copied()
                    .ok_or_else(|| Failure::Input(format!("pattern labels: no class for {d}")))
            })
            .collect::<CmdResult<_>>()?;
        let (within, between) = m.block_means(&classes);
        write(
            &plots.join("pattern_blocks.csv"),
            &format!(
                "within,between,contrast\n{within},{between},{}\n",
                within - between
            ),
        )?;
    }
    for slot in TimeSlot::ALL {
        let path = out.join(format!("trails/{slot}.asc"));
        if path.exists() {
            let grid = Trail2D::from_ascii_grid(&read(&path)?)?;
            write(
                &plots.join(format!("trail_{slot}.csv")),
                &grid_points(&grid),
            )?;
        }
    }
    let mask = out.join("masks/overlap.asc");
    if mask.exists() {
        let grid = Trail2D::from_ascii_grid(&read(&mask)?)?;
        write(&plots.join("overlap.csv"), &grid_points(&grid))?;
    }
    info!("plot data written to {}", plots.display());
    Ok(())
}

pub fn synth(cfg: &PipelineConfig, out: &Path) -> CmdResult {
    let base = out.join("synth");
    let geo = cfg.geo()?;
    let layout = planted_layout(&PlantedConfig {
        seed: cfg.stage_seed(Stage::SynthSpatial),
        ..PlantedConfig::default()
    })?;
    let trips = synthetic_trips(
        &layout,
        &geo,
        &TripConfig {
            start: cfg.synth.trip_start,
            days: cfg.synth.trip_days,
            peak_rate: cfg.synth.trip_peak_rate,
            seed: cfg.stage_seed(Stage::SynthSpatial),
        },
    );
    write(
        &base.join("trips.csv"),
        &trips_csv(&trips, cfg.synth.bad_row_every),
    )?;
    let mut centers = String::from("cluster,x,y,lon,lat\n");
    for (i, &(x, y)) in layout.centers.iter().enumerate() {
        let (lon, lat) = geo.unproject(x, y);
        centers.push_str(&format!("{i},{x},{y},{lon},{lat}\n"));
    }
    write(&base.join("layout.csv"), &centers)?;

    let length = 1440 / cfg.series.resolution_minutes as usize;
    let year = synthetic_year(&YearConfig {
        start: cfg.synth.start,
        days: cfg.synth.days,
        anomalies: cfg.synth.anomalies,
        length,
        seed: cfg.stage_seed(Stage::SynthYear),
        ..YearConfig::default()
    })?;
    for d in &year.days {
        write(
            &base.join(format!("year/series/{}.csv", d.date)),
            &d.series.to_csv_string(),
        )?;
    }
    write(&base.join("year/labels.csv"), &year.labels_csv())?;

    for (class, s) in pattern_set(
        cfg.training.pattern_per_class,
        length,
        cfg.stage_seed(Stage::PatternSet),
    )? {
        write(
            &base.join(format!("patterns/{}_{}.csv", class.letter(), s.day_id())),
            &s.to_csv_string(),
        )?;
    }
    let set = SpTrainingSet::generate(&cfg.training_set()?)?;
    for kind in ArchetypeKind::ALL {
        let a = generate_archetype(kind, cfg.training.window)?;
        write(
            &base.join(format!("archetypes/{}.csv", kind.name())),
            &write_series_csv(
                synthetic_day(),
                kind.name(),
                cfg.series.resolution_minutes,
                a.samples(),
            ),
        )?;
        for (i, s) in set.series(kind).iter().enumerate() {
            write(
                &base.join(format!("training/{}/{i:02}.csv", kind.name())),
                &write_series_csv(
                    synthetic_day(),
                    kind.name(),
                    cfg.series.resolution_minutes,
                    s,
                ),
            )?;
        }
    }
    info!(
        "{} trips, {} labeled days ({} anomalous), {} training series",
        trips.len(),
        year.days.len(),
        year.days.iter().filter(|d| d.is_anomalous()).count(),
        set.len()
    );
    Ok(())
}
