//! Seeded synthetic data: day-class activity templates, a labeled year with
//! injected anomalies, the labeled pattern set, a planted-cluster spatial
//! layout and trip records drawn from it.

use chrono::{Datelike, Days, Duration, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::calibrate::mix_seed;
use crate::error::{Error, Result};
use crate::hotspot::{SpatialEvent, SpatialEventBatch, TimeSlot};
use crate::ingest::{Endpoint, GeoBox, TripRecord, TRIP_COLUMNS};
use crate::series::{resolution_for_length, ActivityTimeSeries, AffinityTriple, DayClass};
use crate::stigspace::{BoundingBox, Trail2D};

/// Hour/level knots of each class's daily shape, linearly interpolated.
fn knots(class: DayClass) -> &'static [(f64, f64)] {
    match class {
        // Morning and evening commuter peaks around a steady working day.
        DayClass::Working => &[
            (0.0, 0.1),
            (5.0, 0.1),
            (7.0, 0.9),
            (10.0, 0.9),
            (11.0, 0.5),
            (16.0, 0.5),
            (17.0, 0.9),
            (19.0, 0.9),
            (23.0, 0.1),
            (24.0, 0.1),
        ],
        // Nightlife: busy past midnight and again from the evening on.
        DayClass::Entertainment => &[
            (0.0, 0.9),
            (3.0, 0.9),
            (4.0, 0.1),
            (9.0, 0.1),
            (12.0, 0.5),
            (18.0, 0.5),
            (21.0, 0.9),
            (24.0, 0.9),
        ],
        // Late start, moderate afternoon, quiet evening.
        DayClass::Leisure => &[
            (0.0, 0.5),
            (2.0, 0.5),
            (3.0, 0.1),
            (10.0, 0.1),
            (13.0, 0.5),
            (18.0, 0.5),
            (24.0, 0.1),
        ],
    }
}

fn interpolate(knots: &[(f64, f64)], hour: f64) -> f64 {
    let hour = hour.clamp(0.0, 24.0);
    for w in knots.windows(2) {
        let ((h0, v0), (h1, v1)) = (w[0], w[1]);
        if hour <= h1 {
            return v0 + (v1 - v0) * (hour - h0) / (h1 - h0);
        }
    }
    knots[knots.len() - 1].1
}

fn hour_of(i: usize, length: usize) -> f64 {
    (i as f64 + 0.5) * 24.0 / length as f64
}

/// Noise-free shape of a day class sampled at `length` points.
pub fn class_template(class: DayClass, length: usize) -> Vec<f64> {
    (0..length)
        .map(|i| interpolate(knots(class), hour_of(i, length)))
        .collect()
}

/// Kinds of injected anomalous days.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Activity collapses from mid-afternoon on, as during a snowstorm.
    Suppression,
    /// The day follows another class's pattern.
    Holiday,
    /// The whole pattern runs four hours late.
    Shift,
    /// A high-activity block in the early-morning lull.
    Event,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [
        AnomalyKind::Suppression,
        AnomalyKind::Holiday,
        AnomalyKind::Shift,
        AnomalyKind::Event,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::Suppression => "suppression",
            AnomalyKind::Holiday => "holiday",
            AnomalyKind::Shift => "shift",
            AnomalyKind::Event => "event",
        }
    }
}

/// Class whose pattern a holiday follows.
pub fn holiday_class(class: DayClass) -> DayClass {
    match class {
        DayClass::Leisure => DayClass::Working,
        _ => DayClass::Leisure,
    }
}

/// Noise-free shape of a day of `class` altered by `kind`.
pub fn anomalous_template(class: DayClass, kind: AnomalyKind, length: usize) -> Vec<f64> {
    let base = class_template(class, length);
    match kind {
        AnomalyKind::Suppression => base
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if hour_of(i, length) >= 15.0 {
                    0.1 * v
                } else {
                    v
                }
            })
            .collect(),
        AnomalyKind::Holiday => class_template(holiday_class(class), length),
        AnomalyKind::Shift => {
            let k = length / 6;
            (0..length)
                .map(|i| base[(i + length - k) % length])
                .collect()
        }
        AnomalyKind::Event => base
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let h = hour_of(i, length);
                if (4.0..8.0).contains(&h) {
                    0.9
                } else {
                    v
                }
            })
            .collect(),
    }
}

/// Day-to-day variability applied on top of a template.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DayVariation {
    /// Uniform additive noise amplitude.
    pub noise: f64,
    /// Largest time shift in samples, either direction, edges held.
    pub max_shift: usize,
    /// Largest relative change of the overall volume.
    pub volume: f64,
}

impl Default for DayVariation {
    fn default() -> Self {
        Self {
            noise: 0.05,
            max_shift: 3,
            volume: 0.2,
        }
    }
}

/// Raw (unnormalized) activity derived from `template`.
pub fn vary(template: &[f64], v: &DayVariation, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = template.len() as i64;
    let shift = if v.max_shift == 0 {
        0
    } else {
        rng.random_range(-(v.max_shift as i64)..=v.max_shift as i64)
    };
    let volume = 1.0 + rng.random_range(-v.volume..=v.volume);
    (0..n)
        .map(|i| {
            let src = (i - shift).clamp(0, n - 1) as usize;
            let noise = if v.noise > 0.0 {
                rng.random_range(-v.noise..=v.noise)
            } else {
                0.0
            };
            (volume * (template[src] + noise)).max(0.0)
        })
        .collect()
}

/// Triple ranking the classes by mean absolute difference between `series`
/// and each clean class template (both min-max normalized).
pub fn annotate(series: &[f64]) -> Result<AffinityTriple> {
    let norm = |v: &[f64]| crate::series::normalize_min_max(v).map(|m| m.samples);
    let s = norm(series)?;
    let mut scored: Vec<(f64, DayClass)> = DayClass::ALL
        .iter()
        .map(|&c| {
            let t = norm(&class_template(c, series.len()))?;
            let mad = s.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum::<f64>() / s.len() as f64;
            Ok((mad, c))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    AffinityTriple::new([scored[0].1, scored[1].1, scored[2].1])
}

#[derive(Clone, Debug)]
pub struct SyntheticDay {
    pub date: NaiveDate,
    pub expected: DayClass,
    pub series: ActivityTimeSeries,
    pub anomaly: Option<AnomalyKind>,
    /// Reference triple for anomalous days.
    pub annotated: Option<AffinityTriple>,
}

impl SyntheticDay {
    pub fn is_anomalous(&self) -> bool {
        self.anomaly.is_some()
    }

    /// Whether the day belongs to the threshold-tuning half (even weeks).
    pub fn in_training_split(&self, start: NaiveDate) -> bool {
        ((self.date - start).num_days() / 7) % 2 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YearConfig {
    /// Must be a Monday.
    pub start: NaiveDate,
    pub days: usize,
    pub anomalies: usize,
    pub length: usize,
    pub variation: DayVariation,
    pub hotspot: &'static str,
    pub seed: u64,
}

impl Default for YearConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            days: 364,
            anomalies: 20,
            length: 144,
            variation: DayVariation::default(),
            hotspot: "S",
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticYear {
    pub start: NaiveDate,
    pub days: Vec<SyntheticDay>,
}

impl SyntheticYear {
    pub fn anomaly_flags(&self) -> Vec<bool> {
        self.days.iter().map(SyntheticDay::is_anomalous).collect()
    }

    pub fn training_mask(&self) -> Vec<bool> {
        self.days
            .iter()
            .map(|d| d.in_training_split(self.start))
            .collect()
    }

    /// `day_id,class,anomaly,annotated` rows; the triple is empty on typical
    /// days.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("day_id,class,anomaly,annotated\n");
        for d in &self.days {
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.date,
                d.expected.letter(),
                d.anomaly.map_or("none", AnomalyKind::name),
                d.annotated.map(|t| t.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// One row of the day-label file.
#[derive(Clone, Debug, PartialEq)]
pub struct DayLabel {
    pub day_id: NaiveDate,
    pub class: DayClass,
    /// Anomaly kind name, `None` for typical days.
    pub anomaly: Option<String>,
    pub annotated: Option<AffinityTriple>,
}

/// Reads the output of [`SyntheticYear::labels_csv`] or a hand-written file
/// in the same layout.
pub fn parse_labels_csv(text: &str) -> Result<Vec<DayLabel>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::EmptyInput("labels"))?;
    if header.trim() != "day_id,class,anomaly,annotated" {
        return Err(Error::malformed(
            "labels",
            format!("unexpected header `{header}`"),
        ));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::malformed(
                    "labels",
                    format!("row {} has {} fields", i + 1, f.len()),
                ));
            }
            let day_id = NaiveDate::parse_from_str(f[0], "%Y-%m-%d")
                .map_err(|e| Error::malformed("labels", format!("row {}: {e}", i + 1)))?;
            Ok(DayLabel {
                day_id,
                class: f[1].parse()?,
                anomaly: match f[2] {
                    "" | "none" => None,
                    k => Some(k.to_string()),
                },
                annotated: if f[3].is_empty() {
                    None
                } else {
                    Some(f[3].parse()?)
                },
            })
        })
        .collect()
}

/// A labeled year. Anomalies are split evenly between the even (training)
/// and odd (held-out) weeks and cycle through the anomaly kinds.
pub fn synthetic_year(cfg: &YearConfig) -> Result<SyntheticYear> {
    if cfg.start.weekday() != Weekday::Mon {
        return Err(Error::invalid("start", "must be a Monday"));
    }
    if cfg.anomalies > cfg.days {
        return Err(Error::invalid("anomalies", "more anomalies than days"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xA11));
    let (mut even, mut odd): (Vec<usize>, Vec<usize>) =
        (0..cfg.days).partition(|i| (i / 7) % 2 == 0);
    even.shuffle(&mut rng);
    odd.shuffle(&mut rng);
    let half = cfg.anomalies / 2;
    let mut chosen: Vec<usize> = even
        .into_iter()
        .take(cfg.anomalies - half)
        .chain(odd.into_iter().take(half))
        .collect();
    chosen.sort_unstable();
    let kind_of = |i: usize| {
        chosen
            .iter()
            .position(|&c| c == i)
            .map(|k| AnomalyKind::ALL[k % AnomalyKind::ALL.len()])
    };
    let resolution = resolution_for_length(cfg.length);
    let days = (0..cfg.days)
        .map(|i| {
            let date = cfg.start + Days::new(i as u64);
            let expected = DayClass::expected_for(date);
            let anomaly = kind_of(i);
            let template = match anomaly {
                Some(kind) => anomalous_template(expected, kind, cfg.length),
                None => class_template(expected, cfg.length),
            };
            let raw = vary(&template, &cfg.variation, mix_seed(cfg.seed, i as u64 + 1));
            let annotated = match anomaly {
                Some(_) => Some(annotate(&raw)?),
                None => None,
            };
            Ok(SyntheticDay {
                date,
                expected,
                series: ActivityTimeSeries::from_raw(&raw, resolution, date, cfg.hotspot)?,
                anomaly,
                annotated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticYear {
        start: cfg.start,
        days,
    })
}

/// `per_class` clean days of every class, dated on a Monday, Friday or
/// Sunday of consecutive weeks so the calendar agrees with the label.
pub fn pattern_set(
    per_class: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<(DayClass, ActivityTimeSeries)>> {
    let start = NaiveDate::from_ymd_opt(2014, 1, 6).expect("valid date");
    let variation = DayVariation::default();
    let resolution = resolution_for_length(length);
    let mut out = Vec::with_capacity(3 * per_class);
    for class in DayClass::ALL {
        let offset = match class {
            DayClass::Working => 0,
            DayClass::Entertainment => 4,
            DayClass::Leisure => 6,
        };
        let template = class_template(class, length);
        for w in 0..per_class {
            let date = start + Days::new((7 * w + offset) as u64);
            let raw = vary(
                &template,
                &variation,
                mix_seed(seed, (class.index() * 1000 + w) as u64),
            );
            out.push((
                class,
                ActivityTimeSeries::from_raw(&raw, resolution, date, "P")?,
            ));
        }
    }
    Ok(out)
}

/// Gaussian clusters of activity planted in a square study area centred on
/// the origin, plus a uniform background.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedLayout {
    pub bbox: BoundingBox,
    pub centers: Vec<(f64, f64)>,
    pub config: PlantedConfig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedConfig {
    pub clusters: usize,
    /// Side of the square study area in meters.
    pub side: f64,
    /// Smallest distance between two cluster centers.
    pub min_separation: f64,
    /// Standard deviation of trip positions around a center.
    pub spread: f64,
    /// Mean trips per cluster per 5-minute step.
    pub cluster_rate: f64,
    /// Mean background trips per 5-minute step over the whole area.
    pub background_rate: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            clusters: 7,
            side: 6000.0,
            min_separation: 1200.0,
            spread: 100.0,
            cluster_rate: 60.0,
            background_rate: 200.0,
            seed: 0,
        }
    }
}

/// Cluster centers drawn uniformly, kept 600 m from the border and at least
/// `min_separation` apart.
pub fn planted_layout(cfg: &PlantedConfig) -> Result<PlantedLayout> {
    let half = cfg.side / 2.0;
    let bbox = BoundingBox::new(-half, -half, half, half)?;
    let margin = 600.0_f64.min(half / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5A7));
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(cfg.clusters);
    for _ in 0..10_000 {
        if centers.len() == cfg.clusters {
            break;
        }
        let c = (
            rng.random_range(-half + margin..half - margin),
            rng.random_range(-half + margin..half - margin),
        );
        if centers
            .iter()
            .all(|&(x, y)| (x - c.0).hypot(y - c.1) >= cfg.min_separation)
        {
            centers.push(c);
        }
    }
    if centers.len() < cfg.clusters {
        return Err(Error::invalid(
            "clusters",
            "cannot place that many separated clusters",
        ));
    }
    Ok(PlantedLayout {
        bbox,
        centers,
        config: *cfg,
    })
}

impl PlantedLayout {
    /// Trip endpoints of one 5-minute step, scaled by `activity`.
    pub fn step_points(&self, activity: f64, rng: &mut ChaCha8Rng) -> Vec<SpatialEvent> {
        let cfg = &self.config;
        let b = &self.bbox;
        let spread = Normal::new(0.0, cfg.spread).expect("positive spread");
        let mut out = Vec::new();
        let draw = |rate: f64, rng: &mut ChaCha8Rng| -> usize {
            if rate > 0.0 {
                Poisson::new(rate).expect("positive rate").sample(rng) as usize
            } else {
                0
            }
        };
        for &(cx, cy) in &self.centers {
            for _ in 0..draw(cfg.cluster_rate * activity, rng) {
                let x = (cx + spread.sample(rng)).clamp(b.min_x, b.max_x);
                let y = (cy + spread.sample(rng)).clamp(b.min_y, b.max_y);
                out.push(SpatialEvent {
                    x,
                    y,
                    passengers: rng.random_range(1..=4) as f64,
                });
            }
        }
        for _ in 0..draw(cfg.background_rate * activity, rng) {
            out.push(SpatialEvent {
                x: rng.random_range(b.min_x..b.max_x),
                y: rng.random_range(b.min_y..b.max_y),
                passengers: rng.random_range(1..=4) as f64,
            });
        }
        out
    }

    /// `steps` batches per slot with every cluster active, aggregated onto
    /// `grid`, slots in clock order.
    pub fn slot_batches(&self, grid: &Trail2D, steps: usize) -> Vec<SpatialEventBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, 0xB47));
        TimeSlot::ALL
            .iter()
            .flat_map(|&slot| (0..steps).map(move |_| slot))
            .map(|slot| SpatialEventBatch::aggregate(slot, &self.step_points(1.0, &mut rng), grid))
            .collect()
    }
}

/// Trip records whose endpoints follow a planted layout and whose volume
/// follows each day's class template. The layout's meter coordinates are
/// placed at the center of `geo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripConfig {
    pub start: NaiveDate,
    pub days: usize,
    /// Mean trips per cluster per 5-minute step at the template's peak.
    pub peak_rate: f64,
    pub seed: u64,
}

impl Default for TripConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 2, 2).expect("valid date"),
            days: 7,
            peak_rate: 15.0,
            seed: 0,
        }
    }
}

pub fn synthetic_trips(layout: &PlantedLayout, geo: &GeoBox, cfg: &TripConfig) -> Vec<TripRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x7219));
    let scaled = PlantedLayout {
        config: PlantedConfig {
            cluster_rate: cfg.peak_rate,
            background_rate: cfg.peak_rate,
            ..layout.config
        },
        ..layout.clone()
    };
    let mut out = Vec::new();
    for d in 0..cfg.days {
        let day = cfg.start + Days::new(d as u64);
        let template = class_template(DayClass::expected_for(day), 288);
        for (b, &level) in template.iter().enumerate() {
            let t0 = day.and_hms_opt(0, 0, 0).expect("midnight") + Duration::minutes(5 * b as i64);
            for p in scaled.step_points(level, &mut rng) {
                let (lon, lat) = geo.unproject(p.x, p.y);
                let pickup = Endpoint {
                    time: t0 + Duration::seconds(rng.random_range(0..300)),
                    lon,
                    lat,
                };
                let (dx, dy) = (
                    rng.random_range(-1500.0..1500.0),
                    rng.random_range(-1500.0..1500.0),
                );
                let (dlon, dlat) = geo.unproject(p.x + dx, p.y + dy);
                let dropoff = Endpoint {
                    time: pickup.time + Duration::seconds(rng.random_range(180..1800)),
                    lon: dlon.clamp(geo.min_lon, geo.max_lon),
                    lat: dlat.clamp(geo.min_lat, geo.max_lat),
                };
                out.push(TripRecord {
                    taxi_id: format!("T{:04}", rng.random_range(0..5000)),
                    passenger_count: p.passengers as u32,
                    pickup,
                    dropoff,
                });
            }
        }
    }
    out
}

/// Trip CSV in the input schema. Every `bad_every`-th row (when non-zero)
/// is damaged in one of the ways the parser rejects.
pub fn trips_csv(records: &[TripRecord], bad_every: usize) -> String {
    let mut out = TRIP_COLUMNS.join(",");
    out.push('\n');
    let fmt = "%Y-%m-%d %H:%M:%S";
    for (i, r) in records.iter().enumerate() {
        let mut f = [
            r.taxi_id.clone(),
            r.passenger_count.to_string(),
            r.pickup.time.format(fmt).to_string(),
            r.dropoff.time.format(fmt).to_string(),
            format!("{:.6}", r.pickup.lon),
            format!("{:.6}", r.pickup.lat),
            format!("{:.6}", r.dropoff.lon),
            format!("{:.6}", r.dropoff.lat),
        ];
        if bad_every > 0 && i % bad_every == bad_every - 1 {
            match (i / bad_every) % 4 {
                0 => f[4].clear(),
                1 => f[1] = "n/a".into(),
                2 => f[5] = "0.000000".into(),
                _ => f.swap(2, 3),
            }
        }
        out.push_str(&f.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_hit_their_knots() {
        let w = class_template(DayClass::Working, 144);
        // Sample 48 is centred on 08:05, inside the morning peak.
        assert!((w[48] - 0.9).abs() < 1e-12);
        assert!((w[0] - 0.1).abs() < 1e-12);
        let e = class_template(DayClass::Entertainment, 144);
        assert!((e[6] - 0.9).abs() < 1e-12);
        assert!(e.iter().all(|v| (0.1..=0.9).contains(v)));
    }

    #[test]
    fn anomalies_change_the_shape() {
        for class in DayClass::ALL {
            let base = class_template(class, 144);
            for kind in AnomalyKind::ALL {
                let a = anomalous_template(class, kind, 144);
                let diff: f64 =
                    a.iter().zip(&base).map(|(x, y)| (x - y).abs()).sum::<f64>() / 144.0;
                assert!(diff > 0.05, "{class:?} {kind:?} {diff}");
            }
        }
    }

    #[test]
    fn clean_days_annotate_as_their_class() {
        for class in DayClass::ALL {
            let raw = vary(&class_template(class, 144), &DayVariation::default(), 7);
            assert_eq!(annotate(&raw).unwrap().first(), class);
        }
        let holiday = anomalous_template(DayClass::Working, AnomalyKind::Holiday, 144);
        assert_eq!(annotate(&holiday).unwrap().first(), DayClass::Leisure);
    }

    #[test]
    fn year_layout() {
        let year = synthetic_year(&YearConfig::default()).unwrap();
        assert_eq!(year.days.len(), 364);
        let flags = year.anomaly_flags();
        assert_eq!(flags.iter().filter(|&&f| f).count(), 20);
        let train = year.training_mask();
        let in_train = flags.iter().zip(&train).filter(|(&f, &t)| f && t).count();
        assert_eq!(in_train, 10);
        assert_eq!(year.days[0].expected, DayClass::Working);
        assert_eq!(year.days[4].expected, DayClass::Entertainment);
        assert_eq!(year.days[6].expected, DayClass::Leisure);
        assert!(year
            .days
            .iter()
            .all(|d| d.is_anomalous() == d.annotated.is_some()));
        let again = synthetic_year(&YearConfig::default()).unwrap();
        assert_eq!(year.labels_csv(), again.labels_csv());
        let labels = parse_labels_csv(&year.labels_csv()).unwrap();
        assert_eq!(labels.len(), 364);
        for (l, d) in labels.iter().zip(&year.days) {
            assert_eq!(l.day_id, d.date);
            assert_eq!(l.anomaly.is_some(), d.is_anomalous());
            assert_eq!(l.annotated, d.annotated);
        }
        assert!(parse_labels_csv("day,class\n").is_err());
        assert_eq!(year.days[100].series, again.days[100].series);
        let bad = YearConfig {
            start: NaiveDate::from_ymd_opt(2015, 1, 6).unwrap(),
            ..YearConfig::default()
        };
        assert!(synthetic_year(&bad).is_err());
    }

    #[test]
    fn planted_layout_is_separated_and_seeded() {
        let cfg = PlantedConfig::default();
        let a = planted_layout(&cfg).unwrap();
        assert_eq!(a.centers.len(), 7);
        for (i, p) in a.centers.iter().enumerate() {
            assert!(a.bbox.contains(p.0, p.1));
            for q in &a.centers[i + 1..] {
                assert!((p.0 - q.0).hypot(p.1 - q.1) >= cfg.min_separation);
            }
        }
        assert_eq!(a, planted_layout(&cfg).unwrap());
        let crowded = PlantedConfig {
            clusters: 100,
            ..cfg
        };
        assert!(planted_layout(&crowded).is_err());
    }

    #[test]
    fn trips_parse_back() {
        let layout = planted_layout(&PlantedConfig::default()).unwrap();
        let geo = GeoBox::manhattan();
        let cfg = TripConfig {
            days: 1,
            peak_rate: 0.5,
            ..TripConfig::default()
        };
        let trips = synthetic_trips(&layout, &geo, &cfg);
        assert!(!trips.is_empty());
        let text = trips_csv(&trips, 10);
        let out = crate::ingest::parse_trips_reader(text.as_bytes(), &geo).unwrap();
        assert_eq!(out.total_rows, trips.len());
        assert_eq!(out.rejections.len(), trips.len() / 10);
        assert_eq!(out.records.len() + out.rejections.len(), trips.len());
    }

    #[test]
    fn pattern_set_dates_match_classes() {
        let set = pattern_set(10, 144, 3).unwrap();
        assert_eq!(set.len(), 30);
        for (class, s) in &set {
            assert_eq!(DayClass::expected_for(s.day_id()), *class);
        }
    }
}
