//! Trip-record ingestion: CSV parsing with a rejection log, space-time
//! bucketization and per-hotspot activity extraction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::hotspot::{Hotspot, SpatialEvent, SpatialEventBatch, TimeSlot};
use crate::series::ActivityTimeSeries;
use crate::stigspace::{BoundingBox, Trail2D};

pub const TEN_FEET_M: f64 = 3.048;
pub const BUCKET_MINUTES: u32 = 5;
const EARTH_RADIUS_M: f64 = 6_371_008.8;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Geographic box in degrees with its local equirectangular projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl GeoBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let ok = [min_lon, min_lat, max_lon, max_lat]
            .iter()
            .all(|v| v.is_finite())
            && min_lon < max_lon
            && min_lat < max_lat
            && min_lat >= -90.0
            && max_lat <= 90.0;
        if !ok {
            return Err(Error::invalid(
                "geographic box",
                "need finite min < max within valid latitudes",
            ));
        }
        Ok(Self {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    /// Lower Manhattan to Harlem.
    pub fn manhattan() -> Self {
        Self {
            min_lon: -74.03,
            min_lat: 40.69,
            max_lon: -73.90,
            max_lat: 40.83,
        }
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.min_lon + self.max_lon) / 2.0,
            (self.min_lat + self.max_lat) / 2.0,
        )
    }

    /// Meters east and north of the box center.
    pub fn project(&self, lon: f64, lat: f64) -> (f64, f64) {
        let (lon0, lat0) = self.center();
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        ((lon - lon0) * k * lat0.to_radians().cos(), (lat - lat0) * k)
    }

    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        let (lon0, lat0) = self.center();
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        (lon0 + x / (k * lat0.to_radians().cos()), lat0 + y / k)
    }

    pub fn projected(&self) -> BoundingBox {
        let (x0, y0) = self.project(self.min_lon, self.min_lat);
        let (x1, y1) = self.project(self.max_lon, self.max_lat);
        BoundingBox {
            min_x: x0,
            min_y: y0,
            max_x: x1,
            max_y: y1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Endpoint {
    pub time: NaiveDateTime,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub taxi_id: String,
    pub passenger_count: u32,
    pub pickup: Endpoint,
    pub dropoff: Endpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    MissingField,
    UnparseableField,
    OutOfBox,
    DropoffBeforePickup,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MissingField => "missing_field",
            RejectReason::UnparseableField => "unparseable_field",
            RejectReason::OutOfBox => "out_of_box",
            RejectReason::DropoffBeforePickup => "dropoff_before_pickup",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line in the input file; the header is line 1.
    pub line_number: u64,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<TripRecord>,
    pub rejections: Vec<Rejection>,
    pub total_rows: usize,
}

pub fn rejection_log_csv(rejections: &[Rejection]) -> String {
    let mut out = String::from("line_number,reason\n");
    for r in rejections {
        out.push_str(&format!("{},{}\n", r.line_number, r.reason));
    }
    out
}

/// Expected input columns in their canonical order. The first also accepts
/// the name `medallion`.
pub const TRIP_COLUMNS: [&str; 8] = [
    "taxi_id",
    "passenger_count",
    "pickup_datetime",
    "dropoff_datetime",
    "pickup_longitude",
    "pickup_latitude",
    "dropoff_longitude",
    "dropoff_latitude",
];

fn column_indices(headers: &csv::StringRecord) -> Result<[usize; 8]> {
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
    };
    let mut idx = [0; 8];
    let mut missing = Vec::new();
    for (k, name) in TRIP_COLUMNS.iter().enumerate() {
        let found = if k == 0 {
            find(&["taxi_id", "medallion"])
        } else {
            find(&[name])
        };
        match found {
            Some(i) => idx[k] = i,
            None => missing.push(name.to_string()),
        }
    }
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(Error::MissingColumns(missing))
    }
}

fn parse_row(
    row: &csv::StringRecord,
    idx: &[usize; 8],
    bbox: &GeoBox,
) -> std::result::Result<TripRecord, RejectReason> {
    let fields: Vec<&str> = idx
        .iter()
        .map(|&i| row.get(i).unwrap_or("").trim())
        .collect();
    if fields.iter().any(|f| f.is_empty()) {
        return Err(RejectReason::MissingField);
    }
    let bad = RejectReason::UnparseableField;
    let passenger_count: u32 = fields[1].parse().map_err(|_| bad)?;
    let time = |s: &str| NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).map_err(|_| bad);
    let coord = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(bad);
    let pickup = Endpoint {
        time: time(fields[2])?,
        lon: coord(fields[4])?,
        lat: coord(fields[5])?,
    };
    let dropoff = Endpoint {
        time: time(fields[3])?,
        lon: coord(fields[6])?,
        lat: coord(fields[7])?,
    };
    if !bbox.contains(pickup.lon, pickup.lat) || !bbox.contains(dropoff.lon, dropoff.lat) {
        return Err(RejectReason::OutOfBox);
    }
    if dropoff.time < pickup.time {
        return Err(RejectReason::DropoffBeforePickup);
    }
    Ok(TripRecord {
        taxi_id: fields[0].to_string(),
        passenger_count,
        pickup,
        dropoff,
    })
}

/// Parses trip CSV text from any reader. Rows with too few fields are
/// rejected as missing fields, rows that are not UTF-8 as unparseable.
pub fn parse_trips_reader<R: Read>(reader: R, bbox: &GeoBox) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let idx = column_indices(rdr.headers()?)?;
    let mut out = ParseOutcome::default();
    let mut raw = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut raw)? {
        out.total_rows += 1;
        let line_number = raw.position().map_or(0, |p| p.line());
        let parsed = csv::StringRecord::from_byte_record(raw.clone())
            .map_err(|_| RejectReason::UnparseableField)
            .and_then(|row| parse_row(&row, &idx, bbox));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejections.push(Rejection {
                line_number,
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn parse_trips(path: &Path, bbox: &GeoBox) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trips_reader(std::io::BufReader::new(file), bbox)
}

/// Key of one space-time bucket: day, 5-minute bucket of the day, cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BucketKey {
    pub day: NaiveDate,
    pub bucket: u16,
    pub row: u32,
    pub col: u32,
}

/// Passenger counts per 10-foot cell and 5-minute bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketGrid {
    pub geo: GeoBox,
    pub cell_size: f64,
    pub bucket_minutes: u32,
    counts: BTreeMap<BucketKey, u64>,
}

impl BucketGrid {
    pub fn new(geo: GeoBox, cell_size: f64, bucket_minutes: u32) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid("cell_size", "must be finite and > 0"));
        }
        if bucket_minutes == 0 || 1440 % bucket_minutes != 0 {
            return Err(Error::invalid("bucket_minutes", "must divide a day"));
        }
        Ok(Self {
            geo,
            cell_size,
            bucket_minutes,
            counts: BTreeMap::new(),
        })
    }

    pub fn standard(geo: GeoBox) -> Self {
        Self::new(geo, TEN_FEET_M, BUCKET_MINUTES).expect("standard grid is valid")
    }

    pub fn origin(&self) -> (f64, f64) {
        let b = self.geo.projected();
        (b.min_x, b.min_y)
    }

    pub fn buckets_per_day(&self) -> usize {
        (1440 / self.bucket_minutes) as usize
    }

    /// Cell of a projected point; points on the north or east edge fall in
    /// the last cell.
    fn cell_of(&self, x: f64, y: f64) -> (u32, u32) {
        let b = self.geo.projected();
        let cols = ((b.width() / self.cell_size).ceil() as u32).max(1);
        let rows = ((b.height() / self.cell_size).ceil() as u32).max(1);
        let col = (((x - b.min_x) / self.cell_size).max(0.0) as u32).min(cols - 1);
        let row = (((y - b.min_y) / self.cell_size).max(0.0) as u32).min(rows - 1);
        (row, col)
    }

    pub fn cell_center(&self, row: u32, col: u32) -> (f64, f64) {
        let (ox, oy) = self.origin();
        (
            ox + (col as f64 + 0.5) * self.cell_size,
            oy + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn add_endpoint(&mut self, e: &Endpoint, passengers: u32) {
        let (x, y) = self.geo.project(e.lon, e.lat);
        let (row, col) = self.cell_of(x, y);
        let minute = e.time.hour() * 60 + e.time.minute();
        let key = BucketKey {
            day: e.time.date(),
            bucket: (minute / self.bucket_minutes) as u16,
            row,
            col,
        };
        *self.counts.entry(key).or_insert(0) += passengers as u64;
    }

    /// Adds every count of `other`, which must share the grid.
    pub fn merge(&mut self, other: &BucketGrid) -> Result<()> {
        if other.geo != self.geo
            || other.cell_size != self.cell_size
            || other.bucket_minutes != self.bucket_minutes
        {
            return Err(Error::AxisMismatch);
        }
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_insert(0) += v;
        }
        Ok(())
    }

    pub fn counts(&self) -> &BTreeMap<BucketKey, u64> {
        &self.counts
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.counts.keys().map(|k| k.day).collect();
        d.dedup();
        d
    }

    fn day_range(&self, day: NaiveDate) -> impl Iterator<Item = (&BucketKey, &u64)> {
        let lo = BucketKey {
            day,
            bucket: 0,
            row: 0,
            col: 0,
        };
        let hi = BucketKey {
            day,
            bucket: u16::MAX,
            row: u32::MAX,
            col: u32::MAX,
        };
        self.counts.range(lo..=hi)
    }

    /// Archive text: two comment lines of grid metadata, then
    /// `day,bucket,row,col,count` rows in key order.
    pub fn to_archive_csv(&self) -> String {
        let g = &self.geo;
        let mut out =
            String::from("# min_lon,min_lat,max_lon,max_lat,cell_size_m,bucket_minutes\n");
        out.push_str(&format!(
            "# {},{},{},{},{},{}\nday,bucket,row,col,count\n",
            g.min_lon, g.min_lat, g.max_lon, g.max_lat, self.cell_size, self.bucket_minutes
        ));
        for (k, v) in &self.counts {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                k.day, k.bucket, k.row, k.col, v
            ));
        }
        out
    }

    pub fn from_archive_csv(text: &str) -> Result<Self> {
        let bad = |r: String| Error::malformed("bucket archive", r);
        let mut lines = text.lines();
        lines.next();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| bad("missing metadata line".into()))?;
        let m: Vec<f64> = meta
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("metadata `{v}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if m.len() != 6 {
            return Err(bad("metadata needs six values".into()));
        }
        let mut grid = BucketGrid::new(GeoBox::new(m[0], m[1], m[2], m[3])?, m[4], m[5] as u32)?;
        lines.next();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("row {} has {} fields", i + 1, f.len())));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))
            };
            let key = BucketKey {
                day: NaiveDate::parse_from_str(f[0].trim(), "%Y-%m-%d")
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
                bucket: num(f[1])? as u16,
                row: num(f[2])? as u32,
                col: num(f[3])? as u32,
            };
            grid.counts.insert(key, num(f[4])?);
        }
        Ok(grid)
    }
}

/// Counts both endpoints of every trip with its passenger count.
pub fn bucketize(records: &[TripRecord], geo: GeoBox) -> BucketGrid {
    let mut grid = BucketGrid::standard(geo);
    for r in records {
        grid.add_endpoint(&r.pickup, r.passenger_count);
        grid.add_endpoint(&r.dropoff, r.passenger_count);
    }
    grid
}

fn check_resolution(grid: &BucketGrid, resolution_minutes: u32) -> Result<usize> {
    if resolution_minutes == 0
        || !resolution_minutes.is_multiple_of(grid.bucket_minutes)
        || 1440 % resolution_minutes != 0
    {
        return Err(Error::invalid(
            "resolution_minutes",
            format!(
                "must be a multiple of {} that divides a day",
                grid.bucket_minutes
            ),
        ));
    }
    Ok((resolution_minutes / grid.bucket_minutes) as usize)
}

/// Raw passenger counts inside the hotspot, per `resolution_minutes`.
pub fn raw_activity(
    grid: &BucketGrid,
    h: &Hotspot,
    day: NaiveDate,
    resolution_minutes: u32,
) -> Result<Vec<u64>> {
    let per = check_resolution(grid, resolution_minutes)?;
    let b = grid.geo.projected();
    let (x0, y0, x1, y1) = h.polygon.bounds();
    if x1 < b.min_x || x0 > b.max_x || y1 < b.min_y || y0 > b.max_y {
        return Err(Error::PolygonOutsideBox);
    }
    let mut out = vec![0u64; grid.buckets_per_day() / per];
    let mut inside: HashMap<(u32, u32), bool> = HashMap::new();
    for (k, v) in grid.day_range(day) {
        let hit = *inside.entry((k.row, k.col)).or_insert_with(|| {
            let (x, y) = grid.cell_center(k.row, k.col);
            h.polygon.contains(x, y)
        });
        if hit {
            out[k.bucket as usize / per] += v;
        }
    }
    Ok(out)
}

/// Min-max normalized activity of a hotspot over one day.
pub fn hotspot_activity(
    grid: &BucketGrid,
    h: &Hotspot,
    day: NaiveDate,
    resolution_minutes: u32,
) -> Result<ActivityTimeSeries> {
    let raw: Vec<f64> = raw_activity(grid, h, day, resolution_minutes)?
        .into_iter()
        .map(|v| v as f64)
        .collect();
    ActivityTimeSeries::from_raw(&raw, resolution_minutes, day, h.id.as_str())
}

/// One batch per 5-minute bucket of the given days, in time order, with
/// counts summed onto the cells of `trail_grid`. Empty buckets still yield a
/// batch so that evaporation keeps pace with the clock.
pub fn spatial_batches(
    grid: &BucketGrid,
    days: &[NaiveDate],
    trail_grid: &Trail2D,
) -> Vec<SpatialEventBatch> {
    let mut days = days.to_vec();
    days.sort_unstable();
    days.dedup();
    let per_day = grid.buckets_per_day();
    let mut out = Vec::with_capacity(days.len() * per_day);
    for day in days {
        let mut points: Vec<Vec<SpatialEvent>> = vec![Vec::new(); per_day];
        for (k, &v) in grid.day_range(day) {
            let (x, y) = grid.cell_center(k.row, k.col);
            points[k.bucket as usize].push(SpatialEvent {
                x,
                y,
                passengers: v as f64,
            });
        }
        for (b, pts) in points.iter().enumerate() {
            let hour = (b as u32 * grid.bucket_minutes) / 60;
            out.push(SpatialEventBatch::aggregate(
                TimeSlot::of_hour(hour),
                pts,
                trail_grid,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hotspot::Polygon;
    use proptest::prelude::*;

    const HEADER: &str = "medallion,passenger_count,pickup_datetime,dropoff_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude\n";

    fn geo() -> GeoBox {
        GeoBox::manhattan()
    }

    #[test]
    fn well_formed_row_and_rejections() {
        let text = format!(
            "{HEADER}\
             A1,2,2015-02-03 08:01:00,2015-02-03 08:15:00,-73.98,40.75,-73.97,40.76\n\
             A2,1,2015-02-03 08:01:00,2015-02-03 08:15:00,,40.75,-73.97,40.76\n\
             A3,x,2015-02-03 08:01:00,2015-02-03 08:15:00,-73.98,40.75,-73.97,40.76\n\
             A4,1,2015-02-03 08:01:00,2015-02-03 08:15:00,0.0,0.0,-73.97,40.76\n\
             A5,1,2015-02-03 08:20:00,2015-02-03 08:15:00,-73.98,40.75,-73.97,40.76\n\
             A6,1\n"
        );
        let mut bytes = text.into_bytes();
        bytes.extend_from_slice(
            b"A7,1,2015-02-03 08:01:00,2015-02-03 08:15:00,-73.98,40.75,-73.97,\xff\n",
        );
        let out = parse_trips_reader(bytes.as_slice(), &geo()).unwrap();
        assert_eq!(out.total_rows, 7);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].taxi_id, "A1");
        let reasons: Vec<_> = out
            .rejections
            .iter()
            .map(|r| (r.line_number, r.reason.code()))
            .collect();
        assert_eq!(
            reasons,
            vec![
                (3, "missing_field"),
                (4, "unparseable_field"),
                (5, "out_of_box"),
                (6, "dropoff_before_pickup"),
                (7, "missing_field"),
                (8, "unparseable_field")
            ]
        );
        assert!(
            rejection_log_csv(&out.rejections).starts_with("line_number,reason\n3,missing_field\n")
        );
    }

    #[test]
    fn header_matching_is_case_insensitive_and_reports_missing() {
        let text = "TAXI_ID,Passenger_Count,pickup_datetime,dropoff_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude\n";
        assert_eq!(
            parse_trips_reader(text.as_bytes(), &geo())
                .unwrap()
                .total_rows,
            0
        );
        let text = "medallion,passenger_count,pickup_datetime,dropoff_datetime,pickup_longitude,pickup_latitude,dropoff_longitude\n";
        match parse_trips_reader(text.as_bytes(), &geo()) {
            Err(Error::MissingColumns(c)) => assert_eq!(c, vec!["dropoff_latitude".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn projection_round_trip_and_scale() {
        let g = geo();
        let (x, y) = g.project(-73.96, 40.77);
        let (lon, lat) = g.unproject(x, y);
        assert!((lon + 73.96).abs() < 1e-12 && (lat - 40.77).abs() < 1e-12);
        // One degree of latitude is about 111.2 km.
        let (_, y0) = g.project(-73.96, 40.70);
        let (_, y1) = g.project(-73.96, 40.80);
        assert!(((y1 - y0) - 11_119.5).abs() < 1.0);
    }

    fn trip(passengers: u32, pickup: &str, dropoff: &str) -> TripRecord {
        let t = |s| NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).unwrap();
        TripRecord {
            taxi_id: "T".into(),
            passenger_count: passengers,
            pickup: Endpoint {
                time: t(pickup),
                lon: -73.98,
                lat: 40.75,
            },
            dropoff: Endpoint {
                time: t(dropoff),
                lon: -73.95,
                lat: 40.78,
            },
        }
    }

    #[test]
    fn both_endpoints_counted() {
        let g = bucketize(
            &[trip(2, "2015-02-03 08:01:00", "2015-02-03 08:14:00")],
            geo(),
        );
        assert_eq!(g.counts().len(), 2);
        assert!(g.counts().values().all(|&v| v == 2));
        let buckets: Vec<u16> = g.counts().keys().map(|k| k.bucket).collect();
        assert_eq!(buckets, vec![96, 98]);
    }

    #[test]
    fn bucket_boundary_splits() {
        let g = bucketize(
            &[
                trip(1, "2015-02-03 08:04:59", "2015-02-03 08:04:59"),
                trip(1, "2015-02-03 08:05:00", "2015-02-03 08:05:00"),
            ],
            geo(),
        );
        let buckets: std::collections::BTreeSet<u16> =
            g.counts().keys().map(|k| k.bucket).collect();
        assert_eq!(buckets.into_iter().collect::<Vec<_>>(), vec![96, 97]);
    }

    #[test]
    fn archive_round_trip() {
        let g = bucketize(
            &[
                trip(3, "2015-02-03 23:58:00", "2015-02-04 00:07:00"),
                trip(1, "2015-02-03 10:00:00", "2015-02-03 10:30:00"),
            ],
            geo(),
        );
        let text = g.to_archive_csv();
        assert_eq!(BucketGrid::from_archive_csv(&text).unwrap(), g);
        assert_eq!(g.days().len(), 2);
    }

    fn square(id: &str, x0: f64, y0: f64, size: f64) -> Hotspot {
        Hotspot {
            id: id.into(),
            polygon: Polygon {
                outer: vec![
                    (x0, y0),
                    (x0 + size, y0),
                    (x0 + size, y0 + size),
                    (x0, y0 + size),
                ],
                holes: vec![],
            },
            slot_coverage: TimeSlot::ALL.to_vec(),
        }
    }

    #[test]
    fn activity_requires_overlap_and_valid_resolution() {
        let g = BucketGrid::standard(geo());
        let far = square("Z", 1e7, 1e7, 100.0);
        let day = NaiveDate::from_ymd_opt(2015, 2, 3).unwrap();
        assert!(matches!(
            raw_activity(&g, &far, day, 10),
            Err(Error::PolygonOutsideBox)
        ));
        let near = square("A", 0.0, 0.0, 100.0);
        assert!(raw_activity(&g, &near, day, 7).is_err());
        let s = hotspot_activity(&g, &near, day, 10).unwrap();
        assert!(s.is_constant());
        assert_eq!(s.len(), 144);
    }

    #[test]
    fn disjoint_hotspots_add_up() {
        let geo = geo();
        let mut records = Vec::new();
        for i in 0..200u32 {
            let mut r = trip(1 + i % 3, "2015-02-03 00:00:00", "2015-02-03 00:00:00");
            let minute = (i * 7) % 1440;
            let t = NaiveDate::from_ymd_opt(2015, 2, 3)
                .unwrap()
                .and_hms_opt(minute / 60, minute % 60, 0)
                .unwrap();
            r.pickup.time = t;
            r.dropoff.time = t;
            let (lon, lat) = geo.unproject(
                -300.0 + (i % 20) as f64 * 31.0,
                -200.0 + (i / 20) as f64 * 37.0,
            );
            r.pickup.lon = lon;
            r.pickup.lat = lat;
            records.push(r);
        }
        let g = bucketize(&records, geo);
        let day = records[0].pickup.time.date();
        let left = square("L", -400.0, -300.0, 400.0);
        let right = Hotspot {
            polygon: Polygon {
                outer: vec![
                    (0.0001, -300.0),
                    (400.0, -300.0),
                    (400.0, 100.0),
                    (0.0001, 100.0),
                ],
                holes: vec![],
            },
            ..square("R", 0.0, 0.0, 1.0)
        };
        let whole = Hotspot {
            polygon: Polygon {
                outer: vec![
                    (-400.0, -300.0),
                    (400.0, -300.0),
                    (400.0, 100.0),
                    (-400.0, 100.0),
                ],
                holes: vec![],
            },
            ..square("W", 0.0, 0.0, 1.0)
        };
        let l = raw_activity(&g, &left, day, 10).unwrap();
        let r = raw_activity(&g, &right, day, 10).unwrap();
        let w = raw_activity(&g, &whole, day, 10).unwrap();
        let sum: Vec<u64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
        assert_eq!(sum, w);
        assert!(w.iter().sum::<u64>() > 0);
    }

    #[test]
    fn batches_follow_the_clock() {
        let g = bucketize(
            &[trip(4, "2015-02-03 08:01:00", "2015-02-03 21:14:00")],
            geo(),
        );
        let trail = Trail2D::enclosing(&geo().projected(), 50.0).unwrap();
        let day = NaiveDate::from_ymd_opt(2015, 2, 3).unwrap();
        let b = spatial_batches(&g, &[day], &trail);
        assert_eq!(b.len(), 288);
        assert_eq!(b[96].slot, TimeSlot::EarlyMorning);
        assert_eq!(b[96].events.len(), 1);
        assert_eq!(b[254].slot, TimeSlot::Night);
        assert_eq!(b[254].events[0].passengers, 4.0);
        assert_eq!(b.iter().map(|x| x.events.len()).sum::<usize>(), 2);
    }

    proptest! {
        #[test]
        fn conservation_and_order_independence(
            trips in proptest::collection::vec((0u32..6, 0u32..1440, 0u32..60, 0.0f64..1.0, 0.0f64..1.0), 0..40)
        ) {
            let day = NaiveDate::from_ymd_opt(2015, 6, 1).unwrap();
            let g = geo();
            let records: Vec<TripRecord> = trips.iter().map(|&(p, m, d, u, v)| {
                let at = |min: u32| day.and_hms_opt(0, 0, 0).unwrap() + chrono::Duration::minutes(min as i64);
                let lon = g.min_lon + u * (g.max_lon - g.min_lon);
                let lat = g.min_lat + v * (g.max_lat - g.min_lat);
                TripRecord {
                    taxi_id: "P".into(),
                    passenger_count: p,
                    pickup: Endpoint { time: at(m), lon, lat },
                    dropoff: Endpoint { time: at(m + d), lon: g.max_lon, lat: g.max_lat },
                }
            }).collect();
            let a = bucketize(&records, g);
            let total: u64 = records.iter().map(|r| 2 * r.passenger_count as u64).sum();
            prop_assert_eq!(a.total_mass(), total);
            let mut reversed = records.clone();
            reversed.reverse();
            prop_assert_eq!(bucketize(&reversed, g), a.clone());
            let (left, right) = records.split_at(records.len() / 2);
            let mut merged = bucketize(left, g);
            merged.merge(&bucketize(right, g)).unwrap();
            prop_assert_eq!(merged, a);
        }
    }
}
