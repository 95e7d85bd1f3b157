//! Hotspot discovery: smoothed spatial samples leave cone marks on one
//! evaporating trail per time slot, and the areas that stay relevant in every
//! slot become hotspot polygons.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::srf::logistic;
use crate::stigspace::{ConeGeometry, Trail, Trail2D};

pub const DEFAULT_RELEVANCE_FRACTION: f64 = 0.3;
pub const DEFAULT_MIN_AREA_M2: f64 = 50_000.0;

/// The four daily slots, by local starting hour: 3–8, 9–14, 15–20 and 21–2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeSlot {
    EarlyMorning,
    Morning,
    AfternoonEvening,
    Night,
}

impl TimeSlot {
    pub const ALL: [TimeSlot; 4] = [
        TimeSlot::EarlyMorning,
        TimeSlot::Morning,
        TimeSlot::AfternoonEvening,
        TimeSlot::Night,
    ];

    /// Slot of an event whose hour starts at `hour` (0–23).
    pub fn of_hour(hour: u32) -> TimeSlot {
        match hour % 24 {
            3..=8 => TimeSlot::EarlyMorning,
            9..=14 => TimeSlot::Morning,
            15..=20 => TimeSlot::AfternoonEvening,
            _ => TimeSlot::Night,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeSlot::EarlyMorning => "early_morning",
            TimeSlot::Morning => "morning",
            TimeSlot::AfternoonEvening => "afternoon_evening",
            TimeSlot::Night => "night",
        }
    }
}

impl fmt::Display for TimeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeSlot::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// Logistic smoothing of a sample already scaled to `[0, 1]`.
pub fn smooth_sample(x: f64, alpha_s: f64, beta_s: f64) -> f64 {
    logistic(alpha_s * (x - beta_s))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
    /// Passenger count mapped to 1 before smoothing; larger counts saturate.
    pub cap: f64,
}

impl Default for Smoothing {
    fn default() -> Self {
        Self {
            alpha: 12.0,
            beta: 0.5,
            cap: 4.0,
        }
    }
}

impl Smoothing {
    pub fn apply(&self, passengers: f64) -> f64 {
        smooth_sample(
            (passengers / self.cap).clamp(0.0, 1.0),
            self.alpha,
            self.beta,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialEvent {
    pub x: f64,
    pub y: f64,
    pub passengers: f64,
}

/// Events of one 5-minute step, all within one time slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialEventBatch {
    pub slot: TimeSlot,
    pub events: Vec<SpatialEvent>,
}

impl SpatialEventBatch {
    /// Sums passengers per cell of `grid`, one event per active cell at its
    /// center. Points outside the grid are dropped.
    pub fn aggregate(slot: TimeSlot, points: &[SpatialEvent], grid: &Trail2D) -> Self {
        let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for p in points {
            if let Some(cell) = grid.cell_of(p.x, p.y) {
                *sums.entry(cell).or_insert(0.0) += p.passengers;
            }
        }
        let events = sums
            .into_iter()
            .map(|((row, col), passengers)| {
                let (x, y) = grid.cell_center(row, col);
                SpatialEvent { x, y, passengers }
            })
            .collect();
        Self { slot, events }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotTrailConfig {
    pub delta: f64,
    pub cone: ConeGeometry,
    pub smoothing: Smoothing,
}

impl Default for SlotTrailConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            cone: ConeGeometry::default(),
            smoothing: Smoothing::default(),
        }
    }
}

/// Runs the batches of one slot through `grid` (its current cells are the
/// starting trail). Each step evaporates, then deposits one cone per event.
pub fn build_slot_trail(
    grid: Trail2D,
    batches: &[SpatialEventBatch],
    cfg: &SlotTrailConfig,
) -> Result<Trail2D> {
    let mut trail = grid;
    if let Some(first) = batches.first() {
        if batches.iter().any(|b| b.slot != first.slot) {
            return Err(Error::invalid(
                "batches",
                "all batches must share one time slot",
            ));
        }
    }
    for batch in batches {
        trail.evaporate(cfg.delta)?;
        for e in &batch.events {
            let h = cfg.smoothing.apply(e.passengers);
            trail.deposit(&cfg.cone.mark(e.x, e.y, h)?)?;
        }
    }
    Ok(trail)
}

/// Like [`build_slot_trail`] from an empty trail, but returns the trail
/// averaged over every step instead of its final state, so that a quiet
/// stretch at the end of the data does not erase what came before.
pub fn mean_slot_trail(
    grid: &Trail2D,
    batches: &[SpatialEventBatch],
    cfg: &SlotTrailConfig,
) -> Result<Trail2D> {
    let mut trail = grid.zeroed();
    let mut sum = grid.zeroed();
    for batch in batches {
        if batch.slot != batches[0].slot {
            return Err(Error::invalid(
                "batches",
                "all batches must share one time slot",
            ));
        }
        trail = build_slot_trail(trail, std::slice::from_ref(batch), cfg)?;
        for (s, v) in sum.cells_mut().iter_mut().zip(trail.cells()) {
            *s += v;
        }
    }
    Ok(if batches.is_empty() {
        sum
    } else {
        sum.scaled(1.0 / batches.len() as f64)
    })
}

/// One mean trail per slot, built in parallel. `batches` may hold any mix of
/// slots; each slot keeps the order of its batches.
pub fn build_slot_trails(
    grid: &Trail2D,
    batches: &[SpatialEventBatch],
    cfg: &SlotTrailConfig,
) -> Result<[Trail2D; 4]> {
    let trails: Vec<Trail2D> = TimeSlot::ALL
        .par_iter()
        .map(|&slot| {
            let own: Vec<SpatialEventBatch> =
                batches.iter().filter(|b| b.slot == slot).cloned().collect();
            mean_slot_trail(grid, &own, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(trails.try_into().expect("four slots"))
}

/// Closed polygon in projected meters. Rings do not repeat their first
/// vertex; the outer ring is counter-clockwise and holes are clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub outer: Vec<(f64, f64)>,
    pub holes: Vec<Vec<(f64, f64)>>,
}

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = ring[i];
            let (x1, y1) = ring[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

fn locate(ring: &[(f64, f64)], x: f64, y: f64) -> Location {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (x0, y0) = ring[i];
        let (x1, y1) = ring[(i + 1) % n];
        let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
        let within = x >= x0.min(x1) && x <= x0.max(x1) && y >= y0.min(y1) && y <= y0.max(y1);
        if cross.abs() <= 1e-9 * (1.0 + (x1 - x0).abs() + (y1 - y0).abs()) && within {
            return Location::Boundary;
        }
        if (y0 > y) != (y1 > y) {
            let xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
            if x < xi {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

impl Polygon {
    pub fn area(&self) -> f64 {
        signed_area(&self.outer).abs()
            - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    /// Ray-casting test; points on any edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match locate(&self.outer, x, y) {
            Location::Outside => false,
            Location::Boundary => true,
            Location::Inside => self
                .holes
                .iter()
                .all(|h| locate(h, x, y) != Location::Inside),
        }
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.outer.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hotspot {
    pub id: String,
    pub polygon: Polygon,
    pub slot_coverage: Vec<TimeSlot>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HotspotConfig {
    /// Cells below this fraction of their trail's maximum are not relevant.
    pub relevance_fraction: f64,
    pub min_area_m2: f64,
}

impl Default for HotspotConfig {
    fn default() -> Self {
        Self {
            relevance_fraction: DEFAULT_RELEVANCE_FRACTION,
            min_area_m2: DEFAULT_MIN_AREA_M2,
        }
    }
}

/// Cells at or above `fraction` of the trail's maximum. An empty trail has
/// no relevant cells.
pub fn relevance_mask(trail: &Trail2D, fraction: f64) -> Vec<bool> {
    let max = trail.max_intensity();
    if max <= 0.0 {
        return vec![false; trail.cells().len()];
    }
    let threshold = fraction * max;
    trail
        .cells()
        .iter()
        .map(|&c| c > 0.0 && c >= threshold)
        .collect()
}

/// Cells relevant in every slot trail, as a 0/1 grid.
pub fn overlap_mask(trails: &[Trail2D; 4], fraction: f64) -> Result<Trail2D> {
    if trails.iter().any(|t| !t.same_grid(&trails[0])) {
        return Err(Error::AxisMismatch);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("relevance_fraction", "must lie in (0, 1]"));
    }
    let masks: Vec<Vec<bool>> = trails.iter().map(|t| relevance_mask(t, fraction)).collect();
    let mut out = trails[0].zeroed();
    for (i, c) in out.cells_mut().iter_mut().enumerate() {
        if masks.iter().all(|m| m[i]) {
            *c = 1.0;
        }
    }
    Ok(out)
}

/// 8-connected components of `mask` (row-major, `cols` wide), each as sorted
/// cell indices, ordered by their first cell.
pub fn components(mask: &[bool], rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut cells = vec![start];
        let mut stack = vec![start];
        label[start] = id;
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / cols) as i64, (i % cols) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if mask[j] && label[j] == usize::MAX {
                        label[j] = id;
                        cells.push(j);
                        stack.push(j);
                    }
                }
            }
        }
        cells.sort_unstable();
        out.push(cells);
    }
    out
}

/// Contour rings of the cells in `mask` by marching squares over the cell
/// centers. Vertices are the midpoints between neighbouring centers, in
/// doubled lattice units where center `(r, c)` sits at `(2c, 2r)`. Diagonal
/// neighbours stay joined, matching 8-connectivity. Foreground is on the left
/// of every ring.
fn contour_rings(mask: &[bool], rows: usize, cols: usize) -> Vec<Vec<(i64, i64)>> {
    let fg = |r: i64, c: i64| {
        r >= 0
            && c >= 0
            && r < rows as i64
            && c < cols as i64
            && mask[r as usize * cols + c as usize]
    };
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for r in -1..rows as i64 {
        for c in -1..cols as i64 {
            // Corners counter-clockwise from the south-west, each followed by
            // the midpoint of the edge to the next corner.
            let corners = [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)];
            let inside = corners.map(|(a, b)| fg(a, b));
            if inside.iter().all(|&v| v) || inside.iter().all(|&v| !v) {
                continue;
            }
            let mid = |k: usize| {
                let (a0, b0) = corners[k];
                let (a1, b1) = corners[(k + 1) % 4];
                (b0 + b1, a0 + a1)
            };
            // Crossings in counter-clockwise order; `true` when entering
            // the foreground.
            let crossings: Vec<(usize, bool)> = (0..4)
                .filter(|&k| inside[k] != inside[(k + 1) % 4])
                .map(|k| (k, inside[(k + 1) % 4]))
                .collect();
            for (i, &(k, entering)) in crossings.iter().enumerate() {
                if entering {
                    continue;
                }
                let (k_in, _) = (1..crossings.len())
                    .map(|s| crossings[(i + s) % crossings.len()])
                    .find(|&(_, e)| e)
                    .expect("every leaving crossing has an entering one");
                next.insert(mid(k), mid(k_in));
            }
        }
    }
    let mut starts: Vec<(i64, i64)> = next.keys().copied().collect();
    starts.sort_unstable_by_key(|&(x, y)| (y, x));
    let mut rings = Vec::new();
    for s in starts {
        if !next.contains_key(&s) {
            continue;
        }
        let mut ring = vec![s];
        let mut p = next.remove(&s).expect("present");
        while p != s {
            ring.push(p);
            p = next.remove(&p).expect("contours close");
        }
        rings.push(simplify(ring));
    }
    rings
}

/// Drops vertices that lie on the straight line through their neighbours.
fn simplify(ring: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    let n = ring.len();
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| ring[i])
        .collect()
}

fn integer_area(ring: &[(i64, i64)]) -> i64 {
    let n = ring.len();
    (0..n)
        .map(|i| ring[i].0 * ring[(i + 1) % n].1 - ring[(i + 1) % n].0 * ring[i].1)
        .sum()
}

/// Polygon outlining one component of `grid`'s cells.
pub fn trace_component(grid: &Trail2D, cells: &[usize]) -> Result<Polygon> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut mask = vec![false; rows * cols];
    for &i in cells {
        mask[i] = true;
    }
    let rings = contour_rings(&mask, rows, cols);
    let (ox, oy) = grid.origin();
    let cs = grid.cell_size();
    let to_meters = |ring: &[(i64, i64)]| -> Vec<(f64, f64)> {
        ring.iter()
            .map(|&(x2, y2)| {
                (
                    ox + (x2 as f64 / 2.0 + 0.5) * cs,
                    oy + (y2 as f64 / 2.0 + 0.5) * cs,
                )
            })
            .collect()
    };
    let (mut outer, mut holes) = (Vec::new(), Vec::new());
    for ring in rings {
        if integer_area(&ring) > 0 {
            outer.push(ring);
        } else {
            holes.push(to_meters(&ring));
        }
    }
    if outer.len() != 1 {
        return Err(Error::malformed(
            "component",
            format!("{} outer contours", outer.len()),
        ));
    }
    Ok(Polygon {
        outer: to_meters(&outer[0]),
        holes,
    })
}

/// Spreadsheet-style labels: A..Z, AA, AB, ...
pub fn hotspot_label(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Hotspots from the four slot trails. Components smaller than the minimum
/// area are dropped; the rest are labeled from the north-west.
pub fn extract_hotspots(slot_trails: &[Trail2D; 4], cfg: &HotspotConfig) -> Result<Vec<Hotspot>> {
    let mask_grid = overlap_mask(slot_trails, cfg.relevance_fraction)?;
    let (rows, cols) = (mask_grid.rows(), mask_grid.cols());
    let mask: Vec<bool> = mask_grid.cells().iter().map(|&c| c > 0.0).collect();
    let cell_area = mask_grid.cell_size() * mask_grid.cell_size();
    let mut kept: Vec<Vec<usize>> = components(&mask, rows, cols)
        .into_iter()
        .filter(|c| c.len() as f64 * cell_area >= cfg.min_area_m2)
        .collect();
    // North-west first: highest row, then lowest column, of each component.
    kept.sort_by_key(|c| {
        let top = c.iter().map(|&i| i / cols).max().unwrap_or(0);
        let left = c
            .iter()
            .filter(|&&i| i / cols == top)
            .map(|&i| i % cols)
            .min()
            .unwrap_or(0);
        (std::cmp::Reverse(top), left)
    });
    kept.iter()
        .enumerate()
        .map(|(i, cells)| {
            Ok(Hotspot {
                id: hotspot_label(i),
                polygon: trace_component(&mask_grid, cells)?,
                slot_coverage: TimeSlot::ALL.to_vec(),
            })
        })
        .collect()
}

fn ring_json(ring: &[(f64, f64)]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|&(x, y)| json!([x, y])).collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first);
    }
    Value::Array(pts)
}

/// GeoJSON FeatureCollection with coordinates in projected meters.
pub fn hotspots_geojson(hotspots: &[Hotspot]) -> String {
    let features: Vec<Value> = hotspots
        .iter()
        .map(|h| {
            let mut rings = vec![ring_json(&h.polygon.outer)];
            rings.extend(h.polygon.holes.iter().map(|r| ring_json(r)));
            json!({
                "type": "Feature",
                "properties": {
                    "id": h.id,
                    "slot_coverage": h.slot_coverage.iter().map(|s| s.name()).collect::<Vec<_>>(),
                    "area_m2": h.polygon.area(),
                },
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
}

fn parse_ring(v: &Value) -> Result<Vec<(f64, f64)>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::malformed("geojson", "ring is not an array"))?;
    let mut ring: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(Error::malformed("geojson", "non-numeric coordinate")),
            },
            _ => Err(Error::malformed("geojson", "coordinate is not a pair")),
        })
        .collect::<Result<_>>()?;
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::malformed(
            "geojson",
            "ring with fewer than 3 vertices",
        ));
    }
    Ok(ring)
}

pub fn parse_hotspots_geojson(text: &str) -> Result<Vec<Hotspot>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::malformed("geojson", e.to_string()))?;
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::malformed("geojson", "missing features array"))?;
    features
        .iter()
        .map(|f| {
            let id = f["properties"]["id"]
                .as_str()
                .ok_or_else(|| Error::malformed("geojson", "feature without id"))?
                .to_string();
            let slot_coverage = match f["properties"]["slot_coverage"].as_array() {
                Some(a) => a
                    .iter()
                    .map(|s| s.as_str().unwrap_or_default().parse())
                    .collect::<Result<Vec<TimeSlot>>>()?,
                None => TimeSlot::ALL.to_vec(),
            };
            let rings = f["geometry"]["coordinates"]
                .as_array()
                .ok_or_else(|| Error::malformed("geojson", "geometry without coordinates"))?;
            let mut rings = rings.iter().map(parse_ring);
            let outer = rings
                .next()
                .ok_or_else(|| Error::malformed("geojson", "polygon without rings"))??;
            Ok(Hotspot {
                id,
                polygon: Polygon {
                    outer,
                    holes: rings.collect::<Result<_>>()?,
                },
                slot_coverage,
            })
        })
        .collect()
}
