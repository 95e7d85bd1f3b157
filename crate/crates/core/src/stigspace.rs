//! Mark and trail algebra: deposits, evaporation and trail similarity.
//!
//! Trails evolve as `T_i = max(T_{i-1} - delta, 0) + Mark_i`. Intensities never
//! go negative, which keeps the Jaccard coefficient well defined.

use crate::error::{Error, Result};

pub const DEFAULT_TRAIL_CELLS: usize = 100;
pub const DEFAULT_PLATEAU_FRACTION: f64 = 0.5;
pub const DEFAULT_GRID_CELL_METERS: f64 = 50.0;

/// Operations shared by one- and two-dimensional trails.
pub trait Trail {
    fn cells(&self) -> &[f64];
    fn cells_mut(&mut self) -> &mut [f64];

    /// Lowers every cell by `delta`, clamping at zero.
    fn evaporate(&mut self, delta: f64) -> Result<()> {
        check_delta(delta)?;
        if delta > 0.0 {
            evaporate_cells(self.cells_mut(), delta);
        }
        Ok(())
    }

    fn total_mass(&self) -> f64 {
        self.cells().iter().sum()
    }

    fn max_intensity(&self) -> f64 {
        self.cells().iter().copied().fold(0.0, f64::max)
    }

    fn is_empty(&self) -> bool {
        self.cells().iter().all(|&c| c == 0.0)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "delta",
            "evaporation must be finite and >= 0",
        ))
    }
}

/// Residues below this fraction of `delta` are rounding noise from repeated
/// subtraction and are cleared.
const EVAPORATION_RESIDUE: f64 = 1e-9;

#[inline]
pub(crate) fn evaporate_cells(cells: &mut [f64], delta: f64) {
    let floor = delta * EVAPORATION_RESIDUE;
    for c in cells {
        let v = *c - delta;
        *c = if v > floor { v } else { 0.0 };
    }
}

/// Min-sum over max-sum of two equally sized cell vectors. Two empty trails
/// are identical, so they score 1.
#[inline]
pub fn jaccard_cells(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Cells are never NaN, so plain comparisons stand in for f64::min/max;
    // with four independent accumulators the loop vectorizes.
    let mut inter = [0.0; 4];
    let mut union = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            let (lo, hi) = if x[k] < y[k] {
                (x[k], y[k])
            } else {
                (y[k], x[k])
            };
            inter[k] += lo;
            union[k] += hi;
        }
    }
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        inter[0] += lo;
        union[0] += hi;
    }
    let inter = (inter[0] + inter[1]) + (inter[2] + inter[3]);
    let union = (union[0] + union[1]) + (union[2] + union[3]);
    if union == 0.0 {
        1.0
    } else {
        inter / union
    }
}

/// A trapezoidal mark on the value axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapezoidMark {
    pub center: f64,
    pub intensity: f64,
    pub width: f64,
    pub plateau_fraction: f64,
}

impl TrapezoidMark {
    pub fn new(center: f64, intensity: f64, width: f64, plateau_fraction: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("center", "must be finite"));
        }
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::invalid("intensity", "must be finite and >= 0"));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid("width", "must be finite and > 0"));
        }
        if !(plateau_fraction > 0.0 && plateau_fraction <= 1.0) {
            return Err(Error::invalid("plateau_fraction", "must lie in (0, 1]"));
        }
        Ok(Self {
            center,
            intensity,
            width,
            plateau_fraction,
        })
    }

    /// Profile height at `x`: full intensity on the plateau, linear falloff to
    /// zero at half the width.
    #[inline]
    pub fn profile(&self, x: f64) -> f64 {
        let half = 0.5 * self.width;
        let plateau = self.plateau_fraction * half;
        let d = (x - self.center).abs();
        if d <= plateau {
            self.intensity
        } else if d >= half {
            0.0
        } else {
            self.intensity * (half - d) / (half - plateau)
        }
    }

    /// Analytic area under the profile.
    pub fn area(&self) -> f64 {
        self.intensity * self.width * (1.0 + self.plateau_fraction) / 2.0
    }
}

/// Discretized trail over a bounded value axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Trail1D {
    cells: Vec<f64>,
    axis_min: f64,
    axis_max: f64,
}

impl Trail1D {
    pub fn new(axis_min: f64, axis_max: f64, cell_count: usize) -> Result<Self> {
        if !(axis_min.is_finite() && axis_max.is_finite() && axis_min < axis_max) {
            return Err(Error::invalid("axis", "need finite axis_min < axis_max"));
        }
        if cell_count < 2 {
            return Err(Error::invalid("cell_count", "need at least 2 cells"));
        }
        Ok(Self {
            cells: vec![0.0; cell_count],
            axis_min,
            axis_max,
        })
    }

    /// Unit axis [0, 1] split into `cell_count` cells.
    pub fn unit(cell_count: usize) -> Result<Self> {
        Self::new(0.0, 1.0, cell_count)
    }

    pub fn from_cells(axis_min: f64, axis_max: f64, cells: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(axis_min, axis_max, cells.len())?;
        if let Some(index) = cells.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::NonFinite { index });
        }
        t.cells = cells;
        Ok(t)
    }

    pub fn axis(&self) -> (f64, f64) {
        (self.axis_min, self.axis_max)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_width(&self) -> f64 {
        (self.axis_max - self.axis_min) / self.cells.len() as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.axis_min + (i as f64 + 0.5) * self.cell_width()
    }

    /// Index of the cell containing `x`, if `x` is on the axis.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.axis_min || x > self.axis_max {
            return None;
        }
        let i = ((x - self.axis_min) / self.cell_width()).floor() as usize;
        Some(i.min(self.cells.len() - 1))
    }

    /// Adds the mark profile, evaluated at cell centers.
    pub fn deposit(&mut self, mark: &TrapezoidMark) -> Result<()> {
        if !(mark.center >= self.axis_min && mark.center <= self.axis_max) {
            return Err(Error::MarkOutsideAxis {
                position: mark.center,
                min: self.axis_min,
                max: self.axis_max,
            });
        }
        let w = self.cell_width();
        let half = 0.5 * mark.width;
        let n = self.cells.len();
        let lo = (((mark.center - half - self.axis_min) / w).floor().max(0.0)) as usize;
        let hi = ((((mark.center + half - self.axis_min) / w).ceil()).max(0.0) as usize).min(n);
        for i in lo..hi {
            let x = self.axis_min + (i as f64 + 0.5) * w;
            self.cells[i] += mark.profile(x);
        }
        Ok(())
    }

    pub fn jaccard(&self, other: &Trail1D) -> Result<f64> {
        if self.cells.len() != other.cells.len()
            || self.axis_min != other.axis_min
            || self.axis_max != other.axis_max
        {
            return Err(Error::AxisMismatch);
        }
        Ok(jaccard_cells(&self.cells, &other.cells))
    }
}

impl Trail for Trail1D {
    fn cells(&self) -> &[f64] {
        &self.cells
    }

    fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }
}

/// Value-returning form of [`Trail1D::deposit`].
pub fn deposit_1d(mut trail: Trail1D, mark: &TrapezoidMark) -> Result<Trail1D> {
    trail.deposit(mark)?;
    Ok(trail)
}

/// Value-returning form of [`Trail::evaporate`].
pub fn evaporate<T: Trail>(mut trail: T, delta: f64) -> Result<T> {
    trail.evaporate(delta)?;
    Ok(trail)
}

pub fn jaccard(a: &Trail1D, b: &Trail1D) -> Result<f64> {
    a.jaccard(b)
}

/// Truncated-cone mark in projected meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeMark {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
    pub base_radius: f64,
    pub top_radius: f64,
}

impl ConeMark {
    pub fn new(x: f64, y: f64, intensity: f64, base_radius: f64, top_radius: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::invalid("center", "must be finite"));
        }
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::invalid("intensity", "must be finite and >= 0"));
        }
        if !(top_radius > 0.0 && top_radius < base_radius && base_radius.is_finite()) {
            return Err(Error::invalid("radii", "need 0 < top_radius < base_radius"));
        }
        Ok(Self {
            x,
            y,
            intensity,
            base_radius,
            top_radius,
        })
    }

    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        if r <= self.top_radius {
            self.intensity
        } else if r >= self.base_radius {
            0.0
        } else {
            self.intensity * (self.base_radius - r) / (self.base_radius - self.top_radius)
        }
    }
}

/// Cone geometry shared by all marks of a spatial trail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeGeometry {
    pub base_radius: f64,
    pub top_radius: f64,
}

impl Default for ConeGeometry {
    fn default() -> Self {
        Self {
            base_radius: 150.0,
            top_radius: 50.0,
        }
    }
}

impl ConeGeometry {
    pub fn mark(&self, x: f64, y: f64, intensity: f64) -> Result<ConeMark> {
        ConeMark::new(x, y, intensity, self.base_radius, self.top_radius)
    }
}

/// Axis-aligned box in projected meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !(finite && min_x < max_x && min_y < max_y) {
            return Err(Error::invalid(
                "bounding box",
                "need finite min < max on both axes",
            ));
        }
        Ok(Self {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Spatial trail on a regular grid. Row 0 is the southernmost row.
#[derive(Clone, Debug, PartialEq)]
pub struct Trail2D {
    cells: Vec<f64>,
    rows: usize,
    cols: usize,
    origin_x: f64,
    origin_y: f64,
    cell_size: f64,
}

impl Trail2D {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cols: usize,
        rows: usize,
        cell_size: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(
                "grid",
                "need at least one row and one column",
            ));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid("cell_size", "must be finite and > 0"));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::invalid("origin", "must be finite"));
        }
        Ok(Self {
            cells: vec![0.0; rows * cols],
            rows,
            cols,
            origin_x,
            origin_y,
            cell_size,
        })
    }

    /// Grid anchored at the box's south-west corner. The box dimensions must
    /// be whole multiples of the cell size so that the grid covers it exactly.
    pub fn covering(bbox: &BoundingBox, cell_size: f64) -> Result<Self> {
        let cols_f = bbox.width() / cell_size;
        let rows_f = bbox.height() / cell_size;
        let cols = cols_f.round();
        let rows = rows_f.round();
        if (cols - cols_f).abs() > 1e-6 || (rows - rows_f).abs() > 1e-6 {
            return Err(Error::invalid(
                "bounding box",
                format!("extent is not a whole number of {cell_size} m cells"),
            ));
        }
        Self::new(
            bbox.min_x,
            bbox.min_y,
            cols as usize,
            rows as usize,
            cell_size,
        )
    }

    /// Smallest grid anchored at the box's south-west corner that covers it.
    pub fn enclosing(bbox: &BoundingBox, cell_size: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid("cell_size", "must be finite and > 0"));
        }
        let cols = (bbox.width() / cell_size - 1e-9).ceil().max(1.0) as usize;
        let rows = (bbox.height() / cell_size - 1e-9).ceil().max(1.0) as usize;
        Self::new(bbox.min_x, bbox.min_y, cols, rows, cell_size)
    }

    /// Row and column of the cell holding `(x, y)`; points on the north or
    /// east edge belong to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.extent().contains(x, y) {
            return None;
        }
        let col = (((x - self.origin_x) / self.cell_size) as usize).min(self.cols - 1);
        let row = (((y - self.origin_y) / self.cell_size) as usize).min(self.rows - 1);
        Some((row, col))
    }

    /// An all-zero trail on the same grid.
    pub fn zeroed(&self) -> Trail2D {
        Trail2D {
            cells: vec![0.0; self.cells.len()],
            ..self.clone()
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn extent(&self) -> BoundingBox {
        BoundingBox {
            min_x: self.origin_x,
            min_y: self.origin_y,
            max_x: self.origin_x + self.cols as f64 * self.cell_size,
            max_y: self.origin_y + self.rows as f64 * self.cell_size,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn same_grid(&self, other: &Trail2D) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.origin_x == other.origin_x
            && self.origin_y == other.origin_y
            && self.cell_size == other.cell_size
    }

    /// Adds the cone profile to every cell whose center lies within the base
    /// radius.
    pub fn deposit(&mut self, mark: &ConeMark) -> Result<()> {
        if !self.extent().contains(mark.x, mark.y) {
            return Err(Error::MarkOutsideGrid {
                x: mark.x,
                y: mark.y,
            });
        }
        let cs = self.cell_size;
        let rb = mark.base_radius;
        let col_lo = (((mark.x - rb - self.origin_x) / cs).floor().max(0.0)) as usize;
        let col_hi =
            ((((mark.x + rb - self.origin_x) / cs).ceil()).max(0.0) as usize).min(self.cols);
        let row_lo = (((mark.y - rb - self.origin_y) / cs).floor().max(0.0)) as usize;
        let row_hi =
            ((((mark.y + rb - self.origin_y) / cs).ceil()).max(0.0) as usize).min(self.rows);
        for row in row_lo..row_hi {
            let cy = self.origin_y + (row as f64 + 0.5) * cs;
            for col in col_lo..col_hi {
                let cx = self.origin_x + (col as f64 + 0.5) * cs;
                let r = (cx - mark.x).hypot(cy - mark.y);
                if r < rb {
                    self.cells[row * self.cols + col] += mark.profile(r);
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with every cell multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Trail2D {
        let mut t = self.clone();
        t.cells.iter_mut().for_each(|c| *c *= factor);
        t
    }

    /// ESRI ASCII grid text, northernmost row first.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value -9999\n",
            self.cols, self.rows, self.origin_x, self.origin_y, self.cell_size
        );
        for row in (0..self.rows).rev() {
            let line: Vec<String> = self.cells[row * self.cols..(row + 1) * self.cols]
                .iter()
                .map(|v| v.to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_ascii_grid(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::malformed("ascii grid", format!("missing {key}")))?;
            let (k, v) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::malformed("ascii grid", format!("bad header line `{line}`"))
            })?;
            if !k.eq_ignore_ascii_case(key) {
                return Err(Error::malformed(
                    "ascii grid",
                    format!("expected {key}, found {k}"),
                ));
            }
            Ok(v.trim().to_string())
        };
        let num = |s: String, key: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::malformed("ascii grid", format!("{key}: `{s}`")))
        };
        let cols = num(header("ncols")?, "ncols")? as usize;
        let rows = num(header("nrows")?, "nrows")? as usize;
        let x = num(header("xllcorner")?, "xllcorner")?;
        let y = num(header("yllcorner")?, "yllcorner")?;
        let cs = num(header("cellsize")?, "cellsize")?;
        let nodata = num(header("NODATA_value")?, "NODATA_value")?;
        let mut grid = Trail2D::new(x, y, cols, rows, cs)?;
        let mut row_count = 0;
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            if i >= rows {
                return Err(Error::malformed("ascii grid", "too many rows"));
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::malformed("ascii grid", format!("value `{v}`")))
                })
                .collect::<Result<_>>()?;
            if values.len() != cols {
                return Err(Error::malformed(
                    "ascii grid",
                    format!("row {i} has {} values", values.len()),
                ));
            }
            let row = rows - 1 - i;
            for (col, v) in values.into_iter().enumerate() {
                grid.set(row, col, if v == nodata { 0.0 } else { v });
            }
            row_count += 1;
        }
        if row_count != rows {
            return Err(Error::malformed("ascii grid", "too few rows"));
        }
        Ok(grid)
    }
}

impl Trail for Trail2D {
    fn cells(&self) -> &[f64] {
        &self.cells
    }

    fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }
}

pub fn deposit_2d(mut trail: Trail2D, mark: &ConeMark) -> Result<Trail2D> {
    trail.deposit(mark)?;
    Ok(trail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mark(center: f64, h: f64, width: f64) -> TrapezoidMark {
        TrapezoidMark::new(center, h, width, DEFAULT_PLATEAU_FRACTION).unwrap()
    }

    #[test]
    fn peak_cell_holds_intensity() {
        let mut t = Trail1D::unit(100).unwrap();
        let c = t.cell_center(40);
        t.deposit(&mark(c, 0.7, 0.1)).unwrap();
        assert_eq!(t.cells()[40], 0.7);
        t.deposit(&mark(c, 0.7, 0.1)).unwrap();
        assert_eq!(t.cells()[40], 1.4);
    }

    #[test]
    fn deposited_mass_matches_trapezoid_area() {
        for &(center, h, width) in &[(0.5, 1.0, 0.2), (0.37, 2.5, 0.05), (0.61, 0.3, 0.33)] {
            let mut t = Trail1D::unit(100).unwrap();
            let m = mark(center, h, width);
            t.deposit(&m).unwrap();
            let expected = m.area() / t.cell_width();
            assert!(
                (t.total_mass() - expected).abs() <= h,
                "mass {} vs {}",
                t.total_mass(),
                expected
            );
        }
    }

    #[test]
    fn deposit_rejects_off_axis_marks() {
        let mut t = Trail1D::unit(10).unwrap();
        assert!(matches!(
            t.deposit(&mark(1.2, 1.0, 0.1)),
            Err(Error::MarkOutsideAxis { .. })
        ));
        assert!(t.is_empty());
    }

    #[test]
    fn evaporation_examples() {
        let t = Trail1D::from_cells(0.0, 1.0, vec![1.0, 0.2, 0.0]).unwrap();
        let e = evaporate(t.clone(), 0.3).unwrap();
        assert!((e.cells()[0] - 0.7).abs() < 1e-15);
        assert_eq!(e.cells()[1], 0.0);
        assert_eq!(evaporate(t.clone(), 0.0).unwrap(), t);
        assert!(evaporate(t, -0.1).is_err());
    }

    #[test]
    fn jaccard_examples() {
        let a = Trail1D::from_cells(0.0, 1.0, vec![1.0, 1.0, 0.0]).unwrap();
        let b = Trail1D::from_cells(0.0, 1.0, vec![1.0, 0.0, 1.0]).unwrap();
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        let c = Trail1D::from_cells(0.0, 1.0, vec![0.0, 0.0, 2.0]).unwrap();
        assert_eq!(jaccard(&a, &c).unwrap(), 0.0);
        let empty = Trail1D::unit(3).unwrap();
        assert_eq!(jaccard(&empty, &empty).unwrap(), 1.0);
        let other_axis = Trail1D::new(0.0, 2.0, 3).unwrap();
        assert!(matches!(jaccard(&a, &other_axis), Err(Error::AxisMismatch)));
    }

    #[test]
    fn isolated_mark_vanishes() {
        let mut t = Trail1D::unit(100).unwrap();
        t.deposit(&mark(0.5, 1.0, 0.2)).unwrap();
        let delta = 0.15;
        let steps = (t.max_intensity() / delta).ceil() as usize;
        for _ in 0..steps {
            t.evaporate(delta).unwrap();
        }
        assert!(t.is_empty());
    }

    #[test]
    fn repeated_marks_reach_a_fixed_peak_when_evaporation_keeps_up() {
        // With h <= delta the peak settles at h immediately.
        let (h, delta): (f64, f64) = (0.4, 0.5);
        let mut t = Trail1D::unit(100).unwrap();
        let c = t.cell_center(50);
        let mut peaks = Vec::new();
        for _ in 0..((10.0 * h / delta).ceil() as usize + 2) {
            t.evaporate(delta).unwrap();
            t.deposit(&mark(c, h, 0.1)).unwrap();
            peaks.push(t.cells()[50]);
        }
        let last = *peaks.last().unwrap();
        assert!((last - h).abs() < 1e-9);
        assert!(peaks.iter().all(|p| (p - last).abs() < 1e-9));
    }

    #[test]
    fn repeated_marks_grow_linearly_when_they_outpace_evaporation() {
        let (h, delta) = (1.0, 0.25);
        let mut t = Trail1D::unit(100).unwrap();
        let c = t.cell_center(50);
        let mut prev = 0.0;
        for step in 0..40 {
            t.evaporate(delta).unwrap();
            t.deposit(&mark(c, h, 0.1)).unwrap();
            let peak = t.cells()[50];
            if step > 0 {
                assert!((peak - prev - (h - delta)).abs() < 1e-9);
            }
            prev = peak;
        }
    }

    #[test]
    fn cone_profile_at_center_and_rim() {
        let bbox = BoundingBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap();
        let mut g = Trail2D::covering(&bbox, 10.0).unwrap();
        let (cx, cy) = g.cell_center(50, 50);
        g.deposit(&ConeMark::new(cx, cy, 2.0, 100.0, 30.0).unwrap())
            .unwrap();
        assert_eq!(g.get(50, 50), 2.0);
        // Cell exactly one base radius away along a row.
        assert_eq!(g.get(50, 60), 0.0);
        assert!(g.get(50, 59) > 0.0);
    }

    #[test]
    fn cone_volume_matches_quadrature() {
        let (rb, rt, h) = (150.0, 50.0, 1.0);
        let bbox = BoundingBox::new(0.0, 0.0, 1050.0, 1050.0).unwrap();
        for &cs in &[15.0, 10.0, 5.0] {
            let mut g = Trail2D::covering(&bbox, cs).unwrap();
            let m = ConeMark::new(503.0, 497.0, h, rb, rt).unwrap();
            g.deposit(&m).unwrap();
            let grid_volume = g.total_mass() * cs * cs;
            // Midpoint-rule quadrature of the radial profile, independent of the grid.
            let n = 200_000;
            let dr = rb / n as f64;
            let quad: f64 = (0..n)
                .map(|i| {
                    let r = (i as f64 + 0.5) * dr;
                    let p = if r <= rt { h } else { h * (rb - r) / (rb - rt) };
                    p * 2.0 * std::f64::consts::PI * r * dr
                })
                .sum();
            let rel = (grid_volume - quad).abs() / quad;
            assert!(rel < 0.02, "cell {cs}: rel err {rel}");
        }
    }

    #[test]
    fn cone_rejects_outside_marks_and_bad_radii() {
        let bbox = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let mut g = Trail2D::covering(&bbox, 10.0).unwrap();
        let m = ConeMark::new(150.0, 50.0, 1.0, 20.0, 10.0).unwrap();
        assert!(matches!(g.deposit(&m), Err(Error::MarkOutsideGrid { .. })));
        assert!(ConeMark::new(0.0, 0.0, 1.0, 10.0, 10.0).is_err());
        assert!(
            Trail2D::covering(&BoundingBox::new(0.0, 0.0, 105.0, 100.0).unwrap(), 10.0).is_err()
        );
    }

    #[test]
    fn ascii_grid_round_trip() {
        let mut g = Trail2D::new(100.0, 200.0, 3, 2, 50.0).unwrap();
        g.set(0, 0, 1.5);
        g.set(1, 2, 0.25);
        let text = g.to_ascii_grid();
        assert!(text.starts_with("ncols 3\nnrows 2\nxllcorner 100\nyllcorner 200\ncellsize 50\n"));
        // Northern row comes first.
        assert!(text.ends_with("0 0 0.25\n1.5 0 0\n"));
        assert_eq!(Trail2D::from_ascii_grid(&text).unwrap(), g);
        assert!(Trail2D::from_ascii_grid("ncols 3\n").is_err());
    }

    fn arb_marks() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        proptest::collection::vec((0.0f64..=1.0, 0.0f64..3.0, 0.01f64..0.5), 0..12)
    }

    proptest! {
        #[test]
        fn deposits_commute(marks in arb_marks(), seed in any::<u64>()) {
            let mut forward = Trail1D::unit(64).unwrap();
            for &(c, h, w) in &marks {
                forward.deposit(&mark(c, h, w)).unwrap();
            }
            let mut shuffled = marks.clone();
            // Deterministic rotation as a permutation.
            if !shuffled.is_empty() {
                let k = (seed as usize) % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
            }
            let mut backward = Trail1D::unit(64).unwrap();
            for &(c, h, w) in &shuffled {
                backward.deposit(&mark(c, h, w)).unwrap();
            }
            for (a, b) in forward.cells().iter().zip(backward.cells()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn evaporation_preserves_deposit_ordering(
            marks in arb_marks(),
            extra in (0.0f64..=1.0, 0.0f64..3.0, 0.01f64..0.5),
            delta in 0.0f64..2.0,
        ) {
            let mut base = Trail1D::unit(64).unwrap();
            for &(c, h, w) in &marks {
                base.deposit(&mark(c, h, w)).unwrap();
            }
            let mut more = base.clone();
            more.deposit(&mark(extra.0, extra.1, extra.2)).unwrap();
            let a = evaporate(more, delta).unwrap();
            let b = evaporate(base, delta).unwrap();
            for (x, y) in a.cells().iter().zip(b.cells()) {
                prop_assert!(x >= y);
                prop_assert!(*x >= 0.0);
            }
        }

        #[test]
        fn jaccard_is_bounded_symmetric_reflexive(a in arb_marks(), b in arb_marks()) {
            let build = |marks: &[(f64, f64, f64)]| {
                let mut t = Trail1D::unit(64).unwrap();
                for &(c, h, w) in marks {
                    t.deposit(&mark(c, h, w)).unwrap();
                }
                t
            };
            let (ta, tb) = (build(&a), build(&b));
            let s = jaccard(&ta, &tb).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, jaccard(&tb, &ta).unwrap());
            prop_assert_eq!(jaccard(&ta, &ta).unwrap(), 1.0);
        }

        #[test]
        fn evaporation_empties_trail_in_bounded_steps(
            cells in proptest::collection::vec(0.0f64..5.0, 2..40),
            delta in 0.01f64..1.0,
        ) {
            let mut t = Trail1D::from_cells(0.0, 1.0, cells).unwrap();
            let steps = (t.max_intensity() / delta).ceil() as usize;
            for _ in 0..steps {
                t.evaporate(delta).unwrap();
            }
            prop_assert!(t.is_empty());
        }
    }
}
