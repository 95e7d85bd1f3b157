//! Activity time series, behavioral archetypes, synthetic perturbation,
//! exploratory day features and affinity triples.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

/// Canonical archetype plateaus on the normalized activity axis.
pub const LOW_LEVEL: f64 = 0.1;
pub const MID_LEVEL: f64 = 0.5;
pub const HIGH_LEVEL: f64 = 0.9;

/// Label boundaries used by the exploratory day features.
pub const LOW_MEDIUM_BOUNDARY: f64 = 1.0 / 3.0;
pub const MEDIUM_HIGH_BOUNDARY: f64 = 2.0 / 3.0;

pub const DEFAULT_EDGE_FRACTION: f64 = 0.1;

/// Output of min-max normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax {
    pub samples: Vec<f64>,
    /// Set when the input had zero range; samples are then all zero.
    pub constant: bool,
}

/// Rescales `raw` linearly so that its minimum maps to 0 and its maximum to 1.
pub fn normalize_min_max(raw: &[f64]) -> Result<MinMax> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("series"));
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(MinMax {
            samples: vec![0.0; raw.len()],
            constant: true,
        });
    }
    Ok(MinMax {
        samples: raw.iter().map(|&v| (v - min) / range).collect(),
        constant: false,
    })
}

/// Normalized activity samples of one hotspot over one day.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityTimeSeries {
    samples: Vec<f64>,
    resolution_minutes: u32,
    day_id: NaiveDate,
    hotspot_id: String,
    constant: bool,
}

impl ActivityTimeSeries {
    pub fn new(
        samples: Vec<f64>,
        resolution_minutes: u32,
        day_id: NaiveDate,
        hotspot_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("series"));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if resolution_minutes == 0 {
            return Err(Error::invalid("resolution_minutes", "must be positive"));
        }
        let hotspot_id = hotspot_id.into();
        validate_identifier(&hotspot_id)?;
        Ok(Self {
            samples,
            resolution_minutes,
            day_id,
            hotspot_id,
            constant: false,
        })
    }

    /// Min-max normalizes `raw` and wraps it. Constant input yields zeros with
    /// [`is_constant`](Self::is_constant) set.
    pub fn from_raw(
        raw: &[f64],
        resolution_minutes: u32,
        day_id: NaiveDate,
        hotspot_id: impl Into<String>,
    ) -> Result<Self> {
        let MinMax { samples, constant } = normalize_min_max(raw)?;
        let mut series = Self::new(samples, resolution_minutes, day_id, hotspot_id)?;
        series.constant = constant;
        Ok(series)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolution_minutes(&self) -> u32 {
        self.resolution_minutes
    }

    pub fn day_id(&self) -> NaiveDate {
        self.day_id
    }

    pub fn hotspot_id(&self) -> &str {
        &self.hotspot_id
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// True when the series covers exactly one day at its resolution.
    pub fn is_full_day(&self) -> bool {
        MINUTES_PER_DAY.is_multiple_of(self.resolution_minutes)
            && self.samples.len() == (MINUTES_PER_DAY / self.resolution_minutes) as usize
    }

    pub fn with_meta(mut self, day_id: NaiveDate, hotspot_id: impl Into<String>) -> Result<Self> {
        let hotspot_id = hotspot_id.into();
        validate_identifier(&hotspot_id)?;
        self.day_id = day_id;
        self.hotspot_id = hotspot_id;
        Ok(self)
    }

    pub fn to_csv_string(&self) -> String {
        write_series_csv(
            self.day_id,
            &self.hotspot_id,
            self.resolution_minutes,
            &self.samples,
        )
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let parsed = parse_series_csv(text)?;
        let mut series = Self::new(
            parsed.values,
            parsed.resolution_minutes,
            parsed.day_id,
            parsed.hotspot_id,
        )?;
        series.constant = series.samples.iter().all(|&v| v == 0.0);
        Ok(series)
    }
}

/// Placeholder date for series that are not tied to a calendar day.
pub fn synthetic_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

/// Default resolution for a series of `len` samples covering a day.
pub fn resolution_for_length(len: usize) -> u32 {
    let len = len.max(1) as u32;
    (MINUTES_PER_DAY / len).max(1)
}

fn validate_identifier(id: &str) -> Result<()> {
    if id.contains([',', '\n', '\r']) {
        return Err(Error::invalid(
            "hotspot_id",
            "must not contain commas or line breaks",
        ));
    }
    Ok(())
}

/// Parsed form of the per-day series CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCsv {
    pub day_id: NaiveDate,
    pub hotspot_id: String,
    pub resolution_minutes: u32,
    pub values: Vec<f64>,
}

/// Writes the per-day series CSV: a `# day_id,hotspot_id,resolution_minutes`
/// comment line followed by `index,value` rows.
pub fn write_series_csv(
    day_id: NaiveDate,
    hotspot_id: &str,
    resolution_minutes: u32,
    values: &[f64],
) -> String {
    let mut out = format!("# {day_id},{hotspot_id},{resolution_minutes}\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

pub fn parse_series_csv(text: &str) -> Result<SeriesCsv> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::malformed("series csv", "missing `#` metadata line"))?;
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.len() != 3 {
        return Err(Error::malformed(
            "series csv",
            "metadata line must hold day_id,hotspot_id,resolution_minutes",
        ));
    }
    let day_id = NaiveDate::parse_from_str(fields[0].trim(), "%Y-%m-%d")
        .map_err(|e| Error::malformed("series csv", format!("day_id: {e}")))?;
    let resolution_minutes = fields[2]
        .trim()
        .parse()
        .map_err(|e| Error::malformed("series csv", format!("resolution_minutes: {e}")))?;
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (index, value) = line.split_once(',').ok_or_else(|| {
            Error::malformed("series csv", format!("row {row}: expected index,value"))
        })?;
        let index: usize = index
            .trim()
            .parse()
            .map_err(|e| Error::malformed("series csv", format!("row {row}: {e}")))?;
        if index != values.len() {
            return Err(Error::malformed(
                "series csv",
                format!("row {row}: index {index} out of sequence"),
            ));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::malformed("series csv", format!("row {row}: {e}")))?;
        values.push(value);
    }
    Ok(SeriesCsv {
        day_id,
        hotspot_id: fields[1].trim().to_string(),
        resolution_minutes,
        values,
    })
}

/// The seven behavioral classes recognized by the perceptron, in
/// enumeration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchetypeKind {
    Asleep,
    Awakening,
    Falling,
    Flow,
    Chill,
    Rise,
    RushHour,
}

impl ArchetypeKind {
    pub const ALL: [ArchetypeKind; 7] = [
        ArchetypeKind::Asleep,
        ArchetypeKind::Awakening,
        ArchetypeKind::Falling,
        ArchetypeKind::Flow,
        ArchetypeKind::Chill,
        ArchetypeKind::Rise,
        ArchetypeKind::RushHour,
    ];

    /// Position in the perceptron, 1..=7. Ranked by mean canonical level,
    /// rising shapes before falling ones on ties.
    pub fn enumeration(self) -> usize {
        self as usize + 1
    }

    pub fn from_enumeration(index: usize) -> Option<Self> {
        index.checked_sub(1).and_then(|i| Self::ALL.get(i)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchetypeKind::Asleep => "Asleep",
            ArchetypeKind::Awakening => "Awakening",
            ArchetypeKind::Falling => "Falling",
            ArchetypeKind::Flow => "Flow",
            ArchetypeKind::Chill => "Chill",
            ArchetypeKind::Rise => "Rise",
            ArchetypeKind::RushHour => "RushHour",
        }
    }

    /// Classes whose enumeration differs by one.
    pub fn neighbors(self) -> Vec<ArchetypeKind> {
        let e = self.enumeration();
        [e.wrapping_sub(1), e + 1]
            .into_iter()
            .filter_map(Self::from_enumeration)
            .collect()
    }

    /// Level at the start and at the end of the canonical shape.
    fn endpoints(self) -> (f64, f64) {
        match self {
            ArchetypeKind::Asleep => (LOW_LEVEL, LOW_LEVEL),
            ArchetypeKind::Awakening => (LOW_LEVEL, MID_LEVEL),
            ArchetypeKind::Falling => (MID_LEVEL, LOW_LEVEL),
            ArchetypeKind::Flow => (MID_LEVEL, MID_LEVEL),
            ArchetypeKind::Chill => (HIGH_LEVEL, MID_LEVEL),
            ArchetypeKind::Rise => (MID_LEVEL, HIGH_LEVEL),
            ArchetypeKind::RushHour => (HIGH_LEVEL, HIGH_LEVEL),
        }
    }
}

impl fmt::Display for ArchetypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchetypeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// A pure-form series embodying one behavioral class.
#[derive(Clone, Debug, PartialEq)]
pub struct Archetype {
    kind: ArchetypeKind,
    samples: Vec<f64>,
}

impl Archetype {
    pub fn kind(&self) -> ArchetypeKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn enumeration(&self) -> usize {
        self.kind.enumeration()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub const MIN_ARCHETYPE_LENGTH: usize = 16;

/// Builds the canonical shape: a flat first quarter at the start level, a
/// linear ramp across the middle half, and a flat last quarter at the end
/// level.
pub fn generate_archetype(kind: ArchetypeKind, length: usize) -> Result<Archetype> {
    if length < MIN_ARCHETYPE_LENGTH {
        return Err(Error::TooShort {
            len: length,
            min: MIN_ARCHETYPE_LENGTH,
        });
    }
    let (start, end) = kind.endpoints();
    let quarter = length / 4;
    let ramp_len = length - 2 * quarter;
    let samples = (0..length)
        .map(|i| {
            if i < quarter {
                start
            } else if i >= quarter + ramp_len {
                end
            } else {
                let t = (i - quarter) as f64 / (ramp_len - 1) as f64;
                start + (end - start) * t
            }
        })
        .collect();
    Ok(Archetype { kind, samples })
}

/// Circularly shifts the archetype by a random offset in
/// `[-max_shift, max_shift]` and adds uniform noise in
/// `[-noise_amplitude, noise_amplitude]`, clamped to [0, 1].
pub fn perturb(
    archetype: &Archetype,
    noise_amplitude: f64,
    max_shift: usize,
    seed: u64,
) -> Result<ActivityTimeSeries> {
    let samples = perturb_samples(archetype.samples(), noise_amplitude, max_shift, seed)?;
    ActivityTimeSeries::new(
        samples,
        resolution_for_length(archetype.len()),
        synthetic_day(),
        archetype.name(),
    )
}

/// Shift-and-noise perturbation of an arbitrary sample vector.
pub fn perturb_samples(
    samples: &[f64],
    noise_amplitude: f64,
    max_shift: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(noise_amplitude >= 0.0 && noise_amplitude.is_finite()) {
        return Err(Error::invalid("noise_amplitude", "must be finite and >= 0"));
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput("series"));
    }
    if max_shift > 0 && max_shift >= n / 4 {
        return Err(Error::invalid(
            "max_shift",
            format!("must be below a quarter of the length ({n})"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = if max_shift == 0 {
        0
    } else {
        rng.random_range(-(max_shift as i64)..=max_shift as i64)
    };
    let out = (0..n)
        .map(|i| {
            let src = (i as i64 - shift).rem_euclid(n as i64) as usize;
            let mut v = samples[src];
            if noise_amplitude > 0.0 {
                v += rng.random_range(-noise_amplitude..=noise_amplitude);
            }
            v.clamp(0.0, 1.0)
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LevelLabel {
    Low,
    Medium,
    High,
}

impl LevelLabel {
    pub fn of(value: f64) -> Self {
        if value < LOW_MEDIUM_BOUNDARY {
            LevelLabel::Low
        } else if value < MEDIUM_HIGH_BOUNDARY {
            LevelLabel::Medium
        } else {
            LevelLabel::High
        }
    }
}

/// The five exploratory features describing a day's activity pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DayFeatures {
    pub initial_level: LevelLabel,
    pub final_level: LevelLabel,
    /// First interior index where the interior mean is reached.
    pub t_mean: usize,
    /// Interior argmax, first on ties.
    pub t_max: usize,
    /// Interior samples at or above the high boundary.
    pub high_duration: usize,
}

pub fn extract_day_features(series: &[f64], edge_fraction: f64) -> Result<DayFeatures> {
    if !(edge_fraction > 0.0 && edge_fraction < 0.5) {
        return Err(Error::invalid("edge_fraction", "must lie in (0, 0.5)"));
    }
    let n = series.len();
    let edge = ((n as f64 * edge_fraction).floor() as usize).max(1);
    if n < 2 * edge + 3 {
        return Err(Error::TooShort {
            len: n,
            min: 2 * edge + 3,
        });
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let interior = &series[edge..n - edge];
    let mut t_max = 0;
    for (i, &v) in interior.iter().enumerate() {
        if v > interior[t_max] {
            t_max = i;
        }
    }
    // Summation rounding can lift the mean just above a flat maximum.
    let interior_mean = mean(interior).min(interior[t_max]);
    let t_mean = edge
        + interior
            .iter()
            .position(|&v| v >= interior_mean)
            .expect("the maximum reaches the mean");
    Ok(DayFeatures {
        initial_level: LevelLabel::of(mean(&series[..edge])),
        final_level: LevelLabel::of(mean(&series[n - edge..])),
        t_mean,
        t_max: edge + t_max,
        high_duration: interior
            .iter()
            .filter(|&&v| v >= MEDIUM_HIGH_BOUNDARY)
            .count(),
    })
}

/// Envelope of the features observed over the typical days of one class.
/// A day whose features leave the envelope is annotated as an anomaly.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRanges {
    pub initial_levels: Vec<LevelLabel>,
    pub final_levels: Vec<LevelLabel>,
    pub t_mean: (usize, usize),
    pub t_max: (usize, usize),
    pub high_duration: (usize, usize),
}

impl FeatureRanges {
    pub fn from_examples(examples: &[DayFeatures]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or(Error::EmptyInput("feature examples"))?;
        let span = |f: fn(&DayFeatures) -> usize| {
            examples.iter().fold((f(first), f(first)), |(lo, hi), e| {
                (lo.min(f(e)), hi.max(f(e)))
            })
        };
        let labels = |f: fn(&DayFeatures) -> LevelLabel| {
            let mut v: Vec<LevelLabel> = examples.iter().map(f).collect();
            v.sort();
            v.dedup();
            v
        };
        Ok(Self {
            initial_levels: labels(|e| e.initial_level),
            final_levels: labels(|e| e.final_level),
            t_mean: span(|e| e.t_mean),
            t_max: span(|e| e.t_max),
            high_duration: span(|e| e.high_duration),
        })
    }

    pub fn contains(&self, f: &DayFeatures) -> bool {
        let within = |(lo, hi): (usize, usize), v: usize| lo <= v && v <= hi;
        self.initial_levels.contains(&f.initial_level)
            && self.final_levels.contains(&f.final_level)
            && within(self.t_mean, f.t_mean)
            && within(self.t_max, f.t_max)
            && within(self.high_duration, f.high_duration)
    }
}

/// Daily activity regime of a hotspot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DayClass {
    Working,
    Entertainment,
    Leisure,
}

impl DayClass {
    pub const ALL: [DayClass; 3] = [
        DayClass::Working,
        DayClass::Entertainment,
        DayClass::Leisure,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            DayClass::Working => 'W',
            DayClass::Entertainment => 'E',
            DayClass::Leisure => 'L',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DayClass::Working => "Working",
            DayClass::Entertainment => "Entertainment",
            DayClass::Leisure => "Leisure",
        }
    }

    /// Expected class of a calendar day: Monday to Thursday are working days,
    /// Friday and Saturday entertainment days, Sunday a leisure day.
    pub fn expected_for(date: NaiveDate) -> Self {
        match date.weekday() {
            Weekday::Mon | Weekday::Tue | Weekday::Wed | Weekday::Thu => DayClass::Working,
            Weekday::Fri | Weekday::Sat => DayClass::Entertainment,
            Weekday::Sun => DayClass::Leisure,
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DayClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" | "working" => Ok(DayClass::Working),
            "e" | "entertainment" => Ok(DayClass::Entertainment),
            "l" | "leisure" => Ok(DayClass::Leisure),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

/// Day classes ordered by affinity, most affine first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AffinityTriple([DayClass; 3]);

impl AffinityTriple {
    pub fn new(order: [DayClass; 3]) -> Result<Self> {
        let distinct = order[0] != order[1] && order[1] != order[2] && order[0] != order[2];
        if !distinct {
            return Err(Error::invalid("triple", "must be a permutation of W, E, L"));
        }
        Ok(Self(order))
    }

    pub fn order(&self) -> [DayClass; 3] {
        self.0
    }

    pub fn first(&self) -> DayClass {
        self.0[0]
    }

    fn rank(&self, class: DayClass) -> usize {
        self.0
            .iter()
            .position(|&c| c == class)
            .expect("triple is a permutation")
    }
}

impl fmt::Display for AffinityTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}",
            self.0[0].letter(),
            self.0[1].letter(),
            self.0[2].letter()
        )
    }
}

impl FromStr for AffinityTriple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<DayClass> = s
            .split('|')
            .map(DayClass::from_str)
            .collect::<Result<_>>()?;
        let order: [DayClass; 3] = parts
            .try_into()
            .map_err(|_| Error::invalid("triple", format!("`{s}` does not hold three classes")))?;
        Self::new(order)
    }
}

/// Number of pairwise ordering constraints on which the two triples disagree.
pub fn assessment_error(predicted: &AffinityTriple, annotated: &AffinityTriple) -> usize {
    let mut errors = 0;
    for (i, &x) in DayClass::ALL.iter().enumerate() {
        for &y in &DayClass::ALL[i + 1..] {
            let p = predicted.rank(x) < predicted.rank(y);
            let a = annotated.rank(x) < annotated.rank(y);
            if p != a {
                errors += 1;
            }
        }
    }
    errors
}
