//! Pipeline configuration: one TOML file of flat sections. Every key is
//! optional and falls back to the library defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stigmergy_core::anomaly::FcmConfig;
use stigmergy_core::calibrate::{mix_seed, DeConfig, NegativeScheme, TrainingSetConfig};
use stigmergy_core::hotspot::{HotspotConfig, SlotTrailConfig, Smoothing};
use stigmergy_core::ingest::{GeoBox, BUCKET_MINUTES, TEN_FEET_M};
use stigmergy_core::series::MIN_ARCHETYPE_LENGTH;
use stigmergy_core::stigspace::ConeGeometry;

use crate::failure::Failure;

/// Per-stage seed streams derived from the single configured seed.
#[derive(Clone, Copy, Debug)]
pub enum Stage {
    TrainingSet = 1,
    PerceptronDe = 2,
    PatternSet = 3,
    PatternDe = 4,
    Clustering = 5,
    ThresholdDe = 6,
    SynthYear = 7,
    SynthSpatial = 8,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub area: Area,
    pub grid: Grid,
    pub hotspots: Hotspots,
    pub series: Series,
    pub training: Training,
    pub de: De,
    pub anomaly: Anomaly,
    pub synth: Synth,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Trip CSV used by `ingest` when no input is given on the command line.
    pub trips: Option<PathBuf>,
    /// Day labels used by `classify` and `compare` when none is given.
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Area {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl Default for Area {
    fn default() -> Self {
        let g = GeoBox::manhattan();
        Self {
            min_lon: g.min_lon,
            min_lat: g.min_lat,
            max_lon: g.max_lon,
            max_lat: g.max_lat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub bucket_cell_m: f64,
    pub bucket_minutes: u32,
    pub trail_cell_m: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            bucket_cell_m: TEN_FEET_M,
            bucket_minutes: BUCKET_MINUTES,
            trail_cell_m: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hotspots {
    pub delta: f64,
    pub base_radius: f64,
    pub top_radius: f64,
    pub smoothing_alpha: f64,
    pub smoothing_beta: f64,
    pub smoothing_cap: f64,
    pub relevance_fraction: f64,
    pub min_area_m2: f64,
    /// Months whose days make up the analysis window; empty means every day.
    pub window_months: Vec<u32>,
}

impl Default for Hotspots {
    fn default() -> Self {
        let t = SlotTrailConfig::default();
        let h = HotspotConfig::default();
        Self {
            delta: t.delta,
            base_radius: t.cone.base_radius,
            top_radius: t.cone.top_radius,
            smoothing_alpha: t.smoothing.alpha,
            smoothing_beta: t.smoothing.beta,
            smoothing_cap: t.smoothing.cap,
            relevance_fraction: h.relevance_fraction,
            min_area_m2: h.min_area_m2,
            window_months: vec![2, 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Series {
    pub resolution_minutes: u32,
}

impl Default for Series {
    fn default() -> Self {
        Self {
            resolution_minutes: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    /// Perceptron window and archetype length, in samples.
    pub window: usize,
    pub per_class: usize,
    pub noise_amplitude: f64,
    pub max_shift: usize,
    pub grid_points: usize,
    /// `all_others` or `adjacent`.
    pub negatives: String,
    pub pattern_per_class: usize,
}

impl Default for Training {
    fn default() -> Self {
        let t = TrainingSetConfig::default();
        Self {
            window: t.length,
            per_class: t.per_class,
            noise_amplitude: t.noise_amplitude,
            max_shift: t.max_shift,
            grid_points: 30,
            negatives: "all_others".into(),
            pattern_per_class: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct De {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub crossover: f64,
}

impl Default for De {
    fn default() -> Self {
        let d = DeConfig::default();
        Self {
            population: d.population_size,
            generations: d.generations,
            mutation: d.differential_weight,
            crossover: d.crossover_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Anomaly {
    pub representatives: usize,
    pub fuzziness: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    /// Thresholds used when no labels are available to tune them.
    pub threshold_w: f64,
    pub threshold_e: f64,
    pub threshold_l: f64,
}

impl Default for Anomaly {
    fn default() -> Self {
        let f = FcmConfig::default();
        Self {
            representatives: 5,
            fuzziness: f.fuzziness,
            tolerance: f.tolerance,
            max_iterations: f.max_iterations,
            restarts: f.restarts,
            threshold_w: 0.5,
            threshold_e: 0.5,
            threshold_l: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synth {
    /// First day of the synthetic year; must be a Monday.
    pub start: NaiveDate,
    pub days: usize,
    pub anomalies: usize,
    /// First day and length of the synthetic trip file.
    pub trip_start: NaiveDate,
    pub trip_days: usize,
    pub trip_peak_rate: f64,
    /// Every n-th trip row is damaged; 0 keeps all rows clean.
    pub bad_row_every: usize,
}

impl Default for Synth {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            days: 364,
            anomalies: 20,
            trip_start: NaiveDate::from_ymd_opt(2015, 2, 2).expect("valid date"),
            trip_days: 7,
            trip_peak_rate: 15.0,
            bad_row_every: 50,
        }
    }
}

impl PipelineConfig {
    /// Reads the file, or returns the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        if !path.exists() {
            return Err(Failure::Missing(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |what: &str| Err(Failure::Input(format!("config: {what}")));
        for p in [&self.paths.trips, &self.paths.labels]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Failure::Missing(p.clone()));
            }
        }
        self.geo()?;
        self.de(Stage::PerceptronDe).validate()?;
        self.training_set()?;
        if !(self.grid.trail_cell_m > 0.0 && self.grid.bucket_cell_m > 0.0) {
            return bad("grid cell sizes must be positive");
        }
        let h = &self.hotspots;
        if !(h.delta >= 0.0 && h.smoothing_cap > 0.0 && h.min_area_m2 >= 0.0) {
            return bad("hotspots: delta and min_area_m2 must be >= 0, smoothing_cap > 0");
        }
        if !(h.relevance_fraction > 0.0 && h.relevance_fraction <= 1.0) {
            return bad("hotspots: relevance_fraction must lie in (0, 1]");
        }
        if !(h.top_radius > 0.0 && h.top_radius < h.base_radius) {
            return bad("hotspots: need 0 < top_radius < base_radius");
        }
        if h.window_months.iter().any(|m| !(1..=12).contains(m)) {
            return bad("hotspots: window_months must be 1..=12");
        }
        let r = self.series.resolution_minutes;
        if r == 0 || !r.is_multiple_of(self.grid.bucket_minutes) || 1440 % r != 0 {
            return bad(
                "series: resolution_minutes must be a multiple of the bucket length dividing a day",
            );
        }
        let a = &self.anomaly;
        if a.representatives == 0 || a.fuzziness <= 1.0 || a.max_iterations == 0 || a.restarts == 0
        {
            return bad(
                "anomaly: need representatives, max_iterations and restarts >= 1, fuzziness > 1",
            );
        }
        if self.training.grid_points < 2 || self.training.pattern_per_class < 2 {
            return bad("training: need grid_points >= 2 and pattern_per_class >= 2");
        }
        let t = &self.training;
        if t.window < MIN_ARCHETYPE_LENGTH
            || t.window > (1440 / r) as usize / 2
            || 4 * t.max_shift >= t.window
        {
            return bad("training: window must fit twice in a day and exceed four times max_shift");
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        mix_seed(self.seed, stage as u64)
    }

    pub fn geo(&self) -> Result<GeoBox, Failure> {
        let a = &self.area;
        Ok(GeoBox::new(a.min_lon, a.min_lat, a.max_lon, a.max_lat)?)
    }

    pub fn de(&self, stage: Stage) -> DeConfig {
        DeConfig {
            population_size: self.de.population,
            generations: self.de.generations,
            differential_weight: self.de.mutation,
            crossover_rate: self.de.crossover,
            seed: self.stage_seed(stage),
        }
    }

    pub fn training_set(&self) -> Result<TrainingSetConfig, Failure> {
        let negatives = match self.training.negatives.as_str() {
            "all_others" => NegativeScheme::AllOthers,
            "adjacent" => NegativeScheme::Adjacent,
            other => {
                return Err(Failure::Input(format!(
                    "config: unknown negatives scheme `{other}`"
                )))
            }
        };
        Ok(TrainingSetConfig {
            length: self.training.window,
            per_class: self.training.per_class,
            noise_amplitude: self.training.noise_amplitude,
            max_shift: self.training.max_shift,
            negatives,
            seed: self.stage_seed(Stage::TrainingSet),
        })
    }

    pub fn slot_trail(&self) -> SlotTrailConfig {
        let h = &self.hotspots;
        SlotTrailConfig {
            delta: h.delta,
            cone: ConeGeometry {
                base_radius: h.base_radius,
                top_radius: h.top_radius,
            },
            smoothing: Smoothing {
                alpha: h.smoothing_alpha,
                beta: h.smoothing_beta,
                cap: h.smoothing_cap,
            },
        }
    }

    pub fn hotspot(&self) -> HotspotConfig {
        HotspotConfig {
            relevance_fraction: self.hotspots.relevance_fraction,
            min_area_m2: self.hotspots.min_area_m2,
        }
    }

    pub fn fcm(&self) -> FcmConfig {
        FcmConfig {
            clusters: 3,
            fuzziness: self.anomaly.fuzziness,
            tolerance: self.anomaly.tolerance,
            max_iterations: self.anomaly.max_iterations,
            restarts: self.anomaly.restarts,
            seed: self.stage_seed(Stage::Clustering),
        }
    }
}
