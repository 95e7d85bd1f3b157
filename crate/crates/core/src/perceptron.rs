//! Stigmergic perceptron: seven archetype-tuned receptive fields whose
//! activations are combined into an activity level per step. Each step
//! compares the trailing window of the day against window-length archetypes.

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{
    generate_archetype, parse_series_csv, write_series_csv, ActivityTimeSeries, ArchetypeKind,
    MIN_ARCHETYPE_LENGTH,
};
use crate::srf::{
    default_warmup, similarity_series, SimilarityOutput, SrfGeometry, SrfParams, TrailHistory,
};

/// Number of receptive fields in a perceptron.
pub const FIELD_COUNT: usize = 7;

/// Archetype and window length in samples: four hours at 10 minutes.
pub const DEFAULT_WINDOW: usize = 24;

/// Similarity-weighted mean of the enumerations 1..=7.
pub fn activity_level(similarities: &[f64; FIELD_COUNT]) -> f64 {
    weighted_enumeration(similarities.iter().enumerate().map(|(i, &s)| (i + 1, s)))
}

/// Similarity-weighted mean over arbitrary `(enumeration, similarity)` pairs.
pub fn weighted_enumeration(pairs: impl IntoIterator<Item = (usize, f64)>) -> f64 {
    let (num, den) = pairs
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (i, s)| (n + s * i as f64, d + s));
    num / den
}

#[derive(Clone, Debug, PartialEq)]
pub struct StigmergicPerceptron {
    fields: [(ArchetypeKind, SrfParams); FIELD_COUNT],
    window: usize,
}

impl StigmergicPerceptron {
    /// Builds a perceptron from one parameter set per archetype, in any order.
    pub fn new(fields: Vec<(ArchetypeKind, SrfParams)>) -> Result<Self> {
        if fields.len() != FIELD_COUNT {
            return Err(Error::invalid(
                "perceptron",
                format!("expected {FIELD_COUNT} fields, got {}", fields.len()),
            ));
        }
        let mut slots: [Option<SrfParams>; FIELD_COUNT] = [None; FIELD_COUNT];
        for (kind, params) in fields {
            params.validate()?;
            let slot = &mut slots[kind.enumeration() - 1];
            if slot.is_some() {
                return Err(Error::invalid(
                    "perceptron",
                    format!("duplicate field for {}", kind.name()),
                ));
            }
            *slot = Some(params);
        }
        let fields = std::array::from_fn(|i| {
            (
                ArchetypeKind::ALL[i],
                slots[i].expect("all seven kinds present"),
            )
        });
        Ok(Self {
            fields,
            window: DEFAULT_WINDOW,
        })
    }

    /// Sets the window; it must match the archetype length used in training.
    pub fn with_window(mut self, window: usize) -> Result<Self> {
        if window < MIN_ARCHETYPE_LENGTH {
            return Err(Error::TooShort {
                len: window,
                min: MIN_ARCHETYPE_LENGTH,
            });
        }
        self.window = window;
        Ok(self)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// The same parameters for every field.
    pub fn uniform(params: SrfParams) -> Result<Self> {
        Self::new(ArchetypeKind::ALL.iter().map(|&k| (k, params)).collect())
    }

    pub fn fields(&self) -> &[(ArchetypeKind, SrfParams); FIELD_COUNT] {
        &self.fields
    }

    pub fn params(&self, kind: ArchetypeKind) -> &SrfParams {
        &self.fields[kind.enumeration() - 1].1
    }

    /// Per-field activated similarity streams of `samples` against each
    /// archetype stretched to the same length, in enumeration order.
    pub fn field_outputs(&self, samples: &[f64], warmup: usize) -> Result<Vec<SimilarityOutput>> {
        self.fields
            .par_iter()
            .map(|(kind, params)| {
                let reference = generate_archetype(*kind, samples.len())?;
                similarity_series(samples, reference.samples(), params, warmup)
            })
            .collect()
    }

    /// For every window end `k >= window - 1`, the scalar similarity of
    /// `samples[k + 1 - window..=k]` to each archetype.
    pub fn window_similarities(&self, samples: &[f64]) -> Result<Vec<[f64; FIELD_COUNT]>> {
        let w = self.window;
        if samples.len() < w {
            return Err(Error::TooShort {
                len: samples.len(),
                min: w,
            });
        }
        let warmup = default_warmup(w);
        let geometry = SrfGeometry::default();
        let references = self
            .fields
            .iter()
            .map(|(kind, p)| {
                TrailHistory::record(
                    generate_archetype(*kind, w)?.samples(),
                    p,
                    warmup,
                    &geometry,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        samples
            .par_windows(w)
            .map(|win| {
                let mut s = [0.0; FIELD_COUNT];
                for (i, ((_, p), r)) in self.fields.iter().zip(&references).enumerate() {
                    s[i] = r.mean_similarity_of(win, p, warmup, &geometry)?;
                }
                Ok(s)
            })
            .collect()
    }

    /// One level per window end; the first `window - 1` samples only warm up.
    pub fn levels(&self, samples: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .window_similarities(samples)?
            .iter()
            .map(activity_level)
            .collect())
    }

    pub fn transform(&self, series: &ActivityTimeSeries) -> Result<ActivityLevelSeries> {
        Ok(ActivityLevelSeries {
            levels: self.levels(series.samples())?,
            day_id: series.day_id(),
            hotspot_id: series.hotspot_id().to_string(),
            resolution_minutes: series.resolution_minutes(),
        })
    }

    pub fn to_toml(&self) -> String {
        let file = PerceptronFile {
            window: self.window,
            asleep: self.fields[0].1,
            awakening: self.fields[1].1,
            falling: self.fields[2].1,
            flow: self.fields[3].1,
            chill: self.fields[4].1,
            rise: self.fields[5].1,
            rush_hour: self.fields[6].1,
        };
        toml::to_string(&file).expect("perceptron parameters serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: PerceptronFile = toml::from_str(text)
            .map_err(|e| Error::malformed("perceptron config", e.to_string()))?;
        Self::new(
            ArchetypeKind::ALL
                .into_iter()
                .zip([
                    f.asleep,
                    f.awakening,
                    f.falling,
                    f.flow,
                    f.chill,
                    f.rise,
                    f.rush_hour,
                ])
                .collect(),
        )?
        .with_window(f.window)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Serialize, Deserialize)]
struct PerceptronFile {
    #[serde(default = "default_window")]
    window: usize,
    #[serde(rename = "Asleep")]
    asleep: SrfParams,
    #[serde(rename = "Awakening")]
    awakening: SrfParams,
    #[serde(rename = "Falling")]
    falling: SrfParams,
    #[serde(rename = "Flow")]
    flow: SrfParams,
    #[serde(rename = "Chill")]
    chill: SrfParams,
    #[serde(rename = "Rise")]
    rise: SrfParams,
    #[serde(rename = "RushHour")]
    rush_hour: SrfParams,
}

/// Activity levels of one hotspot over one day, in `[1, 7]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityLevelSeries {
    pub levels: Vec<f64>,
    pub day_id: NaiveDate,
    pub hotspot_id: String,
    pub resolution_minutes: u32,
}

impl ActivityLevelSeries {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().sum::<f64>() / self.levels.len() as f64
    }

    /// Levels rescaled to `[0, 1]` by dividing by the field count.
    pub fn normalized(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l / FIELD_COUNT as f64).collect()
    }

    pub fn to_csv_string(&self) -> String {
        write_series_csv(
            self.day_id,
            &self.hotspot_id,
            self.resolution_minutes,
            &self.levels,
        )
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let csv = parse_series_csv(text)?;
        if csv.values.is_empty() {
            return Err(Error::EmptyInput("activity level series"));
        }
        if let Some(index) = csv
            .values
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=FIELD_COUNT as f64).contains(v))
        {
            return Err(Error::malformed(
                "activity level series",
                format!("level at index {index} is outside [0, 7]"),
            ));
        }
        Ok(Self {
            levels: csv.values,
            day_id: csv.day_id,
            hotspot_id: csv.hotspot_id,
            resolution_minutes: csv.resolution_minutes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::synthetic_day;
    use proptest::prelude::*;

    fn params() -> SrfParams {
        SrfParams {
            alpha_c1: 20.0,
            beta_c1: 0.3,
            alpha_c2: 20.0,
            beta_c2: 0.7,
            epsilon: 0.2,
            delta: 0.2,
            alpha_a: 10.0,
            beta_a: 0.5,
        }
    }

    #[test]
    fn equal_similarities_give_the_middle() {
        assert!((activity_level(&[0.3; 7]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_field_pulls_the_level() {
        let tiny = 1e-12;
        let l = activity_level(&[1.0, tiny, tiny, tiny, tiny, tiny, tiny]);
        assert!((l - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_strong_field_example() {
        // (0.1 * (1 + 2 + 3 + 4 + 5 + 6) + 0.8 * 7) / (6 * 0.1 + 0.8) = 7.7 / 1.4
        let s = [0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.8];
        let oracle: f64 =
            s.iter().zip(1..=7).map(|(s, i)| s * i as f64).sum::<f64>() / s.iter().sum::<f64>();
        assert!((oracle - 5.5).abs() < 1e-12);
        assert!((activity_level(&s) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn constructor_orders_fields_and_rejects_bad_sets() {
        let mut fields: Vec<_> = ArchetypeKind::ALL
            .iter()
            .rev()
            .map(|&k| (k, params()))
            .collect();
        fields[0].1.delta = 0.9;
        let sp = StigmergicPerceptron::new(fields.clone()).unwrap();
        for (i, (kind, _)) in sp.fields().iter().enumerate() {
            assert_eq!(kind.enumeration(), i + 1);
        }
        assert_eq!(sp.params(ArchetypeKind::RushHour).delta, 0.9);

        assert!(StigmergicPerceptron::new(fields[..6].to_vec()).is_err());
        let mut dup = fields.clone();
        dup[1].0 = ArchetypeKind::RushHour;
        assert!(StigmergicPerceptron::new(dup).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let fields = ArchetypeKind::ALL
            .iter()
            .map(|&k| {
                let mut p = params();
                p.delta = 0.1 * k.enumeration() as f64;
                p.alpha_a = 1.0;
                (k, p)
            })
            .collect();
        let sp = StigmergicPerceptron::new(fields)
            .unwrap()
            .with_window(30)
            .unwrap();
        let text = sp.to_toml();
        assert!(text.starts_with("window = 30\n"));
        assert!(text.contains("[Asleep]") && text.contains("[RushHour]"));
        assert_eq!(StigmergicPerceptron::from_toml(&text).unwrap(), sp);
        assert!(StigmergicPerceptron::from_toml("[Asleep]\nalpha_c1 = 1.0\n").is_err());
    }

    #[test]
    fn transform_is_deterministic_and_bounded() {
        let sp = StigmergicPerceptron::uniform(params()).unwrap();
        let a = generate_archetype(ArchetypeKind::Rise, 144).unwrap();
        let series =
            ActivityTimeSeries::new(a.samples().to_vec(), 10, synthetic_day(), "A").unwrap();
        let x = sp.transform(&series).unwrap();
        let y = sp.transform(&series).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.len(), 144 - DEFAULT_WINDOW + 1);
        assert!(x.levels.iter().all(|&l| (1.0..=7.0).contains(&l)));
    }

    #[test]
    fn window_similarity_matches_a_fresh_field() {
        let mut fields: Vec<_> = ArchetypeKind::ALL.iter().map(|&k| (k, params())).collect();
        fields[3].1.delta = 0.05;
        fields[5].1.epsilon = 0.35;
        let sp = StigmergicPerceptron::new(fields)
            .unwrap()
            .with_window(16)
            .unwrap();
        let samples: Vec<f64> = (0..40)
            .map(|i| ((i as f64) * 0.37).sin() * 0.5 + 0.5)
            .collect();
        let fast = sp.window_similarities(&samples).unwrap();
        assert_eq!(fast.len(), 40 - 16 + 1);
        for k in [0, 7, 24] {
            let direct = sp
                .field_outputs(&samples[k..k + 16], default_warmup(16))
                .unwrap();
            for i in 0..FIELD_COUNT {
                assert!((fast[k][i] - direct[i].mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transform_rejects_series_shorter_than_the_window() {
        let sp = StigmergicPerceptron::uniform(params()).unwrap();
        let series =
            ActivityTimeSeries::new(vec![0.5; DEFAULT_WINDOW - 1], 10, synthetic_day(), "A")
                .unwrap();
        assert!(sp.transform(&series).is_err());
        assert!(sp.clone().with_window(MIN_ARCHETYPE_LENGTH - 1).is_err());
    }

    #[test]
    fn level_csv_round_trip() {
        let s = ActivityLevelSeries {
            levels: vec![1.0, 2.5, 6.75],
            day_id: NaiveDate::from_ymd_opt(2015, 1, 27).unwrap(),
            hotspot_id: "G".into(),
            resolution_minutes: 10,
        };
        let text = s.to_csv_string();
        assert!(text.starts_with("# 2015-01-27,G,10\n0,1\n"));
        assert_eq!(ActivityLevelSeries::from_csv_str(&text).unwrap(), s);
        assert!(ActivityLevelSeries::from_csv_str("# 2015-01-27,G,10\n0,9\n").is_err());
        assert_eq!(s.normalized()[2], 6.75 / 7.0);
    }

    proptest! {
        #[test]
        fn level_is_within_one_and_seven(s in proptest::array::uniform7(1e-9f64..1.0)) {
            let l = activity_level(&s);
            prop_assert!((1.0 - 1e-12..=7.0 + 1e-12).contains(&l));
        }

        #[test]
        fn level_ignores_field_order(s in proptest::array::uniform7(1e-9f64..1.0), seed in any::<u64>()) {
            let mut pairs: Vec<(usize, f64)> = s.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
            let k = (seed % 7) as usize;
            pairs.rotate_left(k);
            pairs.swap(0, (seed as usize / 7) % 7);
            let permuted = weighted_enumeration(pairs);
            prop_assert!((permuted - activity_level(&s)).abs() < 1e-12);
        }
    }
}
