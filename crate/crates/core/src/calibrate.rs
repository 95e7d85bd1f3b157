//! Differential evolution, the MSE fitness of a receptive field over labeled
//! pairs, the two-phase perceptron training, and anomaly-threshold search.

use std::collections::HashMap;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perceptron::{StigmergicPerceptron, DEFAULT_WINDOW, FIELD_COUNT};
use crate::series::{generate_archetype, perturb, ArchetypeKind, DayClass};
use crate::srf::{default_warmup, SrfGeometry, SrfParams, TrailHistory};

/// Per-parameter search box. A parameter with `low == high` is held fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamBounds {
    pub low: SrfParams,
    pub high: SrfParams,
}

impl ParamBounds {
    /// Domain-wide bounds used before any training.
    pub fn coarse() -> Self {
        Self {
            low: SrfParams {
                alpha_c1: 1.0,
                beta_c1: 0.0,
                alpha_c2: 1.0,
                beta_c2: 0.0,
                epsilon: 0.01,
                delta: 1e-4,
                alpha_a: 1.0,
                beta_a: 0.0,
            },
            high: SrfParams {
                alpha_c1: 100.0,
                beta_c1: 1.0,
                alpha_c2: 100.0,
                beta_c2: 1.0,
                epsilon: 0.5,
                delta: 1.0,
                alpha_a: 100.0,
                beta_a: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (index, (lo, hi)) in self.intervals().into_iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidBounds {
                    index,
                    low: lo,
                    high: hi,
                });
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.low
            .to_array()
            .into_iter()
            .zip(self.high.to_array())
            .collect()
    }

    pub fn mid(&self) -> SrfParams {
        let v: Vec<f64> = self
            .intervals()
            .iter()
            .map(|(l, h)| 0.5 * (l + h))
            .collect();
        SrfParams::from_slice(&v).expect("eight values")
    }

    pub fn with_delta(mut self, low: f64, high: f64) -> Self {
        self.low.delta = low;
        self.high.delta = high;
        self
    }

    pub fn contains(&self, p: &SrfParams) -> bool {
        self.intervals()
            .iter()
            .zip(p.to_array())
            .all(|(&(l, h), v)| l <= v && v <= h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeConfig {
    pub population_size: usize,
    pub generations: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 30,
            generations: 150,
            differential_weight: 0.7,
            crossover_rate: 0.9,
            seed: 0,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::invalid("population_size", "must be at least 4"));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::invalid("differential_weight", "must lie in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::invalid("crossover_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness after each generation.
    pub history: Vec<f64>,
}

impl DeResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_fitness\n");
        for (g, f) in self.history.iter().enumerate() {
            out.push_str(&format!("{},{f}\n", g + 1));
        }
        out
    }
}

/// DE/rand/1/bin over a box. Trial vectors are drawn sequentially from the
/// seeded generator and evaluated in parallel, so results do not depend on
/// evaluation order. Non-finite objective values count as +inf.
pub fn de_minimize<F>(objective: F, bounds: &[(f64, f64)], cfg: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if bounds.is_empty() {
        return Err(Error::EmptyInput("bounds"));
    }
    for (index, &(low, high)) in bounds.iter().enumerate() {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(Error::InvalidBounds { index, low, high });
        }
    }
    let eval = |x: &Vec<f64>| {
        let f = objective(x);
        if f.is_finite() {
            f
        } else {
            f64::INFINITY
        }
    };
    let dim = bounds.len();
    let np = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            bounds
                .iter()
                .map(|&(l, h)| sample(&mut rng, l, h))
                .collect()
        })
        .collect();
    let mut scores: Vec<f64> = population.par_iter().map(eval).collect();
    let mut history = Vec::with_capacity(cfg.generations);

    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let (a, b, c) = pick_three(&mut rng, np, i);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < cfg.crossover_rate {
                            let v = population[a][j]
                                + cfg.differential_weight * (population[b][j] - population[c][j]);
                            v.clamp(bounds[j].0, bounds[j].1)
                        } else {
                            population[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_scores: Vec<f64> = trials.par_iter().map(eval).collect();
        for (i, (trial, score)) in trials.into_iter().zip(trial_scores).enumerate() {
            if score <= scores[i] {
                population[i] = trial;
                scores[i] = score;
            }
        }
        history.push(scores.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best_index = (0..np)
        .min_by(|&i, &j| scores[i].total_cmp(&scores[j]))
        .expect("non-empty population");
    Ok(DeResult {
        best: population[best_index].clone(),
        best_fitness: scores[best_index],
        history,
    })
}

fn sample(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    if low == high {
        low
    } else {
        rng.random_range(low..=high)
    }
}

fn pick_three(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let k = rng.random_range(0..n);
        if k != exclude && !taken.contains(&k) {
            return k;
        }
    };
    let a = pick(&[]);
    let b = pick(&[a]);
    let c = pick(&[a, b]);
    (a, b, c)
}

/// Two streams and the similarity the field should report for them.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub series_a: Arc<[f64]>,
    pub series_b: Arc<[f64]>,
    pub target: f64,
    /// Relative weight in the fitness; 1 unless set otherwise.
    pub weight: f64,
}

impl TrainingPair {
    pub fn new(series_a: Arc<[f64]>, series_b: Arc<[f64]>, target: f64) -> Result<Self> {
        if target != 0.0 && target != 1.0 {
            return Err(Error::invalid("target_similarity", "must be 0 or 1"));
        }
        if series_a.len() != series_b.len() {
            return Err(Error::LengthMismatch {
                left: series_a.len(),
                right: series_b.len(),
            });
        }
        Ok(Self {
            series_a,
            series_b,
            target,
            weight: 1.0,
        })
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Scalar similarity of every pair under `params`. The trail history of each
/// distinct second series (by allocation) is recorded once; first series are
/// streamed against it.
pub fn pair_similarities(params: &SrfParams, pairs: &[TrainingPair]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("training pairs"));
    }
    let geometry = SrfGeometry::default();
    let mut cache: HashMap<*const f64, TrailHistory> = HashMap::new();
    pairs
        .iter()
        .map(|pair| {
            let warmup = default_warmup(pair.series_b.len());
            let key = pair.series_b.as_ptr();
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
                let h = TrailHistory::record(&pair.series_b, params, warmup, &geometry)?;
                e.insert(h);
            }
            cache[&key].mean_similarity_of(&pair.series_a, params, warmup, &geometry)
        })
        .collect()
}

/// Mean squared error between the field's scalar similarity and the target,
/// weighted by the pair weights.
pub fn fitness(params: &SrfParams, pairs: &[TrainingPair]) -> Result<f64> {
    let s = pair_similarities(params, pairs)?;
    let total: f64 = pairs.iter().map(|p| p.weight).sum();
    Ok(s.iter()
        .zip(pairs)
        .map(|(s, p)| p.weight * (s - p.target).powi(2))
        .sum::<f64>()
        / total)
}

/// Runs DE on the fitness of `pairs` inside `bounds`.
pub fn train_srf(
    pairs: &[TrainingPair],
    bounds: &ParamBounds,
    cfg: &DeConfig,
) -> Result<(SrfParams, DeResult)> {
    bounds.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("training pairs"));
    }
    let objective = |x: &[f64]| {
        SrfParams::from_slice(x)
            .and_then(|p| fitness(&p, pairs))
            .unwrap_or(f64::INFINITY)
    };
    let result = de_minimize(objective, &bounds.intervals(), cfg)?;
    Ok((SrfParams::from_slice(&result.best)?, result))
}

/// Generation settings for the perceptron training set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingSetConfig {
    pub length: usize,
    pub per_class: usize,
    /// Upper bound of the noise; each copy draws its own amplitude from
    /// `[0, noise_amplitude]`.
    pub noise_amplitude: f64,
    pub max_shift: usize,
    pub negatives: NegativeScheme,
    pub seed: u64,
}

/// Which classes supply the target-0 half of a field's training pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeScheme {
    /// Only the enumeration neighbors, sharing the half evenly.
    Adjacent,
    /// Every other class, sharing the half evenly.
    AllOthers,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        Self {
            length: DEFAULT_WINDOW,
            per_class: 10,
            noise_amplitude: 0.1,
            max_shift: 2,
            negatives: NegativeScheme::AllOthers,
            seed: 0,
        }
    }
}

/// Perturbed copies of every archetype plus the pure references.
#[derive(Clone, Debug)]
pub struct SpTrainingSet {
    references: Vec<Arc<[f64]>>,
    series: Vec<Vec<Arc<[f64]>>>,
    negatives: NegativeScheme,
}

impl SpTrainingSet {
    pub fn generate(cfg: &TrainingSetConfig) -> Result<Self> {
        let mut references = Vec::with_capacity(FIELD_COUNT);
        let mut series = Vec::with_capacity(FIELD_COUNT);
        for kind in ArchetypeKind::ALL {
            let archetype = generate_archetype(kind, cfg.length)?;
            let copies = (0..cfg.per_class)
                .map(|j| {
                    let seed = mix_seed(cfg.seed, (kind.enumeration() * 1000 + j) as u64);
                    let amplitude =
                        ChaCha8Rng::seed_from_u64(seed).random_range(0.0..=cfg.noise_amplitude);
                    perturb(&archetype, amplitude, cfg.max_shift, seed)
                        .map(|s| Arc::from(s.samples()))
                })
                .collect::<Result<Vec<Arc<[f64]>>>>()?;
            references.push(Arc::from(archetype.samples()));
            series.push(copies);
        }
        Ok(Self {
            references,
            series,
            negatives: cfg.negatives,
        })
    }

    pub fn reference(&self, kind: ArchetypeKind) -> &Arc<[f64]> {
        &self.references[kind.enumeration() - 1]
    }

    pub fn series(&self, kind: ArchetypeKind) -> &[Arc<[f64]>] {
        &self.series[kind.enumeration() - 1]
    }

    pub fn len(&self) -> usize {
        self.series.iter().map(Vec::len).sum()
    }

    /// Length of every series, which is the perceptron window.
    pub fn window(&self) -> usize {
        self.references[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Own-class copies with target 1 and other-class copies with target 0,
    /// all paired with the field's archetype. Both halves carry the same
    /// total weight.
    pub fn pairs_for(&self, kind: ArchetypeKind) -> Vec<TrainingPair> {
        let reference = self.reference(kind);
        let own = self.series(kind);
        let mut pairs: Vec<TrainingPair> = own
            .iter()
            .map(|s| TrainingPair::new(s.clone(), reference.clone(), 1.0).expect("equal lengths"))
            .collect();
        let others: Vec<ArchetypeKind> = match self.negatives {
            NegativeScheme::Adjacent => kind.neighbors(),
            NegativeScheme::AllOthers => ArchetypeKind::ALL
                .into_iter()
                .filter(|&k| k != kind)
                .collect(),
        };
        let negatives: Vec<&Arc<[f64]>> = others.iter().flat_map(|&k| self.series(k)).collect();
        let weight = own.len() as f64 / negatives.len() as f64;
        pairs.extend(negatives.into_iter().map(|s| {
            TrainingPair::new(s.clone(), reference.clone(), 0.0)
                .expect("equal lengths")
                .weighted(weight)
        }));
        pairs
    }
}

/// SplitMix64 finalizer, used to derive independent per-task seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` log-spaced values from `low` to `high` inclusive.
pub fn log_grid(low: f64, high: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![low];
    }
    let (a, b) = (low.ln(), high.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Interval on `grid` around the points whose quality reaches the 90th
/// percentile. The interval runs from the grid neighbor below the lowest
/// selected point to the neighbor above the highest one, so a single sharp
/// peak still yields a usable range. Returns `None` for a flat sweep.
pub fn percentile_interval(grid: &[f64], quality: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(grid.len(), quality.len());
    let lo_q = quality.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_q = quality.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if grid.is_empty() || !(hi_q - lo_q > 1e-12 * hi_q.abs().max(1.0)) {
        return None;
    }
    let threshold = quantile(quality, 0.9);
    let selected: Vec<usize> = (0..grid.len())
        .filter(|&i| quality[i] >= threshold)
        .collect();
    let first = selected[0].saturating_sub(1);
    let last = (selected[selected.len() - 1] + 1).min(grid.len() - 1);
    Some((grid[first], grid[last]))
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

#[derive(Clone, Debug)]
pub struct DeltaSweep {
    pub kind: ArchetypeKind,
    pub grid: Vec<f64>,
    pub fitness: Vec<f64>,
    pub interval: (f64, f64),
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct GlobalTraining {
    pub bounds: Vec<ParamBounds>,
    pub sweeps: Vec<DeltaSweep>,
}

impl GlobalTraining {
    pub fn bounds_for(&self, kind: ArchetypeKind) -> &ParamBounds {
        &self.bounds[kind.enumeration() - 1]
    }
}

/// Sweeps the evaporation rate of every field over a log grid with the other
/// parameters at mid-bounds and narrows each field's delta range to the best
/// decile of the sweep.
pub fn global_training(
    set: &SpTrainingSet,
    coarse: &ParamBounds,
    grid_points: usize,
) -> Result<GlobalTraining> {
    coarse.validate()?;
    if grid_points < 2 {
        return Err(Error::invalid("grid_points", "need at least 2"));
    }
    let grid = log_grid(coarse.low.delta.max(1e-12), coarse.high.delta, grid_points);
    let base = coarse.mid();
    let sweeps = ArchetypeKind::ALL
        .par_iter()
        .map(|&kind| {
            let pairs = set.pairs_for(kind);
            let fitness = grid
                .iter()
                .map(|&delta| fitness(&SrfParams { delta, ..base }, &pairs))
                .collect::<Result<Vec<f64>>>()?;
            let quality: Vec<f64> = fitness.iter().map(|f| -f).collect();
            let (interval, degenerate) = match percentile_interval(&grid, &quality) {
                Some(iv) => (iv, false),
                None => {
                    warn!(
                        "delta sweep for {} is flat; keeping the coarse interval",
                        kind.name()
                    );
                    ((coarse.low.delta, coarse.high.delta), true)
                }
            };
            info!(
                "{}: best-decile delta interval [{:.4e}, {:.4e}] (quality = negated fitness)",
                kind.name(),
                interval.0,
                interval.1
            );
            Ok(DeltaSweep {
                kind,
                grid: grid.clone(),
                fitness,
                interval,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = sweeps
        .iter()
        .map(|s| coarse.with_delta(s.interval.0, s.interval.1))
        .collect();
    Ok(GlobalTraining { bounds, sweeps })
}

/// Both training phases on a freshly generated training set.
pub fn train_perceptron(
    set_cfg: &TrainingSetConfig,
    grid_points: usize,
    de: &DeConfig,
) -> Result<(GlobalTraining, LocalTraining)> {
    let set = SpTrainingSet::generate(set_cfg)?;
    let global = global_training(&set, &ParamBounds::coarse(), grid_points)?;
    let local = local_training(&set, &global.bounds, de)?;
    Ok((global, local))
}

#[derive(Clone, Debug)]
pub struct FieldTraining {
    pub kind: ArchetypeKind,
    pub params: SrfParams,
    pub initial_fitness: f64,
    pub result: DeResult,
}

#[derive(Clone, Debug)]
pub struct LocalTraining {
    pub perceptron: StigmergicPerceptron,
    pub fields: Vec<FieldTraining>,
}

/// Tunes each field independently inside its bounds. Field `k` uses a seed
/// derived from `cfg.seed` and its enumeration, so the result does not depend
/// on the order in which fields are trained.
pub fn local_training(
    set: &SpTrainingSet,
    bounds: &[ParamBounds],
    cfg: &DeConfig,
) -> Result<LocalTraining> {
    if bounds.len() != FIELD_COUNT {
        return Err(Error::invalid(
            "bounds",
            format!("expected {FIELD_COUNT} entries"),
        ));
    }
    let fields = ArchetypeKind::ALL
        .iter()
        .map(|&kind| train_field(set, kind, &bounds[kind.enumeration() - 1], cfg))
        .collect::<Result<Vec<_>>>()?;
    let perceptron =
        StigmergicPerceptron::new(fields.iter().map(|f| (f.kind, f.params)).collect())?
            .with_window(set.window())?;
    Ok(LocalTraining { perceptron, fields })
}

pub fn train_field(
    set: &SpTrainingSet,
    kind: ArchetypeKind,
    bounds: &ParamBounds,
    cfg: &DeConfig,
) -> Result<FieldTraining> {
    let pairs = set.pairs_for(kind);
    let initial_fitness = fitness(&bounds.mid(), &pairs)?;
    let field_cfg = cfg.with_seed(mix_seed(cfg.seed, kind.enumeration() as u64));
    let (params, result) = train_srf(&pairs, bounds, &field_cfg)?;
    info!(
        "{}: fitness {:.5} -> {:.5}",
        kind.name(),
        initial_fitness,
        result.best_fitness
    );
    Ok(FieldTraining {
        kind,
        params,
        initial_fitness,
        result,
    })
}

/// One day's input to threshold tuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSample {
    pub class: DayClass,
    pub anomaly_index: f64,
    pub anomalous: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// Indexed by [`DayClass::index`].
    pub per_class: [f64; 3],
    pub accuracy: f64,
}

impl Thresholds {
    pub fn get(&self, class: DayClass) -> f64 {
        self.per_class[class.index()]
    }

    pub fn is_anomalous(&self, class: DayClass, anomaly_index: f64) -> bool {
        anomaly_index > self.get(class)
    }
}

/// Fraction of samples whose verdict under `per_class` matches the label.
pub fn threshold_accuracy(samples: &[ThresholdSample], per_class: &[f64; 3]) -> f64 {
    let correct = samples
        .iter()
        .filter(|s| (s.anomaly_index > per_class[s.class.index()]) == s.anomalous)
        .count();
    correct as f64 / samples.len() as f64
}

/// Midpoint of the gap around `t` between the nearest `indices` at or below
/// it and strictly above it, clamped to `[0, 1]`. No verdict changes.
pub fn center_in_gap(t: f64, indices: &[f64]) -> f64 {
    let below = indices
        .iter()
        .copied()
        .filter(|&v| v <= t)
        .fold(0.0, f64::max);
    let above = indices
        .iter()
        .copied()
        .filter(|&v| v > t)
        .fold(1.0, f64::min);
    (0.5 * (below + above)).clamp(0.0, 1.0)
}

/// DE over one threshold per class in `[0, 1]`, maximizing accuracy, with
/// each threshold then centered in its gap between training indices.
pub fn tune_thresholds(samples: &[ThresholdSample], cfg: &DeConfig) -> Result<Thresholds> {
    for class in DayClass::ALL {
        if !samples.iter().any(|s| s.class == class) {
            return Err(Error::EmptyClass(class.name().to_string()));
        }
    }
    let result = de_minimize(
        |x| 1.0 - threshold_accuracy(samples, &[x[0], x[1], x[2]]),
        &[(0.0, 1.0); 3],
        cfg,
    )?;
    let per_class: [f64; 3] = std::array::from_fn(|c| {
        let indices: Vec<f64> = samples
            .iter()
            .filter(|s| s.class.index() == c)
            .map(|s| s.anomaly_index)
            .collect();
        center_in_gap(result.best[c], &indices)
    });
    Ok(Thresholds {
        per_class,
        accuracy: threshold_accuracy(samples, &per_class),
    })
}
