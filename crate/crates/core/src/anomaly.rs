//! Day-level analysis: pattern similarity matrix, fuzzy C-means over its
//! rows, representative days, the anomaly index, verdicts and affinity
//! triples.

use std::sync::Arc;

use chrono::NaiveDate;
use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline::DistanceMethod;
use crate::calibrate::{
    train_srf, tune_thresholds, DeConfig, DeResult, ParamBounds, ThresholdSample, Thresholds,
    TrainingPair,
};
use crate::error::{Error, Result};
use crate::perceptron::ActivityLevelSeries;
use crate::series::{assessment_error, AffinityTriple, DayClass};
use crate::srf::{activate, default_warmup, SrfGeometry, SrfParams, TrailHistory};

/// Clumping of the pattern field. Levels enter as `level / 7`, so a single
/// gentle sigmoid centred on the middle of `[1/7, 1]` keeps the axis nearly
/// linear.
pub const PATTERN_CLUMP_ALPHA: f64 = 5.0;
pub const PATTERN_CLUMP_BETA: f64 = 4.0 / 7.0;

/// Search box of the pattern field: clumping held fixed, the mark width,
/// evaporation and activation searched over their coarse ranges.
pub fn pattern_bounds() -> ParamBounds {
    let mut b = ParamBounds::coarse();
    for p in [&mut b.low, &mut b.high] {
        p.alpha_c1 = PATTERN_CLUMP_ALPHA;
        p.alpha_c2 = PATTERN_CLUMP_ALPHA;
        p.beta_c1 = PATTERN_CLUMP_BETA;
        p.beta_c2 = PATTERN_CLUMP_BETA;
    }
    b
}

/// Every unordered pair of the labeled patterns, target 1 when both share a
/// class.
pub fn pattern_pairs(patterns: &[(DayClass, Arc<[f64]>)]) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for (i, (ci, a)) in patterns.iter().enumerate() {
        for (cj, b) in &patterns[i + 1..] {
            let target = if ci == cj { 1.0 } else { 0.0 };
            pairs.push(TrainingPair::new(a.clone(), b.clone(), target)?);
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("patterns"));
    }
    Ok(pairs)
}

pub fn train_pattern_srf(
    patterns: &[(DayClass, Arc<[f64]>)],
    bounds: &ParamBounds,
    cfg: &DeConfig,
) -> Result<(SrfParams, DeResult)> {
    train_srf(&pattern_pairs(patterns)?, bounds, cfg)
}

/// Labeled activity-level patterns as pattern-field training input
/// (levels scaled by 1/7).
pub fn pattern_inputs(patterns: &[(DayClass, ActivityLevelSeries)]) -> Vec<(DayClass, Arc<[f64]>)> {
    patterns
        .iter()
        .map(|(c, l)| (*c, Arc::from(l.normalized())))
        .collect()
}

/// Days of even weeks counted from the earliest day; these tune the
/// thresholds and the odd weeks are held out.
pub fn training_split(day_ids: &[NaiveDate]) -> Vec<bool> {
    let Some(&first) = day_ids.iter().min() else {
        return Vec::new();
    };
    day_ids
        .iter()
        .map(|&d| ((d - first).num_days() / 7) % 2 == 0)
        .collect()
}

/// Symmetric day-by-day similarity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    day_ids: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Fills the upper triangle with `f(i, j)` (in parallel) and mirrors it.
    pub fn from_fn<F>(day_ids: Vec<NaiveDate>, diagonal: f64, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = day_ids.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| f(i, j)).collect())
            .collect();
        let mut values = vec![diagonal; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                let j = i + 1 + k;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self { day_ids, values }
    }

    pub fn len(&self) -> usize {
        self.day_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.day_ids.is_empty()
    }

    pub fn day_ids(&self) -> &[NaiveDate] {
        &self.day_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Mean similarity within and between groups, off-diagonal only.
    pub fn block_means(&self, labels: &[DayClass]) -> (f64, f64) {
        let (mut within, mut nw, mut between, mut nb) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i == j {
                    continue;
                }
                if labels[i] == labels[j] {
                    within += self.get(i, j);
                    nw += 1;
                } else {
                    between += self.get(i, j);
                    nb += 1;
                }
            }
        }
        (within / nw as f64, between / nb as f64)
    }

    /// CSV with day ids as header row and first column.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("day_id");
        for d in &self.day_ids {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
        for (i, d) in self.day_ids.iter().enumerate() {
            out.push_str(&d.to_string());
            for v in self.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::EmptyInput("similarity matrix"))?;
        let parse_date = |s: &str| {
            NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                .map_err(|e| Error::malformed("similarity matrix", format!("day id `{s}`: {e}")))
        };
        let day_ids = header
            .split(',')
            .skip(1)
            .map(parse_date)
            .collect::<Result<Vec<_>>>()?;
        let n = day_ids.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let id = parse_date(cells.next().unwrap_or_default())?;
            if i >= n || id != day_ids[i] {
                return Err(Error::malformed(
                    "similarity matrix",
                    format!("row {i} does not match the header"),
                ));
            }
            for c in cells {
                values.push(
                    c.trim().parse::<f64>().map_err(|e| {
                        Error::malformed("similarity matrix", format!("row {i}: {e}"))
                    })?,
                );
            }
            if values.len() != (i + 1) * n {
                return Err(Error::malformed(
                    "similarity matrix",
                    format!("row {i} has the wrong width"),
                ));
            }
        }
        if values.len() != n * n {
            return Err(Error::malformed("similarity matrix", "missing rows"));
        }
        Ok(Self { day_ids, values })
    }
}

fn pattern_input(s: &ActivityLevelSeries) -> Vec<f64> {
    s.normalized()
}

fn check_lengths(patterns: &[ActivityLevelSeries]) -> Result<()> {
    if let Some(first) = patterns.first() {
        if let Some(bad) = patterns.iter().find(|p| p.len() != first.len()) {
            return Err(Error::LengthMismatch {
                left: first.len(),
                right: bad.len(),
            });
        }
    }
    Ok(())
}

/// Pattern-field similarity of every pair of days, on levels divided by 7.
pub fn similarity_matrix(
    patterns: &[ActivityLevelSeries],
    p: &SrfParams,
) -> Result<SimilarityMatrix> {
    if patterns.is_empty() {
        return Err(Error::EmptyInput("patterns"));
    }
    check_lengths(patterns)?;
    let geometry = SrfGeometry::default();
    let warmup = default_warmup(patterns[0].len());
    let histories = patterns
        .par_iter()
        .map(|s| TrailHistory::record(&pattern_input(s), p, warmup, &geometry))
        .collect::<Result<Vec<_>>>()?;
    let ids = patterns.iter().map(|s| s.day_id).collect();
    Ok(SimilarityMatrix::from_fn(ids, activate(1.0, p), |i, j| {
        histories[i].mean_similarity(&histories[j], p)
    }))
}

/// Distance-based similarity of every pair of days, on levels divided by 7.
pub fn distance_matrix(
    patterns: &[ActivityLevelSeries],
    method: DistanceMethod,
) -> Result<SimilarityMatrix> {
    if patterns.is_empty() {
        return Err(Error::EmptyInput("patterns"));
    }
    check_lengths(patterns)?;
    let inputs: Vec<Vec<f64>> = patterns.iter().map(pattern_input).collect();
    let ids = patterns.iter().map(|s| s.day_id).collect();
    Ok(SimilarityMatrix::from_fn(ids, 1.0, |i, j| {
        crate::baseline::compare(method, &inputs[i], &inputs[j])
            .map(|r| r.normalized_similarity)
            .unwrap_or(0.0)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FcmConfig {
    pub clusters: usize,
    pub fuzziness: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Independent random starts; the run with the lowest objective wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            fuzziness: 2.0,
            tolerance: 1e-6,
            max_iterations: 300,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    /// `memberships[i][k]`: degree of point `i` in cluster `k`.
    pub memberships: Vec<Vec<f64>>,
    pub fuzziness: f64,
    /// Objective after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn hard_assignment(&self) -> Vec<usize> {
        self.memberships
            .iter()
            .map(|u| {
                (0..u.len())
                    .max_by(|&a, &b| u[a].total_cmp(&u[b]).then(b.cmp(&a)))
                    .expect("at least one cluster")
            })
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Memberships of one point given its squared distances to the centroids.
/// A point sitting on centroids belongs to them alone, shared equally.
pub fn fcm_memberships(sq_distances: &[f64], fuzziness: f64) -> Vec<f64> {
    let zeros = sq_distances.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        return sq_distances
            .iter()
            .map(|&d| if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    // (d_ik / d_jk)^(2/(m-1)) with squared distances becomes a 1/(m-1) power.
    let e = 1.0 / (fuzziness - 1.0);
    sq_distances
        .iter()
        .map(|&dk| {
            1.0 / sq_distances
                .iter()
                .map(|&dj| (dk / dj).powf(e))
                .sum::<f64>()
        })
        .collect()
}

/// Fuzzy C-means from `cfg.restarts` starts, each at `cfg.clusters` distinct
/// points drawn with the seeded generator. Earlier starts win ties.
pub fn fuzzy_cmeans(points: &[Vec<f64>], cfg: &FcmConfig) -> Result<ClusterModel> {
    let n = points.len();
    let c = cfg.clusters;
    if c == 0 || n < c {
        return Err(Error::invalid(
            "clusters",
            format!("need 1 <= c <= n, got c = {c}, n = {n}"),
        ));
    }
    if cfg.restarts == 0 {
        return Err(Error::invalid("restarts", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..cfg.restarts {
        let init = sample(&mut rng, n, c)
            .into_iter()
            .map(|i| points[i].clone())
            .collect();
        let model = fuzzy_cmeans_from(points, init, cfg)?;
        let last = |m: &ClusterModel| m.objective.last().copied().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|b| last(&model) < last(b)) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Fuzzy C-means from the given initial centroids.
pub fn fuzzy_cmeans_from(
    points: &[Vec<f64>],
    init: Vec<Vec<f64>>,
    cfg: &FcmConfig,
) -> Result<ClusterModel> {
    let c = init.len();
    if c == 0 || points.len() < c {
        return Err(Error::invalid("clusters", "need 1 <= c <= n"));
    }
    if cfg.fuzziness <= 1.0 {
        return Err(Error::invalid("fuzziness", "must be > 1"));
    }
    let dim = points[0].len();
    if points.iter().chain(&init).any(|p| p.len() != dim) {
        return Err(Error::invalid(
            "points",
            "all points must share a dimension",
        ));
    }
    let m = cfg.fuzziness;
    let mut centroids = init;
    let mut memberships = Vec::new();
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        memberships = points
            .par_iter()
            .map(|x| {
                let d: Vec<f64> = centroids.iter().map(|v| sq_dist(x, v)).collect();
                fcm_memberships(&d, m)
            })
            .collect::<Vec<_>>();
        let next: Vec<Vec<f64>> = (0..c)
            .map(|k| {
                let mut num = vec![0.0; dim];
                let mut den = 0.0;
                for (x, u) in points.iter().zip(&memberships) {
                    let w = u[k].powf(m);
                    den += w;
                    for (acc, xi) in num.iter_mut().zip(x) {
                        *acc += w * xi;
                    }
                }
                if den > 0.0 {
                    num.iter().map(|v| v / den).collect()
                } else {
                    centroids[k].clone()
                }
            })
            .collect();
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        objective.push(fcm_objective(points, &centroids, &memberships, m));
        if shift < cfg.tolerance {
            break;
        }
    }
    Ok(ClusterModel {
        centroids,
        memberships,
        fuzziness: m,
        objective,
        iterations,
    })
}

pub fn fcm_objective(
    points: &[Vec<f64>],
    centroids: &[Vec<f64>],
    memberships: &[Vec<f64>],
    m: f64,
) -> f64 {
    points
        .iter()
        .zip(memberships)
        .map(|(x, u)| {
            centroids
                .iter()
                .zip(u)
                .map(|(v, uk)| uk.powf(m) * sq_dist(x, v))
                .sum::<f64>()
        })
        .sum()
}

/// Cluster index assigned to each day class, chosen as the permutation that
/// agrees with the most expected labels. Earlier permutations win ties.
pub fn map_clusters_to_classes(assignment: &[usize], expected: &[DayClass]) -> [usize; 3] {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let score = |perm: &[usize; 3]| {
        assignment
            .iter()
            .zip(expected)
            .filter(|(&a, c)| perm[c.index()] == a)
            .count()
    };
    let mut best = PERMS[0];
    for perm in &PERMS[1..] {
        if score(perm) > score(&best) {
            best = *perm;
        }
    }
    best
}

/// The `k` members of `cluster` nearest its centroid, by ascending Euclidean
/// distance with ties broken by day id.
pub fn representatives(
    model: &ClusterModel,
    points: &[Vec<f64>],
    day_ids: &[NaiveDate],
    cluster: usize,
    k: usize,
) -> Vec<usize> {
    let assignment = model.hard_assignment();
    let mut members: Vec<(f64, usize)> = (0..points.len())
        .filter(|&i| assignment[i] == cluster)
        .map(|i| (sq_dist(&points[i], &model.centroids[cluster]), i))
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(day_ids[a.1].cmp(&day_ids[b.1])));
    if members.len() < k {
        warn!(
            "cluster {cluster} has {} members, fewer than the {k} requested representatives",
            members.len()
        );
    }
    members.into_iter().take(k).map(|(_, i)| i).collect()
}

/// `|mean(similarities) - 1|`.
pub fn anomaly_index_from(similarities: &[f64]) -> Result<f64> {
    if similarities.is_empty() {
        return Err(Error::EmptyInput("representatives"));
    }
    Ok((similarities.iter().sum::<f64>() / similarities.len() as f64 - 1.0).abs())
}

/// Anomaly index of `day` against its class representatives under the
/// pattern field.
pub fn anomaly_index(
    day: &ActivityLevelSeries,
    reps: &[ActivityLevelSeries],
    p: &SrfParams,
) -> Result<f64> {
    let sims = reps
        .iter()
        .map(|r| pattern_similarity(day, r, p))
        .collect::<Result<Vec<_>>>()?;
    anomaly_index_from(&sims)
}

pub fn pattern_similarity(
    a: &ActivityLevelSeries,
    b: &ActivityLevelSeries,
    p: &SrfParams,
) -> Result<f64> {
    let a = pattern_input(a);
    let b = pattern_input(b);
    Ok(crate::srf::similarity_series(&a, &b, p, default_warmup(a.len()))?.mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Typical,
    Anomalous,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Typical => "typical",
            Verdict::Anomalous => "anomalous",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyRecord {
    pub day_id: NaiveDate,
    pub class: DayClass,
    pub anomaly_index: f64,
    pub threshold_used: f64,
    pub verdict: Verdict,
}

pub fn classify_day(
    day_id: NaiveDate,
    class: DayClass,
    anomaly_index: f64,
    thresholds: &Thresholds,
) -> AnomalyRecord {
    let threshold_used = thresholds.get(class);
    let verdict = if anomaly_index > threshold_used {
        Verdict::Anomalous
    } else {
        Verdict::Typical
    };
    AnomalyRecord {
        day_id,
        class,
        anomaly_index,
        threshold_used,
        verdict,
    }
}

pub fn report_csv(records: &[AnomalyRecord]) -> String {
    let mut out = String::from("day_id,class,anomaly_index,threshold,verdict\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.day_id,
            r.class.letter(),
            r.anomaly_index,
            r.threshold_used,
            r.verdict.name()
        ));
    }
    out
}

/// Classes sorted by descending mean similarity (indexed by
/// [`DayClass::index`]). Exact ties keep W before E before L and are flagged.
pub fn affinity_triple(mean_similarity: [f64; 3]) -> (AffinityTriple, bool) {
    let mut order = DayClass::ALL;
    order.sort_by(|a, b| mean_similarity[b.index()].total_cmp(&mean_similarity[a.index()]));
    let tie = (0..3).any(|i| (i + 1..3).any(|j| mean_similarity[i] == mean_similarity[j]));
    (AffinityTriple::new(order).expect("sorted permutation"), tie)
}

/// Point-biserial correlation between a continuous variable and a binary
/// one. NaN when either side is constant.
pub fn point_biserial(values: &[f64], flags: &[bool]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for (&v, &f) in values.iter().zip(flags) {
        if f {
            s1 += v;
            n1 += 1.0;
        } else {
            s0 += v;
            n0 += 1.0;
        }
    }
    (s1 / n1 - s0 / n0) / sd * (n1 * n0 / (n * n)).sqrt()
}

/// Unsupervised part of the day analysis over any similarity matrix.
#[derive(Clone, Debug)]
pub struct MatrixAnalysis {
    pub model: ClusterModel,
    /// Cluster index of each class, indexed by [`DayClass::index`].
    pub class_clusters: [usize; 3],
    /// Representative day indices of each class.
    pub representatives: [Vec<usize>; 3],
    /// Calendar class of each day.
    pub classes: Vec<DayClass>,
    pub anomaly_indices: Vec<f64>,
    /// Mean similarity of each day to each class's representatives.
    pub class_affinity: Vec<[f64; 3]>,
}

pub const REPRESENTATIVES_PER_CLASS: usize = 5;

pub fn analyze_matrix(
    matrix: &SimilarityMatrix,
    fcm: &FcmConfig,
    k: usize,
) -> Result<MatrixAnalysis> {
    let points = matrix.rows();
    let model = fuzzy_cmeans(&points, fcm)?;
    let classes: Vec<DayClass> = matrix
        .day_ids()
        .iter()
        .map(|&d| DayClass::expected_for(d))
        .collect();
    let class_clusters = map_clusters_to_classes(&model.hard_assignment(), &classes);
    let representatives: [Vec<usize>; 3] = std::array::from_fn(|c| {
        representatives(&model, &points, matrix.day_ids(), class_clusters[c], k)
    });
    for class in DayClass::ALL {
        if representatives[class.index()].is_empty() {
            return Err(Error::EmptyClass(class.name().to_string()));
        }
    }
    let class_affinity: Vec<[f64; 3]> = (0..matrix.len())
        .map(|d| {
            std::array::from_fn(|c| {
                let reps = &representatives[c];
                reps.iter().map(|&r| matrix.get(d, r)).sum::<f64>() / reps.len() as f64
            })
        })
        .collect();
    let anomaly_indices = class_affinity
        .iter()
        .zip(&classes)
        .map(|(a, c)| (a[c.index()] - 1.0).abs())
        .collect();
    Ok(MatrixAnalysis {
        model,
        class_clusters,
        representatives,
        classes,
        anomaly_indices,
        class_affinity,
    })
}

impl MatrixAnalysis {
    pub fn triple(&self, day: usize) -> (AffinityTriple, bool) {
        affinity_triple(self.class_affinity[day])
    }

    /// Mean assessment error over the days that carry an annotation, or
    /// `None` when none do.
    pub fn mean_assessment_error(&self, annotated: &[Option<AffinityTriple>]) -> Option<f64> {
        let errors: Vec<usize> = annotated
            .iter()
            .enumerate()
            .filter_map(|(d, a)| a.map(|a| assessment_error(&self.triple(d).0, &a)))
            .collect();
        if errors.is_empty() {
            None
        } else {
            Some(errors.iter().sum::<usize>() as f64 / errors.len() as f64)
        }
    }
}

/// Supervised part: thresholds tuned on the training days and verdicts for
/// every day.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub thresholds: Thresholds,
    pub records: Vec<AnomalyRecord>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub overall_accuracy: f64,
    pub point_biserial: f64,
}

pub fn evaluate(
    analysis: &MatrixAnalysis,
    day_ids: &[NaiveDate],
    anomalous: &[bool],
    train: &[bool],
    de: &DeConfig,
) -> Result<Evaluation> {
    let n = day_ids.len();
    if anomalous.len() != n || train.len() != n || analysis.anomaly_indices.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: anomalous.len().min(train.len()),
        });
    }
    let samples: Vec<ThresholdSample> = (0..n)
        .filter(|&i| train[i])
        .map(|i| ThresholdSample {
            class: analysis.classes[i],
            anomaly_index: analysis.anomaly_indices[i],
            anomalous: anomalous[i],
        })
        .collect();
    let thresholds = tune_thresholds(&samples, de)?;
    let records: Vec<AnomalyRecord> = (0..n)
        .map(|i| {
            classify_day(
                day_ids[i],
                analysis.classes[i],
                analysis.anomaly_indices[i],
                &thresholds,
            )
        })
        .collect();
    let accuracy = |keep: &dyn Fn(usize) -> bool| {
        let idx: Vec<usize> = (0..n).filter(|&i| keep(i)).collect();
        let ok = idx
            .iter()
            .filter(|&&i| (records[i].verdict == Verdict::Anomalous) == anomalous[i])
            .count();
        ok as f64 / idx.len().max(1) as f64
    };
    Ok(Evaluation {
        thresholds,
        train_accuracy: accuracy(&|i| train[i]),
        test_accuracy: accuracy(&|i| !train[i]),
        overall_accuracy: accuracy(&|_| true),
        point_biserial: point_biserial(&analysis.anomaly_indices, anomalous),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 5).unwrap() + chrono::Days::new(i as u64)
    }

    fn levels(i: usize, v: Vec<f64>) -> ActivityLevelSeries {
        ActivityLevelSeries {
            levels: v,
            day_id: day(i),
            hotspot_id: "A".into(),
            resolution_minutes: 10,
        }
    }

    fn params() -> SrfParams {
        SrfParams {
            alpha_c1: PATTERN_CLUMP_ALPHA,
            beta_c1: PATTERN_CLUMP_BETA,
            alpha_c2: PATTERN_CLUMP_ALPHA,
            beta_c2: PATTERN_CLUMP_BETA,
            epsilon: 0.1,
            delta: 0.3,
            alpha_a: 10.0,
            beta_a: 0.5,
        }
    }

    fn blobs() -> Vec<Vec<f64>> {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for j in 0..8 {
                let a = (j as f64 + k as f64) * 0.7;
                pts.push(vec![c[0] + 0.2 * a.cos(), c[1] + 0.2 * a.sin()]);
            }
        }
        pts
    }

    #[test]
    fn split_alternates_weeks() {
        let ids: Vec<NaiveDate> = (0..21).map(day).rev().collect();
        let split = training_split(&ids);
        for (d, &t) in ids.iter().zip(&split) {
            let week = (*d - day(0)).num_days() / 7;
            assert_eq!(t, week % 2 == 0);
        }
        assert!(training_split(&[]).is_empty());
    }

    #[test]
    fn matrix_diagonal_and_symmetry() {
        let series: Vec<_> = (0..4)
            .map(|i| {
                levels(
                    i,
                    (0..40).map(|t| 1.0 + ((t * (i + 1)) % 7) as f64).collect(),
                )
            })
            .collect();
        let p = params();
        let m = similarity_matrix(&series, &p).unwrap();
        for i in 0..4 {
            assert_eq!(m.get(i, i), activate(1.0, &p));
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        let direct = pattern_similarity(&series[1], &series[3], &p).unwrap();
        assert_eq!(m.get(1, 3), direct);
    }

    #[test]
    fn matrix_follows_input_order() {
        let series: Vec<_> = (0..3)
            .map(|i| levels(i, (0..30).map(|t| 1.0 + (t % (i + 2)) as f64).collect()))
            .collect();
        let p = params();
        let m = similarity_matrix(&series, &p).unwrap();
        let rev: Vec<_> = series.iter().rev().cloned().collect();
        let r = similarity_matrix(&rev, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), r.get(2 - i, 2 - j));
            }
        }
        let bad = vec![series[0].clone(), levels(5, vec![1.0; 10])];
        assert!(matches!(
            similarity_matrix(&bad, &p),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = SimilarityMatrix::from_fn(vec![day(0), day(1), day(2)], 1.0, |i, j| {
            0.1 * (i + j) as f64
        });
        let text = m.to_csv_string();
        assert!(text.starts_with("day_id,2015-01-05,2015-01-06,2015-01-07\n2015-01-05,1,0.1,0.2"));
        assert_eq!(SimilarityMatrix::from_csv_str(&text).unwrap(), m);
        assert!(SimilarityMatrix::from_csv_str("day_id,2015-01-05\n2015-01-06,1\n").is_err());
    }

    #[test]
    fn memberships_match_reference_formula() {
        // u_k = 1 / sum_j (d_k / d_j)^(2 / (m - 1)) with plain distances.
        let d = [1.0f64, 2.0, 4.0];
        let m = 2.5;
        let sq: Vec<f64> = d.iter().map(|x| x * x).collect();
        let u = fcm_memberships(&sq, m);
        for k in 0..3 {
            let reference = 1.0
                / d.iter()
                    .map(|dj| (d[k] / dj).powf(2.0 / (m - 1.0)))
                    .sum::<f64>();
            assert!((u[k] - reference).abs() < 1e-12);
        }
        assert_eq!(fcm_memberships(&[0.0, 3.0, 0.0], 2.0), vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn fcm_separates_blobs() {
        let pts = blobs();
        let model = fuzzy_cmeans(&pts, &FcmConfig::default()).unwrap();
        let assignment = model.hard_assignment();
        for blob in 0..3 {
            let a = assignment[blob * 8];
            for i in blob * 8..blob * 8 + 8 {
                assert_eq!(assignment[i], a);
                assert!(model.memberships[i][a] >= 0.95);
            }
        }
        for u in &model.memberships {
            assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(model.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn fcm_is_invariant_to_duplicated_points() {
        let pts = blobs();
        let doubled: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
        let cfg = FcmConfig::default();
        let init = vec![pts[0].clone(), pts[9].clone(), pts[17].clone()];
        let a = fuzzy_cmeans_from(&pts, init.clone(), &cfg).unwrap();
        let b = fuzzy_cmeans_from(&doubled, init, &cfg).unwrap();
        for (ca, cb) in a.centroids.iter().zip(&b.centroids) {
            assert!(sq_dist(ca, cb) < 1e-20);
        }
    }

    #[test]
    fn fcm_rejects_too_few_points() {
        assert!(fuzzy_cmeans(&[vec![0.0], vec![1.0]], &FcmConfig::default()).is_err());
    }

    #[test]
    fn representatives_are_nearest_members() {
        let mut pts = blobs();
        let ids: Vec<NaiveDate> = (0..pts.len() + 1).map(day).collect();
        let model = fuzzy_cmeans(&pts, &FcmConfig::default()).unwrap();
        let cluster = model.hard_assignment()[0];
        let top = representatives(&model, &pts, &ids, cluster, 1);
        let brute = (0..8)
            .min_by(|&a, &b| {
                sq_dist(&pts[a], &model.centroids[cluster])
                    .total_cmp(&sq_dist(&pts[b], &model.centroids[cluster]))
            })
            .unwrap();
        assert_eq!(top, vec![brute]);
        let all = representatives(&model, &pts, &ids, cluster, 8);
        assert_eq!(all.len(), 8);
        assert_eq!(representatives(&model, &pts, &ids, cluster, 20).len(), 8);

        // A far outlier joining the cluster leaves the nearest member alone.
        pts.push(vec![-30.0, -30.0]);
        let mut model2 = model.clone();
        model2.memberships.push({
            let mut u = vec![0.0; 3];
            u[cluster] = 1.0;
            u
        });
        assert_eq!(
            representatives(&model2, &pts, &ids, cluster, 1),
            vec![brute]
        );
    }

    #[test]
    fn anomaly_index_examples() {
        assert_eq!(anomaly_index_from(&[1.0; 5]).unwrap(), 0.0);
        assert!((anomaly_index_from(&[0.4; 5]).unwrap() - 0.6).abs() < 1e-12);
        assert!(anomaly_index_from(&[]).is_err());
    }

    #[test]
    fn perturbed_day_scores_higher_index() {
        let base: Vec<f64> = (0..72).map(|t| 1.0 + 6.0 * (t as f64 / 71.0)).collect();
        let reps: Vec<_> = (0..5).map(|i| levels(i, base.clone())).collect();
        let same = levels(9, base.clone());
        let mut shifted = base.clone();
        shifted.reverse();
        let other = levels(10, shifted);
        let p = params();
        let a = anomaly_index(&same, &reps, &p).unwrap();
        let b = anomaly_index(&other, &reps, &p).unwrap();
        assert!(a < b);
    }

    #[test]
    fn verdicts_follow_thresholds() {
        let t = Thresholds {
            per_class: [0.3, 0.4, 0.5],
            accuracy: 1.0,
        };
        let r = classify_day(day(0), DayClass::Working, 0.0, &t);
        assert_eq!(r.verdict, Verdict::Typical);
        let r = classify_day(day(0), DayClass::Leisure, 0.51, &t);
        assert_eq!(r.verdict, Verdict::Anomalous);
        assert_eq!(r.threshold_used, 0.5);
        let csv = report_csv(&[r]);
        assert_eq!(
            csv,
            "day_id,class,anomaly_index,threshold,verdict\n2015-01-05,L,0.51,0.5,anomalous\n"
        );
    }

    #[test]
    fn triples_and_ties() {
        let (t, tie) = affinity_triple([0.9, 0.2, 0.5]);
        assert_eq!(t.to_string(), "W|L|E");
        assert!(!tie);
        let (t, tie) = affinity_triple([0.4, 0.4, 0.4]);
        assert_eq!(t.to_string(), "W|E|L");
        assert!(tie);
        let (t, tie) = affinity_triple([0.1, 0.6, 0.6]);
        assert_eq!(t.to_string(), "E|L|W");
        assert!(tie);
    }

    #[test]
    fn cluster_mapping_prefers_agreement() {
        let expected = [
            DayClass::Working,
            DayClass::Working,
            DayClass::Entertainment,
            DayClass::Leisure,
        ];
        assert_eq!(map_clusters_to_classes(&[2, 2, 0, 1], &expected), [2, 0, 1]);
    }

    #[test]
    fn point_biserial_equals_pearson() {
        let v = [0.1, 0.2, 0.15, 0.8, 0.05, 0.7];
        let f = [false, false, false, true, false, true];
        let x: Vec<f64> = f.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mx = x.iter().sum::<f64>() / 6.0;
        let mv = v.iter().sum::<f64>() / 6.0;
        let cov: f64 = v.iter().zip(&x).map(|(a, b)| (a - mv) * (b - mx)).sum();
        let sv = v.iter().map(|a| (a - mv).powi(2)).sum::<f64>().sqrt();
        let sx = x.iter().map(|b| (b - mx).powi(2)).sum::<f64>().sqrt();
        assert!((point_biserial(&v, &f) - cov / (sv * sx)).abs() < 1e-12);
    }

    #[test]
    fn pattern_pairs_cover_all_couples() {
        let s: Vec<(DayClass, Arc<[f64]>)> = (0..6)
            .map(|i| (DayClass::ALL[i % 3], Arc::from(vec![0.5; 10])))
            .collect();
        let pairs = pattern_pairs(&s).unwrap();
        assert_eq!(pairs.len(), 15);
        assert_eq!(pairs.iter().filter(|p| p.target == 1.0).count(), 3);
        let b = pattern_bounds();
        b.validate().unwrap();
        assert_eq!(b.low.alpha_c1, b.high.alpha_c1);
    }

    proptest! {
        #[test]
        fn memberships_sum_to_one(d in proptest::collection::vec(1e-6f64..100.0, 1..6), m in 1.1f64..4.0) {
            let u = fcm_memberships(&d, m);
            prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(u.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn anomaly_index_in_unit_range(s in proptest::collection::vec(1e-9f64..1.0, 1..8)) {
            let i = anomaly_index_from(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&i));
        }

        #[test]
        fn fcm_objective_never_increases(seed in any::<u64>()) {
            let pts: Vec<Vec<f64>> = (0..20).map(|i| {
                let a = (i as f64 * 1.3 + seed as f64 % 7.0).sin();
                vec![a * 3.0 + (i % 3) as f64 * 4.0, (i as f64 * 0.7).cos()]
            }).collect();
            let cfg = FcmConfig { seed, ..FcmConfig::default() };
            let model = fuzzy_cmeans(&pts, &cfg).unwrap();
            prop_assert!(model.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
        }
    }
}
