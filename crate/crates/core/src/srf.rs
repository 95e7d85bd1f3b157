//! Stigmergic receptive field: clumping, marking, trailing, similarity and
//! activation over a pair of sample streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stigspace::{
    evaporate_cells, jaccard_cells, Trail, Trail1D, TrapezoidMark, DEFAULT_PLATEAU_FRACTION,
    DEFAULT_TRAIL_CELLS,
};

/// Logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Full parameter vector of one receptive field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrfParams {
    pub alpha_c1: f64,
    pub beta_c1: f64,
    pub alpha_c2: f64,
    pub beta_c2: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_a: f64,
    pub beta_a: f64,
}

impl SrfParams {
    pub const KEYS: [&'static str; 8] = [
        "alpha_c1", "beta_c1", "alpha_c2", "beta_c2", "epsilon", "delta", "alpha_a", "beta_a",
    ];

    pub fn validate(&self) -> Result<()> {
        let v = self.to_array();
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "srf params",
                format!("{} is not finite", Self::KEYS[i]),
            ));
        }
        for (name, alpha) in [
            ("alpha_c1", self.alpha_c1),
            ("alpha_c2", self.alpha_c2),
            ("alpha_a", self.alpha_a),
        ] {
            if alpha <= 0.0 {
                return Err(Error::invalid("srf params", format!("{name} must be > 0")));
            }
        }
        for (name, beta) in [
            ("beta_c1", self.beta_c1),
            ("beta_c2", self.beta_c2),
            ("beta_a", self.beta_a),
        ] {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::invalid(
                    "srf params",
                    format!("{name} must lie in [0, 1]"),
                ));
            }
        }
        if self.epsilon <= 0.0 {
            return Err(Error::invalid("srf params", "epsilon must be > 0"));
        }
        if self.delta < 0.0 {
            return Err(Error::invalid("srf params", "delta must be >= 0"));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.alpha_c1,
            self.beta_c1,
            self.alpha_c2,
            self.beta_c2,
            self.epsilon,
            self.delta,
            self.alpha_a,
            self.beta_a,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let v: [f64; 8] = v.try_into().map_err(|_| {
            Error::invalid("srf params", format!("expected 8 values, got {}", v.len()))
        })?;
        Ok(Self {
            alpha_c1: v[0],
            beta_c1: v[1],
            alpha_c2: v[2],
            beta_c2: v[3],
            epsilon: v[4],
            delta: v[5],
            alpha_a: v[6],
            beta_a: v[7],
        })
    }
}

/// Discretization and mark shape shared by both branches of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SrfGeometry {
    pub cells: usize,
    pub plateau_fraction: f64,
    pub mark_intensity: f64,
}

impl Default for SrfGeometry {
    fn default() -> Self {
        Self {
            cells: DEFAULT_TRAIL_CELLS,
            plateau_fraction: DEFAULT_PLATEAU_FRACTION,
            mark_intensity: 1.0,
        }
    }
}

/// Double sigmoid mapping samples onto the low, medium and high plateaus.
#[inline]
pub fn clump(x: f64, p: &SrfParams) -> f64 {
    0.5 * (logistic(p.alpha_c1 * (x - p.beta_c1)) + logistic(p.alpha_c2 * (x - p.beta_c2)))
}

/// Sigmoid activation applied to the raw trail similarity.
#[inline]
pub fn activate(raw: f64, p: &SrfParams) -> f64 {
    logistic(p.alpha_a * (raw - p.beta_a))
}

fn mark_for(x: f64, p: &SrfParams, g: &SrfGeometry) -> Result<TrapezoidMark> {
    TrapezoidMark::new(clump(x, p), g.mark_intensity, p.epsilon, g.plateau_fraction)
}

/// Streaming state of one receptive field.
#[derive(Clone, Debug)]
pub struct SrfState {
    params: SrfParams,
    geometry: SrfGeometry,
    trail_input: Trail1D,
    trail_reference: Trail1D,
    steps_processed: usize,
}

impl SrfState {
    pub fn new(params: SrfParams) -> Result<Self> {
        Self::with_geometry(params, SrfGeometry::default())
    }

    pub fn with_geometry(params: SrfParams, geometry: SrfGeometry) -> Result<Self> {
        params.validate()?;
        let trail = Trail1D::unit(geometry.cells)?;
        Ok(Self {
            params,
            geometry,
            trail_input: trail.clone(),
            trail_reference: trail,
            steps_processed: 0,
        })
    }

    pub fn params(&self) -> &SrfParams {
        &self.params
    }

    pub fn trail_input(&self) -> &Trail1D {
        &self.trail_input
    }

    pub fn trail_reference(&self) -> &Trail1D {
        &self.trail_reference
    }

    pub fn steps_processed(&self) -> usize {
        self.steps_processed
    }

    /// Advances both branches by one sample and returns the raw similarity of
    /// the two trails.
    pub fn step(&mut self, x_input: f64, x_reference: f64) -> Result<f64> {
        let mark_in = mark_for(x_input, &self.params, &self.geometry)?;
        let mark_ref = mark_for(x_reference, &self.params, &self.geometry)?;
        self.trail_input.evaporate(self.params.delta)?;
        self.trail_input.deposit(&mark_in)?;
        self.trail_reference.evaporate(self.params.delta)?;
        self.trail_reference.deposit(&mark_ref)?;
        self.steps_processed += 1;
        self.trail_input.jaccard(&self.trail_reference)
    }
}

/// Per-step activated similarities and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityOutput {
    pub activated: Vec<f64>,
    pub mean: f64,
}

/// Warm-up of 10% of the series length.
pub fn default_warmup(len: usize) -> usize {
    len / 10
}

/// Runs a fresh field over the paired streams, emitting the activated
/// similarity for every step from `warmup` on.
pub fn similarity_series(
    a: &[f64],
    b: &[f64],
    p: &SrfParams,
    warmup: usize,
) -> Result<SimilarityOutput> {
    similarity_series_with(a, b, p, warmup, &SrfGeometry::default())
}

pub fn similarity_series_with(
    a: &[f64],
    b: &[f64],
    p: &SrfParams,
    warmup: usize,
    geometry: &SrfGeometry,
) -> Result<SimilarityOutput> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if warmup >= a.len() {
        return Err(Error::TooShort {
            len: a.len(),
            min: warmup + 1,
        });
    }
    let mut state = SrfState::with_geometry(*p, *geometry)?;
    let mut activated = Vec::with_capacity(a.len() - warmup);
    for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
        let raw = state.step(x, y)?;
        if k >= warmup {
            activated.push(activate(raw, p));
        }
    }
    let mean = mean(&activated);
    Ok(SimilarityOutput { activated, mean })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Post-warm-up trail snapshots of one stream, recorded once so that a series
/// can be compared against many others without re-running its branch.
///
/// Snapshots are produced by the same evaporate-then-deposit sequence as
/// [`SrfState::step`], so pairwise results match the streaming path exactly.
#[derive(Clone, Debug)]
pub struct TrailHistory {
    cells: usize,
    steps: usize,
    snapshots: Vec<f64>,
}

impl TrailHistory {
    pub fn record(
        series: &[f64],
        p: &SrfParams,
        warmup: usize,
        geometry: &SrfGeometry,
    ) -> Result<Self> {
        p.validate()?;
        if warmup >= series.len() {
            return Err(Error::TooShort {
                len: series.len(),
                min: warmup + 1,
            });
        }
        let mut trail = Trail1D::unit(geometry.cells)?;
        let steps = series.len() - warmup;
        let mut snapshots = Vec::with_capacity(steps * geometry.cells);
        for (k, &x) in series.iter().enumerate() {
            let mark = mark_for(x, p, geometry)?;
            if p.delta > 0.0 {
                evaporate_cells(trail.cells_mut(), p.delta);
            }
            trail.deposit(&mark)?;
            if k >= warmup {
                snapshots.extend_from_slice(trail.cells());
            }
        }
        Ok(Self {
            cells: geometry.cells,
            steps,
            snapshots,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn snapshot(&self, step: usize) -> &[f64] {
        &self.snapshots[step * self.cells..(step + 1) * self.cells]
    }

    /// Raw per-step Jaccard similarities against another history.
    pub fn raw_similarities(&self, other: &TrailHistory) -> Result<Vec<f64>> {
        if self.cells != other.cells || self.steps != other.steps {
            return Err(Error::LengthMismatch {
                left: self.steps,
                right: other.steps,
            });
        }
        Ok(self
            .snapshots
            .chunks_exact(self.cells)
            .zip(other.snapshots.chunks_exact(self.cells))
            .map(|(a, b)| jaccard_cells(a, b))
            .collect())
    }

    pub fn similarity(&self, other: &TrailHistory, p: &SrfParams) -> Result<SimilarityOutput> {
        let activated: Vec<f64> = self
            .raw_similarities(other)?
            .into_iter()
            .map(|raw| activate(raw, p))
            .collect();
        let mean = mean(&activated);
        Ok(SimilarityOutput { activated, mean })
    }

    /// Mean activated similarity of a fresh stream against this history,
    /// computed step by step without recording the stream's own trails.
    pub fn mean_similarity_of(
        &self,
        series: &[f64],
        p: &SrfParams,
        warmup: usize,
        geometry: &SrfGeometry,
    ) -> Result<f64> {
        if series.len() != warmup + self.steps || geometry.cells != self.cells {
            return Err(Error::LengthMismatch {
                left: series.len(),
                right: warmup + self.steps,
            });
        }
        let mut trail = Trail1D::unit(geometry.cells)?;
        let mut total = 0.0;
        for (k, &x) in series.iter().enumerate() {
            let mark = mark_for(x, p, geometry)?;
            if p.delta > 0.0 {
                evaporate_cells(trail.cells_mut(), p.delta);
            }
            trail.deposit(&mark)?;
            if k >= warmup {
                total += activate(jaccard_cells(trail.cells(), self.snapshot(k - warmup)), p);
            }
        }
        Ok(total / self.steps as f64)
    }

    /// Mean activated similarity without materializing the per-step values.
    pub fn mean_similarity(&self, other: &TrailHistory, p: &SrfParams) -> f64 {
        debug_assert_eq!(self.cells, other.cells);
        debug_assert_eq!(self.steps, other.steps);
        let total: f64 = self
            .snapshots
            .chunks_exact(self.cells)
            .zip(other.snapshots.chunks_exact(self.cells))
            .map(|(a, b)| activate(jaccard_cells(a, b), p))
            .sum();
        total / self.steps as f64
    }
}
