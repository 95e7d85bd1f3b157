//! Dynamic time warping and discrete Fréchet distances, used as drop-in
//! replacements for the receptive-field similarity.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceMethod {
    Dtw,
    Frechet,
}

impl DistanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            DistanceMethod::Dtw => "dtw",
            DistanceMethod::Frechet => "frechet",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            DistanceMethod::Dtw => dtw(a, b),
            DistanceMethod::Frechet => frechet_discrete(a, b),
        }
    }
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dtw" => Ok(DistanceMethod::Dtw),
            "frechet" | "fréchet" => Ok(DistanceMethod::Frechet),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub method: DistanceMethod,
    /// `1 / (1 + value / n)` with `n` the longer input length.
    pub normalized_similarity: f64,
}

pub fn compare(method: DistanceMethod, a: &[f64], b: &[f64]) -> Result<DistanceResult> {
    let value = method.distance(a, b)?;
    Ok(DistanceResult {
        value,
        method,
        normalized_similarity: distance_to_similarity(value, a.len().max(b.len())),
    })
}

pub fn distance_to_similarity(distance: f64, length: usize) -> f64 {
    1.0 / (1.0 + distance / length as f64)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("distance input"));
    }
    if let Some(index) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Unconstrained DTW with absolute-difference cost. Keeps two rows.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        for j in 0..m {
            let cost = (x - b[j]).abs();
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => curr[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(curr[j - 1]).min(prev[j - 1]),
            };
            curr[j] = best + cost;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

/// Discrete Fréchet distance: the smallest achievable maximum coupling cost.
pub fn frechet_discrete(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        for j in 0..m {
            let cost = (x - b[j]).abs();
            let reach = match (i, j) {
                (0, 0) => cost,
                (0, _) => curr[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(curr[j - 1]).min(prev[j - 1]),
            };
            curr[j] = reach.max(cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}
