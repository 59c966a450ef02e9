//! Binned probability-density representation of opinion scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the histogram normalization invariant.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HistogramError {
    #[error("edges must be strictly increasing and finite, violated at index {0}")]
    BadEdges(usize),
    #[error("expected {expected} densities for {edges} edges, got {got}")]
    LengthMismatch {
        edges: usize,
        expected: usize,
        got: usize,
    },
    #[error("densities must be finite and nonnegative, violated at bin {0}")]
    NegativeDensity(usize),
    #[error("densities integrate to {0}, expected 1")]
    NotNormalized(f64),
    #[error("histograms have different bin edges")]
    EdgeMismatch,
}

/// A probability-density histogram over score bins.
///
/// Invariant: sum over bins of density * width equals 1 (within
/// [`NORMALIZATION_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreHistogram {
    edges: Vec<f64>,
    densities: Vec<f64>,
}

impl ScoreHistogram {
    pub fn new(edges: Vec<f64>, densities: Vec<f64>) -> Result<Self, HistogramError> {
        if edges.len() < 2 {
            return Err(HistogramError::BadEdges(0));
        }
        for (i, pair) in edges.windows(2).enumerate() {
            if !pair[0].is_finite() || !pair[1].is_finite() || pair[1] <= pair[0] {
                return Err(HistogramError::BadEdges(i + 1));
            }
        }
        if densities.len() != edges.len() - 1 {
            return Err(HistogramError::LengthMismatch {
                edges: edges.len(),
                expected: edges.len() - 1,
                got: densities.len(),
            });
        }
        let mut total = 0.0;
        for (i, (&d, w)) in densities
            .iter()
            .zip(edges.windows(2).map(|p| p[1] - p[0]))
            .enumerate()
        {
            if !d.is_finite() || d < 0.0 {
                return Err(HistogramError::NegativeDensity(i));
            }
            total += d * w;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(HistogramError::NotNormalized(total));
        }
        Ok(Self { edges, densities })
    }

    /// Build from per-bin probability masses, normalizing to total mass 1.
    pub fn from_masses(edges: Vec<f64>, masses: &[f64]) -> Result<Self, HistogramError> {
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(HistogramError::NotNormalized(total));
        }
        let densities = masses
            .iter()
            .zip(edges.windows(2))
            .map(|(&m, pair)| m / total / (pair[1] - pair[0]))
            .collect();
        Self::new(edges, densities)
    }

    /// Default 10-bin edges {0, 10, ..., 100} used throughout.
    pub fn default_edges() -> Vec<f64> {
        (0..=10).map(|i| i as f64 * 10.0).collect()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|p| p[1] - p[0])
    }

    /// Per-bin probability masses (density times width).
    pub fn masses(&self) -> Vec<f64> {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(&d, w)| d * w)
            .collect()
    }

    pub fn same_edges(&self, other: &Self) -> bool {
        self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(other.edges.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    }
}

impl<'de> Deserialize<'de> for ScoreHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            edges: Vec<f64>,
            densities: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ScoreHistogram::new(raw.edges, raw.densities).map_err(serde::de::Error::custom)
    }
}
