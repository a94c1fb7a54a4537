//! Rewrite metrics: semantic and style similarity, the gated Valid Style
//! score, the combined H-score and Pareto analysis over model points.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::cosine;
use crate::{Error, Result};

/// Default semantic gate and high-fidelity floor.
pub const DEFAULT_TAU: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub semantic: f64,
    pub style_raw: f64,
}

impl ScoredSample {
    pub fn new(id: impl Into<String>, semantic: f64, style_raw: f64) -> Result<Self> {
        for v in [semantic, style_raw] {
            if !v.is_finite() {
                return Err(Error::InvalidScore(v));
            }
        }
        Ok(Self {
            id: id.into(),
            semantic,
            style_raw,
        })
    }
}

/// Cosine between the generated sentence and its neutral source.
pub fn semantic_score(generated: &[f64], neutral: &[f64]) -> Result<f64> {
    cosine(generated, neutral)
}

/// Cosine between the generated sentence and the character's style centroid.
pub fn style_score(generated: &[f64], centroid: &[f64]) -> Result<f64> {
    cosine(generated, centroid)
}

/// `style_raw` when `semantic > tau`, otherwise 0.
pub fn valid_style_score(sample: &ScoredSample, tau: f64) -> f64 {
    if sample.semantic > tau {
        sample.style_raw
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HKind {
    #[default]
    Harmonic,
    Geometric,
    Arithmetic,
}

/// Harmonic mean `2ab / (a + b)`, 0 when both are 0.
pub fn h_score(semantic: f64, style: f64) -> Result<f64> {
    h_score_with(HKind::Harmonic, semantic, style)
}

pub fn h_score_with(kind: HKind, a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !v.is_finite() {
            return Err(Error::InvalidScore(v));
        }
        if v < 0.0 {
            return Err(Error::NegativeHInput(v));
        }
    }
    Ok(match kind {
        HKind::Harmonic if a + b == 0.0 => 0.0,
        HKind::Harmonic => 2.0 * a * b / (a + b),
        HKind::Geometric => libm::sqrt(a * b),
        HKind::Arithmetic => (a + b) / 2.0,
    })
}

/// Mean Valid Style per threshold, over the same samples.
pub fn tau_sensitivity(samples: &[ScoredSample], taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    if taus.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = samples.len() as f64;
    Ok(taus
        .iter()
        .map(|&t| {
            (
                t,
                samples.iter().map(|s| valid_style_score(s, t)).sum::<f64>() / n,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub semantic: f64,
    pub style: f64,
}

impl ParetoPoint {
    pub fn new(label: impl Into<String>, semantic: f64, style: f64) -> Self {
        Self {
            label: label.into(),
            semantic,
            style,
        }
    }

    /// At least as good on both axes and strictly better on one.
    pub fn dominates(&self, other: &Self) -> bool {
        self.semantic >= other.semantic
            && self.style >= other.style
            && (self.semantic > other.semantic || self.style > other.style)
    }
}

/// Non-dominated points, by semantic descending (then style descending,
/// then label). Exact duplicates are all kept.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut front: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .cloned()
        .collect();
    front.sort_by(|a, b| {
        b.semantic
            .total_cmp(&a.semantic)
            .then(b.style.total_cmp(&a.style))
            .then_with(|| a.label.cmp(&b.label))
    });
    front
}

/// Points with `semantic ≥ floor`, input order kept.
pub fn high_fidelity_filter(points: &[ParetoPoint], floor: f64) -> Vec<ParetoPoint> {
    points
        .iter()
        .filter(|p| p.semantic >= floor)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: usize,
    pub tau: f64,
    pub h_kind: HKind,
    pub mean_semantic: f64,
    pub mean_style_raw: f64,
    pub mean_h_score: f64,
    pub mean_valid_style: f64,
    /// Samples whose negative score was clamped to 0 before the H-score.
    pub clamped_negative: usize,
}

/// Means of the four metrics. The H-score is computed per sample with
/// negative inputs clamped to 0 and counted.
pub fn aggregate_report(samples: &[ScoredSample], tau: f64, h_kind: HKind) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = samples.len() as f64;
    let mut sums = [0.0; 4];
    let mut clamped_negative = 0;
    for s in samples {
        if s.semantic < 0.0 || s.style_raw < 0.0 {
            clamped_negative += 1;
        }
        let h = h_score_with(h_kind, s.semantic.max(0.0), s.style_raw.max(0.0))?;
        sums[0] += s.semantic;
        sums[1] += s.style_raw;
        sums[2] += h;
        sums[3] += valid_style_score(s, tau);
    }
    Ok(MetricReport {
        samples: samples.len(),
        tau,
        h_kind,
        mean_semantic: sums[0] / n,
        mean_style_raw: sums[1] / n,
        mean_h_score: sums[2] / n,
        mean_valid_style: sums[3] / n,
        clamped_negative,
    })
}
