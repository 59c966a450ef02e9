//! Subject x image opinion score handling: CSV ingestion, subject
//! screening, empirical histograms and summary statistics.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hist::{HistogramError, ScoreHistogram};

#[derive(Debug, Error)]
pub enum ScoresError {
    #[error("failed to read score file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("duplicate {kind} identifier '{id}'")]
    Duplicate { kind: &'static str, id: String },
    #[error("score matrix needs at least 1 subject and 1 image")]
    Empty,
    #[error("screening needs at least 3 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("empty score list")]
    NoScores,
    #[error("need at least {need} scores, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("score {value} outside histogram range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// Raw subject x image opinion scores on the [0, 100] scale.
/// Missing entries are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    subjects: Vec<String>,
    images: Vec<String>,
    /// Row-major subject x image grid.
    scores: Vec<Option<f64>>,
}

impl ScoreMatrix {
    pub fn new(
        subjects: Vec<String>,
        images: Vec<String>,
        scores: Vec<Option<f64>>,
    ) -> Result<Self, ScoresError> {
        if subjects.is_empty() || images.is_empty() {
            return Err(ScoresError::Empty);
        }
        assert_eq!(scores.len(), subjects.len() * images.len());
        for (idx, s) in scores.iter().enumerate() {
            if let Some(v) = s {
                if !v.is_finite() || !(0.0..=100.0).contains(v) {
                    return Err(ScoresError::Parse {
                        row: idx / images.len() + 2,
                        column: images[idx % images.len()].clone(),
                        message: format!("score {v} outside [0, 100]"),
                    });
                }
            }
        }
        Ok(Self {
            subjects,
            images,
            scores,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }
    pub fn images(&self) -> &[String] {
        &self.images
    }

    pub fn get(&self, subject: usize, image: usize) -> Option<f64> {
        self.scores[subject * self.images.len() + image]
    }

    /// All present scores for one image, in subject order.
    pub fn image_scores(&self, image: usize) -> Vec<f64> {
        (0..self.subjects.len())
            .filter_map(|s| self.get(s, image))
            .collect()
    }

    pub fn subject_row(&self, subject: usize) -> &[Option<f64>] {
        let m = self.images.len();
        &self.scores[subject * m..(subject + 1) * m]
    }

    fn retain_subjects(&self, keep: &[usize]) -> ScoreMatrix {
        let m = self.images.len();
        let mut scores = Vec::with_capacity(keep.len() * m);
        let mut subjects = Vec::with_capacity(keep.len());
        for &s in keep {
            subjects.push(self.subjects[s].clone());
            scores.extend_from_slice(self.subject_row(s));
        }
        ScoreMatrix {
            subjects,
            images: self.images.clone(),
            scores,
        }
    }

    /// Serialize back to the score CSV contract.
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<(), ScoresError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.images.iter().cloned());
        w.write_record(&header)?;
        for (i, subject) in self.subjects.iter().enumerate() {
            let mut rec = vec![subject.clone()];
            for v in self.subject_row(i) {
                rec.push(v.map(|x| format!("{x}")).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parse the score CSV contract: header `subject_id,<image_1>,...`, one row
/// per subject, empty cell = missing.
pub fn load_scores<R: Read>(reader: R) -> Result<ScoreMatrix, ScoresError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("subject_id") {
        return Err(ScoresError::Parse {
            row: 1,
            column: "1".into(),
            message: "first header field must be 'subject_id'".into(),
        });
    }
    let images: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if images.is_empty() {
        return Err(ScoresError::Empty);
    }
    for (i, id) in images.iter().enumerate() {
        if images[..i].contains(id) {
            return Err(ScoresError::Duplicate {
                kind: "image",
                id: id.clone(),
            });
        }
    }

    let mut subjects: Vec<String> = Vec::new();
    let mut scores: Vec<Option<f64>> = Vec::new();
    for (ridx, record) in rdr.records().enumerate() {
        let row = ridx + 2; // 1-based, after the header
        let record = record?;
        let sid = record.get(0).unwrap_or("").to_string();
        if sid.is_empty() {
            return Err(ScoresError::Parse {
                row,
                column: "subject_id".into(),
                message: "empty subject id".into(),
            });
        }
        if subjects.contains(&sid) {
            return Err(ScoresError::Duplicate {
                kind: "subject",
                id: sid,
            });
        }
        for (j, image) in images.iter().enumerate() {
            let cell = record.get(j + 1).unwrap_or("").trim();
            if cell.is_empty() {
                scores.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| ScoresError::Parse {
                row,
                column: image.clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(ScoresError::Parse {
                    row,
                    column: image.clone(),
                    message: format!("score {v} outside [0, 100]"),
                });
            }
            scores.push(Some(v));
        }
        subjects.push(sid);
    }
    ScoreMatrix::new(subjects, images, scores)
}

pub fn load_scores_path(path: &Path) -> Result<ScoreMatrix, ScoresError> {
    load_scores(std::fs::File::open(path)?)
}

/// Screening thresholds; defaults follow ITU-R BT.500-style outlier
/// rejection plus a leave-one-out consistency floor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScreeningConfig {
    /// Stage 1: reject when the subject's outlier fraction exceeds this.
    pub outlier_fraction: f64,
    /// Stage 1: ... and the outlier imbalance |P-Q|/(P+Q) is below this.
    pub imbalance: f64,
    /// Stage 2: reject correlation with the leave-one-out MOS below this.
    pub correlation_floor: f64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            outlier_fraction: 0.05,
            imbalance: 0.3,
            correlation_floor: 0.7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "stage")]
pub enum RejectionReason {
    /// BT.500-style deviation screening.
    Outliers { fraction: f64, imbalance: f64 },
    /// Leave-one-out MOS consistency screening.
    Inconsistent { correlation: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedSubject {
    pub subject: String,
    pub reason: RejectionReason,
}

#[derive(Debug)]
pub struct ScreeningOutcome {
    pub retained: ScoreMatrix,
    pub rejected: Vec<RejectedSubject>,
}

/// Two-stage subject screening.
///
/// Stage 1: per image compute mean, standard deviation and kurtosis; a score
/// is an outlier when it deviates from the image mean by more than 2*sigma
/// for 2 <= kurtosis <= 4, else sqrt(20)*sigma. A subject is rejected when
/// its outlier fraction exceeds the threshold and the outliers are balanced
/// between the two sides. Stage 2: reject subjects whose correlation with
/// the leave-one-out MOS falls below the floor.
pub fn screen_subjects(
    m: &ScoreMatrix,
    config: &ScreeningConfig,
) -> Result<ScreeningOutcome, ScoresError> {
    let n_subj = m.subjects().len();
    if n_subj < 3 {
        return Err(ScoresError::TooFewSubjects(n_subj));
    }
    let n_img = m.images().len();

    // Stage 1: BT.500-style outlier counting.
    let mut rejected: Vec<RejectedSubject> = Vec::new();
    let mut stage1_keep: Vec<usize> = Vec::new();

    let mut bounds: Vec<Option<(f64, f64)>> = Vec::with_capacity(n_img);
    for j in 0..n_img {
        let xs = m.image_scores(j);
        if xs.len() < 2 {
            bounds.push(None);
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
        let c = if (2.0..=4.0).contains(&kurtosis) {
            2.0
        } else {
            20.0f64.sqrt()
        };
        bounds.push(Some((mean - c * sd, mean + c * sd)));
    }

    for i in 0..n_subj {
        let mut above = 0usize;
        let mut below = 0usize;
        let mut rated = 0usize;
        for j in 0..n_img {
            let Some(x) = m.get(i, j) else { continue };
            rated += 1;
            if let Some((lo, hi)) = bounds[j] {
                if x > hi {
                    above += 1;
                } else if x < lo {
                    below += 1;
                }
            }
        }
        let total = above + below;
        let fraction = if rated > 0 {
            total as f64 / rated as f64
        } else {
            0.0
        };
        let imbalance = if total > 0 {
            (above as f64 - below as f64).abs() / total as f64
        } else {
            1.0
        };
        if fraction > config.outlier_fraction && imbalance < config.imbalance {
            rejected.push(RejectedSubject {
                subject: m.subjects()[i].clone(),
                reason: RejectionReason::Outliers {
                    fraction,
                    imbalance,
                },
            });
        } else {
            stage1_keep.push(i);
        }
    }

    // Stage 2: leave-one-out MOS consistency on the stage-1 survivors.
    let mut final_keep: Vec<usize> = Vec::new();
    for &i in &stage1_keep {
        let mut own = Vec::new();
        let mut loo = Vec::new();
        for j in 0..n_img {
            let Some(x) = m.get(i, j) else { continue };
            let mut sum = 0.0;
            let mut count = 0usize;
            for &other in &stage1_keep {
                if other == i {
                    continue;
                }
                if let Some(y) = m.get(other, j) {
                    sum += y;
                    count += 1;
                }
            }
            if count > 0 {
                own.push(x);
                loo.push(sum / count as f64);
            }
        }
        let r = agreement_correlation(&own, &loo);
        if r < config.correlation_floor {
            rejected.push(RejectedSubject {
                subject: m.subjects()[i].clone(),
                reason: RejectionReason::Inconsistent { correlation: r },
            });
        } else {
            final_keep.push(i);
        }
    }

    if final_keep.is_empty() {
        return Err(ScoresError::Empty);
    }
    Ok(ScreeningOutcome {
        retained: m.retain_subjects(&final_keep),
        rejected,
    })
}

/// Pearson correlation specialized for agreement checks: exact pointwise
/// agreement counts as 1 even when both vectors are constant; otherwise a
/// constant vector yields 0.
fn agreement_correlation(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9) {
        return 1.0;
    }
    pearson(a, b)
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.len() < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Empirical probability-density histogram of `scores` over `edges`.
/// Scores equal to the final edge fall in the last bin.
pub fn build_histogram(scores: &[f64], edges: &[f64]) -> Result<ScoreHistogram, ScoresError> {
    if scores.is_empty() {
        return Err(ScoresError::NoScores);
    }
    let lo = edges[0];
    let hi = edges[edges.len() - 1];
    let mut counts = vec![0usize; edges.len() - 1];
    for &s in scores {
        if s < lo || s > hi {
            return Err(ScoresError::OutOfRange { value: s, lo, hi });
        }
        let k = if s >= hi {
            counts.len() - 1
        } else {
            edges.partition_point(|&e| e <= s) - 1
        };
        counts[k] += 1;
    }
    let n = scores.len() as f64;
    let densities: Vec<f64> = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, pair)| c as f64 / (n * (pair[1] - pair[0])))
        .collect();
    Ok(ScoreHistogram::new(edges.to_vec(), densities)?)
}

/// Per-image count histogram (used by the chi-square goodness-of-fit test).
pub fn bin_counts(scores: &[f64], edges: &[f64]) -> Result<Vec<usize>, ScoresError> {
    if scores.is_empty() {
        return Err(ScoresError::NoScores);
    }
    let lo = edges[0];
    let hi = edges[edges.len() - 1];
    let mut counts = vec![0usize; edges.len() - 1];
    for &s in scores {
        if s < lo || s > hi {
            return Err(ScoresError::OutOfRange { value: s, lo, hi });
        }
        let k = if s >= hi {
            counts.len() - 1
        } else {
            edges.partition_point(|&e| e <= s) - 1
        };
        counts[k] += 1;
    }
    Ok(counts)
}

/// Per-image summary statistics of opinion scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    /// Mean opinion score.
    pub mos: f64,
    /// Standard deviation of opinion scores (n-1 denominator).
    pub sos: f64,
    /// Adjusted Fisher-Pearson standardized third moment.
    pub skewness: f64,
}

pub fn summary_stats(scores: &[f64]) -> Result<ImageStats, ScoresError> {
    let n = scores.len();
    if n < 3 {
        return Err(ScoresError::InsufficientData { need: 3, got: n });
    }
    let nf = n as f64;
    let mos = scores.iter().sum::<f64>() / nf;
    let m2 = scores.iter().map(|x| (x - mos).powi(2)).sum::<f64>() / nf;
    let m3 = scores.iter().map(|x| (x - mos).powi(3)).sum::<f64>() / nf;
    let sos = (scores.iter().map(|x| (x - mos).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let skewness = if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5) * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    };
    Ok(ImageStats { mos, sos, skewness })
}
