//! The 24-dimensional quality feature vector: 20 structural similarities
//! against multiple pseudo reference images plus 4 two-scale GGD statistics
//! of MSCN coefficients.

mod ggd;
mod lbp;
mod mpri;
mod mscn;

pub use ggd::{ggd_fit, GgdFit};
pub use lbp::{lbp_histogram, structural_similarity, LbpHistogram};
pub use mpri::{generate_mpris, CodecChoice, CodecConfig, DistortionKind, MpriLabel};
pub use mscn::mscn;

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image must be at least 16x16, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("intensity {value} at index {index} outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("pixel buffer holds {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("failed to read image: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("{distortion} codec failed at level {level}: {message}")]
    Codec {
        distortion: &'static str,
        level: usize,
        message: String,
    },
    #[error("coefficient field is all zeros")]
    DegenerateField,
    #[error("GGD fit needs at least 100 coefficients, got {0}")]
    TooFewCoefficients(usize),
}

/// Row-major grayscale image with intensities normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, FeatureError> {
        if width < 16 || height < 16 {
            return Err(FeatureError::TooSmall { width, height });
        }
        if data.len() != width * height {
            return Err(FeatureError::BufferSize {
                expected: width * height,
                got: data.len(),
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(FeatureError::IntensityOutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Load an 8-bit grayscale or RGB image (PNG, BMP, ...) and convert to
    /// luminance via 0.299 R + 0.587 G + 0.114 B.
    pub fn from_path(path: &Path) -> Result<Self, FeatureError> {
        let img = image::open(path)?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let data: Vec<f64> = rgb
            .pixels()
            .map(|p| {
                (0.299 * p.0[0] as f64 + 0.587 * p.0[1] as f64 + 0.114 * p.0[2] as f64) / 255.0
            })
            .collect();
        Self::new(w, h, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn flipped_horizontal(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in 0..self.width {
                data.push(self.get(self.width - 1 - x, y));
            }
        }
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f64>) -> GrayImage {
        debug_assert_eq!(data.len(), width * height);
        GrayImage {
            width,
            height,
            data,
        }
    }
}

/// 2x2 box low-pass followed by factor-2 decimation.
fn downsample(img: &GrayImage) -> (usize, usize, Vec<f64>) {
    let w2 = img.width / 2;
    let h2 = img.height / 2;
    let mut out = Vec::with_capacity(w2 * h2);
    for y in 0..h2 {
        for x in 0..w2 {
            let s = img.get(2 * x, 2 * y)
                + img.get(2 * x + 1, 2 * y)
                + img.get(2 * x, 2 * y + 1)
                + img.get(2 * x + 1, 2 * y + 1);
            out.push(s / 4.0);
        }
    }
    (w2, h2, out)
}

pub const FEATURE_DIM: usize = 24;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "S_c1", "S_c2", "S_c3", "S_c4", "S_c5", "S_k1", "S_k2", "S_k3", "S_k4", "S_k5", "S_b1",
    "S_b2", "S_b3", "S_b4", "S_b5", "S_n1", "S_n2", "S_n3", "S_n4", "S_n5", "nu", "sigma2",
    "nu_s", "sigma2_s",
];

/// The 24 features in fixed order: S_c1..S_c5, S_k1..S_k5, S_b1..S_b5,
/// S_n1..S_n5, nu, sigma2, nu_s, sigma2_s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        (values.len() == FEATURE_DIM && values.iter().all(|v| v.is_finite()))
            .then_some(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Structural similarities for one distortion kind, levels 1..=5.
    pub fn structural(&self, kind: DistortionKind) -> &[f64] {
        let base = match kind {
            DistortionKind::Jpeg => 0,
            DistortionKind::Jp2k => 5,
            DistortionKind::Blur => 10,
            DistortionKind::Noise => 15,
        };
        &self.values[base..base + 5]
    }
}

/// Extract the full feature vector. Deterministic given (image, seed).
pub fn extract_features(
    img: &GrayImage,
    seed: u64,
    codecs: &CodecConfig,
) -> Result<FeatureVector, FeatureError> {
    let reference = lbp_histogram(img);
    let mpris = generate_mpris(img, seed, codecs)?;

    let mut values = Vec::with_capacity(FEATURE_DIM);
    for (_, mpri) in &mpris {
        values.push(structural_similarity(&reference, &lbp_histogram(mpri)));
    }

    let coeffs = mscn(img);
    let fit = ggd_fit(&coeffs)?;
    values.push(fit.nu);
    values.push(fit.sigma2);

    let (w2, h2, small) = downsample(img);
    let coeffs2 = mscn::mscn_raw(w2, h2, &small);
    let fit2 = ggd_fit(&coeffs2)?;
    values.push(fit2.nu);
    values.push(fit2.sigma2);

    Ok(FeatureVector { values })
}

#[cfg(test)]
pub(crate) fn synthetic_natural(width: usize, height: usize, seed: u64) -> GrayImage {
    // Smooth multi-scale field: a few sinusoidal gratings squashed into
    // [0, 1]; stands in for natural content in unit tests.
    let mut data = Vec::with_capacity(width * height);
    let s = seed as f64;
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let v = 0.5
                + 0.18 * ((0.050 * xf + 0.031 * yf + s).sin())
                + 0.14 * ((0.013 * xf - 0.043 * yf + 0.7 * s).cos())
                + 0.09 * ((0.110 * xf + 0.170 * yf).sin() * (0.023 * xf).cos())
                + 0.05 * ((0.31 * xf).sin() * (0.27 * yf).sin());
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(width, height, data).unwrap()
}
