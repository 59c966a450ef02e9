//! Multiple pseudo reference image generation: the target image distorted
//! with JPEG, JP2K-style compression, Gaussian blur and white Gaussian
//! noise at five levels each.

use std::io::Cursor;
use std::process::Command;

use image::codecs::jpeg::JpegEncoder;
use image::ImageEncoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureError, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionKind {
    Jpeg,
    Jp2k,
    Blur,
    Noise,
}

impl DistortionKind {
    pub fn prefix(&self) -> char {
        match self {
            DistortionKind::Jpeg => 'c',
            DistortionKind::Jp2k => 'k',
            DistortionKind::Blur => 'b',
            DistortionKind::Noise => 'n',
        }
    }
}

/// Identifies one of the 20 pseudo reference images, e.g. c3 or n5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MpriLabel {
    pub kind: DistortionKind,
    /// Distortion level, 1..=5.
    pub level: usize,
}

impl std::fmt::Display for MpriLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.level)
    }
}

/// How a compression distortion is produced: the built-in path or an
/// external command template with {in}, {out} and {arg} placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CodecChoice {
    /// JPEG via the built-in encoder; JP2K via the wavelet surrogate
    /// (2-level Haar transform + uniform coefficient quantization with the
    /// step chosen to hit the target compression ratio).
    Builtin,
    /// External command, e.g. `mycodec {in} {out} {arg}`.
    Command(String),
}

impl Default for CodecChoice {
    fn default() -> Self {
        CodecChoice::Builtin
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub jpeg: CodecChoice,
    pub jp2k: CodecChoice,
}

/// Generate the 20 pseudo reference images in fixed label order
/// c1..c5, k1..k5, b1..b5, n1..n5. Noise is deterministic given `seed`.
pub fn generate_mpris(
    img: &GrayImage,
    seed: u64,
    codecs: &CodecConfig,
) -> Result<Vec<(MpriLabel, GrayImage)>, FeatureError> {
    let mut out = Vec::with_capacity(20);
    for level in 1..=5 {
        let quality = 2 * level as u8 - 2;
        let distorted = match &codecs.jpeg {
            CodecChoice::Builtin => jpeg_roundtrip(img, quality, level)?,
            CodecChoice::Command(tpl) => {
                run_codec_command(tpl, img, &quality.to_string(), "jpeg", level)?
            }
        };
        out.push((
            MpriLabel {
                kind: DistortionKind::Jpeg,
                level,
            },
            distorted,
        ));
    }
    for level in 1..=5 {
        let ratio = 25.0 * level as f64;
        let distorted = match &codecs.jp2k {
            CodecChoice::Builtin => wavelet_surrogate(img, ratio),
            CodecChoice::Command(tpl) => {
                run_codec_command(tpl, img, &format!("{ratio}"), "jp2k", level)?
            }
        };
        out.push((
            MpriLabel {
                kind: DistortionKind::Jp2k,
                level,
            },
            distorted,
        ));
    }
    for level in 1..=5 {
        let sigma = 0.5 * level as f64;
        out.push((
            MpriLabel {
                kind: DistortionKind::Blur,
                level,
            },
            gaussian_blur(img, sigma),
        ));
    }
    for level in 1..=5 {
        let variance = 0.1 * level as f64;
        let field = noise_field(img.width(), img.height(), seed, level);
        out.push((
            MpriLabel {
                kind: DistortionKind::Noise,
                level,
            },
            awgn_with_field(img, &field, variance),
        ));
    }
    Ok(out)
}

fn to_luma8(img: &GrayImage) -> Vec<u8> {
    img.data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn jpeg_roundtrip(img: &GrayImage, quality: u8, level: usize) -> Result<GrayImage, FeatureError> {
    // The encoder rejects quality 0; the lowest legal setting stands in.
    let q = quality.max(1);
    if q != quality {
        log::debug!("jpeg quality {quality} mapped to encoder minimum {q}");
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(Cursor::new(&mut buf), q)
        .write_image(&to_luma8(img), w, h, image::ExtendedColorType::L8)
        .map_err(|e| FeatureError::Codec {
            distortion: "jpeg",
            level,
            message: e.to_string(),
        })?;
    let decoded = image::load_from_memory(&buf).map_err(|e| FeatureError::Codec {
        distortion: "jpeg",
        level,
        message: e.to_string(),
    })?;
    let luma = decoded.to_luma8();
    if luma.width() != w || luma.height() != h {
        return Err(FeatureError::Codec {
            distortion: "jpeg",
            level,
            message: "decoded dimensions differ from input".into(),
        });
    }
    let data = luma.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    Ok(GrayImage::from_parts_unchecked(
        img.width(),
        img.height(),
        data,
    ))
}

// ---- JP2K surrogate: 2-level Haar + uniform quantization ----

struct Haar2 {
    width: usize,
    height: usize,
    coeffs: Vec<f64>,
    /// LL region size after the final level.
    ll_w: usize,
    ll_h: usize,
}

fn haar_fwd_1d(v: &mut [f64], n: usize, scratch: &mut Vec<f64>) {
    let half = n.div_ceil(2);
    scratch.clear();
    scratch.resize(n, 0.0);
    for i in 0..n / 2 {
        scratch[i] = 0.5 * (v[2 * i] + v[2 * i + 1]);
        scratch[half + i] = 0.5 * (v[2 * i] - v[2 * i + 1]);
    }
    if n % 2 == 1 {
        scratch[half - 1] = v[n - 1];
    }
    v[..n].copy_from_slice(&scratch[..n]);
}

fn haar_inv_1d(v: &mut [f64], n: usize, scratch: &mut Vec<f64>) {
    let half = n.div_ceil(2);
    scratch.clear();
    scratch.resize(n, 0.0);
    for i in 0..n / 2 {
        scratch[2 * i] = v[i] + v[half + i];
        scratch[2 * i + 1] = v[i] - v[half + i];
    }
    if n % 2 == 1 {
        scratch[n - 1] = v[half - 1];
    }
    v[..n].copy_from_slice(&scratch[..n]);
}

fn haar_forward(img: &GrayImage, levels: usize) -> Haar2 {
    let (w, h) = (img.width(), img.height());
    let mut coeffs = img.data().to_vec();
    let mut scratch = Vec::new();
    let (mut cw, mut ch) = (w, h);
    for _ in 0..levels {
        let mut row = vec![0.0; cw];
        for y in 0..ch {
            row[..cw].copy_from_slice(&coeffs[y * w..y * w + cw]);
            haar_fwd_1d(&mut row, cw, &mut scratch);
            coeffs[y * w..y * w + cw].copy_from_slice(&row[..cw]);
        }
        let mut col = vec![0.0; ch];
        for x in 0..cw {
            for y in 0..ch {
                col[y] = coeffs[y * w + x];
            }
            haar_fwd_1d(&mut col, ch, &mut scratch);
            for y in 0..ch {
                coeffs[y * w + x] = col[y];
            }
        }
        cw = cw.div_ceil(2);
        ch = ch.div_ceil(2);
    }
    Haar2 {
        width: w,
        height: h,
        coeffs,
        ll_w: cw,
        ll_h: ch,
    }
}

fn haar_inverse(t: &Haar2, levels: usize) -> Vec<f64> {
    let (w, h) = (t.width, t.height);
    let mut coeffs = t.coeffs.clone();
    let mut scratch = Vec::new();
    // Region sizes per level, innermost last.
    let mut sizes = Vec::with_capacity(levels);
    let (mut cw, mut ch) = (w, h);
    for _ in 0..levels {
        sizes.push((cw, ch));
        cw = cw.div_ceil(2);
        ch = ch.div_ceil(2);
    }
    for &(cw, ch) in sizes.iter().rev() {
        let mut col = vec![0.0; ch];
        for x in 0..cw {
            for y in 0..ch {
                col[y] = coeffs[y * w + x];
            }
            haar_inv_1d(&mut col, ch, &mut scratch);
            for y in 0..ch {
                coeffs[y * w + x] = col[y];
            }
        }
        let mut row = vec![0.0; cw];
        for y in 0..ch {
            row[..cw].copy_from_slice(&coeffs[y * w..y * w + cw]);
            haar_inv_1d(&mut row, cw, &mut scratch);
            coeffs[y * w..y * w + cw].copy_from_slice(&row[..cw]);
        }
    }
    coeffs
}

impl Haar2 {
    fn is_ll(&self, x: usize, y: usize) -> bool {
        x < self.ll_w && y < self.ll_h
    }

    /// Count nonzero coefficients after quantization with `step` (the LL
    /// band uses step/4) and estimate the coded byte size.
    fn byte_estimate(&self, step: f64) -> f64 {
        let mut nnz = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                let s = if self.is_ll(x, y) { step / 4.0 } else { step };
                if (self.coeffs[y * self.width + x] / s).round() != 0.0 {
                    nnz += 1;
                }
            }
        }
        2.0 * nnz as f64 + 64.0
    }

    fn quantized(&self, step: f64) -> Haar2 {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let (x, y) = (i % self.width, i / self.width);
                let s = if self.is_ll(x, y) { step / 4.0 } else { step };
                (c / s).round() * s
            })
            .collect();
        Haar2 {
            width: self.width,
            height: self.height,
            coeffs,
            ll_w: self.ll_w,
            ll_h: self.ll_h,
        }
    }
}

/// Wavelet compression surrogate: the quantization step is bisected so the
/// kept-coefficient byte estimate hits the target compression ratio.
fn wavelet_surrogate(img: &GrayImage, target_ratio: f64) -> GrayImage {
    const LEVELS: usize = 2;
    let transform = haar_forward(img, LEVELS);
    let original_bytes = (img.width() * img.height()) as f64;

    let ratio_at = |step: f64| original_bytes / transform.byte_estimate(step);
    let (mut lo, mut hi) = (1e-5, 2.0);
    if ratio_at(hi) < target_ratio {
        lo = hi; // even maximal quantization cannot reach the ratio
    } else {
        for _ in 0..48 {
            let mid = (lo * hi).sqrt();
            if ratio_at(mid) < target_ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let step = if lo >= hi { hi } else { (lo * hi).sqrt() };
    let data = haar_inverse(&transform.quantized(step), LEVELS)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    GrayImage::from_parts_unchecked(img.width(), img.height(), data)
}

// ---- Gaussian blur ----

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i - 1;
    }
    if i >= n {
        i = 2 * n - i - 1;
    }
    i as usize
}

pub(crate) fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps = Vec::with_capacity(2 * radius + 1);
    let mut sum = 0.0;
    for k in 0..=2 * radius {
        let d = k as f64 - radius as f64;
        let t = (-d * d / (2.0 * sigma * sigma)).exp();
        taps.push(t);
        sum += t;
    }
    for t in taps.iter_mut() {
        *t /= sum;
    }

    let (w, h) = (img.width(), img.height());
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let xi = mirror(x as isize + k as isize - radius as isize, w);
                acc += t * img.get(xi, y);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let yi = mirror(y as isize + k as isize - radius as isize, h);
                acc += t * tmp[yi * w + x];
            }
            out[y * w + x] = acc.clamp(0.0, 1.0);
        }
    }
    GrayImage::from_parts_unchecked(w, h, out)
}

// ---- White Gaussian noise ----

/// Standard-normal field for one noise level; deterministic given (seed,
/// level). Box-Muller over a ChaCha stream.
pub(crate) fn noise_field(width: usize, height: usize, seed: u64, level: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(level as u64));
    let n = width * height;
    let mut field = Vec::with_capacity(n + 1);
    while field.len() < n {
        let mut u1: f64 = rng.gen();
        while u1 <= 0.0 {
            u1 = rng.gen();
        }
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        field.push(r * theta.cos());
        field.push(r * theta.sin());
    }
    field.truncate(n);
    field
}

pub(crate) fn awgn_with_field(img: &GrayImage, field: &[f64], variance: f64) -> GrayImage {
    let sigma = variance.sqrt();
    let data = img
        .data()
        .iter()
        .zip(field.iter())
        .map(|(&v, &z)| (v + sigma * z).clamp(0.0, 1.0))
        .collect();
    GrayImage::from_parts_unchecked(img.width(), img.height(), data)
}

// ---- External codec command ----

fn run_codec_command(
    template: &str,
    img: &GrayImage,
    arg: &str,
    distortion: &'static str,
    level: usize,
) -> Result<GrayImage, FeatureError> {
    let codec_err = |message: String| FeatureError::Codec {
        distortion,
        level,
        message,
    };

    let dir = std::env::temp_dir();
    let tag = format!(
        "iqsd-{}-{}-{}-{}",
        std::process::id(),
        distortion,
        level,
        arg.replace('.', "_")
    );
    let in_path = dir.join(format!("{tag}-in.png"));
    let out_path = dir.join(format!("{tag}-out.png"));

    image::save_buffer(
        &in_path,
        &to_luma8(img),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| codec_err(e.to_string()))?;

    let parts: Vec<String> = template
        .split_whitespace()
        .map(|p| {
            p.replace("{in}", &in_path.to_string_lossy())
                .replace("{out}", &out_path.to_string_lossy())
                .replace("{arg}", arg)
        })
        .collect();
    if parts.is_empty() {
        return Err(codec_err("empty codec command".into()));
    }
    let status = Command::new(&parts[0])
        .args(&parts[1..])
        .status()
        .map_err(|e| codec_err(e.to_string()))?;
    if !status.success() {
        return Err(codec_err(format!("codec exited with {status}")));
    }

    let result = GrayImage::from_path(&out_path).map_err(|e| codec_err(e.to_string()))?;
    let _ = std::fs::remove_file(&in_path);
    let _ = std::fs::remove_file(&out_path);
    if result.width() != img.width() || result.height() != img.height() {
        return Err(codec_err("codec changed image dimensions".into()));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{lbp_histogram, structural_similarity, synthetic_natural};

    #[test]
    fn produces_twenty_labeled_outputs() {
        let img = synthetic_natural(32, 32, 1);
        let mpris = generate_mpris(&img, 5, &CodecConfig::default()).unwrap();
        assert_eq!(mpris.len(), 20);
        let labels: Vec<String> = mpris.iter().map(|(l, _)| l.to_string()).collect();
        let expected: Vec<String> = "c1 c2 c3 c4 c5 k1 k2 k3 k4 k5 b1 b2 b3 b4 b5 n1 n2 n3 n4 n5"
            .split(' ')
            .map(str::to_string)
            .collect();
        assert_eq!(labels, expected);
        for (_, m) in &mpris {
            assert_eq!((m.width(), m.height()), (32, 32));
        }
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = GrayImage::new(20, 20, vec![0.42; 400]).unwrap();
        let blurred = gaussian_blur(&img, 2.5);
        for (a, b) in img.data().iter().zip(blurred.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let img = synthetic_natural(24, 24, 2);
        let a = generate_mpris(&img, 99, &CodecConfig::default()).unwrap();
        let b = generate_mpris(&img, 99, &CodecConfig::default()).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(b.iter()).skip(15) {
            assert_eq!(x.data(), y.data());
        }
        let c = generate_mpris(&img, 100, &CodecConfig::default()).unwrap();
        assert_ne!(a[15].1.data(), c[15].1.data());
    }

    #[test]
    fn blur_commutes_with_horizontal_flip() {
        let img = synthetic_natural(40, 28, 3);
        for sigma in [0.5, 1.5, 2.5] {
            let a = gaussian_blur(&img.flipped_horizontal(), sigma);
            let b = gaussian_blur(&img, sigma).flipped_horizontal();
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mirrored_noise_field_matches_flipped_lattice() {
        // Noise applied on the flipped lattice with the mirrored field gives
        // identical structural features.
        let img = synthetic_natural(36, 30, 4);
        let field = noise_field(36, 30, 7, 3);
        let mut mirrored = vec![0.0; field.len()];
        for y in 0..30 {
            for x in 0..36 {
                mirrored[y * 36 + x] = field[y * 36 + (35 - x)];
            }
        }
        let noisy = awgn_with_field(&img, &field, 0.3);
        let noisy_flipped = awgn_with_field(&img.flipped_horizontal(), &mirrored, 0.3);
        let s1 = structural_similarity(&lbp_histogram(&img), &lbp_histogram(&noisy));
        let s2 = structural_similarity(
            &lbp_histogram(&img.flipped_horizontal()),
            &lbp_histogram(&noisy_flipped),
        );
        assert!((s1 - s2).abs() < 1e-6, "{s1} vs {s2}");
    }

    #[test]
    fn haar_roundtrip_is_exact_without_quantization() {
        for (w, h) in [(16, 16), (17, 19), (32, 21)] {
            let img = synthetic_natural(w.max(16), h.max(16), 6);
            let t = haar_forward(&img, 2);
            let back = haar_inverse(&t, 2);
            for (a, b) in img.data().iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn surrogate_compression_degrades_with_ratio() {
        let img = synthetic_natural(64, 64, 8);
        let mut prev_err = -1.0;
        for level in 1..=5 {
            let out = wavelet_surrogate(&img, 25.0 * level as f64);
            let err: f64 = img
                .data()
                .iter()
                .zip(out.data())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!(
                err >= prev_err - 1e-9,
                "level {level}: {err} < {prev_err}"
            );
            prev_err = err;
        }
        assert!(prev_err > 0.0);
    }
}
