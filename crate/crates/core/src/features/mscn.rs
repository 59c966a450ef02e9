//! Mean subtracted contrast normalized coefficients.
//!
//! Intensities are rescaled to [0, 255], locally normalized by the 7x7
//! Gaussian-weighted mean and standard deviation (sigma_w = 7/6, unit sum),
//! with mirror padding at the borders.

use super::GrayImage;

const RADIUS: usize = 3;
const WINDOW_SIGMA: f64 = 7.0 / 6.0;

fn gaussian_taps() -> [f64; 2 * RADIUS + 1] {
    let mut taps = [0.0; 2 * RADIUS + 1];
    let mut sum = 0.0;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - RADIUS as f64;
        *t = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
        sum += *t;
    }
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps
}

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

/// Separable convolution with mirror padding.
fn convolve(w: usize, h: usize, data: &[f64], taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let xi = mirror(x as isize + k as isize - r as isize, w);
                acc += t * data[y * w + xi];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let yi = mirror(y as isize + k as isize - r as isize, h);
                acc += t * tmp[yi * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn mscn(img: &GrayImage) -> Vec<f64> {
    mscn_raw(img.width(), img.height(), img.data())
}

pub(crate) fn mscn_raw(w: usize, h: usize, data: &[f64]) -> Vec<f64> {
    let taps = gaussian_taps();
    let scaled: Vec<f64> = data.iter().map(|&v| v * 255.0).collect();
    let squares: Vec<f64> = scaled.iter().map(|&v| v * v).collect();
    let mu = convolve(w, h, &scaled, &taps);
    let second = convolve(w, h, &squares, &taps);
    scaled
        .iter()
        .zip(mu.iter().zip(second.iter()))
        .map(|(&i, (&m, &s2))| {
            let var = (s2 - m * m).max(0.0);
            (i - m) / (var.sqrt() + 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_image_gives_zero_field() {
        let img = GrayImage::new(16, 16, vec![0.7; 256]).unwrap();
        for v in mscn(&img) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn invariant_to_additive_shift() {
        let mut data = Vec::with_capacity(24 * 24);
        for y in 0..24 {
            for x in 0..24 {
                data.push(0.2 + 0.4 * ((x * 7 + y * 3) % 11) as f64 / 11.0);
            }
        }
        let img = GrayImage::new(24, 24, data.clone()).unwrap();
        let shifted =
            GrayImage::new(24, 24, data.iter().map(|v| v + 0.15).collect()).unwrap();
        for (a, b) in mscn(&img).iter().zip(mscn(&shifted)) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-9);
        }
    }

    #[test]
    fn matches_naive_windowed_computation() {
        // Independent direct double loop over the 7x7 window.
        let mut data = Vec::with_capacity(16 * 16);
        for y in 0..16 {
            for x in 0..16 {
                data.push(if (x / 4 + y / 4) % 2 == 0 { 0.25 } else { 0.75 });
            }
        }
        let img = GrayImage::new(16, 16, data.clone()).unwrap();
        let fast = mscn(&img);

        let taps = gaussian_taps();
        let mut naive = vec![0.0; 256];
        for y in 0..16usize {
            for x in 0..16usize {
                let mut mu = 0.0;
                for dy in -3isize..=3 {
                    for dx in -3isize..=3 {
                        let wgt = taps[(dy + 3) as usize] * taps[(dx + 3) as usize];
                        let yi = mirror(y as isize + dy, 16);
                        let xi = mirror(x as isize + dx, 16);
                        mu += wgt * data[yi * 16 + xi] * 255.0;
                    }
                }
                let mut var = 0.0;
                for dy in -3isize..=3 {
                    for dx in -3isize..=3 {
                        let wgt = taps[(dy + 3) as usize] * taps[(dx + 3) as usize];
                        let yi = mirror(y as isize + dy, 16);
                        let xi = mirror(x as isize + dx, 16);
                        let v = data[yi * 16 + xi] * 255.0;
                        var += wgt * (v - mu) * (v - mu);
                    }
                }
                naive[y * 16 + x] = (data[y * 16 + x] * 255.0 - mu) / (var.sqrt() + 1.0);
            }
        }

        for (f, n) in fast.iter().zip(naive.iter()) {
            assert_abs_diff_eq!(f, n, epsilon = 1e-9);
        }
    }
}
