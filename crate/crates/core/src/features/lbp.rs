//! Local binary patterns with 4 neighbors at distance 1 and the resulting
//! 5-bin histogram used for structural similarity.

use super::GrayImage;

/// Normalized histogram of the LBP values 0..4 over interior pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbpHistogram {
    bins: [f64; 5],
}

impl LbpHistogram {
    pub fn bins(&self) -> &[f64; 5] {
        &self.bins
    }

    pub fn from_bins(bins: [f64; 5]) -> Option<Self> {
        let sum: f64 = bins.iter().sum();
        (bins.iter().all(|&b| (0.0..=1.0).contains(&b)) && (sum - 1.0).abs() <= 1e-9)
            .then_some(Self { bins })
    }
}

/// Per-pixel LBP code: the count of the 4 axial neighbors (up, right, down,
/// left) not darker than the center; equal neighbors count as 1. The 1-pixel
/// border is excluded from the histogram.
pub fn lbp_histogram(img: &GrayImage) -> LbpHistogram {
    let (w, h) = (img.width(), img.height());
    let mut counts = [0usize; 5];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = img.get(x, y);
            let mut code = 0usize;
            if img.get(x, y - 1) >= c {
                code += 1;
            }
            if img.get(x + 1, y) >= c {
                code += 1;
            }
            if img.get(x, y + 1) >= c {
                code += 1;
            }
            if img.get(x - 1, y) >= c {
                code += 1;
            }
            counts[code] += 1;
        }
    }
    let total = ((w - 2) * (h - 2)) as f64;
    let mut bins = [0.0; 5];
    for (b, &c) in bins.iter_mut().zip(counts.iter()) {
        *b = c as f64 / total;
    }
    LbpHistogram { bins }
}

/// Chi-square-style distance between two LBP histograms:
/// sum of (a_k - b_k)^2 / (a_k + b_k) with 0/0 terms contributing 0.
/// Zero iff the histograms are equal.
pub fn structural_similarity(a: &LbpHistogram, b: &LbpHistogram) -> f64 {
    a.bins
        .iter()
        .zip(b.bins.iter())
        .map(|(&x, &y)| {
            let denom = x + y;
            if denom > 0.0 {
                (x - y) * (x - y) / denom
            } else {
                0.0
            }
        })
        .sum()
}
