//! Maximum-likelihood fits, histogramization and chi-square testing for the
//! eight classical distribution families compared against the alpha-stable
//! model.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Gamma as GammaDist};
use statrs::function::erf::erf;
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::hist::{HistogramError, ScoreHistogram};
use crate::simplex::{minimize, SimplexOptions};

#[derive(Debug, Error)]
pub enum DistError {
    #[error("need at least 2 distinct samples, got {0} distinct")]
    Degenerate(usize),
    #[error("sample outside the support of {family}: {value}")]
    Support { family: &'static str, value: f64 },
    #[error("non-finite sample value")]
    NonFinite,
    #[error("total probability mass {0:.3e} inside the histogram range is below 1e-6")]
    DegenerateSupport(f64),
    #[error("fewer than 2 bins remain after merging low-expectation bins")]
    InsufficientBins,
    #[error("observed counts sum to zero")]
    NoObservations,
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// The classical families of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    HalfNormal,
    Exponential,
    Lognormal,
    Gamma,
    GeneralizedPareto,
    Beta,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Gaussian,
        Family::HalfNormal,
        Family::Exponential,
        Family::Lognormal,
        Family::Gamma,
        Family::GeneralizedPareto,
        Family::Beta,
        Family::Weibull,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::HalfNormal => "half-normal",
            Family::Exponential => "exponential",
            Family::Lognormal => "lognormal",
            Family::Gamma => "gamma",
            Family::GeneralizedPareto => "generalized-pareto",
            Family::Beta => "beta",
            Family::Weibull => "weibull",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Family::HalfNormal | Family::Exponential => 1,
            _ => 2,
        }
    }

    /// Positive-support families are fit after the `x - min(x) + 0.5` shift.
    fn shifted(&self) -> bool {
        matches!(
            self,
            Family::HalfNormal
                | Family::Exponential
                | Family::Lognormal
                | Family::Gamma
                | Family::GeneralizedPareto
                | Family::Weibull
        )
    }
}

/// A fitted classical distribution. `support_offset` is the location shift
/// applied before fitting and inverted at histogramization; the beta family
/// instead lives on scores rescaled by 1/100.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalFit {
    pub family: Family,
    pub params: Vec<f64>,
    pub support_offset: f64,
    pub converged: bool,
}

/// Maximum-likelihood fit of `family` to opinion scores.
pub fn fit_classical(family: Family, samples: &[f64]) -> Result<ClassicalFit, DistError> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(DistError::NonFinite);
    }
    let distinct = {
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.dedup();
        s.len()
    };
    if distinct < 2 {
        return Err(DistError::Degenerate(distinct));
    }

    let (ys, offset): (Vec<f64>, f64) = if family.shifted() {
        let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let offset = min - 0.5;
        (samples.iter().map(|&x| x - offset).collect(), offset)
    } else if family == Family::Beta {
        (
            samples
                .iter()
                .map(|&x| (x / 100.0).clamp(1e-6, 1.0 - 1e-6))
                .collect(),
            0.0,
        )
    } else {
        (samples.to_vec(), 0.0)
    };

    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;

    let (params, converged) = match family {
        Family::Gaussian => {
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            (vec![mean, var.sqrt()], true)
        }
        Family::HalfNormal => {
            let sigma2 = ys.iter().map(|y| y * y).sum::<f64>() / n;
            (vec![sigma2.sqrt()], true)
        }
        Family::Exponential => (vec![1.0 / mean], true),
        Family::Lognormal => {
            let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            let m = logs.iter().sum::<f64>() / n;
            let v = logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / n;
            (vec![m, v.sqrt().max(1e-9)], true)
        }
        Family::Gamma => fit_gamma(&ys, mean),
        Family::Weibull => fit_weibull(&ys),
        Family::Beta => fit_beta(&ys),
        Family::GeneralizedPareto => fit_gpd(&ys, mean),
    };

    Ok(ClassicalFit {
        family,
        params,
        support_offset: offset,
        converged,
    })
}

fn fit_gamma(ys: &[f64], mean: f64) -> (Vec<f64>, bool) {
    let n = ys.len() as f64;
    let mean_log = ys.iter().map(|y| y.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    if s <= 1e-12 {
        // Nearly constant data: gamma degenerates toward a spike.
        return (vec![1e6, mean / 1e6], false);
    }
    // Minka's closed-form start, then Newton on ln k - digamma(k) = s.
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let mut converged = false;
    for _ in 0..60 {
        let g = k.ln() - digamma(k) - s;
        // d/dk [ln k - digamma(k)], trigamma by central difference.
        let h = 1e-6 * k.max(1e-6);
        let dg = 1.0 / k - (digamma(k + h) - digamma(k - h)) / (2.0 * h);
        let step = g / dg;
        k -= step;
        k = k.clamp(1e-4, 1e7);
        if step.abs() <= 1e-10 * k {
            converged = true;
            break;
        }
    }
    (vec![k, mean / k], converged)
}

fn fit_weibull(ys: &[f64]) -> (Vec<f64>, bool) {
    let n = ys.len() as f64;
    let mean_log = ys.iter().map(|y| y.ln()).sum::<f64>() / n;
    let g = |k: f64| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &y in ys {
            let yk = y.powf(k);
            num += yk * y.ln();
            den += yk;
        }
        num / den - 1.0 / k - mean_log
    };
    let (mut lo, mut hi) = (0.02, 100.0);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        // Monotone equation has no root inside the bracket.
        let k = if g(lo) > 0.0 { lo } else { hi };
        let lambda = (ys.iter().map(|y| y.powf(k)).sum::<f64>() / n).powf(1.0 / k);
        return (vec![k, lambda], false);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let lambda = (ys.iter().map(|y| y.powf(k)).sum::<f64>() / n).powf(1.0 / k);
    (vec![k, lambda], true)
}

fn fit_beta(ys: &[f64]) -> (Vec<f64>, bool) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).max(1e-9);
    let common = (mean * (1.0 - mean) / var - 1.0).max(0.1);
    let (a0, b0) = (mean * common, (1.0 - mean) * common);

    let sum_log = ys.iter().map(|y| y.ln()).sum::<f64>();
    let sum_log1m = ys.iter().map(|y| (1.0 - y).ln()).sum::<f64>();
    let nll = |p: &[f64]| -> f64 {
        let (a, b) = (p[0].exp(), p[1].exp());
        if !(1e-4..=1e6).contains(&a) || !(1e-4..=1e6).contains(&b) {
            return f64::INFINITY;
        }
        let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        -((a - 1.0) * sum_log + (b - 1.0) * sum_log1m - n * ln_beta)
    };
    let r = minimize(
        nll,
        &[a0.max(1e-3).ln(), b0.max(1e-3).ln()],
        &[0.2, 0.2],
        &SimplexOptions::default(),
    );
    (vec![r.point[0].exp(), r.point[1].exp()], r.converged)
}

fn fit_gpd(ys: &[f64], mean: f64) -> (Vec<f64>, bool) {
    let n = ys.len() as f64;
    let var = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).max(1e-9);
    // Method-of-moments start.
    let xi0 = 0.5 * (1.0 - mean * mean / var);
    let sigma0 = 0.5 * mean * (mean * mean / var + 1.0);
    let y_max = ys.iter().cloned().fold(0.0f64, f64::max);

    let nll = |p: &[f64]| -> f64 {
        let (sigma, xi) = (p[0].exp(), p[1]);
        if sigma <= 0.0 || !sigma.is_finite() {
            return f64::INFINITY;
        }
        if xi < 0.0 && 1.0 + xi * y_max / sigma <= 0.0 {
            return f64::INFINITY;
        }
        let mut ll = -n * sigma.ln();
        if xi.abs() < 1e-8 {
            ll -= ys.iter().sum::<f64>() / sigma;
        } else {
            let c = 1.0 + 1.0 / xi;
            for &y in ys {
                let u = 1.0 + xi * y / sigma;
                if u <= 0.0 {
                    return f64::INFINITY;
                }
                ll -= c * u.ln();
            }
        }
        -ll
    };
    let r = minimize(
        nll,
        &[sigma0.max(1e-3).ln(), xi0.clamp(-0.45, 0.45)],
        &[0.3, 0.1],
        &SimplexOptions::default(),
    );
    (vec![r.point[0].exp(), r.point[1]], r.converged)
}

/// CDF of the fitted family in shifted/rescaled coordinates.
fn family_cdf(fit: &ClassicalFit, y: f64) -> f64 {
    let p = &fit.params;
    match fit.family {
        Family::Gaussian => {
            let (m, s) = (p[0], p[1]);
            if s <= 1e-12 {
                return if y < m { 0.0 } else { 1.0 };
            }
            0.5 * (1.0 + erf((y - m) / (s * std::f64::consts::SQRT_2)))
        }
        Family::HalfNormal => {
            if y <= 0.0 {
                0.0
            } else {
                erf(y / (p[0] * std::f64::consts::SQRT_2))
            }
        }
        Family::Exponential => {
            if y <= 0.0 {
                0.0
            } else {
                1.0 - (-p[0] * y).exp()
            }
        }
        Family::Lognormal => {
            if y <= 0.0 {
                0.0
            } else {
                0.5 * (1.0 + erf((y.ln() - p[0]) / (p[1] * std::f64::consts::SQRT_2)))
            }
        }
        Family::Gamma => {
            if y <= 0.0 {
                0.0
            } else {
                GammaDist::new(p[0], 1.0 / p[1])
                    .map(|d| d.cdf(y))
                    .unwrap_or(0.0)
            }
        }
        Family::GeneralizedPareto => {
            let (sigma, xi) = (p[0], p[1]);
            if y <= 0.0 {
                0.0
            } else if xi.abs() < 1e-8 {
                1.0 - (-y / sigma).exp()
            } else {
                let u = 1.0 + xi * y / sigma;
                if u <= 0.0 {
                    1.0
                } else {
                    1.0 - u.powf(-1.0 / xi)
                }
            }
        }
        Family::Beta => Beta::new(p[0], p[1]).map(|d| d.cdf(y)).unwrap_or(0.0),
        Family::Weibull => {
            if y <= 0.0 {
                0.0
            } else {
                1.0 - (-(y / p[1]).powf(p[0])).exp()
            }
        }
    }
}

/// CDF of the fit on the original score axis.
pub fn fit_cdf(fit: &ClassicalFit, x: f64) -> f64 {
    let y = if fit.family == Family::Beta {
        x / 100.0
    } else {
        x - fit.support_offset
    };
    family_cdf(fit, y)
}

/// Bin-integrated, in-range-renormalized density histogram of a classical
/// fit (the same contract as the stable histogramization).
pub fn classical_histogram(
    fit: &ClassicalFit,
    edges: &[f64],
) -> Result<ScoreHistogram, DistError> {
    let cdfs: Vec<f64> = edges.iter().map(|&e| fit_cdf(fit, e)).collect();
    let total = cdfs[cdfs.len() - 1] - cdfs[0];
    if total < 1e-6 {
        return Err(DistError::DegenerateSupport(total));
    }
    let masses: Vec<f64> = cdfs.windows(2).map(|c| (c[1] - c[0]).max(0.0)).collect();
    Ok(ScoreHistogram::from_masses(edges.to_vec(), &masses)?)
}

/// Chi-square goodness-of-fit result at the 0.05 level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub reject_at_05: bool,
}

/// Pearson chi-square test of observed per-bin counts against a model
/// histogram. Adjacent bins are merged until every expected count is at
/// least 5; dof = bins_after_merge - 1 - n_fitted_params, floored at 1.
pub fn chi_square_gof(
    observed_counts: &[usize],
    model: &ScoreHistogram,
    n_fitted_params: usize,
) -> Result<GofResult, DistError> {
    assert_eq!(observed_counts.len(), model.densities().len());
    let n: usize = observed_counts.iter().sum();
    if n == 0 {
        return Err(DistError::NoObservations);
    }
    let expected: Vec<f64> = model.masses().iter().map(|m| m * n as f64).collect();

    // Merge left to right; a trailing underweight group joins its neighbor.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (o, e) in observed_counts.iter().zip(expected.iter()) {
        acc_obs += *o as f64;
        acc_exp += *e;
        if acc_exp >= 5.0 {
            merged.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = merged.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            merged.push((acc_obs, acc_exp));
        }
    }
    if merged.len() < 2 {
        return Err(DistError::InsufficientBins);
    }

    let statistic: f64 = merged
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = merged.len().saturating_sub(1 + n_fitted_params).max(1);
    let critical = ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.95);
    Ok(GofResult {
        statistic,
        dof,
        reject_at_05: statistic > critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_mle_is_population_moments() {
        let fit = fit_classical(Family::Gaussian, &[0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(fit.params[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.params[1], 1.0, epsilon = 1e-12); // sqrt of MSE variance 1
    }

    #[test]
    fn exponential_mle_rate() {
        // Shift convention: y = x - min + 0.5, so the rate is 1/mean(y).
        let xs = [1.0, 2.0, 3.0, 6.0];
        let fit = fit_classical(Family::Exponential, &xs).unwrap();
        let mean_y = (0.5 + 1.5 + 2.5 + 5.5) / 4.0;
        assert_abs_diff_eq!(fit.params[0], 1.0 / mean_y, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.support_offset, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_sample() {
        assert!(matches!(
            fit_classical(Family::Gaussian, &[5.0; 10]),
            Err(DistError::Degenerate(1))
        ));
    }

    #[test]
    fn beta_recovers_synthetic_shapes() {
        // Scores rescaled to (0,1) from a known Beta(2, 5) sample.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let beta = rand_distr::Beta::new(2.0, 5.0).unwrap();
        let xs: Vec<f64> = (0..10_000)
            .map(|_| 100.0 * rand::Rng::sample(&mut rng, beta))
            .collect();
        let fit = fit_classical(Family::Beta, &xs).unwrap();
        assert!((fit.params[0] - 2.0).abs() < 0.1, "a = {}", fit.params[0]);
        assert!((fit.params[1] - 5.0).abs() < 0.1, "b = {}", fit.params[1]);
    }

    #[test]
    fn gamma_recovers_synthetic_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gamma = rand_distr::Gamma::new(3.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| rand::Rng::sample(&mut rng, gamma))
            .collect();
        let fit = fit_classical(Family::Gamma, &xs).unwrap();
        assert!(fit.converged);
        // The x - min + 0.5 support shift perturbs the shape slightly.
        assert!((fit.params[0] - 3.0).abs() < 0.5, "shape {}", fit.params[0]);
    }

    #[test]
    fn weibull_recovers_synthetic_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let weibull = rand_distr::Weibull::new(10.0, 2.5).unwrap();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| rand::Rng::sample(&mut rng, weibull))
            .collect();
        let fit = fit_classical(Family::Weibull, &xs).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 2.5).abs() < 0.4, "shape {}", fit.params[0]);
    }

    #[test]
    fn histogram_of_near_point_mass_gaussian() {
        let fit = ClassicalFit {
            family: Family::Gaussian,
            params: vec![55.0, 1e-15],
            support_offset: 0.0,
            converged: true,
        };
        let h = classical_histogram(&fit, &ScoreHistogram::default_edges()).unwrap();
        assert_abs_diff_eq!(h.densities()[5], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn histogram_normalization_across_families() {
        let xs: Vec<f64> = (0..200).map(|i| 20.0 + 60.0 * (i as f64 / 199.0)).collect();
        for family in Family::ALL {
            let fit = fit_classical(family, &xs).unwrap();
            let h = classical_histogram(&fit, &ScoreHistogram::default_edges()).unwrap();
            let total: f64 = h.masses().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exponential_histogram_matches_closed_form() {
        let fit = ClassicalFit {
            family: Family::Exponential,
            params: vec![0.05],
            support_offset: 0.0,
            converged: true,
        };
        let edges = ScoreHistogram::default_edges();
        let h = classical_histogram(&fit, &edges).unwrap();
        // Hand-evaluated CDF differences renormalized to the [0,100] range.
        let cdf = |x: f64| 1.0 - (-0.05 * x).exp();
        let total = cdf(100.0) - cdf(0.0);
        for k in 0..10 {
            let mass = (cdf(10.0 * (k + 1) as f64) - cdf(10.0 * k as f64)) / total;
            assert_abs_diff_eq!(h.densities()[k], mass / 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chi_square_zero_for_exact_match() {
        let model =
            ScoreHistogram::from_masses(ScoreHistogram::default_edges(), &[1.0; 10]).unwrap();
        let observed = [20usize; 10];
        let r = chi_square_gof(&observed, &model, 2).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert!(!r.reject_at_05);
    }

    #[test]
    fn chi_square_rejects_one_hot_against_uniform() {
        let model =
            ScoreHistogram::from_masses(ScoreHistogram::default_edges(), &[1.0; 10]).unwrap();
        let mut observed = [0usize; 10];
        observed[3] = 187;
        let r = chi_square_gof(&observed, &model, 2).unwrap();
        assert!(r.reject_at_05, "statistic {}", r.statistic);
    }

    #[test]
    fn chi_square_dof_floor() {
        // Masses chosen so merging leaves 3 groups; 4 fitted params.
        let masses = [0.05, 0.4, 0.4, 0.15];
        let edges = vec![0.0, 25.0, 50.0, 75.0, 100.0];
        let model = ScoreHistogram::from_masses(edges, &masses).unwrap();
        let observed = [5usize, 40, 40, 15];
        let r = chi_square_gof(&observed, &model, 4).unwrap();
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn chi_square_insufficient_bins() {
        let model = ScoreHistogram::from_masses(vec![0.0, 50.0, 100.0], &[0.5, 0.5]).unwrap();
        let observed = [1usize, 1];
        assert!(matches!(
            chi_square_gof(&observed, &model, 1),
            Err(DistError::InsufficientBins)
        ));
    }

    #[test]
    fn gaussian_histogram_self_consistency() {
        let xs: Vec<f64> = (0..100).map(|i| 30.0 + (i % 41) as f64).collect();
        let fit = fit_classical(Family::Gaussian, &xs).unwrap();
        let edges = ScoreHistogram::default_edges();
        let h1 = classical_histogram(&fit, &edges).unwrap();
        let h2 = classical_histogram(&fit, &edges).unwrap();
        let rmse = (h1
            .densities()
            .iter()
            .zip(h2.densities())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / h1.densities().len() as f64)
            .sqrt();
        assert!(rmse < 1e-9);
    }
}
