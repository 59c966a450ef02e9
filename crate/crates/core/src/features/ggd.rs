//! Zero-mean generalized Gaussian shape estimation by moment matching.

use statrs::function::gamma::gamma;

use super::FeatureError;

const NU_LO: f64 = 0.2;
const NU_HI: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    /// Shape parameter.
    pub nu: f64,
    /// Variance of the distribution (second raw moment of the field).
    pub sigma2: f64,
    /// True when the moment ratio fell outside the invertible range and nu
    /// was clamped to the nearest endpoint.
    pub clamped: bool,
}

/// Moment ratio rho(nu) = Gamma(2/nu)^2 / (Gamma(1/nu) * Gamma(3/nu)),
/// strictly increasing on the search interval.
pub(crate) fn moment_ratio(nu: f64) -> f64 {
    let g2 = gamma(2.0 / nu);
    g2 * g2 / (gamma(1.0 / nu) * gamma(3.0 / nu))
}

/// Estimate (nu, sigma^2) of a zero-mean GGD from a coefficient field:
/// rho = (mean|x|)^2 / mean(x^2), solved for nu by bisection on [0.2, 10].
pub fn ggd_fit(coeffs: &[f64]) -> Result<GgdFit, FeatureError> {
    if coeffs.len() < 100 {
        return Err(FeatureError::TooFewCoefficients(coeffs.len()));
    }
    let n = coeffs.len() as f64;
    let mean_abs = coeffs.iter().map(|x| x.abs()).sum::<f64>() / n;
    let mean_sq = coeffs.iter().map(|x| x * x).sum::<f64>() / n;
    if mean_sq <= 0.0 {
        return Err(FeatureError::DegenerateField);
    }
    let rho = mean_abs * mean_abs / mean_sq;

    let (lo_val, hi_val) = (moment_ratio(NU_LO), moment_ratio(NU_HI));
    if rho <= lo_val {
        return Ok(GgdFit {
            nu: NU_LO,
            sigma2: mean_sq,
            clamped: true,
        });
    }
    if rho >= hi_val {
        return Ok(GgdFit {
            nu: NU_HI,
            sigma2: mean_sq,
            clamped: true,
        });
    }

    let (mut lo, mut hi) = (NU_LO, NU_HI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moment_ratio(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GgdFit {
        nu: 0.5 * (lo + hi),
        sigma2: mean_sq,
        clamped: false,
    })
}
