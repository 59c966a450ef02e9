//! Adaptive Gauss-Kronrod quadrature on finite intervals.
//!
//! 7-point Gauss / 15-point Kronrod panels with worst-error-first bisection.
//! Callers integrating oscillatory functions should pass pre-split panels
//! sized to the oscillation period via [`integrate_with_breaks`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// QUADPACK dqk15 abscissae (positive half) and weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// One G7/K15 evaluation on [a, b]. Endpoints are never sampled.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    gauss += WG[3] * fc;

    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let raw_err = ((kronrod - gauss) * half).abs();
    res_asc *= half.abs();
    res_abs *= half.abs();

    // QUADPACK error rescaling.
    let mut err = raw_err;
    if res_asc != 0.0 && raw_err != 0.0 {
        let scale = (200.0 * raw_err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let min_err = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && min_err > err {
        err = min_err;
    }

    Panel {
        a,
        b,
        value: kronrod * half,
        error: err,
    }
}

/// Integrate `f` over the panels defined by `breaks` (sorted, at least 2),
/// bisecting the worst panel until the summed error estimate drops below
/// `abs_tol` or `max_panels` panels exist.
pub(crate) fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> QuadResult {
    debug_assert!(breaks.len() >= 2);
    let mut heap: BinaryHeap<Panel> = BinaryHeap::with_capacity(breaks.len().max(64));
    let mut total = 0.0;
    let mut total_err = 0.0;
    for pair in breaks.windows(2) {
        let p = gk15(&f, pair[0], pair[1]);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }

    while total_err > abs_tol && heap.len() < max_panels {
        let worst = heap.pop().expect("heap non-empty");
        if worst.error <= abs_tol * 1e-3 / (heap.len() + 1) as f64 {
            // Worst panel already negligible: error estimate is saturated
            // by rounding, no further subdivision will help.
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break; // interval at f64 resolution
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    QuadResult {
        value: total,
        abs_error: total_err,
        converged: total_err <= abs_tol,
    }
}

/// Integrate over [a, b] starting from a single panel.
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> QuadResult {
    integrate_with_breaks(f, &[a, b], abs_tol, max_panels)
}

/// Uniform breakpoints over [0, upper] targeting roughly two panels per
/// oscillation of a phase with derivative bounded by `freq`.
pub(crate) fn oscillation_breaks(upper: f64, freq: f64, max_initial: usize) -> Vec<f64> {
    let per_osc = 2.0;
    let n = ((upper * freq.max(1.0) / (2.0 * std::f64::consts::PI) * per_osc).ceil() as usize)
        .clamp(8, max_initial);
    let mut breaks = Vec::with_capacity(n + 1);
    for i in 0..=n {
        breaks.push(upper * i as f64 / n as f64);
    }
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // G7/K15 is exact for degree <= 22.
        let r = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 100);
        assert!((r.value - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn integrates_gaussian_tail() {
        let r = integrate(|x| (-x * x).exp(), 0.0, 10.0, 1e-12, 1000);
        let expected = std::f64::consts::PI.sqrt() / 2.0;
        assert!((r.value - expected).abs() < 1e-11, "got {}", r.value);
    }

    #[test]
    fn oscillatory_with_breaks() {
        // int_0^20 cos(50 x) dx = sin(1000)/50
        let breaks = oscillation_breaks(20.0, 50.0, 4096);
        let r = integrate_with_breaks(|x| (50.0 * x).cos(), &breaks, 1e-11, 20_000);
        let expected = (1000.0f64).sin() / 50.0;
        assert!(r.converged);
        assert!((r.value - expected).abs() < 1e-10, "got {}", r.value);
    }

    #[test]
    fn reports_non_convergence_on_tiny_budget() {
        let r = integrate(|x| (1000.0 * x).cos().abs(), 0.0, 50.0, 1e-12, 4);
        assert!(!r.converged);
        assert!(r.abs_error > 1e-12);
    }
}
