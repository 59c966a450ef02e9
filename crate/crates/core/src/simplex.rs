//! Derivative-free Nelder-Mead simplex minimization.
//!
//! Objectives may return `f64::INFINITY` for infeasible points; the simplex
//! backs away from them. Deterministic for a fixed start and objective.

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct SimplexOptions {
    pub max_iterations: usize,
    /// Relative spread tolerance on the simplex function values.
    pub ftol: f64,
    /// Relative simplex diameter tolerance; guards against the false
    /// convergence of vertices straddling a minimum with equal values.
    pub xtol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            ftol: 1e-9,
            xtol: 1e-7,
        }
    }
}

pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let n = start.len();
    assert_eq!(steps.len(), n);

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    points.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += if steps[i] != 0.0 { steps[i] } else { 0.1 };
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| f(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        // Order ascending by value; ties broken by original index (stable sort).
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let fb = values[best];
        let fw = values[worst];
        if fw.is_finite() {
            let denom = fb.abs().max(fw.abs()).max(1e-30);
            let diameter = points
                .iter()
                .flat_map(|p| {
                    p.iter()
                        .zip(points[best].iter())
                        .map(|(&x, &bx)| (x - bx).abs() / bx.abs().max(1.0))
                })
                .fold(0.0f64, f64::max);
            if (fw - fb).abs() <= opts.ftol * denom && diameter <= opts.xtol {
                converged = true;
                break;
            }
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for (idx, p) in points.iter().enumerate() {
            if idx == worst {
                continue;
            }
            for (c, &x) in centroid.iter_mut().zip(p.iter()) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let lerp = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from.iter())
                .map(|(&c, &x)| c + coef * (c - x))
                .collect()
        };

        let reflected = lerp(&points[worst], alpha);
        let fr = f(&reflected);

        if fr < values[best] {
            let expanded = lerp(&points[worst], gamma);
            let fe = f(&expanded);
            if fe < fr {
                points[worst] = expanded;
                values[worst] = fe;
            } else {
                points[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            points[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = if fr < values[worst] {
                lerp(&points[worst], rho) // outside
            } else {
                lerp(&points[worst], -rho) // inside
            };
            let fc = f(&contracted);
            if fc < values[worst].min(fr) {
                points[worst] = contracted;
                values[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                let best_point = points[best].clone();
                for idx in 0..=n {
                    if idx == best {
                        continue;
                    }
                    for (x, &bx) in points[idx].iter_mut().zip(best_point.iter()) {
                        *x = bx + sigma * (*x - bx);
                    }
                    values[idx] = f(&points[idx]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    SimplexResult {
        point: points[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        let r = minimize(
            |p| (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            &SimplexOptions::default(),
        );
        assert!(r.converged);
        assert!((r.point[0] - 3.0).abs() < 1e-4);
        assert!((r.point[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = minimize(
            |p| {
                let (x, y) = (p[0], p[1]);
                (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
            },
            &[-1.2, 1.0],
            &[0.3, 0.3],
            &SimplexOptions {
                max_iterations: 5000,
                ftol: 1e-12,
                xtol: 1e-8,
            },
        );
        assert!((r.point[0] - 1.0).abs() < 1e-3, "{:?}", r.point);
        assert!((r.point[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn backs_away_from_infeasible_region() {
        let r = minimize(
            |p| {
                if p[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (p[0] - 2.0).powi(2)
                }
            },
            &[0.5, 0.0],
            &[0.2, 0.2],
            &SimplexOptions::default(),
        );
        assert!((r.point[0] - 2.0).abs() < 1e-4, "{:?}", r);
    }
}
