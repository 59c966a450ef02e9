//! Epsilon-insensitive support vector regression with an RBF kernel,
//! trained by sequential minimal optimization with maximal-violating-pair
//! working-set selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvrError {
    #[error("need at least 1 training row, got 0")]
    NoData,
    #[error("feature matrix has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("training rows have inconsistent dimensions")]
    RaggedRows,
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    BadHyper(String),
}

/// Regularization, tube width and kernel width. Defaults: C = 128,
/// epsilon = 0.1, g = 1/24 (inverse feature count of the quality vector).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyper {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl Default for SvrHyper {
    fn default() -> Self {
        Self {
            c: 128.0,
            epsilon: 0.1,
            gamma: 1.0 / 24.0,
        }
    }
}

impl SvrHyper {
    fn validate(&self) -> Result<(), SvrError> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(SvrError::BadHyper(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(SvrError::BadHyper(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(SvrError::BadHyper(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Per-dimension (min, max) learned on training data; features map to
/// [-1, 1], constant dimensions to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub bounds: Vec<(f64, f64)>,
}

impl Scaler {
    fn fit(rows: &[Vec<f64>]) -> Scaler {
        let dim = rows[0].len();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for row in rows {
            for (b, &v) in bounds.iter_mut().zip(row.iter()) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Scaler { bounds }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.bounds.iter())
            .map(|(&v, &(lo, hi))| {
                if hi > lo {
                    2.0 * (v - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// A trained epsilon-SVR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// Support vectors in scaled space.
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients (alpha_i - alpha_i*), one per support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub kernel_width: f64,
    pub scaler: Scaler,
    pub hyper: SvrHyper,
    /// Value of the minimized dual objective at the returned solution.
    pub dual_objective: f64,
    /// Final maximal KKT violation (m - M).
    pub kkt_residual: f64,
    pub converged: bool,
}

const KKT_TOL: f64 = 1e-3;
const MAX_ITER: usize = 1_000_000;
const TAU: f64 = 1e-12;

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Train on feature rows `x` against targets `y`.
pub fn train(x: &[Vec<f64>], y: &[f64], hyper: &SvrHyper) -> Result<SvrModel, SvrError> {
    hyper.validate()?;
    if x.is_empty() {
        return Err(SvrError::NoData);
    }
    if x.len() != y.len() {
        return Err(SvrError::LengthMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(SvrError::RaggedRows);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(SvrError::NonFinite);
    }

    let scaler = Scaler::fit(x);
    let rows: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
    let n = rows.len();
    let c = hyper.c;
    let eps = hyper.epsilon;
    let gamma = hyper.gamma;

    // Kernel matrix over the n points.
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = rbf(&rows[i], &rows[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    // 2n-variable formulation: p < n carries sign +1 (alpha), p >= n carries
    // sign -1 (alpha*). Q_pq = s_p s_q K_{p mod n, q mod n}.
    let sign = |p: usize| if p < n { 1.0 } else { -1.0 };
    let point = |p: usize| p % n;
    let mut a = vec![0.0f64; 2 * n];
    let mut grad: Vec<f64> = (0..2 * n)
        .map(|p| if p < n { eps - y[p] } else { eps + y[p - n] })
        .collect();

    let mut iterations = 0usize;
    let mut residual;
    let converged = loop {
        // Maximal violating pair, ties broken by the lowest index.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut mm_val = f64::INFINITY;
        let mut mm_idx = usize::MAX;
        for p in 0..2 * n {
            let v = -sign(p) * grad[p];
            let in_up = (sign(p) > 0.0 && a[p] < c) || (sign(p) < 0.0 && a[p] > 0.0);
            let in_low = (sign(p) > 0.0 && a[p] > 0.0) || (sign(p) < 0.0 && a[p] < c);
            if in_up && v > m_val {
                m_val = v;
                m_idx = p;
            }
            if in_low && v < mm_val {
                mm_val = v;
                mm_idx = p;
            }
        }
        residual = m_val - mm_val;
        if residual < KKT_TOL || m_idx == usize::MAX || mm_idx == usize::MAX {
            break true;
        }
        if iterations >= MAX_ITER {
            break false;
        }
        iterations += 1;

        let (i, j) = (m_idx, mm_idx);
        let (si, sj) = (sign(i), sign(j));
        let k_ii = kernel[point(i) * n + point(i)];
        let k_jj = kernel[point(j) * n + point(j)];
        let k_ij = kernel[point(i) * n + point(j)];
        let (old_i, old_j) = (a[i], a[j]);

        if si != sj {
            // Curvature along (+d, +d): Q_ii + Q_jj + 2 Q_ij, Q_ij = -K_ij.
            let mut quad = k_ii + k_jj - 2.0 * k_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = k_ii + k_jj - 2.0 * k_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }

        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        if di != 0.0 || dj != 0.0 {
            for p in 0..2 * n {
                let q_pi = sign(p) * si * kernel[point(p) * n + point(i)];
                let q_pj = sign(p) * sj * kernel[point(p) * n + point(j)];
                grad[p] += q_pi * di + q_pj * dj;
            }
        }
    };

    // Bias: average of -s_p G_p over free variables, else the bound midpoint.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for p in 0..2 * n {
        let v = -sign(p) * grad[p];
        if a[p] > 0.0 && a[p] < c {
            free_sum += v;
            free_count += 1;
        } else {
            let in_up = (sign(p) > 0.0 && a[p] < c) || (sign(p) < 0.0 && a[p] > 0.0);
            if in_up {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        0.5 * (lower + upper)
    };

    // Dual objective 1/2 a'Qa + p'a, using G = Qa + p.
    let mut objective = 0.0;
    for p in 0..2 * n {
        let pvec = if p < n { eps - y[p] } else { eps + y[p - n] };
        objective += a[p] * (grad[p] + pvec);
    }
    objective *= 0.5;

    // Collapse to per-point coefficients and keep the support vectors.
    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        let coef = a[i] - a[n + i];
        if coef != 0.0 {
            support_vectors.push(rows[i].clone());
            dual_coeffs.push(coef);
        }
    }

    Ok(SvrModel {
        support_vectors,
        dual_coeffs,
        bias,
        kernel_width: gamma,
        scaler,
        hyper: *hyper,
        dual_objective: objective,
        kkt_residual: residual.max(0.0),
        converged,
    })
}

/// Predict the target for one feature row.
pub fn predict(model: &SvrModel, x: &[f64]) -> Result<f64, SvrError> {
    if x.len() != model.scaler.bounds.len() {
        return Err(SvrError::DimensionMismatch {
            expected: model.scaler.bounds.len(),
            got: x.len(),
        });
    }
    let xs = model.scaler.apply(x);
    let mut f = model.bias;
    for (sv, &coef) in model.support_vectors.iter().zip(model.dual_coeffs.iter()) {
        f += coef * rbf(&xs, sv, model.kernel_width);
    }
    Ok(f)
}

/// 5-fold cross-validated grid search over C in 2^-1..2^7 and g in 2^-7..2^1
/// at fixed epsilon; returns the model retrained on all data with the best
/// mean-squared-error cell (first cell wins ties).
pub fn grid_search_train(
    x: &[Vec<f64>],
    y: &[f64],
    epsilon: f64,
) -> Result<(SvrModel, SvrHyper), SvrError> {
    if x.len() < 2 {
        return Err(SvrError::NoData);
    }
    let folds = 5.min(x.len());
    let mut best: Option<(f64, SvrHyper)> = None;
    for c_pow in -1..=7 {
        for g_pow in -7..=1 {
            let hyper = SvrHyper {
                c: (2.0f64).powi(c_pow),
                epsilon,
                gamma: (2.0f64).powi(g_pow),
            };
            let mut sq_err = 0.0;
            let mut count = 0usize;
            for fold in 0..folds {
                let mut train_x = Vec::new();
                let mut train_y = Vec::new();
                let mut test_idx = Vec::new();
                for i in 0..x.len() {
                    if i % folds == fold {
                        test_idx.push(i);
                    } else {
                        train_x.push(x[i].clone());
                        train_y.push(y[i]);
                    }
                }
                if train_x.is_empty() || test_idx.is_empty() {
                    continue;
                }
                let model = train(&train_x, &train_y, &hyper)?;
                for &i in &test_idx {
                    let p = predict(&model, &x[i])?;
                    sq_err += (p - y[i]).powi(2);
                    count += 1;
                }
            }
            let mse = sq_err / count.max(1) as f64;
            if best.as_ref().map_or(true, |(b, _)| mse < *b) {
                best = Some((mse, hyper));
            }
        }
    }
    let (_, hyper) = best.expect("grid is non-empty");
    Ok((train(x, y, &hyper)?, hyper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_is_absorbed_by_bias() {
        let model = train(&[vec![3.0, 4.0]], &[7.5], &SvrHyper::default()).unwrap();
        assert!(model.converged);
        assert_abs_diff_eq!(predict(&model, &[3.0, 4.0]).unwrap(), 7.5, epsilon = 1e-9);
        assert!(model.support_vectors.is_empty());
    }

    #[test]
    fn constant_targets_give_constant_predictor() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![7.0; 10];
        let model = train(&x, &y, &SvrHyper::default()).unwrap();
        assert_abs_diff_eq!(predict(&model, &[100.0, -3.0]).unwrap(), 7.0, epsilon = 1e-9);
        assert!(model.dual_coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn dual_coefficients_respect_box_and_balance() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin() + 0.5 * v[0]).collect();
        let hyper = SvrHyper {
            c: 10.0,
            epsilon: 0.05,
            gamma: 2.0,
        };
        let model = train(&x, &y, &hyper).unwrap();
        assert!(model.converged);
        assert!(model.kkt_residual < KKT_TOL);
        assert!(model.dual_coeffs.iter().all(|c| c.abs() <= hyper.c + 1e-12));
        let sum: f64 = model.dual_coeffs.iter().sum();
        assert!(sum.abs() < 1e-6, "sum {sum}");
    }

    #[test]
    fn sin_recovery_on_held_out_grid() {
        let n = 200;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].sin()).collect();
        let hyper = SvrHyper {
            c: 128.0,
            epsilon: 0.01,
            gamma: 4.0,
        };
        let model = train(&x, &y, &hyper).unwrap();
        assert!(model.converged);

        let mut max_err = 0.0f64;
        for i in 0..101 {
            let xv = 2.0 * std::f64::consts::PI * (i as f64 + 0.37) / 101.0;
            if xv > 2.0 * std::f64::consts::PI {
                continue;
            }
            let p = predict(&model, &[xv]).unwrap();
            max_err = max_err.max((p - xv.sin()).abs());
        }
        assert!(max_err < 0.05, "held-out max err {max_err}");

        let at_half_pi = predict(&model, &[std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((at_half_pi - 1.0).abs() < 0.05, "{at_half_pi}");
    }

    #[test]
    fn prediction_invariant_under_row_reordering() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64, i as f64 / 29.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] - 2.0 * v[1] + 3.0 * v[2]).collect();
        let hyper = SvrHyper {
            c: 32.0,
            epsilon: 0.05,
            gamma: 0.5,
        };
        let model_a = train(&x, &y, &hyper).unwrap();

        let perm: Vec<usize> = (0..30).map(|i| (i * 17 + 5) % 30).collect();
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let model_b = train(&xp, &yp, &hyper).unwrap();

        for probe in [[0.5, 1.0, 0.2], [6.0, 4.0, 0.9], [3.0, 0.0, 0.5]] {
            let pa = predict(&model_a, &probe).unwrap();
            let pb = predict(&model_b, &probe).unwrap();
            assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
        }
    }

    #[test]
    fn deterministic_training() {
        let x: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64, (i * 3 % 11) as f64]).collect();
        let y: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).cos()).collect();
        let a = train(&x, &y, &SvrHyper::default()).unwrap();
        let b = train(&x, &y, &SvrHyper::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_coefficient_model_returns_bias() {
        let model = SvrModel {
            support_vectors: vec![],
            dual_coeffs: vec![],
            bias: 3.25,
            kernel_width: 1.0,
            scaler: Scaler {
                bounds: vec![(0.0, 1.0); 3],
            },
            hyper: SvrHyper::default(),
            dual_objective: 0.0,
            kkt_residual: 0.0,
            converged: true,
        };
        assert_abs_diff_eq!(
            predict(&model, &[0.1, 0.2, 0.3]).unwrap(),
            3.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn lone_support_vector_at_kernel_peak() {
        let model = SvrModel {
            support_vectors: vec![vec![0.0, 0.0]],
            dual_coeffs: vec![2.5],
            bias: 0.0,
            kernel_width: 1.0,
            scaler: Scaler {
                bounds: vec![(-1.0, 1.0); 2],
            },
            hyper: SvrHyper::default(),
            dual_objective: 0.0,
            kkt_residual: 0.0,
            converged: true,
        };
        // x = (0,0) scales to the stored support vector exactly.
        assert_abs_diff_eq!(predict(&model, &[0.0, 0.0]).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let model = train(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.0, 1.0], &SvrHyper::default())
            .unwrap();
        assert!(matches!(
            predict(&model, &[1.0]),
            Err(SvrError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn json_round_trip_reproduces_predictions_exactly() {
        let x: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 / 49.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] * v[1] + v[2]).collect();
        let model = train(&x, &y, &SvrHyper::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: SvrModel = serde_json::from_str(&json).unwrap();
        for probe in x.iter().take(10) {
            let a = predict(&model, probe).unwrap();
            let b = predict(&back, probe).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
