use nalgebra::{DMatrix, DVector};

use super::{PipelineError, WindowedDataset};

/// Linear readout `ŷ = w · T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge_lambda: f64,
}

impl ReadoutModel {
    pub fn predict(&self, window: &[f64]) -> f64 {
        self.weights.iter().zip(window).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadoutDiagnostics {
    /// Numerical rank of the centered design matrix.
    pub rank: usize,
    /// True when the unregularized problem had no unique solution and the
    /// minimum-norm weights were returned.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutFit {
    pub model: ReadoutModel,
    pub diagnostics: ReadoutDiagnostics,
}

/// Least-squares fit of weights and an unpenalized bias.
///
/// Columns and targets are centered so the bias drops out; the centered
/// problem (with `sqrt(λ) I` rows appended when `λ > 0`) is solved by
/// Householder QR, or by SVD in the minimum-norm sense when the design is
/// rank deficient.
pub fn fit_readout(train: &WindowedDataset, ridge_lambda: f64) -> Result<ReadoutFit, PipelineError> {
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(PipelineError::InvalidParams(format!(
            "ridge lambda must be >= 0, got {ridge_lambda}"
        )));
    }
    if train.is_empty() {
        return Err(PipelineError::Empty("training set is empty".into()));
    }
    let n = train.len();
    let m = train.m;
    let inv_n = 1.0 / n as f64;

    let mut col_mean = vec![0.0; m];
    for w in train.windows() {
        for (acc, x) in col_mean.iter_mut().zip(w) {
            *acc += x;
        }
    }
    col_mean.iter_mut().for_each(|v| *v *= inv_n);
    let y_mean = train.targets.iter().sum::<f64>() * inv_n;

    let extra = if ridge_lambda > 0.0 { m } else { 0 };
    let rows = n + extra;
    let mut a = DMatrix::<f64>::zeros(rows, m);
    for (r, w) in train.windows().enumerate() {
        for c in 0..m {
            a[(r, c)] = w[c] - col_mean[c];
        }
    }
    let sqrt_lambda = ridge_lambda.sqrt();
    for c in 0..extra {
        a[(n + c, c)] = sqrt_lambda;
    }
    let mut b = DVector::<f64>::zeros(rows);
    for (r, y) in train.targets.iter().enumerate() {
        b[r] = y - y_mean;
    }

    let scale = a.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let (weights, rank, rank_deficient) = if scale == 0.0 {
        (DVector::zeros(m), 0, true)
    } else if rows >= m {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = (0..m).fold(0.0_f64, |s, i| s.max(r[(i, i)].abs()));
        let tol = f64::EPSILON * rows as f64 * diag_max;
        let rank = (0..m).filter(|&i| r[(i, i)].abs() > tol).count();
        if rank == m {
            let mut qtb = b.clone();
            qr.q_tr_mul(&mut qtb);
            let w = r
                .solve_upper_triangular(&qtb.rows(0, m).into_owned())
                .ok_or_else(|| PipelineError::Linalg("triangular solve failed".into()))?;
            (w, m, false)
        } else {
            min_norm(a, &b)?
        }
    } else {
        min_norm(a, &b)?
    };

    let weights: Vec<f64> = weights.iter().copied().collect();
    let bias = y_mean - weights.iter().zip(&col_mean).map(|(w, c)| w * c).sum::<f64>();
    Ok(ReadoutFit {
        model: ReadoutModel {
            weights,
            bias,
            ridge_lambda,
        },
        diagnostics: ReadoutDiagnostics { rank, rank_deficient },
    })
}

fn min_norm(a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize, bool), PipelineError> {
    let (rows, cols) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |s, v| s.max(*v));
    let eps = f64::EPSILON * rows.max(cols) as f64 * smax;
    let rank = svd.rank(eps);
    let w = svd.solve(b, eps).map_err(|e| PipelineError::Linalg(e.into()))?;
    Ok((w, rank, rank < cols))
}

/// Mean squared error of `model` on `test`.
pub fn evaluate(model: &ReadoutModel, test: &WindowedDataset) -> Result<f64, PipelineError> {
    if test.is_empty() {
        return Err(PipelineError::Empty("test set is empty".into()));
    }
    if model.weights.len() != test.m {
        return Err(PipelineError::DimensionMismatch {
            expected: model.weights.len(),
            found: test.m,
        });
    }
    let sse: f64 = test
        .windows()
        .zip(&test.targets)
        .map(|(w, y)| {
            let e = model.predict(w) - y;
            e * e
        })
        .sum();
    Ok(sse / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(windows: Vec<Vec<f64>>, targets: Vec<f64>) -> WindowedDataset {
        WindowedDataset::from_windows(&windows, targets, 1).unwrap()
    }

    /// Solves `[X 1]ᵀ[X 1] θ = [X 1]ᵀ y` by Gauss-Jordan elimination.
    fn naive_normal_equations(windows: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let k = windows[0].len() + 1;
        let row = |w: &Vec<f64>| w.iter().copied().chain([1.0]).collect::<Vec<f64>>();
        let mut a = vec![vec![0.0; k + 1]; k];
        for (w, y) in windows.iter().zip(targets) {
            let x = row(w);
            for i in 0..k {
                for j in 0..k {
                    a[i][j] += x[i] * x[j];
                }
                a[i][k] += x[i] * y;
            }
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for v in a[col].iter_mut() {
                *v /= d;
            }
            for r in 0..k {
                if r != col {
                    let f = a[r][col];
                    for c in 0..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        a.iter().map(|r| r[k]).collect()
    }

    fn random_windows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let windows = random_windows(&mut rng, 5, 3);
            let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fit = fit_readout(&dataset(windows.clone(), targets.clone()), 0.0).unwrap();
            let theta = naive_normal_equations(&windows, &targets);
            for (w, t) in fit.model.weights.iter().zip(&theta) {
                assert!((w - t).abs() < 1e-10, "{w} vs {t}");
            }
            assert!((fit.model.bias - theta[3]).abs() < 1e-10);
            assert!(!fit.diagnostics.rank_deficient);
        }
    }

    #[test]
    fn recovers_exact_affine_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w_true: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b_true = 0.37;
        let windows = random_windows(&mut rng, 40, 8);
        let targets: Vec<f64> = windows
            .iter()
            .map(|w| w.iter().zip(&w_true).map(|(x, c)| x * c).sum::<f64>() + b_true)
            .collect();
        let ds = dataset(windows, targets.clone());
        let fit = fit_readout(&ds, 0.0).unwrap();
        for (a, b) in fit.model.weights.iter().zip(&w_true) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((fit.model.bias - b_true).abs() < 1e-12);
        let mse = evaluate(&fit.model, &ds).unwrap();
        let scale = targets.iter().map(|y| y * y).sum::<f64>() / targets.len() as f64;
        assert!(mse < 1e-18 * scale, "mse {mse}");
    }

    #[test]
    fn constant_windows_give_mean_bias() {
        let windows = vec![vec![2.0, -1.0]; 6];
        let targets = vec![1.0, 2.0, 3.0, 5.0, 8.0, 13.0];
        let fit = fit_readout(&dataset(windows, targets), 0.0).unwrap();
        assert_eq!(fit.model.weights, vec![0.0, 0.0]);
        assert!((fit.model.bias - 32.0 / 6.0).abs() < 1e-14);
        assert!(fit.diagnostics.rank_deficient);
        assert_eq!(fit.diagnostics.rank, 0);
    }

    #[test]
    fn duplicated_column_is_min_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_windows(&mut rng, 20, 1);
        let windows: Vec<Vec<f64>> = base.iter().map(|w| vec![w[0], w[0]]).collect();
        let targets: Vec<f64> = base.iter().map(|w| 3.0 * w[0] + 1.0).collect();
        let fit = fit_readout(&dataset(windows, targets), 0.0).unwrap();
        assert!(fit.diagnostics.rank_deficient);
        assert_eq!(fit.diagnostics.rank, 1);
        assert!((fit.model.weights[0] - 1.5).abs() < 1e-10);
        assert!((fit.model.weights[1] - 1.5).abs() < 1e-10);
        assert!((fit.model.bias - 1.0).abs() < 1e-10);
    }

    #[test]
    fn underdetermined_is_min_norm() {
        let windows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let fit = fit_readout(&dataset(windows, vec![1.0, -1.0]), 0.0).unwrap();
        assert!(fit.diagnostics.rank_deficient);
        let w = &fit.model.weights;
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] + 1.0).abs() < 1e-12 && w[2].abs() < 1e-12);
    }

    #[test]
    fn ridge_matches_closed_form() {
        // One centered feature: w = Σxy / (Σx² + λ).
        let windows = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let targets = vec![-2.0, 0.5, 2.0];
        let fit = fit_readout(&dataset(windows, targets), 2.0).unwrap();
        assert!((fit.model.weights[0] - 4.0 / 4.0).abs() < 1e-14);
        assert!((fit.model.bias - 0.5 / 3.0).abs() < 1e-14);
        assert_eq!(fit.model.ridge_lambda, 2.0);
    }

    #[test]
    fn residual_gradient_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let windows = random_windows(&mut rng, 60, 10);
        let targets: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = fit_readout(&dataset(windows.clone(), targets.clone()), 0.0).unwrap();
        let mut grad = vec![0.0; 11];
        let mut gnorm0 = vec![0.0; 11];
        for (w, y) in windows.iter().zip(&targets) {
            let r = fit.model.predict(w) - y;
            for j in 0..10 {
                grad[j] += r * w[j];
                gnorm0[j] += y * w[j];
            }
            grad[10] += r;
            gnorm0[10] += y;
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&grad) < 1e-8 * norm(&gnorm0));
    }

    #[test]
    fn evaluate_constant_model() {
        let model = ReadoutModel {
            weights: vec![0.0, 0.0],
            bias: 0.25,
            ridge_lambda: 0.0,
        };
        let targets = vec![0.0, 1.0, -0.5, 2.0];
        let ds = dataset(vec![vec![9.0, 9.0]; 4], targets.clone());
        let direct: f64 = targets.iter().map(|y| (y - 0.25) * (y - 0.25)).sum::<f64>() / 4.0;
        assert_eq!(evaluate(&model, &ds).unwrap(), direct);
    }

    #[test]
    fn evaluate_errors() {
        let model = ReadoutModel {
            weights: vec![1.0],
            bias: 0.0,
            ridge_lambda: 0.0,
        };
        let ds = dataset(vec![vec![1.0, 2.0]], vec![0.0]);
        assert!(matches!(
            evaluate(&model, &ds),
            Err(PipelineError::DimensionMismatch { .. })
        ));
        let (_, mut test) = dataset(vec![vec![1.0]; 4], vec![0.0; 4]).split(0.5).unwrap();
        test.targets.clear();
        test.offsets.clear();
        assert!(matches!(evaluate(&model, &test), Err(PipelineError::Empty(_))));
        assert!(fit_readout(&dataset(vec![vec![1.0]], vec![0.0]), -1.0).is_err());
    }
}
