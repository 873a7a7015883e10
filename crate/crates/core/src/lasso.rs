//! L1-penalized linear regression by cyclic coordinate descent, with
//! k-fold cross-validated penalty selection.
//!
//! The fit minimizes
//!
//! ```text
//! (1/2K) * sum_k (y_k - w0 - sum_i w_i x_ik)^2 + lambda * sum_i |w_i|
//! ```
//!
//! on standardized columns (zero mean, unit population variance), with the
//! intercept unpenalized. The 1/(2K) factor makes lambda comparable across
//! sample sizes and gives the usual smallest all-zero penalty
//! `lambda_max = max_j |<x_j, y - mean(y)>| / K`. Coefficients are reported
//! back on the original feature scale.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng;
use crate::Result;

pub const DEFAULT_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;
pub const DEFAULT_K_FOLDS: usize = 5;

/// sign(rho) * max(|rho| - lambda, 0)
pub fn soft_threshold(rho: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if rho > lambda {
        rho - lambda
    } else if rho < -lambda {
        rho + lambda
    } else {
        0.0
    }
}

/// A regression design ready for fitting. Standardization statistics are
/// computed at construction; zero-variance columns are excluded from the
/// fit (their weights stay 0) and reported in `excluded_columns`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: Array2<f64>,
    x_std: Array2<f64>,
    y: Array1<f64>,
    y_mean: f64,
    pub standardized: bool,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub excluded_columns: Vec<usize>,
    /// <x_std_j, x_std_j> / K per column; exactly the coordinate curvature
    /// used by the descent updates.
    col_curvature: Vec<f64>,
}

impl RegressionProblem {
    /// Builds a problem from a K x M design and K outcomes.
    ///
    /// With `standardize` set, columns are shifted/scaled to zero mean and
    /// unit population variance for the internal solve; otherwise they are
    /// used as-is (identity transform).
    pub fn new(x: Array2<f64>, y: Vec<f64>, standardize: bool) -> Result<Self> {
        let (k, m) = x.dim();
        if y.len() != k {
            return Err(Error::invalid(format!(
                "design has {k} rows but {} outcomes",
                y.len()
            )));
        }
        if k < 2 {
            return Err(Error::invalid("regression needs at least 2 rows"));
        }
        let y = Array1::from(y);
        let y_mean = y.mean().unwrap();

        let mut column_means = vec![0.0; m];
        let mut column_scales = vec![1.0; m];
        let mut excluded_columns = Vec::new();
        let mut x_std = x.clone();
        for j in 0..m {
            let col = x.column(j);
            let mean = col.mean().unwrap();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
            if var == 0.0 {
                excluded_columns.push(j);
                x_std.column_mut(j).fill(0.0);
                continue;
            }
            if standardize {
                let scale = var.sqrt();
                column_means[j] = mean;
                column_scales[j] = scale;
                x_std.column_mut(j).mapv_inplace(|v| (v - mean) / scale);
            }
        }
        let col_curvature = (0..m)
            .map(|j| {
                let col = x_std.column(j);
                col.dot(&col) / k as f64
            })
            .collect();
        Ok(RegressionProblem {
            x,
            x_std,
            y,
            y_mean,
            standardized: standardize,
            column_means,
            column_scales,
            excluded_columns,
            col_curvature,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn outcomes(&self) -> &Array1<f64> {
        &self.y
    }

    fn is_active(&self, j: usize) -> bool {
        self.col_curvature[j] > 0.0
    }

    /// Sub-problem on the given rows (used by cross-validation; statistics
    /// are recomputed on the subset).
    fn subset(&self, rows: &[usize]) -> Result<Self> {
        let m = self.n_columns();
        let mut x = Array2::zeros((rows.len(), m));
        let mut y = Vec::with_capacity(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            x.row_mut(out).assign(&self.x.row(r));
            y.push(self.y[r]);
        }
        RegressionProblem::new(x, y, self.standardized)
    }
}

/// A fitted model on the original feature scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFit {
    pub w0: f64,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective value after initialization and after each full sweep.
    pub objective_history: Vec<f64>,
}

impl LassoFit {
    pub fn predict_row(&self, features: &[f64]) -> f64 {
        self.w0
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// Cyclic coordinate descent. Each coordinate update is the exact minimizer
/// of the objective in that coordinate, so the objective never increases.
/// Convergence: largest coefficient change in a sweep below `tolerance`.
pub fn fit(
    problem: &RegressionProblem,
    lambda: f64,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<LassoFit> {
    if lambda < 0.0 {
        return Err(Error::invalid(format!("lambda {lambda} must be >= 0")));
    }
    if tolerance <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let k = problem.n_rows() as f64;
    let m = problem.n_columns();

    let mut w = vec![0.0; m];
    // residual of the centered outcome: y - mean(y) - X_std * w
    let mut residual = &problem.y - problem.y_mean;
    let objective = |residual: &Array1<f64>, w: &[f64]| -> f64 {
        residual.dot(residual) / (2.0 * k) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut history = vec![objective(&residual, &w)];
    let mut converged = false;
    let mut sweeps = 0;
    for _ in 0..max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..m {
            if !problem.is_active(j) {
                continue;
            }
            let col = problem.x_std.column(j);
            let old = w[j];
            let rho = col.dot(&residual) / k + old * problem.col_curvature[j];
            let new = soft_threshold(rho, lambda) / problem.col_curvature[j];
            if new != old {
                let delta = old - new;
                residual.scaled_add(delta, &col);
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        history.push(objective(&residual, &w));
        if max_delta < tolerance {
            converged = true;
            break;
        }
    }

    // back to the original feature scale
    let mut weights = vec![0.0; m];
    let mut w0 = problem.y_mean;
    for j in 0..m {
        if w[j] != 0.0 {
            weights[j] = w[j] / problem.column_scales[j];
            w0 -= w[j] * problem.column_means[j] / problem.column_scales[j];
        }
    }
    Ok(LassoFit {
        w0,
        weights,
        lambda,
        iterations_used: sweeps,
        converged,
        objective_history: history,
    })
}

/// Smallest penalty for which the fitted weights are all zero:
/// max_j |<x_std_j, y - mean(y)>| / K.
pub fn lambda_max(problem: &RegressionProblem) -> Result<f64> {
    let k = problem.n_rows() as f64;
    let centered = &problem.y - problem.y_mean;
    let mut best: Option<f64> = None;
    for j in 0..problem.n_columns() {
        if !problem.is_active(j) {
            continue;
        }
        let v = problem.x_std.column(j).dot(&centered).abs() / k;
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or_else(|| Error::invalid("all columns have zero variance"))
}

/// Log-spaced descending grid from `lambda_max_value` down to
/// `lambda_max_value * ratio`.
pub fn lambda_grid(lambda_max_value: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    if !(0.0 < ratio && ratio < 1.0) {
        return Err(Error::invalid(format!("grid ratio {ratio} outside (0,1)")));
    }
    if lambda_max_value <= 0.0 {
        return Err(Error::invalid("lambda_max must be positive to build a grid"));
    }
    Ok((0..count)
        .map(|g| lambda_max_value * ratio.powf(g as f64 / (count - 1) as f64))
        .collect())
}

/// Cross-validation errors over a penalty grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    pub cv_errors: Vec<f64>,
    /// grid x k matrix of held-out mean squared errors.
    pub fold_errors: Vec<Vec<f64>>,
    pub k_folds: usize,
    pub seed: u64,
}

/// Seeded k-fold cross-validation: a random permutation splits rows into
/// folds of near-equal size (differing by at most one); each (lambda, fold)
/// pair is fitted independently, so evaluation order never matters.
pub fn cross_validate(
    problem: &RegressionProblem,
    grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let k_rows = problem.n_rows();
    if k_folds < 2 || k_folds > k_rows {
        return Err(Error::invalid(format!(
            "k_folds {k_folds} outside [2, {k_rows}]"
        )));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    let mut order: Vec<usize> = (0..k_rows).collect();
    order.shuffle(&mut rng::seeded(seed));
    // first (k_rows % k_folds) folds get one extra row
    let base = k_rows / k_folds;
    let extra = k_rows % k_folds;
    let mut folds = Vec::with_capacity(k_folds);
    let mut cursor = 0;
    for f in 0..k_folds {
        let size = base + usize::from(f < extra);
        folds.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let eval_fold = |fold: &Vec<usize>| -> Result<Vec<f64>> {
        let test_rows = fold;
        let train_rows: Vec<usize> = order
            .iter()
            .copied()
            .filter(|r| !test_rows.contains(r))
            .collect();
        let train = problem.subset(&train_rows)?;
        let mut errors = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let fitted = fit(&train, lambda, DEFAULT_TOLERANCE, DEFAULT_MAX_SWEEPS)?;
            let mse = test_rows
                .iter()
                .map(|&r| {
                    let row: Vec<f64> = problem.x.row(r).to_vec();
                    let err = problem.y[r] - fitted.predict_row(&row);
                    err * err
                })
                .sum::<f64>()
                / test_rows.len() as f64;
            errors.push(mse);
        }
        Ok(errors)
    };

    #[cfg(feature = "parallel")]
    let per_fold: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        folds
            .par_iter()
            .map(eval_fold)
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_fold: Vec<Vec<f64>> = folds.iter().map(eval_fold).collect::<Result<Vec<_>>>()?;

    let mut fold_errors = vec![vec![0.0; k_folds]; grid.len()];
    for (f, errors) in per_fold.iter().enumerate() {
        for (g, &e) in errors.iter().enumerate() {
            fold_errors[g][f] = e;
        }
    }
    let cv_errors = fold_errors
        .iter()
        .map(|row| row.iter().sum::<f64>() / k_folds as f64)
        .collect();
    Ok(CvReport {
        lambda_grid: grid.to_vec(),
        cv_errors,
        fold_errors,
        k_folds,
        seed,
    })
}

/// Penalty selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Lowest CV error; ties resolve to the larger (sparser) penalty.
    Min,
    /// Largest penalty within one standard error of the minimum.
    OneSe,
}

/// Applies the selection rule and refits on the full data at the chosen
/// penalty.
pub fn select_lambda(
    problem: &RegressionProblem,
    report: &CvReport,
    rule: LambdaRule,
) -> Result<(f64, LassoFit)> {
    if report.cv_errors.is_empty() {
        return Err(Error::invalid("empty CV report"));
    }
    // grid is descending, so scanning with a strict `<` keeps the larger
    // penalty on ties
    let mut best = 0;
    for g in 1..report.cv_errors.len() {
        if report.cv_errors[g] < report.cv_errors[best] {
            best = g;
        }
    }
    let chosen = match rule {
        LambdaRule::Min => best,
        LambdaRule::OneSe => {
            let k = report.k_folds as f64;
            let errs = &report.fold_errors[best];
            let mean = report.cv_errors[best];
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let se = (var / k).sqrt();
            (0..report.cv_errors.len())
                .find(|&g| report.cv_errors[g] <= mean + se)
                .unwrap_or(best)
        }
    };
    let lambda = report.lambda_grid[chosen];
    let fitted = fit(problem, lambda, DEFAULT_TOLERANCE, DEFAULT_MAX_SWEEPS)?;
    Ok((lambda, fitted))
}
