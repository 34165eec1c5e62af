//! Metrics, classical forecasting baselines, and comparison reports.
//!
//! The baselines are the sanity floor a trained estimator has to clear:
//! persistence (repeat the last value), a moving average over the window
//! tail, and an autoregression fitted by ordinary least squares on the
//! training pairs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Accuracy and timing summary. MSE is in dBm^2, RMSE in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub n_pairs: usize,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// Mean squared error and its root over parallel prediction/target lists.
pub fn compute_metrics(preds: &[f64], targets: &[f64]) -> Result<Metrics> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Data(format!(
            "metrics need equal non-empty lists, got {} predictions and {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mse = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        n_pairs: preds.len(),
        train_seconds: 0.0,
        test_seconds: 0.0,
    })
}

/// Classical one-step predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Predict the most recent input element.
    Persistence,
    /// Predict the mean of the last `window` input elements.
    MovingAverage(usize),
    /// Ordinary least squares on the last `order` lags plus an intercept,
    /// fitted on the training pairs.
    LeastSquaresAr(usize),
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineKind::Persistence => write!(f, "persistence"),
            BaselineKind::MovingAverage(w) => write!(f, "moving_average({w})"),
            BaselineKind::LeastSquaresAr(k) => write!(f, "least_squares_ar({k})"),
        }
    }
}

/// Autoregressive model: `coeffs[0]` is the intercept, `coeffs[j]` multiplies
/// lag `j` (the j-th most recent input element).
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub coeffs: Vec<f64>,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn predict(&self, input: &Vector) -> f64 {
        let w = input.len();
        let mut y = self.coeffs[0];
        for j in 1..self.coeffs.len() {
            y += self.coeffs[j] * input[w - j];
        }
        y
    }
}

/// Fits the AR coefficients by solving the normal equations of the least
/// squares problem over all training pairs.
pub fn fit_least_squares_ar(train: &crate::data::WindowedDataset, order: usize) -> Result<ArModel> {
    if order == 0 {
        return Err(Error::Config(
            "autoregression order must be at least 1".into(),
        ));
    }
    if order > train.window() {
        return Err(Error::Config(format!(
            "autoregression order {order} exceeds the input window {}",
            train.window()
        )));
    }
    if train.len() < order + 1 {
        return Err(Error::Data(format!(
            "least-squares autoregression of order {order} needs at least {} training pairs, got {}",
            order + 1,
            train.len()
        )));
    }

    // Normal equations A x = b with A = X^T X, b = X^T y, where each row of X
    // is [1, lag1, ..., lag_order].
    let n = order + 1;
    let w = train.window();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for pair in train.pairs() {
        let mut row = Vec::with_capacity(n);
        row.push(1.0);
        for j in 1..n {
            row.push(pair.input[w - j]);
        }
        for i in 0..n {
            for j in 0..n {
                a[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * pair.target;
        }
    }

    let coeffs = solve_normal_equations(a, b)?;
    Ok(ArModel { coeffs })
}

/// Gauss-Jordan elimination with partial pivoting and rank truncation.
///
/// Columns whose best remaining pivot falls below `1e-12 * max|A|` are
/// collinear with already-eliminated ones; their coefficients are set to
/// zero (the basic least-squares solution), which keeps exactly
/// representable series exactly representable. A system with no usable
/// pivot at all is reported as singular.
fn solve_normal_equations(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut pivot_row_of_col = vec![None; n];
    let mut row_used = vec![false; n];

    for col in 0..n {
        let pivot = (0..n)
            .filter(|&r| !row_used[r])
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()));
        let Some(r) = pivot else { break };
        if a[r][col].abs() <= tol {
            continue; // collinear column: coefficient stays zero
        }
        row_used[r] = true;
        pivot_row_of_col[col] = Some(r);
        let pivot_row = a[r].clone();
        let pivot_b = b[r];
        for r2 in 0..n {
            if r2 == r || a[r2][col] == 0.0 {
                continue;
            }
            let factor = a[r2][col] / pivot_row[col];
            for (entry, pivot_entry) in a[r2].iter_mut().zip(&pivot_row) {
                *entry -= factor * pivot_entry;
            }
            a[r2][col] = 0.0;
            b[r2] -= factor * pivot_b;
        }
    }

    if pivot_row_of_col.iter().all(Option::is_none) {
        return Err(Error::Numeric(
            "singular normal equations; try a lower autoregression order".into(),
        ));
    }
    let x = pivot_row_of_col
        .iter()
        .enumerate()
        .map(|(col, pivot)| match pivot {
            Some(r) => b[*r] / a[*r][col],
            None => 0.0,
        })
        .collect();
    Ok(x)
}

/// Runs a baseline over a split: fit on the training pairs where the kind
/// needs fitting, predict every test pair, and report metrics.
pub fn run_baseline(kind: BaselineKind, split: &SplitDataset) -> Result<Metrics> {
    if split.test.is_empty() {
        return Err(Error::Data("baseline needs a non-empty test set".into()));
    }
    let w = split.test.window();

    let fit_start = Instant::now();
    let model = match kind {
        BaselineKind::Persistence => None,
        BaselineKind::MovingAverage(window) => {
            if window == 0 {
                return Err(Error::Config(
                    "moving-average window must be at least 1".into(),
                ));
            }
            if window > w {
                return Err(Error::Config(format!(
                    "moving-average window {window} exceeds the input window {w}"
                )));
            }
            None
        }
        BaselineKind::LeastSquaresAr(order) => Some(fit_least_squares_ar(&split.train, order)?),
    };
    let train_seconds = fit_start.elapsed().as_secs_f64();

    let predict_start = Instant::now();
    let mut preds = Vec::with_capacity(split.test.len());
    let mut targets = Vec::with_capacity(split.test.len());
    for pair in split.test.pairs() {
        let pred = match (&kind, &model) {
            (BaselineKind::Persistence, _) => pair.input[w - 1],
            (BaselineKind::MovingAverage(window), _) => {
                pair.input.as_slice()[w - window..].iter().sum::<f64>() / *window as f64
            }
            (BaselineKind::LeastSquaresAr(_), Some(ar)) => ar.predict(&pair.input),
            (BaselineKind::LeastSquaresAr(_), None) => unreachable!(),
        };
        preds.push(pred);
        targets.push(pair.target);
    }
    let test_seconds = predict_start.elapsed().as_secs_f64();

    let mut metrics = compute_metrics(&preds, &targets)?;
    metrics.train_seconds = train_seconds;
    metrics.test_seconds = test_seconds;
    Ok(metrics)
}

/// One labelled row of a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub label: String,
    pub mse_dbm2: f64,
    pub rmse_dbm: f64,
    pub n_pairs: usize,
    pub train_seconds: f64,
    pub test_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub param_count: Option<usize>,
}

impl ReportEntry {
    pub fn new(label: impl Into<String>, metrics: &Metrics, param_count: Option<usize>) -> Self {
        Self {
            label: label.into(),
            mse_dbm2: metrics.mse,
            rmse_dbm: metrics.rmse,
            n_pairs: metrics.n_pairs,
            train_seconds: metrics.train_seconds,
            test_seconds: metrics.test_seconds,
            param_count,
        }
    }
}

/// Comparison table over several estimators/baselines, entry order preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

/// Assembles a report from labelled entries.
pub fn compare_report(entries: Vec<ReportEntry>) -> Result<Report> {
    if entries.is_empty() {
        return Err(Error::Data("report needs at least one entry".into()));
    }
    Ok(Report { entries })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report JSON: {e}")))
    }

    /// Fixed-width text rendering with one row per entry.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>12} {:>10} {:>8} {:>10} {:>10} {:>8}\n",
            "label", "mse_dbm2", "rmse_dbm", "pairs", "train_s", "test_s", "params"
        ));
        for e in &self.entries {
            let params = e
                .param_count
                .map(|p| p.to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<24} {:>12.6} {:>10.6} {:>8} {:>10.3} {:>10.3} {:>8}\n",
                e.label, e.mse_dbm2, e.rmse_dbm, e.n_pairs, e.train_seconds, e.test_seconds, params
            ));
        }
        out
    }
}
