//! Forecast accuracy metrics (MASE, sMAPE, OWA), the +-5% trend
//! classifier, confusion matrices, and report aggregation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Year-over-year trend direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendLabel {
    Decreasing,
    Flat,
    Increasing,
}

impl TrendLabel {
    /// Index in the (dec, flat, inc) confusion-matrix order.
    pub fn index(self) -> usize {
        match self {
            TrendLabel::Decreasing => 0,
            TrendLabel::Flat => 1,
            TrendLabel::Increasing => 2,
        }
    }
}

/// MASE = ((T-m)/h) * sum_j |Y_{T+j} - Yhat_{T+j}| / sum_{i=m+1..T} |Y_i - Y_{i-m}|.
/// A zero seasonal-naive denominator (constant or exactly periodic history)
/// is an explicit error; such series are reported separately.
pub fn mase(history: &[f64], y_true: &[f64], y_pred: &[f64], m: usize) -> Result<f64> {
    let t = history.len();
    if m == 0 || t <= m {
        return Err(Error::invalid(format!(
            "mase needs history longer than the seasonal period ({t} <= {m})"
        )));
    }
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::invalid("mase needs equal nonempty truth/prediction"));
    }
    let denom: f64 = (m..t).map(|i| (history[i] - history[i - m]).abs()).sum();
    if denom <= 0.0 {
        return Err(Error::Numeric(
            "zero seasonal-naive denominator in MASE".into(),
        ));
    }
    let num: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).abs())
        .sum();
    let h = y_true.len() as f64;
    Ok((t - m) as f64 / h * num / denom)
}

/// Symmetric MAPE in percent (M4 convention, 0..200); a both-zero step
/// contributes 0.
pub fn smape(y_true: &[f64], y_pred: &[f64]) -> f64 {
    debug_assert_eq!(y_true.len(), y_pred.len());
    let h = y_true.len() as f64;
    200.0 / h
        * y_true
            .iter()
            .zip(y_pred)
            .map(|(y, p)| {
                let denom = y.abs() + p.abs();
                if denom > 0.0 {
                    (y - p).abs() / denom
                } else {
                    0.0
                }
            })
            .sum::<f64>()
}

/// Overall weighted average relative to the seasonal-naive baseline:
/// 0.5 * (smape/smape_base + mase/mase_base).
pub fn owa(model: (f64, f64), baseline: (f64, f64)) -> Result<f64> {
    let (s, m) = model;
    let (sb, mb) = baseline;
    if sb <= 0.0 || mb <= 0.0 {
        return Err(Error::invalid("OWA baseline metrics must be positive"));
    }
    Ok(0.5 * (s / sb + m / mb))
}

/// Label the next year against the previous by mean ratio, threshold +-5%.
/// Boundary ratios (exactly 1 +- threshold) are flat.
pub fn classify_trend(prev_year: &[f64], next_year: &[f64], threshold: f64) -> Result<TrendLabel> {
    if prev_year.is_empty() || next_year.is_empty() {
        return Err(Error::invalid("trend years must be nonempty"));
    }
    let prev_mean = prev_year.iter().sum::<f64>() / prev_year.len() as f64;
    let next_mean = next_year.iter().sum::<f64>() / next_year.len() as f64;
    if !prev_mean.is_finite() || !next_mean.is_finite() {
        return Err(Error::Numeric("non-finite year mean".into()));
    }
    if prev_mean <= 0.0 {
        return Err(Error::invalid(format!(
            "previous-year mean must be positive, got {prev_mean}"
        )));
    }
    let ratio = next_mean / prev_mean;
    Ok(if ratio > 1.0 + threshold {
        TrendLabel::Increasing
    } else if ratio < 1.0 - threshold {
        TrendLabel::Decreasing
    } else {
        TrendLabel::Flat
    })
}

/// 3x3 confusion matrix (rows = true, columns = predicted, order dec/flat/inc)
/// and classification accuracy.
pub fn confusion_and_accuracy(
    true_labels: &[TrendLabel],
    pred_labels: &[TrendLabel],
) -> Result<([[usize; 3]; 3], f64)> {
    if true_labels.is_empty() || true_labels.len() != pred_labels.len() {
        return Err(Error::invalid("label vectors must be equal and nonempty"));
    }
    let mut matrix = [[0usize; 3]; 3];
    for (t, p) in true_labels.iter().zip(pred_labels) {
        matrix[t.index()][p.index()] += 1;
    }
    let trace = matrix[0][0] + matrix[1][1] + matrix[2][2];
    Ok((matrix, trace as f64 / true_labels.len() as f64))
}

/// Per-series metrics inside one seed's report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub id: String,
    /// None when the MASE denominator is zero (excluded from means).
    pub mase: Option<f64>,
    pub smape: f64,
    pub true_label: Option<TrendLabel>,
    pub pred_label: Option<TrendLabel>,
}

/// Aggregate metrics of a single pipeline run (one seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub mean_mase: f64,
    pub mean_smape: f64,
    pub owa: Option<f64>,
    pub accuracy: Option<f64>,
    pub confusion: Option<[[usize; 3]; 3]>,
    /// Series excluded from the MASE mean for a zero denominator.
    pub mase_excluded: usize,
    pub per_series: Vec<SeriesMetrics>,
}

impl SeedReport {
    /// Unweighted means over series; zero-denominator series are counted,
    /// not averaged.
    pub fn from_series(seed: u64, per_series: Vec<SeriesMetrics>, owa: Option<f64>) -> Result<Self> {
        if per_series.is_empty() {
            return Err(Error::invalid("report needs at least one series"));
        }
        let mases: Vec<f64> = per_series.iter().filter_map(|s| s.mase).collect();
        let mean_mase = mases.iter().sum::<f64>() / mases.len().max(1) as f64;
        let mean_smape =
            per_series.iter().map(|s| s.smape).sum::<f64>() / per_series.len() as f64;
        let labels: Vec<(TrendLabel, TrendLabel)> = per_series
            .iter()
            .filter_map(|s| s.true_label.zip(s.pred_label))
            .collect();
        let (confusion, accuracy) = if labels.is_empty() {
            (None, None)
        } else {
            let (t, p): (Vec<_>, Vec<_>) = labels.into_iter().unzip();
            let (m, a) = confusion_and_accuracy(&t, &p)?;
            (Some(m), Some(a))
        };
        Ok(SeedReport {
            seed,
            mean_mase,
            mean_smape,
            owa,
            accuracy,
            confusion,
            mase_excluded: per_series.len() - mases.len(),
            per_series,
        })
    }
}

/// Mean and sample standard deviation (n-1 denominator; 0 for n = 1).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

fn stat(values: &[f64]) -> Stat {
    let (mean, std) = mean_and_std(values);
    Stat { mean, std }
}

/// Multi-seed evaluation report: per-seed runs plus cross-seed statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mase: Stat,
    pub smape: Stat,
    pub owa: Option<Stat>,
    pub accuracy: Option<Stat>,
    pub seeds: Vec<SeedReport>,
}

/// Aggregate per-seed runs into mean/std statistics.
pub fn aggregate_report(seeds: Vec<SeedReport>) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("aggregate needs at least one seed run"));
    }
    let mases: Vec<f64> = seeds.iter().map(|s| s.mean_mase).collect();
    let smapes: Vec<f64> = seeds.iter().map(|s| s.mean_smape).collect();
    let owas: Vec<f64> = seeds.iter().filter_map(|s| s.owa).collect();
    let accs: Vec<f64> = seeds.iter().filter_map(|s| s.accuracy).collect();
    Ok(EvalReport {
        mase: stat(&mases),
        smape: stat(&smapes),
        owa: (owas.len() == seeds.len()).then(|| stat(&owas)),
        accuracy: (accs.len() == seeds.len()).then(|| stat(&accs)),
        seeds,
    })
}
