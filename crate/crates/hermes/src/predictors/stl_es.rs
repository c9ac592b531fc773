//! Multiplicative-decomposition predictor: seasonal indices from
//! period-averaged ratios to the centered moving average, seasonally
//! adjusted series forecast by simple exponential smoothing.

use super::optim::minimize_1d;
use super::{ses_pass, FitModel, PredictorFit, PredictorKind};
use crate::error::{Error, Result};
use crate::panel::centered_moving_average;

pub(super) fn fit(series: &[f64], m: usize) -> Result<PredictorFit> {
    if series.len() < 2 * m {
        return Err(Error::invalid(format!(
            "stl_es needs length >= 2*{m}, got {}",
            series.len()
        )));
    }
    if let Some(pos) = series.iter().position(|v| *v <= 0.0) {
        return Err(Error::invalid(format!(
            "stl_es requires strictly positive values (step {pos})"
        )));
    }

    let seasonal = if m > 1 {
        let trend = centered_moving_average(series, m);
        if let Some(pos) = trend.iter().position(|v| *v <= 0.0) {
            return Err(Error::Numeric(format!(
                "nonpositive moving-average trend at step {pos}"
            )));
        }
        let mut sums = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for (t, (y, tr)) in series.iter().zip(&trend).enumerate() {
            sums[t % m] += y / tr;
            counts[t % m] += 1;
        }
        let mut idx: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| s / *c as f64)
            .collect();
        let mean = idx.iter().sum::<f64>() / m as f64;
        for v in &mut idx {
            *v /= mean;
        }
        idx
    } else {
        vec![1.0]
    };

    let adjusted: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(t, y)| y / seasonal[t % m])
        .collect();
    let (alpha, _) = minimize_1d(|a| ses_pass(&adjusted, a).0);
    let (_, level, _) = ses_pass(&adjusted, alpha);

    // One-step residuals on the original scale.
    let mut ses_level = adjusted[0];
    let mut residuals = Vec::with_capacity(series.len() - 1);
    for t in 1..series.len() {
        residuals.push(series[t] - ses_level * seasonal[t % m]);
        ses_level += alpha * (adjusted[t] - ses_level);
    }

    Ok(PredictorFit {
        kind: PredictorKind::StlEs,
        m,
        t: series.len(),
        residuals,
        params: FitModel::StlEs {
            seasonal,
            alpha,
            level,
        },
    })
}
