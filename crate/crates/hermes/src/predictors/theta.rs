//! Theta-method predictor: additive deseasonalization, theta-lines with
//! theta in {0, 2} (linear trend / SES-extrapolated line), recombined with
//! equal weights and reseasonalized.

use super::optim::minimize_1d;
use super::{ses_pass, FitModel, PredictorFit, PredictorKind};
use crate::error::{Error, Result};
use crate::panel::seasonal_indices;

pub(super) fn fit(series: &[f64], m: usize) -> Result<PredictorFit> {
    if m > 1 && series.len() < 2 * m {
        return Err(Error::invalid(format!(
            "theta needs length >= 2*{m}, got {}",
            series.len()
        )));
    }
    if series.len() < 3 {
        return Err(Error::invalid("theta needs at least 3 observations"));
    }
    let (seasonal, adjusted) = if m > 1 {
        let idx = seasonal_indices(series, m)?;
        let adj: Vec<f64> = series
            .iter()
            .enumerate()
            .map(|(t, y)| y - idx[t % m])
            .collect();
        (idx, adj)
    } else {
        (Vec::new(), series.to_vec())
    };

    // theta=0 line: OLS linear trend over step index.
    let n = adjusted.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = adjusted.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, y) in adjusted.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;

    // theta=2 line, extrapolated flat by simple exponential smoothing.
    let theta2: Vec<f64> = adjusted
        .iter()
        .enumerate()
        .map(|(t, y)| 2.0 * y - (intercept + slope * t as f64))
        .collect();
    let (alpha, _) = minimize_1d(|a| ses_pass(&theta2, a).0);
    let (_, level, _) = ses_pass(&theta2, alpha);

    // One-step in-sample residuals of the recombined model.
    let mut ses_level = theta2[0];
    let mut residuals = Vec::with_capacity(series.len() - 1);
    for t in 1..series.len() {
        let seas = if seasonal.is_empty() {
            0.0
        } else {
            seasonal[t % m]
        };
        let pred = 0.5 * (intercept + slope * t as f64) + 0.5 * ses_level + seas;
        residuals.push(series[t] - pred);
        ses_level += alpha * (theta2[t] - ses_level);
    }

    Ok(PredictorFit {
        kind: PredictorKind::Theta,
        m,
        t: series.len(),
        residuals,
        params: FitModel::Theta {
            seasonal,
            intercept,
            slope,
            alpha,
            level,
        },
    })
}
