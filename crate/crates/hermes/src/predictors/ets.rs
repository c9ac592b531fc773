//! Additive exponential smoothing with a level and a seasonal component
//! (no trend). Smoothing coefficients chosen by in-sample one-step SSE.

use super::optim::minimize_2d;
use super::{FitModel, PredictorFit, PredictorKind};
use crate::error::{Error, Result};

struct Pass {
    sse: f64,
    level: f64,
    seasonal: Vec<f64>,
    residuals: Vec<f64>,
}

fn run(series: &[f64], m: usize, alpha: f64, gamma: f64, keep: bool) -> Pass {
    let mut level = series[..m].iter().sum::<f64>() / m as f64;
    let mut seasonal: Vec<f64> = series[..m].iter().map(|y| y - level).collect();
    let mut sse = 0.0;
    let mut residuals = if keep {
        Vec::with_capacity(series.len() - m)
    } else {
        Vec::new()
    };
    for (t, &y) in series.iter().enumerate().skip(m) {
        let s = seasonal[t % m];
        let e = y - (level + s);
        sse += e * e;
        if keep {
            residuals.push(e);
        }
        let new_level = level + alpha * e;
        seasonal[t % m] = gamma * (y - new_level) + (1.0 - gamma) * s;
        level = new_level;
    }
    Pass {
        sse,
        level,
        seasonal,
        residuals,
    }
}

pub(super) fn fit(series: &[f64], m: usize) -> Result<PredictorFit> {
    if series.len() < 2 * m {
        return Err(Error::invalid(format!(
            "hw_ets needs length >= 2*{m}, got {}",
            series.len()
        )));
    }
    let ((alpha, gamma), _) = minimize_2d(|a, g| run(series, m, a, g, false).sse);
    let pass = run(series, m, alpha, gamma, true);
    Ok(PredictorFit {
        kind: PredictorKind::HwEts,
        m,
        t: series.len(),
        residuals: pass.residuals,
        params: FitModel::HwEts {
            alpha,
            gamma,
            level: pass.level,
            seasonal: pass.seasonal,
        },
    })
}
