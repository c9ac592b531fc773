//! Per-time-series parametric predictors: fit on history, emit an h-ahead
//! forecast. All kinds are deterministic given (series, m).

mod ets;
pub(crate) mod optim;
mod stl_es;
mod tbats;
mod theta;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The closed set of predictor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Snaive,
    HwEts,
    Theta,
    StlEs,
    TbatsLite,
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PredictorKind::Snaive => "snaive",
            PredictorKind::HwEts => "hw_ets",
            PredictorKind::Theta => "theta",
            PredictorKind::StlEs => "stl_es",
            PredictorKind::TbatsLite => "tbats_lite",
        };
        f.write_str(name)
    }
}

/// Fitted parameters, per kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitModel {
    Snaive {
        /// Last m observations, oldest first.
        pattern: Vec<f64>,
    },
    HwEts {
        alpha: f64,
        gamma: f64,
        level: f64,
        /// Seasonal states indexed by phase `t % m`.
        seasonal: Vec<f64>,
    },
    Theta {
        /// Additive seasonal indices by phase (empty when m = 1).
        seasonal: Vec<f64>,
        intercept: f64,
        slope: f64,
        alpha: f64,
        /// SES level of the theta-2 line.
        level: f64,
    },
    StlEs {
        /// Multiplicative seasonal indices by phase, mean 1.
        seasonal: Vec<f64>,
        alpha: f64,
        level: f64,
    },
    TbatsLite {
        log_transform: bool,
        alpha: f64,
        level: f64,
        /// Number of harmonics.
        k: usize,
        cos_coef: Vec<f64>,
        sin_coef: Vec<f64>,
        ar: Vec<f64>,
        ma: Vec<f64>,
        /// Last residuals / innovations of the error model, newest last.
        resid_tail: Vec<f64>,
        innov_tail: Vec<f64>,
    },
}

/// A fitted per-series model able to emit an h-ahead forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorFit {
    pub kind: PredictorKind,
    pub m: usize,
    /// Fitted history length.
    pub t: usize,
    /// In-sample one-step residuals (kind-specific burn-in excluded).
    pub residuals: Vec<f64>,
    pub params: FitModel,
}

impl PredictorFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// h-ahead point forecast from origin `origin` (values cover steps
/// `origin+1..origin+h` in 1-based terms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub origin: usize,
    pub values: Vec<f64>,
}

/// Simple exponential smoothing pass: returns (sse, final level, one-step
/// residuals from the second observation on). Level starts at the first
/// observation.
pub(crate) fn ses_pass(series: &[f64], alpha: f64) -> (f64, f64, Vec<f64>) {
    let mut level = series[0];
    let mut sse = 0.0;
    let mut residuals = Vec::with_capacity(series.len().saturating_sub(1));
    for &y in &series[1..] {
        let e = y - level;
        residuals.push(e);
        sse += e * e;
        level += alpha * e;
    }
    (sse, level, residuals)
}

/// Fit a predictor of the requested kind on `series` with seasonal period `m`.
pub fn fit_predictor(kind: PredictorKind, series: &[f64], m: usize) -> Result<PredictorFit> {
    if m == 0 {
        return Err(Error::invalid("seasonal period must be positive"));
    }
    if let Some(pos) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at step {pos}")));
    }
    match kind {
        PredictorKind::Snaive => {
            if series.len() < m {
                return Err(Error::invalid(format!(
                    "snaive needs at least {m} observations, got {}",
                    series.len()
                )));
            }
            let pattern = series[series.len() - m..].to_vec();
            let residuals = series
                .iter()
                .skip(m)
                .zip(series)
                .map(|(y, prev)| y - prev)
                .collect();
            Ok(PredictorFit {
                kind,
                m,
                t: series.len(),
                residuals,
                params: FitModel::Snaive { pattern },
            })
        }
        PredictorKind::HwEts => ets::fit(series, m),
        PredictorKind::Theta => theta::fit(series, m),
        PredictorKind::StlEs => stl_es::fit(series, m),
        PredictorKind::TbatsLite => tbats::fit(series, m),
    }
}

/// Deterministic h-step forecast from a fit.
pub fn forecast_predictor(fit: &PredictorFit, h: usize) -> Result<Forecast> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be positive"));
    }
    let m = fit.m;
    let t = fit.t;
    let values: Vec<f64> = match &fit.params {
        FitModel::Snaive { pattern } => (0..h).map(|i| pattern[i % m]).collect(),
        FitModel::HwEts {
            level, seasonal, ..
        } => (0..h).map(|i| level + seasonal[(t + i) % m]).collect(),
        FitModel::Theta {
            seasonal,
            intercept,
            slope,
            level,
            ..
        } => (0..h)
            .map(|i| {
                let step = (t + i) as f64;
                let seas = if seasonal.is_empty() {
                    0.0
                } else {
                    seasonal[(t + i) % m]
                };
                0.5 * (intercept + slope * step) + 0.5 * level + seas
            })
            .collect(),
        FitModel::StlEs {
            seasonal, level, ..
        } => (0..h).map(|i| level * seasonal[(t + i) % m]).collect(),
        FitModel::TbatsLite { .. } => tbats::forecast(fit, h)?,
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite forecast at horizon step {}",
            pos + 1
        )));
    }
    Ok(Forecast {
        origin: t,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn periodic_series(m: usize, periods: usize) -> Vec<f64> {
        (0..m * periods)
            .map(|t| {
                let x = t as f64 / m as f64;
                10.0 + 2.0 * (TAU * x).sin() + 0.7 * (2.0 * TAU * x).cos()
            })
            .collect()
    }

    #[test]
    fn snaive_stores_last_period() {
        let fit = fit_predictor(PredictorKind::Snaive, &[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(
            fit.params,
            FitModel::Snaive {
                pattern: vec![3.0, 4.0]
            }
        );
        let fc = forecast_predictor(&fit, 4).unwrap();
        assert_eq!(fc.values, vec![3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn snaive_repeats_final_year() {
        let series: Vec<f64> = (0..261).map(|t| (t as f64 * 0.37).sin() + 2.0).collect();
        let fit = fit_predictor(PredictorKind::Snaive, &series, 52).unwrap();
        let fc = forecast_predictor(&fit, 52).unwrap();
        assert_eq!(fc.values, series[261 - 52..].to_vec());
    }

    #[test]
    fn hw_ets_constant_series() {
        let fit = fit_predictor(PredictorKind::HwEts, &vec![4.2; 30], 5).unwrap();
        let fc = forecast_predictor(&fit, 7).unwrap();
        for v in fc.values {
            assert!((v - 4.2).abs() < 1e-10);
        }
    }

    #[test]
    fn hw_ets_exact_seasonality_residuals_vanish() {
        let m = 12;
        let series = periodic_series(m, 6);
        let fit = fit_predictor(PredictorKind::HwEts, &series, m).unwrap();
        // After a burn-in of 2m steps the one-step residuals are ~0.
        for (i, e) in fit.residuals.iter().enumerate().skip(2 * m) {
            assert!(e.abs() < 1e-6, "residual {i}: {e}");
        }
    }

    #[test]
    fn tbats_recovers_sinusoid_amplitude() {
        let series: Vec<f64> = (1..=260)
            .map(|t| 10.0 + 2.0 * (TAU * t as f64 / 52.0).sin())
            .collect();
        let fit = fit_predictor(PredictorKind::TbatsLite, &series, 52).unwrap();
        let FitModel::TbatsLite {
            k,
            cos_coef,
            sin_coef,
            log_transform,
            ..
        } = &fit.params
        else {
            panic!("wrong model kind");
        };
        assert!(!log_transform);
        assert_eq!(*k, 1);
        let amp = (cos_coef[0].powi(2) + sin_coef[0].powi(2)).sqrt();
        assert!((amp - 2.0).abs() < 0.05, "amplitude {amp}");
    }

    #[test]
    fn determinism_bit_identical() {
        let series = periodic_series(8, 5);
        for kind in [
            PredictorKind::Snaive,
            PredictorKind::HwEts,
            PredictorKind::Theta,
            PredictorKind::StlEs,
            PredictorKind::TbatsLite,
        ] {
            let a = forecast_predictor(&fit_predictor(kind, &series, 8).unwrap(), 8).unwrap();
            let b = forecast_predictor(&fit_predictor(kind, &series, 8).unwrap(), 8).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn shift_equivariance_additive_kinds() {
        let series: Vec<f64> = periodic_series(6, 6)
            .iter()
            .enumerate()
            .map(|(t, v)| v + 0.03 * t as f64 + ((t * 7919) % 13) as f64 * 0.01)
            .collect();
        let shifted: Vec<f64> = series.iter().map(|v| v + 100.0).collect();
        for kind in [
            PredictorKind::Snaive,
            PredictorKind::HwEts,
            PredictorKind::Theta,
        ] {
            let a = forecast_predictor(&fit_predictor(kind, &series, 6).unwrap(), 6).unwrap();
            let b = forecast_predictor(&fit_predictor(kind, &shifted, 6).unwrap(), 6).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((y - x - 100.0).abs() < 1e-8, "{kind}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn scale_equivariance_all_kinds() {
        // Deterministic pseudo-noise keeps SSEs away from the AIC floor so
        // tbats model selection is scale-stable.
        let series: Vec<f64> = periodic_series(6, 8)
            .iter()
            .enumerate()
            .map(|(t, v)| v + ((t * 2654435761) % 97) as f64 * 0.01)
            .collect();
        let c = 37.5;
        let scaled: Vec<f64> = series.iter().map(|v| v * c).collect();
        for kind in [
            PredictorKind::Snaive,
            PredictorKind::HwEts,
            PredictorKind::Theta,
            PredictorKind::StlEs,
            PredictorKind::TbatsLite,
        ] {
            let a = forecast_predictor(&fit_predictor(kind, &series, 6).unwrap(), 6).unwrap();
            let b = forecast_predictor(&fit_predictor(kind, &scaled, 6).unwrap(), 6).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(
                    ((y - c * x) / (c * x)).abs() < 1e-8,
                    "{kind}: {} vs {}",
                    c * x,
                    y
                );
            }
        }
    }

    #[test]
    fn seasonal_kinds_match_snaive_on_noise_free_periodic() {
        // On an exactly periodic series every seasonal kind forecasts
        // exactly, so its MASE (with an m=1 denominator) matches snaive's.
        let m = 12;
        let series = periodic_series(m, 6);
        let truth: Vec<f64> = (0..m)
            .map(|i| series[series.len() - m + i])
            .collect();
        let denom: f64 = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let mase_of = |pred: &[f64]| {
            let num: f64 = pred.iter().zip(&truth).map(|(p, y)| (p - y).abs()).sum();
            (series.len() as f64 - 1.0) / m as f64 * num / denom
        };
        let snaive_fc =
            forecast_predictor(&fit_predictor(PredictorKind::Snaive, &series, m).unwrap(), m)
                .unwrap();
        let base = mase_of(&snaive_fc.values);
        for kind in [
            PredictorKind::HwEts,
            PredictorKind::Theta,
            PredictorKind::StlEs,
            PredictorKind::TbatsLite,
        ] {
            let fc = forecast_predictor(&fit_predictor(kind, &series, m).unwrap(), m).unwrap();
            let mase = mase_of(&fc.values);
            assert!((mase - base).abs() < 1e-6, "{kind}: {mase} vs {base}");
        }
    }

    #[test]
    fn fit_json_round_trip() {
        let series = periodic_series(8, 5);
        let fit = fit_predictor(PredictorKind::TbatsLite, &series, 8).unwrap();
        let json = fit.to_json().unwrap();
        assert_eq!(PredictorFit::from_json(&json).unwrap(), fit);
    }

    #[test]
    fn zero_horizon_rejected() {
        let fit = fit_predictor(PredictorKind::Snaive, &[1.0, 2.0], 2).unwrap();
        assert!(forecast_predictor(&fit, 0).is_err());
    }

    #[test]
    fn too_short_series_rejected() {
        assert!(fit_predictor(PredictorKind::HwEts, &[1.0, 2.0, 3.0], 4).is_err());
        assert!(fit_predictor(PredictorKind::StlEs, &[1.0; 6], 4).is_err());
    }

    #[test]
    fn stl_es_requires_positive_values() {
        let mut series = periodic_series(6, 6);
        series[3] = -1.0;
        assert!(fit_predictor(PredictorKind::StlEs, &series, 6).is_err());
    }
}
