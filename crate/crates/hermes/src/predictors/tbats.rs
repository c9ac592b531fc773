//! Trigonometric-seasonality predictor with ARMA error correction: optional
//! log transform, SES level, harmonic seasonal component with K chosen by
//! AIC, and an ARMA(p,q) model of the SES residuals fitted by least-squares
//! innovation estimation (Hannan-Rissanen).

use super::optim::{aic, minimize_1d, ols};
use super::{ses_pass, FitModel, PredictorFit, PredictorKind};
use crate::error::{Error, Result};
use std::f64::consts::TAU;

const ARMA_ORDERS: [(usize, usize); 9] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (1, 1),
    (2, 0),
    (0, 2),
    (2, 1),
    (1, 2),
    (2, 2),
];

/// Roots of `1 + c1*z + c2*z^2` all strictly outside the unit circle.
fn roots_outside_unit(c1: f64, c2: f64) -> bool {
    if c2.abs() < 1e-12 {
        return c1.abs() < 1e-12 || c1.abs() < 1.0;
    }
    // z = (-c1 +- sqrt(c1^2 - 4 c2)) / (2 c2)
    let disc = c1 * c1 - 4.0 * c2;
    if disc >= 0.0 {
        let sqrt_d = disc.sqrt();
        let r1 = (-c1 + sqrt_d) / (2.0 * c2);
        let r2 = (-c1 - sqrt_d) / (2.0 * c2);
        r1.abs() > 1.0 && r2.abs() > 1.0
    } else {
        // Complex conjugate pair: |z|^2 = 1/c2 (product of roots).
        1.0 / c2.abs() > 1.0
    }
}

fn poly_coeffs(coeffs: &[f64], negate: bool) -> (f64, f64) {
    let sign = if negate { -1.0 } else { 1.0 };
    (
        sign * coeffs.first().copied().unwrap_or(0.0),
        sign * coeffs.get(1).copied().unwrap_or(0.0),
    )
}

fn stationary(ar: &[f64]) -> bool {
    let (c1, c2) = poly_coeffs(ar, true);
    roots_outside_unit(c1, c2)
}

fn invertible(ma: &[f64]) -> bool {
    let (c1, c2) = poly_coeffs(ma, false);
    roots_outside_unit(c1, c2)
}

/// Conditional innovations of an ARMA(p,q): out-of-range terms are zero.
fn innovations(e: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut eps = Vec::with_capacity(e.len());
    for t in 0..e.len() {
        let mut v = e[t];
        for (i, phi) in ar.iter().enumerate() {
            if t > i {
                v -= phi * e[t - i - 1];
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v -= theta * eps[t - j - 1];
            }
        }
        eps.push(v);
    }
    eps
}

/// Hannan-Rissanen least-squares estimation of ARMA(p,q) coefficients.
fn arma_fit(e: &[f64], p: usize, q: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if p == 0 && q == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    if e.len() < 4 * (p + q) + 8 {
        return None;
    }
    let eps_hat: Vec<f64> = if q == 0 {
        Vec::new()
    } else {
        // Long-AR pass to estimate innovations.
        let long = (2 * (p + q)).max(6).min(e.len() / 4);
        let design: Vec<Vec<f64>> = (long..e.len())
            .map(|t| (1..=long).map(|lag| e[t - lag]).collect())
            .collect();
        let targets: Vec<f64> = e[long..].to_vec();
        let phi = ols(&design, &targets)?;
        let mut eps = vec![0.0; e.len()];
        for t in long..e.len() {
            let mut v = e[t];
            for (lag, c) in phi.iter().enumerate() {
                v -= c * e[t - lag - 1];
            }
            eps[t] = v;
        }
        eps
    };
    let start = p.max(q).max(if q == 0 { 0 } else { e.len() / 4 });
    if e.len() <= start + p + q + 2 {
        return None;
    }
    let design: Vec<Vec<f64>> = (start..e.len())
        .map(|t| {
            let mut row = Vec::with_capacity(p + q);
            for lag in 1..=p {
                row.push(e[t - lag]);
            }
            for lag in 1..=q {
                row.push(eps_hat[t - lag]);
            }
            row
        })
        .collect();
    let targets: Vec<f64> = e[start..].to_vec();
    let beta = ols(&design, &targets)?;
    let ar = beta[..p].to_vec();
    let ma = beta[p..].to_vec();
    if !stationary(&ar) || !invertible(&ma) {
        return None;
    }
    Some((ar, ma))
}

/// Harmonic OLS of `x` on a constant plus K cosine/sine pairs of period `m`.
/// Returns (intercept, cos coefs, sin coefs, seasonal component).
fn harmonic_fit(x: &[f64], m: usize, k: usize) -> Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let design: Vec<Vec<f64>> = (0..x.len())
        .map(|t| {
            let mut row = Vec::with_capacity(2 * k + 1);
            row.push(1.0);
            for j in 1..=k {
                let angle = TAU * j as f64 * t as f64 / m as f64;
                row.push(angle.cos());
                row.push(angle.sin());
            }
            row
        })
        .collect();
    let beta = ols(&design, x)?;
    let seasonal: Vec<f64> = (0..x.len())
        .map(|t| {
            let mut s = 0.0;
            for j in 1..=k {
                let angle = TAU * j as f64 * t as f64 / m as f64;
                s += beta[2 * j - 1] * angle.cos() + beta[2 * j] * angle.sin();
            }
            s
        })
        .collect();
    let cos_coef: Vec<f64> = (1..=k).map(|j| beta[2 * j - 1]).collect();
    let sin_coef: Vec<f64> = (1..=k).map(|j| beta[2 * j]).collect();
    Some((beta[0], cos_coef, sin_coef, seasonal))
}

struct Candidate {
    aic: f64,
    log_transform: bool,
    k: usize,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
    alpha: f64,
    level: f64,
    ar: Vec<f64>,
    ma: Vec<f64>,
    resid: Vec<f64>,
    innov: Vec<f64>,
}

pub(super) fn fit(series: &[f64], m: usize) -> Result<PredictorFit> {
    if series.len() < 2 * m {
        return Err(Error::invalid(format!(
            "tbats_lite needs length >= 2*{m}, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let strictly_positive = series.iter().all(|v| *v > 0.0);
    let log_jacobian: f64 = if strictly_positive {
        2.0 * series.iter().map(|v| v.ln()).sum::<f64>()
    } else {
        0.0
    };
    let k_max = (m / 2).clamp(1, 5);

    let mut best: Option<Candidate> = None;
    for log_transform in [false, true] {
        if log_transform && !strictly_positive {
            continue;
        }
        let x: Vec<f64> = if log_transform {
            series.iter().map(|v| v.ln()).collect()
        } else {
            series.to_vec()
        };
        let penalty = if log_transform { log_jacobian } else { 0.0 };
        for k in 1..=k_max {
            if 2 * k + 1 >= n {
                break;
            }
            let Some((_, cos_coef, sin_coef, seasonal)) = harmonic_fit(&x, m, k) else {
                continue;
            };
            let d: Vec<f64> = x.iter().zip(&seasonal).map(|(v, s)| v - s).collect();
            let (alpha, _) = minimize_1d(|a| ses_pass(&d, a).0);
            let (_, level, resid) = ses_pass(&d, alpha);
            for (p, q) in ARMA_ORDERS {
                let Some((ar, ma)) = arma_fit(&resid, p, q) else {
                    continue;
                };
                let innov = innovations(&resid, &ar, &ma);
                let sse: f64 = innov.iter().map(|v| v * v).sum();
                if !sse.is_finite() {
                    continue;
                }
                let params = 2 * k + 1 + 1 + p + q;
                let score = aic(innov.len(), sse, params) + penalty;
                if best.as_ref().is_none_or(|b| score < b.aic) {
                    best = Some(Candidate {
                        aic: score,
                        log_transform,
                        k,
                        cos_coef: cos_coef.clone(),
                        sin_coef: sin_coef.clone(),
                        alpha,
                        level,
                        ar,
                        ma,
                        resid: resid.clone(),
                        innov,
                    });
                }
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::Numeric("tbats_lite model selection found no admissible candidate".into())
    })?;

    let tail = 2usize;
    let resid_tail: Vec<f64> = best.resid[best.resid.len().saturating_sub(tail)..].to_vec();
    let innov_tail: Vec<f64> = best.innov[best.innov.len().saturating_sub(tail)..].to_vec();
    Ok(PredictorFit {
        kind: PredictorKind::TbatsLite,
        m,
        t: n,
        residuals: best.innov,
        params: FitModel::TbatsLite {
            log_transform: best.log_transform,
            alpha: best.alpha,
            level: best.level,
            k: best.k,
            cos_coef: best.cos_coef,
            sin_coef: best.sin_coef,
            ar: best.ar,
            ma: best.ma,
            resid_tail,
            innov_tail,
        },
    })
}

pub(super) fn forecast(fit: &PredictorFit, h: usize) -> Result<Vec<f64>> {
    let FitModel::TbatsLite {
        log_transform,
        level,
        k,
        cos_coef,
        sin_coef,
        ar,
        ma,
        resid_tail,
        innov_tail,
        ..
    } = &fit.params
    else {
        return Err(Error::invalid("not a tbats_lite fit"));
    };
    let m = fit.m as f64;

    // ARMA forecast of the error process; future innovations are zero, so
    // the correction decays at the AR/MA memory.
    let mut e_hist = resid_tail.clone();
    let mut eps_hist = innov_tail.clone();
    let mut corrections = Vec::with_capacity(h);
    for _ in 0..h {
        let mut v = 0.0;
        for (i, phi) in ar.iter().enumerate() {
            if e_hist.len() > i {
                v += phi * e_hist[e_hist.len() - 1 - i];
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if eps_hist.len() > j {
                v += theta * eps_hist[eps_hist.len() - 1 - j];
            }
        }
        corrections.push(v);
        e_hist.push(v);
        eps_hist.push(0.0);
    }

    let values = (0..h)
        .map(|i| {
            let t = (fit.t + i) as f64;
            let mut seasonal = 0.0;
            for j in 1..=*k {
                let angle = TAU * j as f64 * t / m;
                seasonal += cos_coef[j - 1] * angle.cos() + sin_coef[j - 1] * angle.sin();
            }
            let v = level + seasonal + corrections[i];
            if *log_transform {
                v.exp()
            } else {
                v
            }
        })
        .collect();
    Ok(values)
}
