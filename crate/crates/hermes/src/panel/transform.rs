//! Series transforms: classical deseasonalization, parent-category
//! normalization, the fashion-forward ratio, M4 length resizing, and
//! rolling-origin window cuts.

use crate::error::{Error, Result};

/// Centered moving average of width `m`. Even `m` uses the standard
/// half-weight endpoints; edge steps reuse the nearest full window.
pub(crate) fn centered_moving_average(series: &[f64], m: usize) -> Vec<f64> {
    let n = series.len();
    let half = m / 2;
    let cma_at = |t: usize| -> f64 {
        if m % 2 == 1 {
            series[t - half..=t + half].iter().sum::<f64>() / m as f64
        } else {
            let mut acc = 0.5 * (series[t - half] + series[t + half]);
            acc += series[t - half + 1..t + half].iter().sum::<f64>();
            acc / m as f64
        }
    };
    let lo = half;
    let hi = n - 1 - half;
    (0..n).map(|t| cma_at(t.clamp(lo, hi))).collect()
}

/// Additive seasonal indices of period `m`: phase means of the
/// CMA-detrended series, centered to zero mean.
pub fn seasonal_indices(series: &[f64], m: usize) -> Result<Vec<f64>> {
    if series.len() < 2 * m {
        return Err(Error::invalid(format!(
            "deseasonalize needs length >= 2*{m}, got {}",
            series.len()
        )));
    }
    let trend = centered_moving_average(series, m);
    // Phase means over interior steps only: edge steps reuse a shifted
    // window, and their detrended values would bias the indices (e.g. break
    // exactness on a purely trending series).
    let half = m / 2;
    let (lo, hi) = (half, series.len() - 1 - half);
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for t in lo..=hi {
        sums[t % m] += series[t] - trend[t];
        counts[t % m] += 1;
    }
    if counts.iter().any(|c| *c == 0) {
        return Err(Error::invalid(format!(
            "series too short to observe every phase of period {m}"
        )));
    }
    let mut idx: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| s / *c as f64)
        .collect();
    let mean = idx.iter().sum::<f64>() / m as f64;
    for v in &mut idx {
        *v -= mean;
    }
    Ok(idx)
}

/// Subtract the estimated seasonal component (period `m`) from `series`.
pub fn deseasonalize(series: &[f64], m: usize) -> Result<Vec<f64>> {
    let idx = seasonal_indices(series, m)?;
    Ok(series
        .iter()
        .enumerate()
        .map(|(t, y)| y - idx[t % m])
        .collect())
}

/// Elementwise `child / deseasonalize(parent, m)`: the series expressed as
/// a share of its parent category.
pub fn normalize_by_parent(child: &[f64], parent: &[f64], m: usize) -> Result<Vec<f64>> {
    if child.len() != parent.len() {
        return Err(Error::invalid(format!(
            "child length {} != parent length {}",
            child.len(),
            parent.len()
        )));
    }
    let deseas = deseasonalize(parent, m)?;
    if let Some(pos) = deseas.iter().position(|v| *v <= 0.0) {
        return Err(Error::invalid(format!(
            "deseasonalized parent is nonpositive at step {pos}"
        )));
    }
    Ok(child.iter().zip(&deseas).map(|(c, p)| c / p).collect())
}

/// Per-step ratio `forward / (forward + main)` in [0, 1]; a both-zero step
/// yields the neutral value 0.5.
pub fn fashion_forward_ratio(main: &[f64], forward: &[f64]) -> Result<Vec<f64>> {
    if main.len() != forward.len() {
        return Err(Error::invalid("main and forward series lengths differ"));
    }
    main.iter()
        .zip(forward)
        .enumerate()
        .map(|(t, (y, f))| {
            if *y < 0.0 || *f < 0.0 {
                return Err(Error::invalid(format!("negative input at step {t}")));
            }
            Ok(if *y + *f > 0.0 { f / (f + y) } else { 0.5 })
        })
        .collect()
}

/// Resize a series to exactly `target` steps: longer series keep their last
/// `target` values; shorter ones prepend whole copies of the final `m`
/// observations until long enough, then keep the last `target`.
pub fn resize_to_length(series: &[f64], target: usize, m: usize) -> Result<Vec<f64>> {
    if series.len() < m {
        return Err(Error::invalid(format!(
            "resize needs length >= {m}, got {}",
            series.len()
        )));
    }
    if series.len() >= target {
        return Ok(series[series.len() - target..].to_vec());
    }
    let last_year = &series[series.len() - m..];
    let copies = (target - series.len()).div_ceil(m);
    let mut out = Vec::with_capacity(series.len() + copies * m);
    for _ in 0..copies {
        out.extend_from_slice(last_year);
    }
    out.extend_from_slice(series);
    Ok(out[out.len() - target..].to_vec())
}

/// Rolling-origin cuts for corrector training examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RollingWindows {
    /// Cut indices `T_i = t_origin - (i-1)*h`, newest first.
    pub cuts: Vec<usize>,
    /// Number of requested windows dropped for insufficient history.
    pub skipped: usize,
}

/// Cut indices for `n_windows` training windows ending at `t_origin`,
/// strided by `h`. A cut is kept only if it leaves at least `w` past
/// observations; dropped cuts are counted, not errors.
pub fn rolling_windows(t_origin: usize, n_windows: usize, h: usize, w: usize) -> RollingWindows {
    let mut cuts = Vec::new();
    let mut skipped = 0;
    for i in 0..n_windows {
        match t_origin.checked_sub(i * h) {
            Some(cut) if cut >= w => cuts.push(cut),
            _ => skipped += 1,
        }
    }
    RollingWindows { cuts, skipped }
}
