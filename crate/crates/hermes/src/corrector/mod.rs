//! The global error corrector: normalized input construction, the LSTM
//! stack, training losses, Adam, and the training loop.

mod adam;
mod loss;
mod lstm;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use loss::{loss_eval, loss_grad_wrt_pred, LossKind};
pub use lstm::{
    lstm_forward, lstm_forward_hybrid, lstm_gradient, GradExample, LstmParams, NetworkSpec,
};
pub use train::{mean_loss, train_corrector, TraceRow, TrainConfig, TrainExample};

use crate::error::{Error, Result};
use crate::predictors::Forecast;
use serde::{Deserialize, Serialize};

/// Seasonal-phase map: window step `i` (1-based) shares its phase with
/// forecast step `k(i)` in 1..h.
pub fn phase(i: usize, h: usize) -> usize {
    (i - 1) % h + 1
}

/// Normalized corrector input: the deseasonalized, rescaled window `z`
/// plus K weak channels aligned to the same window, and the window mean
/// used for rescaling the network output back to series units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorInput {
    pub z: Vec<f64>,
    /// K channels, each of window length.
    pub weak: Vec<Vec<f64>>,
    pub window_mean: f64,
    pub origin: usize,
}

impl CorrectorInput {
    pub fn window_len(&self) -> usize {
        self.z.len()
    }

    pub fn feature_width(&self) -> usize {
        1 + self.weak.len()
    }

    /// Per-step feature vector `(z_i, w^1_i, ..., w^K_i)`.
    pub fn feature(&self, step: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.z[step]);
        for ch in &self.weak {
            out.push(ch[step]);
        }
    }
}

/// Build the normalized window input `z` from the raw history and the
/// predictor's h-ahead forecast at the same origin:
/// `z_i = (y_{T-w+i} - yhat_{T+k(i)}) / ybar`, `ybar` the window mean.
pub fn build_z_input(series: &[f64], pred: &Forecast, w: usize, h: usize) -> Result<CorrectorInput> {
    if w % h != 0 {
        return Err(Error::invalid(format!(
            "window {w} must be a multiple of horizon {h} for the phase map"
        )));
    }
    if series.len() < w {
        return Err(Error::invalid(format!(
            "series length {} shorter than window {w}",
            series.len()
        )));
    }
    if pred.values.len() < h {
        return Err(Error::invalid("predictor forecast shorter than horizon"));
    }
    let window = &series[series.len() - w..];
    let mean = window.iter().sum::<f64>() / w as f64;
    if mean <= 0.0 {
        return Err(Error::invalid(format!(
            "window mean must be positive, got {mean}"
        )));
    }
    let z = window
        .iter()
        .enumerate()
        .map(|(idx, y)| (y - pred.values[phase(idx + 1, h) - 1]) / mean)
        .collect();
    Ok(CorrectorInput {
        z,
        weak: Vec::new(),
        window_mean: mean,
        origin: series.len(),
    })
}

/// Concatenate weak channels onto a `z` input. `channels` are full-length
/// sequences; the window slice ending at the input's origin is taken.
/// Weak channels are already bounded ratios and are not rescaled.
pub fn build_concat_input(input: &CorrectorInput, channels: &[Vec<f64>]) -> Result<CorrectorInput> {
    let w = input.window_len();
    let origin = input.origin;
    let mut weak = Vec::with_capacity(channels.len());
    for (ci, ch) in channels.iter().enumerate() {
        if ch.len() < origin {
            return Err(Error::invalid(format!(
                "weak channel {ci} has length {}, window needs steps up to {origin}",
                ch.len()
            )));
        }
        weak.push(ch[origin - w..origin].to_vec());
    }
    Ok(CorrectorInput {
        z: input.z.clone(),
        weak,
        window_mean: input.window_mean,
        origin,
    })
}
