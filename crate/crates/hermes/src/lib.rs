//! HERMES: hybrid weekly time-series forecasting.
//!
//! Per-series parametric predictors produce a first h-ahead forecast; a
//! single global LSTM corrector, fed the window-mean-normalized residual
//! window (optionally concatenated with external weak-signal channels),
//! adds a correction: `y_hat = y_pred + RNN(x) * ybar`.

pub mod corrector;
pub mod error;
pub mod hybrid;
pub mod metrics;
pub mod panel;
pub mod predictors;
pub mod synth;

pub use error::{Error, Result};
