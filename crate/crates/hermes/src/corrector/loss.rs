//! Training losses: MAE, MSE, and their window-mean-scaled variants.
//! The scaled kinds divide by the window mean and carry no 1/h factor.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
pub enum LossKind {
    Mae,
    Mse,
    Smae,
    Smse,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LossKind::Mae => "MAE",
            LossKind::Mse => "MSE",
            LossKind::Smae => "SMAE",
            LossKind::Smse => "SMSE",
        };
        f.write_str(name)
    }
}

fn check_scale(kind: LossKind, window_mean: f64) -> Result<()> {
    if matches!(kind, LossKind::Smae | LossKind::Smse) && window_mean <= 0.0 {
        return Err(Error::invalid(format!(
            "scaled loss needs a positive window mean, got {window_mean}"
        )));
    }
    Ok(())
}

/// Evaluate the loss between truth and a hybrid forecast.
pub fn loss_eval(kind: LossKind, y_true: &[f64], y_hat: &[f64], window_mean: f64) -> Result<f64> {
    check_scale(kind, window_mean)?;
    debug_assert_eq!(y_true.len(), y_hat.len());
    let h = y_true.len() as f64;
    let value = match kind {
        LossKind::Mae => {
            y_true
                .iter()
                .zip(y_hat)
                .map(|(y, p)| (y - p).abs())
                .sum::<f64>()
                / h
        }
        LossKind::Mse => {
            y_true
                .iter()
                .zip(y_hat)
                .map(|(y, p)| (y - p) * (y - p))
                .sum::<f64>()
                / h
        }
        LossKind::Smae => {
            y_true
                .iter()
                .zip(y_hat)
                .map(|(y, p)| (y - p).abs())
                .sum::<f64>()
                / window_mean
        }
        LossKind::Smse => {
            y_true
                .iter()
                .zip(y_hat)
                .map(|(y, p)| (y - p) * (y - p))
                .sum::<f64>()
                / window_mean
        }
    };
    Ok(value)
}

/// Gradient of the loss with respect to the forecast values (subgradient 0
/// at the |.| kink).
pub fn loss_grad_wrt_pred(
    kind: LossKind,
    y_true: &[f64],
    y_hat: &[f64],
    window_mean: f64,
) -> Result<Vec<f64>> {
    check_scale(kind, window_mean)?;
    let h = y_true.len() as f64;
    let grad = y_true
        .iter()
        .zip(y_hat)
        .map(|(y, p)| {
            let e = y - p;
            let sign = if e == 0.0 { 0.0 } else { e.signum() };
            match kind {
                LossKind::Mae => -sign / h,
                LossKind::Mse => -2.0 * e / h,
                LossKind::Smae => -sign / window_mean,
                LossKind::Smse => -2.0 * e / window_mean,
            }
        })
        .collect();
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [LossKind; 4] = [LossKind::Mae, LossKind::Mse, LossKind::Smae, LossKind::Smse];

    #[test]
    fn zero_at_perfect_prediction() {
        let y = [1.0, 2.0, 3.0];
        for kind in KINDS {
            assert_eq!(loss_eval(kind, &y, &y, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_example_all_kinds() {
        // e = [1, -1], ybar = 2, h = 2: every kind evaluates to 1.
        let y = [3.0, 3.0];
        let p = [2.0, 4.0];
        for kind in KINDS {
            assert_eq!(loss_eval(kind, &y, &p, 2.0).unwrap(), 1.0, "{kind}");
        }
    }

    #[test]
    fn smae_relates_to_mae_exactly() {
        let y = [1.5, -0.25, 4.0, 0.125];
        let p = [1.0, 0.5, 3.0, 0.0];
        let ybar = 1.75;
        let h = y.len() as f64;
        let smae = loss_eval(LossKind::Smae, &y, &p, ybar).unwrap();
        let mae = loss_eval(LossKind::Mae, &y, &p, ybar).unwrap();
        assert_eq!(smae, h * mae / ybar);
    }

    #[test]
    fn scaled_kinds_need_positive_mean() {
        assert!(loss_eval(LossKind::Smae, &[1.0], &[0.0], 0.0).is_err());
        assert!(loss_eval(LossKind::Mae, &[1.0], &[0.0], 0.0).is_ok());
    }
}
