//! Synthetic weekly panels with seeded regime shifts and an anticipating
//! weak-signal channel, in the fashion panel format.
//!
//! Each series is `y_t = level·(1 + a·sin(2πt/52 + φ)) + trend·t + noise`.
//! A configurable fraction undergoes a regime shift: the level component is
//! multiplied by a gain `g` from a shift week onward. The shift week sits
//! just after one of the three forecast origins (train-target, eval, test),
//! so no parametric fit on the pre-shift history can anticipate it. The
//! weak channel, flat at 0.5 otherwise, moves to an attenuated copy of
//! `g/(1+g)` already `L ∈ [8,16]` weeks before the shift — inside the
//! corrector's input window — and reverts to 0.5 once the shift lands.

use crate::error::{Error, Result};
use crate::panel::{SeriesRecord, TimePanel, WeakEntry, WeakSignalPanel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const SEASON: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_series: usize,
    pub t_len: usize,
    pub seed: u64,
    /// Fraction of series given a regime shift (count = round(n·fraction)).
    pub shift_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_series: 200,
            t_len: 261,
            seed: 0,
            shift_fraction: 0.3,
        }
    }
}

/// Ground truth about one generated series, for generator tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    /// Week of the regime shift, if any.
    pub shift: Option<usize>,
    /// Weak-signal lead time L.
    pub lead: usize,
    /// Level gain applied from the shift week onward.
    pub gain: f64,
}

/// Generate a synthetic panel plus its weak-signal channel. Deterministic
/// per config.
pub fn generate(cfg: &SynthConfig) -> Result<(TimePanel, WeakSignalPanel, Vec<SynthMeta>)> {
    if cfg.n_series == 0 {
        return Err(Error::invalid("need at least one series"));
    }
    if cfg.t_len < 3 * SEASON {
        return Err(Error::invalid(format!(
            "length {} too short: need at least {}",
            cfg.t_len,
            3 * SEASON
        )));
    }
    if !(0.0..=1.0).contains(&cfg.shift_fraction) {
        return Err(Error::invalid("shift fraction must be in [0, 1]"));
    }
    // The three forecast origins a shift can follow (see temporal_split:
    // test is the last year, eval the one before).
    let train_end = cfg.t_len - 2 * SEASON;
    let eval_end = cfg.t_len - SEASON;
    let origins = [train_end - SEASON, train_end, eval_end];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_shifted = (cfg.n_series as f64 * cfg.shift_fraction).round() as usize;
    let mut shifted: Vec<bool> = (0..cfg.n_series).map(|i| i < n_shifted).collect();
    shifted.shuffle(&mut rng);

    let mut series = Vec::with_capacity(cfg.n_series);
    let mut weak = Vec::with_capacity(cfg.n_series);
    let mut meta = Vec::with_capacity(cfg.n_series);
    for (i, &has_shift) in shifted.iter().enumerate() {
        let level: f64 = rng.gen_range(50.0..150.0);
        let amplitude: f64 = rng.gen_range(0.2..0.5);
        let phase: f64 = rng.gen_range(0.0..TAU);
        let trend: f64 = rng.gen_range(0.1..0.5);
        let noise_scale = 0.01 * level;

        let lead: usize = rng.gen_range(8..=16);
        let (shift, gain, attenuation) = if has_shift {
            let origin = origins[rng.gen_range(0..origins.len())];
            // Early in the target year, so the weak channel's departure at
            // shift - lead already sits inside the input window.
            let shift = origin + rng.gen_range(1..lead);
            let gain = if rng.gen_bool(0.5) {
                rng.gen_range(1.35..1.7)
            } else {
                1.0 / rng.gen_range(1.35..1.7)
            };
            (Some(shift), gain, rng.gen_range(0.75..1.0))
        } else {
            (None, 1.0, 0.0)
        };

        let values: Vec<f64> = (0..cfg.t_len)
            .map(|t| {
                let g = match shift {
                    Some(s) if t >= s => gain,
                    _ => 1.0,
                };
                let seasonal = level * g * (1.0 + amplitude * (TAU * t as f64 / SEASON as f64 + phase).sin());
                let noise = noise_scale * (rng.gen::<f64>() - 0.5) * 2.0;
                seasonal + trend * t as f64 + noise
            })
            .collect();
        if let Some(bad) = values.iter().find(|v| **v <= 0.0) {
            return Err(Error::Numeric(format!(
                "generated non-positive value {bad} in series {i}"
            )));
        }

        // The channel departs from the neutral 0.5 only while the shift is
        // still upcoming: from shift - lead until the shift lands. Once the
        // shift is visible in the series itself it is no longer news, and a
        // permanently departed channel would teach the corrector the wrong
        // lesson on later forecast origins.
        let channel: Vec<f64> = (0..cfg.t_len)
            .map(|t| match shift {
                Some(s) if t + lead >= s && t < s => {
                    0.5 + attenuation * (gain / (1.0 + gain) - 0.5)
                }
                _ => 0.5,
            })
            .collect();

        series.push(SeriesRecord::new(format!("synth{i:05}"), values));
        weak.push(WeakEntry {
            id: format!("synth{i:05}"),
            channels: vec![channel],
        });
        meta.push(SynthMeta { shift, lead, gain });
    }
    let panel = TimePanel::new(series)?;
    Ok((panel, WeakSignalPanel { entries: weak }, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig {
            n_series: 10,
            t_len: 261,
            seed: 3,
            shift_fraction: 0.3,
        };
        let (a, wa, ma) = generate(&cfg).unwrap();
        let (b, wb, mb) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa.entries, wb.entries);
        assert_eq!(ma, mb);
        let (c, ..) = generate(&SynthConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exact_shift_count() {
        let cfg = SynthConfig {
            n_series: 100,
            t_len: 261,
            seed: 0,
            shift_fraction: 0.3,
        };
        let (_, _, meta) = generate(&cfg).unwrap();
        assert_eq!(meta.iter().filter(|m| m.shift.is_some()).count(), 30);
    }

    #[test]
    fn weak_channel_departs_lead_weeks_before_shift() {
        let cfg = SynthConfig {
            n_series: 50,
            t_len: 261,
            seed: 7,
            shift_fraction: 0.4,
        };
        let (panel, weak, meta) = generate(&cfg).unwrap();
        let mut checked = 0;
        for (entry, m) in weak.entries.iter().zip(&meta) {
            let ch = &entry.channels[0];
            match m.shift {
                Some(s) => {
                    let first = ch.iter().position(|v| (v - 0.5).abs() > 1e-12).unwrap();
                    assert_eq!(first, s.saturating_sub(m.lead));
                    checked += 1;
                }
                None => assert!(ch.iter().all(|v| *v == 0.5)),
            }
        }
        assert_eq!(checked, 20);
        // The main series' changepoint is at the shift itself: the level
        // component jumps by the gain there, far above the 1% noise.
        for (rec, m) in panel.series.iter().zip(&meta) {
            if let Some(s) = m.shift {
                let ratio = rec.values[s.saturating_sub(52)..s]
                    .iter()
                    .sum::<f64>()
                    / rec.values[s..s + 52.min(rec.values.len() - s)].iter().sum::<f64>();
                assert!((ratio - 1.0).abs() > 0.05, "shift invisible: {ratio}");
            }
        }
    }

    #[test]
    fn values_positive_and_rejects_short_length() {
        let cfg = SynthConfig {
            n_series: 5,
            t_len: 3 * 52,
            seed: 1,
            shift_fraction: 0.0,
        };
        let (panel, ..) = generate(&cfg).unwrap();
        for rec in &panel.series {
            assert!(rec.values.iter().all(|v| *v > 0.0));
        }
        assert!(generate(&SynthConfig {
            t_len: 150,
            ..cfg
        })
        .is_err());
    }
}
