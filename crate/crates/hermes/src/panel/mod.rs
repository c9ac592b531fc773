//! Panel data model: aligned (fashion) or ragged (M4) collections of weekly
//! univariate series, their external weak-signal channels, and temporal splits.

mod load;
mod transform;

pub use load::{
    load_fashion_panel, load_m4_weekly, week_dates, write_fashion_panel, write_m4_weekly,
    write_weak_panel, FASHION_START_DATE,
};
pub use transform::{
    deseasonalize, fashion_forward_ratio, normalize_by_parent, resize_to_length, rolling_windows,
    seasonal_indices, RollingWindows,
};
pub(crate) use transform::centered_moving_average;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One univariate weekly series with its identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub id: String,
    pub values: Vec<f64>,
    pub category: Option<String>,
    pub geozone: Option<String>,
}

impl SeriesRecord {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        SeriesRecord {
            id: id.into(),
            values,
            category: None,
            geozone: None,
        }
    }
}

/// N univariate weekly series. Lengths are equal for the fashion format and
/// ragged for M4. Immutable after load; safe to share across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePanel {
    pub series: Vec<SeriesRecord>,
    /// ISO week dates of the columns, when the source format carries them.
    pub dates: Option<Vec<String>>,
}

impl TimePanel {
    pub fn new(series: Vec<SeriesRecord>) -> Result<Self> {
        let panel = TimePanel {
            series,
            dates: None,
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Common length, or None if the panel is ragged or empty.
    pub fn uniform_len(&self) -> Option<usize> {
        let first = self.series.first()?.values.len();
        self.series
            .iter()
            .all(|s| s.values.len() == first)
            .then_some(first)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for rec in &self.series {
            if !seen.insert(rec.id.as_str()) {
                return Err(Error::invalid(format!("duplicate series id '{}'", rec.id)));
            }
            if rec.values.is_empty() {
                return Err(Error::invalid(format!("series '{}' is empty", rec.id)));
            }
            if let Some(pos) = rec.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "series '{}' has a non-finite value at step {}",
                    rec.id, pos
                )));
            }
        }
        Ok(())
    }
}

/// K external channels per series, aligned 1..T with the target panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSignalPanel {
    /// Parallel to `TimePanel::series` by id; each entry holds K channels.
    pub entries: Vec<WeakEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakEntry {
    pub id: String,
    pub channels: Vec<Vec<f64>>,
}

impl WeakSignalPanel {
    pub fn empty() -> Self {
        WeakSignalPanel {
            entries: Vec::new(),
        }
    }

    /// Number of channels (identical across series by invariant).
    pub fn k(&self) -> usize {
        self.entries.first().map_or(0, |e| e.channels.len())
    }

    pub fn channels_for(&self, id: &str) -> Option<&[Vec<f64>]> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.channels.as_slice())
    }

    /// Check alignment against a panel: every channel matches its target
    /// series length and K is identical across series.
    pub fn validate_against(&self, panel: &TimePanel) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let k = self.k();
        for rec in &panel.series {
            let Some(channels) = self.channels_for(&rec.id) else {
                return Err(Error::invalid(format!(
                    "weak signals missing for series '{}'",
                    rec.id
                )));
            };
            if channels.len() != k {
                return Err(Error::invalid(format!(
                    "series '{}' has {} weak channels, expected {}",
                    rec.id,
                    channels.len(),
                    k
                )));
            }
            for (ci, ch) in channels.iter().enumerate() {
                if ch.len() != rec.values.len() {
                    return Err(Error::invalid(format!(
                        "weak channel {} of series '{}' has length {}, target has {}",
                        ci,
                        rec.id,
                        ch.len(),
                        rec.values.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Temporal split of a panel of length T into train / eval / test segments.
/// Indices are exclusive ends in 0-based step coordinates: train covers
/// `0..train_end`, eval `train_end..eval_end`, test `eval_end..test_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: usize,
    pub eval_end: usize,
    pub test_end: usize,
    pub horizon: usize,
    pub window: usize,
}

/// Split a panel of length `t` into train / eval / test: test is the last
/// `h` steps, eval the preceding `h`, train everything before (any leftover
/// week beyond whole years stays in train).
pub fn temporal_split(t: usize, h: usize, w: usize) -> Result<SplitSpec> {
    if h == 0 || w == 0 {
        return Err(Error::invalid("horizon and window must be positive"));
    }
    if t < 2 * h + w {
        return Err(Error::invalid(format!(
            "series length {t} too short for split: need at least 2*{h} + {w}"
        )));
    }
    Ok(SplitSpec {
        train_end: t - 2 * h,
        eval_end: t - h,
        test_end: t,
        horizon: h,
        window: w,
    })
}
