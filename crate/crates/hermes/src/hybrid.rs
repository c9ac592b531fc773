//! Pipeline orchestration: per-split predictor refits, corrector training,
//! recombination into hybrid forecasts, and multi-seed evaluation.

use crate::corrector::{
    build_concat_input, build_z_input, lstm_forward, train_corrector, CorrectorInput, LstmParams,
    NetworkSpec, TraceRow, TrainConfig, TrainExample,
};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_report, classify_trend, mase, owa, smape, EvalReport, SeedReport, SeriesMetrics,
    TrendLabel,
};
use crate::panel::{rolling_windows, temporal_split, SplitSpec, TimePanel, WeakSignalPanel};
use crate::predictors::{fit_predictor, forecast_predictor, PredictorFit, PredictorKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything needed to run the full two-stage protocol on one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub predictor: PredictorKind,
    pub horizon: usize,
    pub window: usize,
    /// Seasonal period used by the predictors.
    pub seasonal_period: usize,
    /// Seasonal period of the MASE scaling denominator.
    pub mase_period: usize,
    pub net: NetworkSpec,
    pub train: TrainConfig,
    pub use_weak_signals: bool,
    pub seeds: Vec<u64>,
    /// Trend-classification threshold (fraction of the prior-year mean).
    pub trend_threshold: f64,
}

impl PipelineConfig {
    pub fn fashion_defaults(predictor: PredictorKind) -> Self {
        PipelineConfig {
            predictor,
            horizon: 52,
            window: 104,
            seasonal_period: 52,
            mase_period: 52,
            net: NetworkSpec::default(),
            train: TrainConfig::default(),
            use_weak_signals: false,
            seeds: vec![0],
            trend_threshold: 0.05,
        }
    }

    pub fn m4_defaults(predictor: PredictorKind) -> Self {
        PipelineConfig {
            predictor,
            horizon: 13,
            window: 104,
            seasonal_period: 52,
            mase_period: 1,
            net: NetworkSpec::default(),
            train: TrainConfig {
                learning_rate: 0.005,
                batch_size: 8,
                n_windows: 3,
                ..TrainConfig::default()
            },
            use_weak_signals: false,
            seeds: vec![0],
            trend_threshold: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.window == 0 {
            return Err(Error::invalid("horizon and window must be positive"));
        }
        if self.window % self.horizon != 0 {
            return Err(Error::invalid(format!(
                "window {} must be a multiple of horizon {}",
                self.window, self.horizon
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if !(self.trend_threshold > 0.0) {
            return Err(Error::invalid("trend threshold must be positive"));
        }
        Ok(())
    }
}

/// Which evaluation segment a forecast targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitTag {
    TrainTarget,
    Eval,
    Test,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::TrainTarget => "train-target",
            SplitTag::Eval => "eval",
            SplitTag::Test => "test",
        })
    }
}

/// One series' hybrid forecast with its additive decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridForecast {
    pub id: String,
    pub split: SplitTag,
    pub origin: usize,
    pub y_pred: Vec<f64>,
    pub y_corr: Vec<f64>,
    pub y_hat: Vec<f64>,
}

/// Recombine a predictor forecast with the corrector output so that
/// `y_hat = y_pred + out * window_mean` holds bit-exactly.
fn recombine(
    id: &str,
    split: SplitTag,
    params: &LstmParams,
    input: &CorrectorInput,
    y_pred: &[f64],
) -> Result<HybridForecast> {
    let out = lstm_forward(params, input)?;
    if out.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "corrector outputs {} steps, predictor {}",
            out.len(),
            y_pred.len()
        )));
    }
    let y_corr: Vec<f64> = out.iter().map(|o| o * input.window_mean).collect();
    let y_hat: Vec<f64> = y_pred.iter().zip(&y_corr).map(|(p, c)| p + c).collect();
    Ok(HybridForecast {
        id: id.to_string(),
        split,
        origin: input.origin,
        y_pred: y_pred.to_vec(),
        y_corr,
        y_hat,
    })
}

/// One hybrid forecast from a fitted predictor and a trained corrector.
/// `series` is the history up to the forecast origin; `weak` holds the
/// series' full-length weak channels (empty for the no-weak-signal path).
pub fn hermes_forecast(
    fit: &PredictorFit,
    corrector: &LstmParams,
    series: &[f64],
    weak: &[Vec<f64>],
    h: usize,
    w: usize,
    id: &str,
    split: SplitTag,
) -> Result<HybridForecast> {
    if fit.t != series.len() {
        return Err(Error::invalid(format!(
            "fit trained on {} steps, series has {}",
            fit.t,
            series.len()
        )));
    }
    let pred = forecast_predictor(fit, h)?;
    let z = build_z_input(series, &pred, w, h)?;
    let input = build_concat_input(&z, weak)?;
    recombine(id, split, corrector, &input, &pred.values)
}

/// Per-series test-stage material, predictor-side only (seed independent).
#[derive(Debug, Clone)]
struct SeriesTest {
    id: String,
    input: CorrectorInput,
    y_pred: Vec<f64>,
    y_true: Vec<f64>,
    /// History up to the test origin, for MASE scaling and trend labels.
    history: Vec<f64>,
    fallback: bool,
}

/// All seed-independent stage outputs: corrector examples and test material.
#[derive(Debug, Clone)]
pub struct StageData {
    pub split: SplitSpec,
    pub train_examples: Vec<TrainExample>,
    pub eval_examples: Vec<TrainExample>,
    tests: Vec<SeriesTest>,
    /// Series whose predictor fit failed and fell back to snaive.
    pub fallback_count: usize,
    /// Snaive (smape, mase) means on the test split, the OWA baseline.
    pub baseline: Option<(f64, f64)>,
    pub mase_period: usize,
    pub trend_threshold: f64,
}

impl StageData {
    /// Ids of series whose predictor fit fell back to snaive.
    pub fn fallback_ids(&self) -> Vec<&str> {
        self.tests
            .iter()
            .filter(|t| t.fallback)
            .map(|t| t.id.as_str())
            .collect()
    }

    pub fn n_series(&self) -> usize {
        self.tests.len()
    }
}

/// The stage cut discipline: a forecast consuming `series[..origin]` and
/// anything it derives from it must stay strictly before `cut`.
fn assert_within_stage(origin: usize, h: usize, cut: usize, what: &str) -> Result<()> {
    if origin + h > cut {
        return Err(Error::invalid(format!(
            "{what} would consume index {} at stage cut {cut}",
            origin + h
        )));
    }
    Ok(())
}

fn fit_with_fallback(
    kind: PredictorKind,
    series: &[f64],
    m: usize,
) -> Result<(PredictorFit, bool)> {
    match fit_predictor(kind, series, m) {
        Ok(fit) => Ok((fit, false)),
        Err(_) if kind != PredictorKind::Snaive => {
            fit_predictor(PredictorKind::Snaive, series, m).map(|f| (f, true))
        }
        Err(e) => Err(e),
    }
}

/// Fit a predictor on `series[..cut]` and package the corrector example
/// targeting `series[cut..cut+h]`.
fn stage_example(
    series: &[f64],
    weak: &[Vec<f64>],
    cut: usize,
    cfg: &PipelineConfig,
    stage_cut: usize,
    what: &str,
) -> Result<(TrainExample, bool)> {
    let h = cfg.horizon;
    assert_within_stage(cut, h, stage_cut, what)?;
    let prefix = &series[..cut];
    let (fit, fallback) = fit_with_fallback(cfg.predictor, prefix, cfg.seasonal_period)?;
    let pred = forecast_predictor(&fit, h)?;
    let z = build_z_input(prefix, &pred, cfg.window, h)?;
    let input = build_concat_input(&z, weak)?;
    Ok((
        TrainExample {
            input,
            y_true: series[cut..cut + h].to_vec(),
            y_pred: pred.values,
        },
        fallback,
    ))
}

/// Run the predictor side of all three stages. Seed independent, so a
/// multi-seed run computes this once.
pub fn prepare_stages(
    panel: &TimePanel,
    weak: &WeakSignalPanel,
    cfg: &PipelineConfig,
) -> Result<StageData> {
    cfg.validate()?;
    let t = panel.uniform_len().ok_or_else(|| {
        Error::invalid("pipeline needs an aligned panel; resize ragged panels first")
    })?;
    let split = temporal_split(t, cfg.horizon, cfg.window)?;
    let h = cfg.horizon;
    // Stage-1 forecasts must themselves fit inside the train segment.
    let origin1 = split.train_end - h;
    if origin1 < cfg.window {
        return Err(Error::invalid(format!(
            "train segment too short: stage-1 origin {origin1} < window {}",
            cfg.window
        )));
    }
    if cfg.use_weak_signals {
        weak.validate_against(panel)?;
    }
    // Id-keyed channel lookup: the linear scan in channels_for would be
    // quadratic over a 10k-series panel.
    let weak_map: std::collections::HashMap<&str, &[Vec<f64>]> = weak
        .entries
        .iter()
        .map(|e| (e.id.as_str(), e.channels.as_slice()))
        .collect();

    struct PerSeries {
        train: Vec<TrainExample>,
        eval: TrainExample,
        test: SeriesTest,
        snaive_test: (f64, Option<f64>),
        fallback: bool,
    }

    let cuts = rolling_windows(origin1, cfg.train.n_windows, h, cfg.window);
    if cuts.cuts.is_empty() {
        return Err(Error::invalid("no training window fits the train segment"));
    }

    let per_series: Vec<PerSeries> = panel
        .series
        .par_iter()
        .map(|rec| {
            let series = &rec.values;
            let weak_ch: &[Vec<f64>] = if cfg.use_weak_signals {
                weak_map.get(rec.id.as_str()).copied().unwrap_or(&[])
            } else {
                &[]
            };

            // Stage 1: corrector training examples inside the train segment.
            let mut train = Vec::with_capacity(cuts.cuts.len());
            let mut fallback = false;
            for &cut in &cuts.cuts {
                let (ex, fb) =
                    stage_example(series, weak_ch, cut, cfg, split.train_end, "train example")?;
                fallback |= fb;
                train.push(ex);
            }

            // Stage 2 material: refit on the whole train segment, forecast
            // the eval segment.
            let (eval, fb) =
                stage_example(series, weak_ch, split.train_end, cfg, split.eval_end, "eval example")?;
            fallback |= fb;

            // Stage 3: refit through eval, forecast the test segment.
            assert_within_stage(split.eval_end, h, split.test_end, "test forecast")?;
            let history = &series[..split.eval_end];
            let (fit, fb) = fit_with_fallback(cfg.predictor, history, cfg.seasonal_period)?;
            fallback |= fb;
            let pred = forecast_predictor(&fit, h)?;
            let z = build_z_input(history, &pred, cfg.window, h)?;
            let input = build_concat_input(&z, weak_ch)?;
            let y_true = series[split.eval_end..split.test_end].to_vec();

            // Snaive on the same split, for the OWA baseline.
            let snaive_fit = fit_predictor(PredictorKind::Snaive, history, cfg.seasonal_period)?;
            let snaive_pred = forecast_predictor(&snaive_fit, h)?;
            let snaive_smape = smape(&y_true, &snaive_pred.values);
            let snaive_mase = mase(history, &y_true, &snaive_pred.values, cfg.mase_period).ok();

            Ok(PerSeries {
                train,
                eval,
                test: SeriesTest {
                    id: rec.id.clone(),
                    input,
                    y_pred: pred.values,
                    y_true,
                    history: history.to_vec(),
                    fallback,
                },
                snaive_test: (snaive_smape, snaive_mase),
                fallback,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::invalid(format!("stage preparation failed: {e}")))?;

    let fallback_count = per_series.iter().filter(|p| p.fallback).count();
    let baseline = {
        let smapes: Vec<f64> = per_series.iter().map(|p| p.snaive_test.0).collect();
        let mases: Vec<f64> = per_series.iter().filter_map(|p| p.snaive_test.1).collect();
        if mases.is_empty() {
            None
        } else {
            let s = smapes.iter().sum::<f64>() / smapes.len() as f64;
            let m = mases.iter().sum::<f64>() / mases.len() as f64;
            (s > 0.0 && m > 0.0).then_some((s, m))
        }
    };

    let mut train_examples = Vec::new();
    let mut eval_examples = Vec::with_capacity(per_series.len());
    let mut tests = Vec::with_capacity(per_series.len());
    for p in per_series {
        train_examples.extend(p.train);
        eval_examples.push(p.eval);
        tests.push(p.test);
    }
    Ok(StageData {
        split,
        train_examples,
        eval_examples,
        tests,
        fallback_count,
        baseline,
        mase_period: cfg.mase_period,
        trend_threshold: cfg.trend_threshold,
    })
}

/// One seed's full outputs: the trained corrector, its training trace, the
/// test-split hybrid forecasts, and the scored report.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub params: LstmParams,
    pub trace: Vec<TraceRow>,
    pub forecasts: Vec<HybridForecast>,
    pub report: SeedReport,
}

/// Score test-split forecasts against stage data. Exposed separately so
/// predictor-only baselines can reuse the same metrics path.
pub fn score_forecasts(stages: &StageData, forecasts: &[HybridForecast], seed: u64) -> Result<SeedReport> {
    if forecasts.len() != stages.tests.len() {
        return Err(Error::invalid("forecast/series count mismatch"));
    }
    let h = stages.split.horizon;
    let per_series: Vec<SeriesMetrics> = stages
        .tests
        .iter()
        .zip(forecasts)
        .map(|(test, fc)| {
            let prev_year = &test.history[test.history.len() - h..];
            let true_label =
                classify_trend(prev_year, &test.y_true, stages.trend_threshold).ok();
            let pred_label = classify_trend(prev_year, &fc.y_hat, stages.trend_threshold).ok();
            SeriesMetrics {
                id: test.id.clone(),
                mase: mase(&test.history, &test.y_true, &fc.y_hat, stages.mase_period).ok(),
                smape: smape(&test.y_true, &fc.y_hat),
                true_label,
                pred_label: true_label.and(pred_label),
            }
        })
        .collect();
    let owa_value = match stages.baseline {
        Some(base) => {
            let mases: Vec<f64> = per_series.iter().filter_map(|s| s.mase).collect();
            let smapes: Vec<f64> = per_series.iter().map(|s| s.smape).collect();
            if mases.is_empty() {
                None
            } else {
                let s = smapes.iter().sum::<f64>() / smapes.len() as f64;
                let m = mases.iter().sum::<f64>() / mases.len() as f64;
                Some(owa((s, m), base)?)
            }
        }
        None => None,
    };
    SeedReport::from_series(seed, per_series, owa_value)
}

/// Stage 2 + 3 for one seed: train the corrector, emit test forecasts.
pub fn run_seed(stages: &StageData, cfg: &PipelineConfig, seed: u64) -> Result<SeedRun> {
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (params, trace) = train_corrector(
        &stages.train_examples,
        &stages.eval_examples,
        &cfg.net,
        &train_cfg,
    )?;
    let forecasts: Vec<HybridForecast> = stages
        .tests
        .iter()
        .map(|test| recombine(&test.id, SplitTag::Test, &params, &test.input, &test.y_pred))
        .collect::<Result<Vec<_>>>()?;
    let report = score_forecasts(stages, &forecasts, seed)?;
    Ok(SeedRun {
        seed,
        params,
        trace,
        forecasts,
        report,
    })
}

/// The predictor-only counterpart of a seed run: the same test forecasts
/// with a zero correction, scored the same way.
pub fn predictor_only_report(stages: &StageData) -> Result<SeedReport> {
    let forecasts: Vec<HybridForecast> = stages
        .tests
        .iter()
        .map(|test| HybridForecast {
            id: test.id.clone(),
            split: SplitTag::Test,
            origin: test.input.origin,
            y_pred: test.y_pred.clone(),
            y_corr: vec![0.0; test.y_pred.len()],
            y_hat: test.y_pred.clone(),
        })
        .collect();
    score_forecasts(stages, &forecasts, 0)
}

/// Full pipeline on one panel: stage preparation once, stages 2–3 per seed,
/// aggregated statistics across seeds.
pub fn multi_seed_run(
    panel: &TimePanel,
    weak: &WeakSignalPanel,
    cfg: &PipelineConfig,
) -> Result<(StageData, Vec<SeedRun>, EvalReport)> {
    let stages = prepare_stages(panel, weak, cfg)?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = run_seed(&stages, cfg, seed)
            .map_err(|e| Error::invalid(format!("seed {seed} failed: {e}")))?;
        runs.push(run);
    }
    let report = aggregate_report(runs.iter().map(|r| r.report.clone()).collect())?;
    Ok((stages, runs, report))
}

/// Single-seed convenience wrapper.
pub fn run_pipeline(
    panel: &TimePanel,
    weak: &WeakSignalPanel,
    cfg: &PipelineConfig,
) -> Result<(StageData, SeedRun, EvalReport)> {
    let mut single = cfg.clone();
    single.seeds.truncate(1);
    let (stages, mut runs, report) = multi_seed_run(panel, weak, &single)?;
    Ok((stages, runs.remove(0), report))
}

/// Fashion test-set trend labels, baseline-free: true label of every series
/// whose prior-year mean is positive.
pub fn true_labels(stages: &StageData) -> Vec<Option<TrendLabel>> {
    let h = stages.split.horizon;
    stages
        .tests
        .iter()
        .map(|t| {
            classify_trend(
                &t.history[t.history.len() - h..],
                &t.y_true,
                stages.trend_threshold,
            )
            .ok()
        })
        .collect()
}
