//! Command-line entry point: pipeline runs, grid searches, synthetic-panel
//! generation, M4 preprocessing, and metric evaluation of forecast CSVs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 run failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use hermes::corrector::LossKind;
use hermes::hybrid::{multi_seed_run, PipelineConfig, SeedRun, StageData};
use hermes::metrics::{aggregate_report, mase, owa, smape, EvalReport, SeedReport, SeriesMetrics, TrendLabel};
use hermes::panel::{
    load_fashion_panel, load_m4_weekly, resize_to_length, write_fashion_panel, write_m4_weekly,
    write_weak_panel, SeriesRecord, TimePanel, WeakSignalPanel,
};
use hermes::predictors::{fit_predictor, forecast_predictor, PredictorKind};
use hermes::synth::{generate, SynthConfig};
use hermes::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hermes", version, about = "Hybrid forecasting: per-series predictors plus a global error corrector")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline on a dataset and write a run directory.
    Run(RunArgs),
    /// Evaluate one pipeline per grid cell and rank cells by the target metric.
    GridSearch(GridArgs),
    /// Generate a synthetic panel with regime shifts and weak signals.
    Synth(SynthArgs),
    /// Resize a raw M4-weekly file to uniform length.
    M4Prep(M4PrepArgs),
    /// Score an externally produced forecast CSV against a panel.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum DatasetKind {
    Fashion,
    M4Weekly,
    Synthetic,
}

/// Optional overrides layered onto the dataset's pipeline defaults: file
/// values first, command-line flags last.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
struct PipelinePatch {
    #[arg(long)]
    predictor: Option<PredictorKind>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    seasonal_period: Option<usize>,
    #[arg(long)]
    mase_period: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    n_windows: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    use_weak_signals: Option<bool>,
    #[arg(long)]
    trend_threshold: Option<f64>,
}

impl PipelinePatch {
    fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),*) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        set!(
            predictor => cfg.predictor,
            horizon => cfg.horizon,
            window => cfg.window,
            seasonal_period => cfg.seasonal_period,
            mase_period => cfg.mase_period,
            layers => cfg.net.layers,
            hidden => cfg.net.hidden,
            loss => cfg.train.loss,
            learning_rate => cfg.train.learning_rate,
            batch_size => cfg.train.batch_size,
            max_epochs => cfg.train.max_epochs,
            patience => cfg.train.patience,
            n_windows => cfg.train.n_windows,
            seeds => cfg.seeds,
            use_weak_signals => cfg.use_weak_signals,
            trend_threshold => cfg.trend_threshold
        );
    }
}

/// Grid axes; an empty axis degenerates to the resolved pipeline value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridAxes {
    loss: Vec<LossKind>,
    learning_rate: Vec<f64>,
    batch_size: Vec<usize>,
    n_windows: Vec<usize>,
}

/// The JSON run-configuration schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    dataset: DatasetKind,
    /// Panel file; optional for `synthetic`, which then generates in memory.
    #[serde(default)]
    data_path: Option<PathBuf>,
    output_dir: PathBuf,
    #[serde(default)]
    pipeline: PipelinePatch,
    #[serde(default)]
    grid: GridAxes,
    /// Generator settings for in-memory synthetic data.
    #[serde(default)]
    synth: Option<SynthConfig>,
    /// Number of series to emit plot data for.
    #[serde(default = "default_plot_series")]
    plot_series: usize,
}

fn default_plot_series() -> usize {
    4
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    patch: PipelinePatch,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    patch: PipelinePatch,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of series.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Series length in weeks.
    #[arg(long, default_value_t = 261)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.3)]
    shift_fraction: f64,
    /// Output panel CSV; the weak channel lands in a sibling .weak.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct M4PrepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 300)]
    target_len: usize,
    #[arg(long, default_value_t = 52)]
    seasonal_period: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Forecast CSV with columns id, step, y_hat (optionally seed, y_pred,
    /// y_corr, y_true); steps are absolute 0-based panel indices.
    #[arg(long)]
    forecasts: PathBuf,
    /// Panel the forecasts target.
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum, default_value_t = DatasetKind::Fashion)]
    dataset: DatasetKind,
    #[arg(long, default_value_t = 52)]
    seasonal_period: usize,
    #[arg(long, default_value_t = 52)]
    mase_period: usize,
    #[arg(long, default_value_t = 0.05)]
    trend_threshold: f64,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors before any data is touched exit 1; everything later exits 2.
enum AppError {
    Config(Error),
    Run(Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(workers) = std::env::var("HERMES_WORKERS") {
        match workers.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot size worker pool: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("error: HERMES_WORKERS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::GridSearch(args) => cmd_grid_search(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::M4Prep(args) => cmd_m4_prep(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(AppError::Run(e)) => {
            eprintln!("run failed: {e}");
            ExitCode::from(2)
        }
    }
}

/// Parse the config file and resolve the pipeline for this run.
fn load_config(
    path: &Path,
    output_dir: Option<PathBuf>,
    patch: &PipelinePatch,
) -> std::result::Result<(RunConfig, PipelineConfig), AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(Error::load(format!("cannot read {}: {e}", path.display()))))?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
        AppError::Config(Error::load(format!("invalid config {}: {e}", path.display())))
    })?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let mut pipeline = match cfg.dataset {
        DatasetKind::M4Weekly => PipelineConfig::m4_defaults(PredictorKind::Snaive),
        _ => PipelineConfig::fashion_defaults(PredictorKind::Snaive),
    };
    cfg.pipeline.apply(&mut pipeline);
    patch.apply(&mut pipeline);
    pipeline.validate().map_err(AppError::Config)?;
    if cfg.data_path.is_none() && cfg.dataset != DatasetKind::Synthetic {
        return Err(AppError::Config(Error::invalid(format!(
            "{:?} dataset needs data_path",
            cfg.dataset
        ))));
    }
    // Snapshot the fully resolved values so the run directory is
    // self-describing.
    cfg.pipeline = PipelinePatch {
        predictor: Some(pipeline.predictor),
        horizon: Some(pipeline.horizon),
        window: Some(pipeline.window),
        seasonal_period: Some(pipeline.seasonal_period),
        mase_period: Some(pipeline.mase_period),
        layers: Some(pipeline.net.layers),
        hidden: Some(pipeline.net.hidden),
        loss: Some(pipeline.train.loss),
        learning_rate: Some(pipeline.train.learning_rate),
        batch_size: Some(pipeline.train.batch_size),
        max_epochs: Some(pipeline.train.max_epochs),
        patience: Some(pipeline.train.patience),
        n_windows: Some(pipeline.train.n_windows),
        seeds: Some(pipeline.seeds.clone()),
        use_weak_signals: Some(pipeline.use_weak_signals),
        trend_threshold: Some(pipeline.trend_threshold),
    };
    Ok((cfg, pipeline))
}

fn load_dataset(
    cfg: &RunConfig,
    pipeline: &PipelineConfig,
) -> Result<(TimePanel, WeakSignalPanel)> {
    match (cfg.dataset, &cfg.data_path) {
        (DatasetKind::Fashion, Some(path)) | (DatasetKind::Synthetic, Some(path)) => {
            load_fashion_panel(path)
        }
        (DatasetKind::Synthetic, None) => {
            let synth_cfg = cfg.synth.unwrap_or_default();
            let (panel, weak, _) = generate(&synth_cfg)?;
            Ok((panel, weak))
        }
        (DatasetKind::Fashion, None) => Err(Error::invalid("fashion dataset needs data_path")),
        (DatasetKind::M4Weekly, Some(path)) => {
            let raw = load_m4_weekly(path)?;
            let target = raw
                .series
                .iter()
                .map(|s| s.values.len())
                .max()
                .unwrap_or(0)
                .max(300);
            let series = raw
                .series
                .iter()
                .map(|rec| {
                    Ok(SeriesRecord::new(
                        rec.id.clone(),
                        resize_to_length(&rec.values, target, pipeline.seasonal_period)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((TimePanel::new(series)?, WeakSignalPanel::empty()))
        }
        (DatasetKind::M4Weekly, None) => Err(Error::invalid("m4-weekly dataset needs data_path")),
    }
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn label_str(label: Option<TrendLabel>) -> &'static str {
    match label {
        Some(TrendLabel::Decreasing) => "decreasing",
        Some(TrendLabel::Flat) => "flat",
        Some(TrendLabel::Increasing) => "increasing",
        None => "",
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_run_dir(
    dir: &Path,
    cfg: &RunConfig,
    panel: &TimePanel,
    stages: &StageData,
    runs: &[SeedRun],
    report: &EvalReport,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_text(
        &dir.join("config.json"),
        &serde_json::to_string_pretty(cfg)?,
    )?;
    write_text(
        &dir.join("report.json"),
        &serde_json::to_string_pretty(report)?,
    )?;

    let truth: BTreeMap<&str, &[f64]> = panel
        .series
        .iter()
        .map(|s| (s.id.as_str(), s.values.as_slice()))
        .collect();

    // Forecast decomposition, all seeds in one file.
    let mut csv = String::from("seed,id,step,y_pred,y_corr,y_hat,y_true\n");
    for run in runs {
        for fc in &run.forecasts {
            let series = truth.get(fc.id.as_str()).copied().unwrap_or(&[]);
            for (i, ((p, c), y)) in fc.y_pred.iter().zip(&fc.y_corr).zip(&fc.y_hat).enumerate() {
                let step = fc.origin + i;
                let yt = series.get(step).map(|v| fnum(*v)).unwrap_or_default();
                writeln!(
                    csv,
                    "{},{},{step},{},{},{},{yt}",
                    run.seed,
                    fc.id,
                    fnum(*p),
                    fnum(*c),
                    fnum(*y)
                )
                .unwrap();
            }
        }
    }
    write_text(&dir.join("forecasts.csv"), &csv)?;

    // Per-seed: parameters, training trace, per-series metrics, confusion.
    let mut per_series = String::from("seed,id,mase,smape,true_label,pred_label\n");
    let mut confusion = String::from("seed,true_label,pred_decreasing,pred_flat,pred_increasing\n");
    for run in runs {
        run.params.save(
            dir.join(format!("params_seed{}.bin", run.seed)),
            dir.join(format!("params_seed{}.json", run.seed)),
        )?;
        let mut trace = String::from("epoch,train_loss,eval_loss\n");
        for row in &run.trace {
            writeln!(
                trace,
                "{},{},{}",
                row.epoch,
                fnum(row.train_loss),
                fnum(row.eval_loss)
            )
            .unwrap();
        }
        write_text(&dir.join(format!("trace_seed{}.csv", run.seed)), &trace)?;

        for s in &run.report.per_series {
            writeln!(
                per_series,
                "{},{},{},{},{},{}",
                run.seed,
                s.id,
                s.mase.map(fnum).unwrap_or_default(),
                fnum(s.smape),
                label_str(s.true_label),
                label_str(s.pred_label)
            )
            .unwrap();
        }
        if let Some(m) = run.report.confusion {
            for (row, label) in m.iter().zip(["decreasing", "flat", "increasing"]) {
                writeln!(confusion, "{},{label},{},{},{}", run.seed, row[0], row[1], row[2])
                    .unwrap();
            }
        }
    }
    write_text(&dir.join("per_series.csv"), &per_series)?;
    write_text(&dir.join("confusion.csv"), &confusion)?;

    // Plot data for the first few series: history plus the first seed's
    // test forecast.
    if let Some(run) = runs.first() {
        let plot_dir = dir.join("plot");
        std::fs::create_dir_all(&plot_dir)?;
        for fc in run.forecasts.iter().take(cfg.plot_series) {
            let series = truth.get(fc.id.as_str()).copied().unwrap_or(&[]);
            let mut plot = String::from("step,y,y_pred,y_hat\n");
            for (step, y) in series.iter().enumerate().take(fc.origin) {
                writeln!(plot, "{step},{},,", fnum(*y)).unwrap();
            }
            for (i, (p, y_hat)) in fc.y_pred.iter().zip(&fc.y_hat).enumerate() {
                let step = fc.origin + i;
                let yt = series.get(step).map(|v| fnum(*v)).unwrap_or_default();
                writeln!(plot, "{step},{yt},{},{}", fnum(*p), fnum(*y_hat)).unwrap();
            }
            write_text(&plot_dir.join(format!("{}.csv", fc.id)), &plot)?;
        }
    }

    let _ = stages; // leakage is enforced during stage construction
    Ok(())
}

fn cmd_run(args: RunArgs) -> std::result::Result<(), AppError> {
    let (cfg, pipeline) = load_config(&args.config, args.output_dir, &args.patch)?;
    let (panel, weak) = load_dataset(&cfg, &pipeline).map_err(AppError::Run)?;
    let (stages, runs, report) = multi_seed_run(&panel, &weak, &pipeline).map_err(AppError::Run)?;
    write_run_dir(&cfg.output_dir, &cfg, &panel, &stages, &runs, &report)
        .map_err(AppError::Run)?;
    let fallbacks = stages.fallback_ids().len();
    println!(
        "series: {}  seeds: {}  fallbacks: {fallbacks}",
        stages.n_series(),
        runs.len()
    );
    println!("MASE  {:.4} ± {:.4}", report.mase.mean, report.mase.std);
    println!("sMAPE {:.4} ± {:.4}", report.smape.mean, report.smape.std);
    if let Some(o) = report.owa {
        println!("OWA   {:.4} ± {:.4}", o.mean, o.std);
    }
    if let Some(a) = report.accuracy {
        println!("trend accuracy {:.4} ± {:.4}", a.mean, a.std);
    }
    println!("artifacts: {}", cfg.output_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct GridCell {
    loss: LossKind,
    learning_rate: f64,
    batch_size: usize,
    n_windows: usize,
    metric: &'static str,
    mean: Option<f64>,
    std: Option<f64>,
    error: Option<String>,
}

fn cmd_grid_search(args: GridArgs) -> std::result::Result<(), AppError> {
    let (cfg, pipeline) = load_config(&args.config, args.output_dir, &args.patch)?;
    let axes = &cfg.grid;
    let one = |axis: &Vec<_>, fallback| {
        if axis.is_empty() {
            vec![fallback]
        } else {
            axis.clone()
        }
    };
    let losses = one(&axes.loss, pipeline.train.loss);
    let lrs = if axes.learning_rate.is_empty() {
        vec![pipeline.train.learning_rate]
    } else {
        axes.learning_rate.clone()
    };
    let batches = if axes.batch_size.is_empty() {
        vec![pipeline.train.batch_size]
    } else {
        axes.batch_size.clone()
    };
    let windows = if axes.n_windows.is_empty() {
        vec![pipeline.train.n_windows]
    } else {
        axes.n_windows.clone()
    };
    let metric_name = match cfg.dataset {
        DatasetKind::M4Weekly => "owa",
        _ => "mase",
    };

    let (panel, weak) = load_dataset(&cfg, &pipeline).map_err(AppError::Run)?;
    let mut cells = Vec::new();
    for &loss in &losses {
        for &lr in &lrs {
            for &batch in &batches {
                for &nw in &windows {
                    let mut cell_cfg = pipeline.clone();
                    cell_cfg.train.loss = loss;
                    cell_cfg.train.learning_rate = lr;
                    cell_cfg.train.batch_size = batch;
                    cell_cfg.train.n_windows = nw;
                    let outcome = multi_seed_run(&panel, &weak, &cell_cfg);
                    let cell = match outcome {
                        Ok((_, _, report)) => {
                            let stat = match cfg.dataset {
                                DatasetKind::M4Weekly => report.owa.unwrap_or(report.mase),
                                _ => report.mase,
                            };
                            GridCell {
                                loss,
                                learning_rate: lr,
                                batch_size: batch,
                                n_windows: nw,
                                metric: metric_name,
                                mean: Some(stat.mean),
                                std: Some(stat.std),
                                error: None,
                            }
                        }
                        Err(e) => GridCell {
                            loss,
                            learning_rate: lr,
                            batch_size: batch,
                            n_windows: nw,
                            metric: metric_name,
                            mean: None,
                            std: None,
                            error: Some(e.to_string()),
                        },
                    };
                    cells.push(cell);
                }
            }
        }
    }
    // Ascending by mean; failed cells last.
    cells.sort_by(|a, b| match (a.mean, b.mean) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| AppError::Run(e.into()))?;
    let mut csv = String::from("loss,learning_rate,batch_size,n_windows,metric,mean,std,error\n");
    for c in &cells {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            c.loss,
            fnum(c.learning_rate),
            c.batch_size,
            c.n_windows,
            c.metric,
            c.mean.map(fnum).unwrap_or_default(),
            c.std.map(fnum).unwrap_or_default(),
            c.error.clone().unwrap_or_default()
        )
        .unwrap();
    }
    write_text(&cfg.output_dir.join("grid.csv"), &csv).map_err(AppError::Run)?;
    write_text(
        &cfg.output_dir.join("config.json"),
        &serde_json::to_string_pretty(&cfg).map_err(|e| AppError::Run(e.into()))?,
    )
    .map_err(AppError::Run)?;
    for c in &cells {
        match (c.mean, &c.error) {
            (Some(m), _) => println!(
                "{} lr={} batch={} windows={}  {}={:.4} ± {:.4}",
                c.loss,
                c.learning_rate,
                c.batch_size,
                c.n_windows,
                c.metric,
                m,
                c.std.unwrap_or(0.0)
            ),
            (None, Some(e)) => println!(
                "{} lr={} batch={} windows={}  FAILED: {e}",
                c.loss, c.learning_rate, c.batch_size, c.n_windows
            ),
            _ => {}
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> std::result::Result<(), AppError> {
    let cfg = SynthConfig {
        n_series: args.n,
        t_len: args.len,
        seed: args.seed,
        shift_fraction: args.shift_fraction,
    };
    let (panel, weak, meta) = generate(&cfg).map_err(AppError::Config)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AppError::Run(e.into()))?;
        }
    }
    write_fashion_panel(&panel, &args.out).map_err(AppError::Run)?;
    write_weak_panel(&weak, &args.out).map_err(AppError::Run)?;
    let shifted = meta.iter().filter(|m| m.shift.is_some()).count();
    println!(
        "wrote {} series ({} with regime shifts) to {}",
        panel.len(),
        shifted,
        args.out.display()
    );
    Ok(())
}

fn cmd_m4_prep(args: M4PrepArgs) -> std::result::Result<(), AppError> {
    let raw = load_m4_weekly(&args.input).map_err(AppError::Run)?;
    let mut lengths = Vec::with_capacity(raw.len());
    let series = raw
        .series
        .iter()
        .map(|rec| {
            lengths.push(serde_json::json!({
                "id": rec.id,
                "original_len": rec.values.len(),
            }));
            Ok(SeriesRecord::new(
                rec.id.clone(),
                resize_to_length(&rec.values, args.target_len, args.seasonal_period)?,
            ))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(AppError::Run)?;
    let panel = TimePanel::new(series).map_err(AppError::Run)?;
    write_m4_weekly(&panel, &args.output).map_err(AppError::Run)?;
    let manifest = args.output.with_extension("manifest.json");
    write_text(
        &manifest,
        &serde_json::to_string_pretty(&serde_json::Value::Array(lengths))
            .map_err(|e| AppError::Run(e.into()))?,
    )
    .map_err(AppError::Run)?;
    println!(
        "wrote {} series of length {} to {} (lengths manifest: {})",
        panel.len(),
        args.target_len,
        args.output.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> std::result::Result<(), AppError> {
    let panel = match args.dataset {
        DatasetKind::M4Weekly => load_m4_weekly(&args.panel).map_err(AppError::Run)?,
        _ => load_fashion_panel(&args.panel).map_err(AppError::Run)?.0,
    };
    let by_id: BTreeMap<&str, &[f64]> = panel
        .series
        .iter()
        .map(|s| (s.id.as_str(), s.values.as_slice()))
        .collect();

    let text = std::fs::read_to_string(&args.forecasts)
        .map_err(|e| AppError::Config(Error::load(format!("cannot read forecasts: {e}"))))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| AppError::Config(Error::load("empty forecast file")))?
        .split(',')
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(id_col), Some(step_col), Some(hat_col)) = (col("id"), col("step"), col("y_hat"))
    else {
        return Err(AppError::Config(Error::load(
            "forecast file needs id, step and y_hat columns",
        )));
    };
    let seed_col = col("seed");

    // (seed, id) -> step-sorted y_hat values.
    let mut groups: BTreeMap<(u64, String), Vec<(usize, f64)>> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse_err = |what: &str| {
            AppError::Config(Error::load(format!(
                "forecast row {}: bad {what}",
                lineno + 2
            )))
        };
        let seed = match seed_col {
            Some(c) => fields[c].parse::<u64>().map_err(|_| parse_err("seed"))?,
            None => 0,
        };
        let id = fields.get(id_col).ok_or_else(|| parse_err("id"))?.to_string();
        let step: usize = fields
            .get(step_col)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err("step"))?;
        let y_hat: f64 = fields
            .get(hat_col)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err("y_hat"))?;
        groups.entry((seed, id)).or_default().push((step, y_hat));
    }
    if groups.is_empty() {
        return Err(AppError::Config(Error::load("forecast file has no rows")));
    }

    let mut per_seed: BTreeMap<u64, Vec<SeriesMetrics>> = BTreeMap::new();
    let mut baselines: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((seed, id), mut rows) in groups {
        rows.sort_by_key(|(step, _)| *step);
        let origin = rows[0].0;
        let series = by_id
            .get(id.as_str())
            .copied()
            .ok_or_else(|| AppError::Run(Error::load(format!("unknown series id '{id}'"))))?;
        if origin + rows.len() > series.len() {
            return Err(AppError::Run(Error::load(format!(
                "forecast for '{id}' extends past the panel"
            ))));
        }
        let history = &series[..origin];
        let y_true = &series[origin..origin + rows.len()];
        let y_hat: Vec<f64> = rows.iter().map(|(_, v)| *v).collect();
        let prev_year = history
            .len()
            .checked_sub(rows.len())
            .map(|start| &history[start..]);
        let true_label = prev_year
            .and_then(|p| hermes::metrics::classify_trend(p, y_true, args.trend_threshold).ok());
        let pred_label = prev_year
            .and_then(|p| hermes::metrics::classify_trend(p, &y_hat, args.trend_threshold).ok());
        per_seed.entry(seed).or_default().push(SeriesMetrics {
            id: id.clone(),
            mase: mase(history, y_true, &y_hat, args.mase_period).ok(),
            smape: smape(y_true, &y_hat),
            true_label,
            pred_label: true_label.and(pred_label),
        });
        // Snaive on the same origin, for the OWA baseline.
        if let Ok(fit) = fit_predictor(PredictorKind::Snaive, history, args.seasonal_period) {
            if let Ok(fc) = forecast_predictor(&fit, rows.len()) {
                let (smapes, mases) = baselines.entry(seed).or_default();
                smapes.push(smape(y_true, &fc.values));
                if let Ok(m) = mase(history, y_true, &fc.values, args.mase_period) {
                    mases.push(m);
                }
            }
        }
    }

    let mut seed_reports = Vec::new();
    for (seed, series_metrics) in per_seed {
        let owa_value = baselines.get(&seed).and_then(|(smapes, mases)| {
            if smapes.is_empty() || mases.is_empty() {
                return None;
            }
            let sb = smapes.iter().sum::<f64>() / smapes.len() as f64;
            let mb = mases.iter().sum::<f64>() / mases.len() as f64;
            let model_m: Vec<f64> = series_metrics.iter().filter_map(|s| s.mase).collect();
            if model_m.is_empty() {
                return None;
            }
            let s = series_metrics.iter().map(|s| s.smape).sum::<f64>()
                / series_metrics.len() as f64;
            let m = model_m.iter().sum::<f64>() / model_m.len() as f64;
            owa((s, m), (sb, mb)).ok()
        });
        seed_reports
            .push(SeedReport::from_series(seed, series_metrics, owa_value).map_err(AppError::Run)?);
    }
    let report = aggregate_report(seed_reports).map_err(AppError::Run)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| AppError::Run(e.into()))?;
    match args.out {
        Some(path) => write_text(&path, &json).map_err(AppError::Run)?,
        None => println!("{json}"),
    }
    Ok(())
}
