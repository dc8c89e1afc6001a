//! The five subcommands as plain functions. Each validates and computes
//! everything before creating the output directory, so a failed run leaves
//! no partial files behind.

use std::path::{Path, PathBuf};

use pluvia_core::dataset::{
    clean_missing, make_windows_with, monthly_boxplot_stats, parse_series, split_index, yearly_trend_table,
    MonthlySeries, SeriesFormat,
};
use pluvia_core::evaluation::{evaluate, forecast_csv, walk_forward, EvalOptions, EvalReport, ForecastRow};
use pluvia_core::gradcheck::{run_gradcheck, GradcheckOptions, GradcheckRow};
use pluvia_core::training::{train, TrainingHistory};
use pluvia_core::{CnnLstmModel, ModelConfig};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::svg;

pub const STATS_FILE: &str = "monthly_boxplot_stats.csv";
pub const TREND_FILE: &str = "yearly_trend_table.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const EVAL_ROWS_FILE: &str = "evaluation_rows.csv";
pub const EVAL_SUMMARY_FILE: &str = "evaluation_summary.csv";
pub const FORECAST_FILE: &str = "forecast.csv";

/// Read, parse and clean a series. A missing file is a data error naming it.
pub fn load_series(path: &Path, format: SeriesFormat) -> CliResult<MonthlySeries> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw = parse_series(&text, format, &path.display().to_string())
        .map_err(|e| CliError::from(e).with_context(path))?;
    let cleaned = clean_missing(&raw);
    if cleaned.is_empty() {
        return Err(CliError::data(format!("{}: no observations after removing missing values", path.display())));
    }
    Ok(cleaned)
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    files
        .iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

pub struct StatsOutcome {
    pub gaps: usize,
    pub months: usize,
    pub files: Vec<PathBuf>,
}

pub fn cmd_stats(input: &Path, format: SeriesFormat, out: &Path, with_svg: bool) -> CliResult<StatsOutcome> {
    let series = load_series(input, format)?;
    let stats = monthly_boxplot_stats(&series);
    let trend = yearly_trend_table(&series);
    let (stats_csv, trend_csv) = (stats.to_csv(), trend.to_csv());
    let mut files = vec![(STATS_FILE, stats_csv.as_str()), (TREND_FILE, trend_csv.as_str())];
    let (boxes, lines);
    if with_svg {
        boxes = svg::boxplot(&stats);
        lines = svg::trend_chart(&trend);
        files.push(("monthly_boxplot.svg", &boxes));
        files.push(("yearly_trend.svg", &lines));
    }
    Ok(StatsOutcome {
        gaps: series.gap_indices.len(),
        months: series.len(),
        files: write_outputs(out, &files)?,
    })
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub input: Option<PathBuf>,
    pub format: Option<SeriesFormat>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(p) = &self.input {
            config.data.path = p.clone();
        }
        if let Some(f) = self.format {
            config.data.format = f;
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(s) = self.split {
            config.split = s;
        }
    }
}

pub struct TrainOutcome {
    pub model: CnnLstmModel,
    pub history: TrainingHistory,
    pub checkpoint: PathBuf,
    pub history_file: PathBuf,
}

/// `epoch,loss,lr`; wall time is left out so reruns are byte-identical.
pub fn history_csv(history: &TrainingHistory) -> String {
    let mut out = String::from("epoch,loss,lr\n");
    for r in &history.epochs {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.lr));
    }
    out
}

/// Train per `config`, streaming `epoch,loss,lr,seconds` lines to `progress`.
pub fn cmd_train(config: &RunConfig, progress: &mut dyn std::io::Write) -> CliResult<TrainOutcome> {
    config.ensure_valid()?;
    let series = load_series(&config.data.path, config.data.format)?;
    let boundary = split_index(series.len(), config.split)?;
    let train_part = MonthlySeries::from_points(series.points[..boundary].to_vec(), series.provenance.clone());
    if train_part.is_empty() {
        return Err(CliError::data("training split is empty"));
    }
    let scale = config.output_scale.unwrap_or_else(|| train_part.max_precip());

    let model_config = ModelConfig {
        output_scale: scale,
        seed: config.seed,
        ..config.model.clone()
    };
    let mut training = config.training.clone();
    training.seed = config.seed;

    let windows = make_windows_with(&series, model_config.window_size, scale, config.gap_policy)?;
    let (train_windows, _) = windows.partition(boundary);
    let mut model = CnnLstmModel::new(model_config)?;

    let _ = writeln!(progress, "epoch,loss,lr,seconds");
    let history = train(&mut model, &train_windows, &training, |r| {
        let _ = writeln!(progress, "{},{},{},{:.3}", r.epoch, r.loss, r.lr, r.seconds);
    })?;

    let checkpoint = Checkpoint::from_model(&model, &training, config.split, config.gap_policy);
    let ck_json = checkpoint.to_json();
    let hist = history_csv(&history);
    let files = write_outputs(&config.output_dir, &[(CHECKPOINT_FILE, &ck_json), (HISTORY_FILE, &hist)])?;
    Ok(TrainOutcome {
        model,
        history,
        checkpoint: files[0].clone(),
        history_file: files[1].clone(),
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub input: Option<PathBuf>,
    pub format: Option<SeriesFormat>,
    pub split: Option<f64>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub struct DataSource {
    pub path: PathBuf,
    pub format: SeriesFormat,
}

/// Resolve data location and split from flags, then config, then checkpoint.
fn resolve(
    checkpoint: &Checkpoint,
    input: &Option<PathBuf>,
    format: Option<SeriesFormat>,
    split: Option<f64>,
    config: &Option<PathBuf>,
) -> CliResult<(DataSource, f64)> {
    let config = config.as_deref().map(RunConfig::load).transpose()?;
    if let Some(c) = &config {
        if c.model.window_size != checkpoint.model.window_size {
            return Err(CliError::config(format!(
                "window size mismatch: checkpoint {}, config {}",
                checkpoint.model.window_size, c.model.window_size
            )));
        }
    }
    let path = input
        .clone()
        .or_else(|| config.as_ref().map(|c| c.data.path.clone()).filter(|p| !p.as_os_str().is_empty()))
        .ok_or_else(|| CliError::config("no input: pass --input or a --config with data.path"))?;
    let format = format
        .or_else(|| config.as_ref().map(|c| c.data.format))
        .unwrap_or(SeriesFormat::Long);
    let split = split.or_else(|| config.as_ref().map(|c| c.split)).unwrap_or(checkpoint.split);
    if !(split > 0.0 && split < 1.0) {
        return Err(CliError::config(format!("split must lie in (0, 1), got {split}")));
    }
    Ok((DataSource { path, format }, split))
}

pub fn cmd_evaluate(args: &EvalArgs) -> CliResult<EvalReport> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let (source, split) = resolve(&checkpoint, &args.input, args.format, args.split, &args.config)?;
    let model = checkpoint.to_model()?;
    let series = load_series(&source.path, source.format)?;
    let opts = EvalOptions {
        gap_policy: checkpoint.gap_policy,
        ..EvalOptions::for_model(&model, split)
    };
    let report = evaluate(&model, &series, &opts)?;
    write_outputs(
        &args.out,
        &[(EVAL_ROWS_FILE, &report.rows_csv()), (EVAL_SUMMARY_FILE, &report.summary_csv())],
    )?;
    Ok(report)
}

/// `model rmse=<x> mse=<y>`, one line per predictor.
pub fn summary_lines(report: &EvalReport) -> Vec<String> {
    report
        .scores
        .iter()
        .map(|s| format!("{} rmse={} mse={}", s.predictor, s.rmse, s.mse))
        .collect()
}

pub fn cmd_forecast(
    checkpoint: &Path,
    input: &Path,
    format: SeriesFormat,
    out: &Path,
    with_svg: bool,
) -> CliResult<Vec<ForecastRow>> {
    let model = Checkpoint::load(checkpoint)?.to_model()?;
    let series = load_series(input, format)?;
    let rows = walk_forward(&model, &series, model.window_size(), model.scale.scale)?;
    let csv = forecast_csv(&rows);
    let chart;
    let mut files = vec![(FORECAST_FILE, csv.as_str())];
    if with_svg {
        chart = svg::forecast_overlay(&rows);
        files.push(("forecast.svg", &chart));
    }
    write_outputs(out, &files)?;
    Ok(rows)
}

/// `layer,cases,max_rel_err,status`
pub fn gradcheck_report(rows: &[GradcheckRow]) -> String {
    let mut out = String::from("layer,cases,max_rel_err,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:e},{}\n",
            r.layer.name(),
            r.cases,
            r.max_rel_err,
            if r.passed() { "pass" } else { "FAIL" }
        ));
    }
    out
}

/// Writes the report to `out`, then fails if any layer is out of tolerance.
pub fn cmd_gradcheck(options: &GradcheckOptions, out: &mut dyn std::io::Write) -> CliResult<Vec<GradcheckRow>> {
    let rows = run_gradcheck(options)?;
    let _ = out.write_all(gradcheck_report(&rows).as_bytes());
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.layer.name()).collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}
