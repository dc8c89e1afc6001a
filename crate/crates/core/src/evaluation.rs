//! Error metrics, naive baselines and teacher-forced walk-forward scoring.

use std::fmt::Write as _;

use crate::dataset::{make_windows_with, split_index, GapPolicy, MonthlySeries, MONTH_ABBREVIATIONS};
use crate::error::{PluviaError, Result};
use crate::layers::CnnLstmModel;
use crate::tensor::Tensor;

/// Mean of squared residuals.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(PluviaError::Metric(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(PluviaError::Metric("no pairs to score".into()));
    }
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(sum / actual.len() as f64)
}

pub fn rmse(mse_value: f64) -> Result<f64> {
    if !(mse_value >= 0.0) {
        return Err(PluviaError::Metric(format!("mse must be non-negative, got {mse_value}")));
    }
    Ok(mse_value.sqrt())
}

/// What a forecaster sees for one target month.
#[derive(Debug, Clone, Copy)]
pub struct ForecastContext<'a> {
    /// Preceding observations divided by the scale, `w x 1`.
    pub window: &'a Tensor,
    /// The same observations in millimetres.
    pub history: &'a [f64],
    pub year: i32,
    pub month: u8,
}

pub trait Forecaster {
    fn forecast(&self, ctx: &ForecastContext<'_>) -> Result<f64>;
}

impl Forecaster for CnnLstmModel {
    fn forecast(&self, ctx: &ForecastContext<'_>) -> Result<f64> {
        self.predict_next(ctx.window)
    }
}

impl<F: Forecaster + ?Sized> Forecaster for &F {
    fn forecast(&self, ctx: &ForecastContext<'_>) -> Result<f64> {
        (**self).forecast(ctx)
    }
}

/// Calendar-month means of the training period.
#[derive(Debug, Clone, PartialEq)]
pub struct Climatology {
    pub means: [Option<f64>; 12],
}

pub fn climatology_baseline(train: &MonthlySeries) -> Climatology {
    let mut sums = [0.0; 12];
    let mut counts = [0usize; 12];
    for p in &train.points {
        sums[p.month as usize - 1] += p.precip_mm;
        counts[p.month as usize - 1] += 1;
    }
    let mut means = [None; 12];
    for m in 0..12 {
        if counts[m] > 0 {
            means[m] = Some(sums[m] / counts[m] as f64);
        }
    }
    Climatology { means }
}

impl Climatology {
    pub fn predict(&self, month: u8) -> Result<f64> {
        self.means[month as usize - 1].ok_or_else(|| {
            PluviaError::Baseline(format!(
                "no training data for {}",
                MONTH_ABBREVIATIONS[month as usize - 1]
            ))
        })
    }
}

impl Forecaster for Climatology {
    fn forecast(&self, ctx: &ForecastContext<'_>) -> Result<f64> {
        self.predict(ctx.month)
    }
}

/// Previous month's observation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Persistence;

pub fn persistence_baseline() -> Persistence {
    Persistence
}

impl Persistence {
    /// Forecast for every position; the first has no predecessor.
    pub fn forecast_series(&self, values: &[f64]) -> Vec<Option<f64>> {
        std::iter::once(None)
            .chain(values.iter().take(values.len().saturating_sub(1)).map(|&v| Some(v)))
            .take(values.len())
            .collect()
    }
}

impl Forecaster for Persistence {
    fn forecast(&self, ctx: &ForecastContext<'_>) -> Result<f64> {
        ctx.history
            .last()
            .copied()
            .ok_or_else(|| PluviaError::Baseline("persistence needs a previous month".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub train_fraction: f64,
    pub window_size: usize,
    pub scale: f64,
    pub gap_policy: GapPolicy,
}

impl EvalOptions {
    pub fn for_model(model: &CnnLstmModel, train_fraction: f64) -> Self {
        EvalOptions {
            train_fraction,
            window_size: model.window_size(),
            scale: model.scale.scale,
            gap_policy: GapPolicy::Contiguous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub year: i32,
    pub month: u8,
    pub actual: f64,
    pub model: f64,
    pub climatology: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorScore {
    pub predictor: String,
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub rows: Vec<EvalRow>,
    /// `model`, `climatology`, `persistence`, in that order.
    pub scores: Vec<PredictorScore>,
    /// Test targets without a previous month; excluded from every row.
    pub persistence_skipped: usize,
}

impl EvalReport {
    pub fn score(&self, predictor: &str) -> Option<&PredictorScore> {
        self.scores.iter().find(|s| s.predictor == predictor)
    }

    /// `year,month,actual_mm,model_mm,climatology_mm,persistence_mm`
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("year,month,actual_mm,model_mm,climatology_mm,persistence_mm\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.year, r.month, r.actual, r.model, r.climatology, r.persistence
            )
            .expect("write to string");
        }
        out
    }

    /// `predictor,n,mse,rmse`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("predictor,n,mse,rmse\n");
        for s in &self.scores {
            writeln!(out, "{},{},{},{}", s.predictor, s.n, s.mse, s.rmse).expect("write to string");
        }
        out
    }
}

fn score(name: &str, actual: &[f64], predicted: &[f64]) -> Result<PredictorScore> {
    let m = mse(actual, predicted)?;
    Ok(PredictorScore {
        predictor: name.to_string(),
        n: actual.len(),
        mse: m,
        rmse: rmse(m)?,
    })
}

/// Score `model` on every test target with a full window of context.
///
/// Targets at or after `floor(train_fraction * n)` form the test set. The
/// context for each forecast is always the observed series, never earlier
/// predictions. Climatology is fitted on the training points only.
pub fn evaluate<F: Forecaster>(model: &F, series: &MonthlySeries, opts: &EvalOptions) -> Result<EvalReport> {
    let boundary = split_index(series.len(), opts.train_fraction)?;
    let train = MonthlySeries::from_points(series.points[..boundary].to_vec(), series.provenance.clone());
    let clim = climatology_baseline(&train);
    let values = series.values();
    let windows = make_windows_with(series, opts.window_size, opts.scale, opts.gap_policy)?;

    let mut rows = Vec::new();
    let mut skipped = 0;
    for w in windows.windows.iter().filter(|w| w.target_index >= boundary) {
        let i = w.target_index;
        let p = series.points[i];
        let history = &values[i - opts.window_size..i];
        if history.is_empty() {
            skipped += 1;
            continue;
        }
        let ctx = ForecastContext {
            window: &w.input,
            history,
            year: p.year,
            month: p.month,
        };
        rows.push(EvalRow {
            year: p.year,
            month: p.month,
            actual: p.precip_mm,
            model: model.forecast(&ctx)?,
            climatology: clim.forecast(&ctx)?,
            persistence: Persistence.forecast(&ctx)?,
        });
    }
    if rows.is_empty() {
        return Err(PluviaError::Evaluation(format!(
            "no test target has {} months of preceding context (series length {}, test starts at {})",
            opts.window_size,
            series.len(),
            boundary
        )));
    }

    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let column = |f: fn(&EvalRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let scores = vec![
        score("model", &actual, &column(|r| r.model))?,
        score("climatology", &actual, &column(|r| r.climatology))?,
        score("persistence", &actual, &column(|r| r.persistence))?,
    ];
    Ok(EvalReport {
        n: rows.len(),
        rows,
        scores,
        persistence_skipped: skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub year: i32,
    pub month: u8,
    pub actual: f64,
    pub predicted: f64,
}

/// One-step-ahead forecasts for every month after the first full window.
pub fn walk_forward<F: Forecaster>(
    model: &F,
    series: &MonthlySeries,
    window_size: usize,
    scale: f64,
) -> Result<Vec<ForecastRow>> {
    if series.len() <= window_size {
        return Err(PluviaError::Evaluation(format!(
            "series of {} months is too short for window {window_size}",
            series.len()
        )));
    }
    let values = series.values();
    let windows = make_windows_with(series, window_size, scale, GapPolicy::Contiguous)?;
    windows
        .windows
        .iter()
        .map(|w| {
            let i = w.target_index;
            let p = series.points[i];
            let ctx = ForecastContext {
                window: &w.input,
                history: &values[i - window_size..i],
                year: p.year,
                month: p.month,
            };
            Ok(ForecastRow {
                year: p.year,
                month: p.month,
                actual: p.precip_mm,
                predicted: model.forecast(&ctx)?,
            })
        })
        .collect()
}

/// `year,month,actual_mm,predicted_mm`
pub fn forecast_csv(rows: &[ForecastRow]) -> String {
    let mut out = String::from("year,month,actual_mm,predicted_mm\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.year, r.month, r.actual, r.predicted).expect("write to string");
    }
    out
}
